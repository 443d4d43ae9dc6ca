"""Exception hierarchy shared by all stages."""


class DataError(ValueError):
    """Input data is malformed or violates a precondition."""


class CorpusFormatError(DataError):
    def __init__(self, message, line=None, source=None):
        self.detail = message
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class RISFormatError(DataError):
    pass


class DiversityUndefined(DataError):
    pass


class PairLimitExceeded(DataError):
    """The similarity computation would emit more pairs than allowed."""


class InvariantViolation(RuntimeError):
    """An internal numerical invariant failed; indicates a bug, not bad data."""
