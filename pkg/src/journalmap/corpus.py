"""Journal registry and aggregated journal-journal citation matrix.

The citation matrix is stored as three parallel arrays (citing row, cited
column, count) sorted by ``(row, col)``.  Cell ``(i, j)`` counts citations
from articles in journal ``i`` to articles in journal ``j``; the diagonal holds
self-citations.
"""

from __future__ import annotations

import io
import re
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
import pandas as pd
import scipy.sparse as sp

from journalmap.errors import CorpusFormatError, DataError

JOURNAL_COLUMNS = ("title", "total_cited", "total_citing", "self_citations")
EDGE_COLUMNS = ("citing_id", "cited_id", "count")

_NON_WORD = re.compile(r"[\W_]+", re.UNICODE)


def normalize_title(title: str) -> str:
    """Canonical matching key for a journal title.

    Case-folds, turns every run of punctuation/whitespace into a single space
    and strips the ends.  Idempotent.

    >>> normalize_title("Literary & Linguistic   Computing")
    'literary linguistic computing'
    """
    folded = unicodedata.normalize("NFKC", title).casefold()
    return _NON_WORD.sub(" ", folded).strip()


@dataclass(frozen=True)
class JournalRecord:
    id: int
    title: str
    total_cited: int = 0
    total_citing: int = 0
    self_citations: int = 0
    normalized_title: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.normalized_title:
            object.__setattr__(self, "normalized_title", normalize_title(self.title))


@dataclass(frozen=True, eq=False)
class CitationMatrix:
    """Directed sparse matrix of aggregated citation counts.

    Use :meth:`from_triples` to build one; it sorts and validates.  The
    arrays are treated as immutable after construction.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray
    directed: bool = True

    @classmethod
    def from_triples(cls, n, rows, cols, counts, *, line_offset=None) -> "CitationMatrix":
        """Build a validated matrix.

        ``line_offset`` maps entry positions back to input line numbers for
        error messages (entry ``k`` came from line ``k + line_offset``).
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if not (rows.shape == cols.shape == counts.shape) or rows.ndim != 1:
            raise DataError("rows, cols and counts must be 1-D arrays of equal length")

        def _line(k):
            return None if line_offset is None else int(k) + line_offset

        for name, arr in (("citing", rows), ("cited", cols)):
            bad = np.flatnonzero((arr < 0) | (arr >= n))
            if bad.size:
                k = bad[0]
                raise CorpusFormatError(f"unknown journal id {int(arr[k])} ({name} column, n={n})", _line(k))
        bad = np.flatnonzero(counts < 1)
        if bad.size:
            k = bad[0]
            raise CorpusFormatError(f"count must be >= 1, got {int(counts[k])}", _line(k))

        keys = rows * n + cols
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        dup = np.flatnonzero(sorted_keys[1:] == sorted_keys[:-1])
        if dup.size:
            # report the later of the two offending input lines
            first, second = sorted(order[dup[0] : dup[0] + 2])
            i, j = divmod(int(sorted_keys[dup[0]]), n)
            raise CorpusFormatError(
                f"duplicate edge ({i}, {j}); first seen at entry {int(first)}", _line(second)
            )
        idx_dtype = np.int32 if n < 2**31 else np.int64
        return cls(
            n=int(n),
            rows=rows[order].astype(idx_dtype),
            cols=cols[order].astype(idx_dtype),
            counts=counts[order],
        )

    @property
    def nnz(self) -> int:
        return int(self.counts.size)

    def to_csr(self) -> sp.csr_matrix:
        m = sp.csr_matrix((self.counts, (self.rows, self.cols)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.int64)
        out[self.rows, self.cols] = self.counts
        return out

    def transpose(self) -> "CitationMatrix":
        return CitationMatrix.from_triples(self.n, self.cols, self.rows, self.counts)

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.int64)
        mask = self.rows == self.cols
        out[self.rows[mask]] = self.counts[mask]
        return out

    def total_citing(self) -> np.ndarray:
        """Row sums: references given by each journal."""
        return np.bincount(self.rows, weights=self.counts, minlength=self.n).astype(np.int64)

    def total_cited(self) -> np.ndarray:
        """Column sums: citations received by each journal."""
        return np.bincount(self.cols, weights=self.counts, minlength=self.n).astype(np.int64)

    def submatrix(self, ids: Sequence[int]) -> "CitationMatrix":
        """Induced submatrix on ``ids``, re-indexed to ``0..len(ids)-1`` in the given order."""
        ids = np.asarray(ids, dtype=np.int64)
        local = np.full(self.n, -1, dtype=np.int64)
        local[ids] = np.arange(ids.size)
        r, c = local[self.rows], local[self.cols]
        keep = (r >= 0) & (c >= 0)
        return CitationMatrix.from_triples(ids.size, r[keep], c[keep], self.counts[keep])

    def entries(self) -> Iterable[tuple[int, int, int]]:
        return zip(self.rows.tolist(), self.cols.tolist(), self.counts.tolist())


@dataclass(frozen=True)
class CorpusStats:
    n_journals: int
    n_links: int
    n_single_links: int
    fill_fraction: float
    total_citations: int
    total_citations_offdiag: int


def fill_fraction(n_journals: int, n_links: int) -> float:
    """Fraction of the ``n x n`` cells that carry a value."""
    if n_journals == 0:
        return 0.0
    return n_links / (n_journals * n_journals)


def corpus_stats(matrix: CitationMatrix) -> CorpusStats:
    counts = matrix.counts
    offdiag = matrix.rows != matrix.cols
    return CorpusStats(
        n_journals=matrix.n,
        n_links=matrix.nnz,
        n_single_links=int(np.count_nonzero(counts == 1)),
        fill_fraction=fill_fraction(matrix.n, matrix.nnz),
        total_citations=int(counts.sum()),
        total_citations_offdiag=int(counts[offdiag].sum()),
    )


def filter_min_weight(matrix: CitationMatrix, min_count: int) -> CitationMatrix:
    """Keep exactly the entries with ``count >= min_count``; ``n`` is unchanged."""
    if min_count < 1:
        raise DataError(f"min_count must be >= 1, got {min_count}")
    if min_count == 1:
        return matrix
    keep = matrix.counts >= min_count
    # already sorted and validated, bypass from_triples
    return CitationMatrix(matrix.n, matrix.rows[keep], matrix.cols[keep], matrix.counts[keep])


# -- parsing -----------------------------------------------------------------


def _split(line: str) -> list[str]:
    return line.rstrip("\r\n").split("\t")


def _parse_int(text, what, lineno, source):
    try:
        value = int(text)
    except ValueError:
        raise CorpusFormatError(f"{what} is not an integer: {text!r}", lineno, source) from None
    return value


def parse_journals(stream: IO[str], source="journals.tsv") -> list[JournalRecord]:
    header = stream.readline()
    if not header:
        raise CorpusFormatError("empty journal registry (header row required)", 1, source)
    cols = [c.strip().lower() for c in _split(header)]
    if tuple(cols) != JOURNAL_COLUMNS:
        raise CorpusFormatError(
            f"expected header {'|'.join(JOURNAL_COLUMNS)}, got {'|'.join(cols)}", 1, source
        )
    records = []
    for lineno, line in enumerate(stream, start=2):
        if not line.strip():
            continue
        parts = _split(line)
        if len(parts) != 4:
            raise CorpusFormatError(f"expected 4 tab-separated fields, got {len(parts)}", lineno, source)
        title = parts[0].strip()
        if not title:
            raise CorpusFormatError("empty journal title", lineno, source)
        cited, citing, self_c = (_parse_int(p, c, lineno, source) for p, c in zip(parts[1:], cols[1:]))
        if min(cited, citing, self_c) < 0:
            raise CorpusFormatError("negative citation total", lineno, source)
        if self_c > min(cited, citing):
            raise CorpusFormatError(
                f"self_citations ({self_c}) exceeds min(total_cited, total_citing)", lineno, source
            )
        records.append(JournalRecord(len(records), title, cited, citing, self_c))
    return records


def _edges_fast(stream, has_header):
    """Integer-only fast path; returns None to request the line-by-line parser."""
    try:
        df = pd.read_csv(
            stream,
            sep="\t",
            header=None,
            skiprows=1 if has_header else 0,
            dtype=np.int64,
            engine="c",
            names=list(EDGE_COLUMNS),
            skip_blank_lines=False,
        )
    except (ValueError, pd.errors.ParserError, OverflowError):
        return None
    if df.isna().to_numpy().any():
        return None
    return df["citing_id"].to_numpy(), df["cited_id"].to_numpy(), df["count"].to_numpy()


def _edges_slow(lines, title_index, first_lineno, source):
    rows, cols, counts = [], [], []
    for lineno, line in enumerate(lines, start=first_lineno):
        parts = _split(line)
        if len(parts) != 3:
            raise CorpusFormatError(f"expected 3 tab-separated fields, got {len(parts)}", lineno, source)
        ends = []
        for text, what in zip(parts[:2], EDGE_COLUMNS[:2]):
            text = text.strip()
            if text.lstrip("-").isdigit():
                ends.append(int(text))
            else:
                key = normalize_title(text)
                if key not in title_index:
                    raise CorpusFormatError(f"unknown journal title {text!r} ({what})", lineno, source)
                ends.append(title_index[key])
        rows.append(ends[0])
        cols.append(ends[1])
        counts.append(_parse_int(parts[2].strip(), "count", lineno, source))
    return rows, cols, counts


def parse_edges(stream: IO[str], registry: Sequence[JournalRecord], source="edges.tsv") -> CitationMatrix:
    """Parse ``citing<TAB>cited<TAB>count`` lines against ``registry``.

    Endpoints may be registry ids or journal titles.  An optional header row
    is recognised by its third field reading ``count``.
    """
    n = len(registry)
    seekable = hasattr(stream, "seekable") and stream.seekable()
    if seekable:
        start = stream.tell()
        first = stream.readline().rstrip("\r\n")
        stream.seek(start)
    else:
        text = stream.read()
        first = text.split("\n", 1)[0]
    first_parts = _split(first)
    has_header = len(first_parts) == 3 and first_parts[-1].strip().lower() == "count"
    lines_start = 2 if has_header else 1

    fast = None
    if first.strip():
        fast = _edges_fast(stream if seekable else io.StringIO(text), has_header)
    if fast is None:
        if seekable:
            stream.seek(start)
            text = stream.read()
        lines = text.splitlines()
        if has_header:
            lines = lines[1:]
        title_index = {}
        for rec in registry:
            title_index.setdefault(rec.normalized_title, rec.id)
        # tolerate a trailing blank line but nothing else blank
        while lines and not lines[-1].strip():
            lines.pop()
        fast = _edges_slow(lines, title_index, lines_start, source)
    rows, cols, counts = fast
    try:
        return CitationMatrix.from_triples(n, rows, cols, counts, line_offset=lines_start)
    except CorpusFormatError as exc:
        raise CorpusFormatError(exc.detail, exc.line, source) from None


def parse_corpus(journal_stream: IO[str], edge_stream: IO[str]) -> tuple[list[JournalRecord], CitationMatrix]:
    registry = parse_journals(journal_stream)
    return registry, parse_edges(edge_stream, registry)


def load_corpus(journals_path, edges_path) -> tuple[list[JournalRecord], CitationMatrix]:
    with open(journals_path, encoding="utf-8", newline="") as jf:
        registry = parse_journals(jf, source=str(journals_path))
    with open(edges_path, encoding="utf-8", newline="") as ef:
        matrix = parse_edges(ef, registry, source=str(edges_path))
    return registry, matrix


def write_journals(registry: Sequence[JournalRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(JOURNAL_COLUMNS) + "\n")
        for rec in registry:
            f.write(f"{rec.title}\t{rec.total_cited}\t{rec.total_citing}\t{rec.self_citations}\n")


def write_edges(matrix: CitationMatrix, path_or_stream) -> None:
    """Write ``edges.tsv`` (with header) in id form."""
    df = pd.DataFrame({"citing_id": matrix.rows, "cited_id": matrix.cols, "count": matrix.counts})
    df.to_csv(path_or_stream, sep="\t", index=False, lineterminator="\n")


def registry_from_matrix(matrix: CitationMatrix, titles: Sequence[str]) -> list[JournalRecord]:
    """Registry whose totals are taken from the matrix margins."""
    cited, citing, diag = matrix.total_cited(), matrix.total_citing(), matrix.diagonal()
    return [
        JournalRecord(i, t, int(cited[i]), int(citing[i]), int(diag[i])) for i, t in enumerate(titles)
    ]
