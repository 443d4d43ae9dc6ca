"""Rao-Stirling diversity of an overlay against base-map distances.

``delta = sum_i sum_j p_i p_j d_ij`` over ordered pairs of matched journals,
``p`` the share of matched documents and ``d`` the Euclidean map distance
divided by the frame diagonal.  Because ``d_ii = 0`` this is twice the sum
over unordered pairs; every report records that convention.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from journalmap.errors import CorpusFormatError, DataError, DiversityUndefined
from journalmap.layout import Layout, MapFrame, map_frame
from journalmap.overlay import BaseMap, OverlaySet

CONVENTION = "ordered_pairs"
DISPARITY = "map_euclidean"
_CHUNK = 2048


@dataclass(frozen=True)
class DiversityReport:
    delta: float
    n_documents: int
    n_journals: int
    match_rate: float
    diagonal_rule: str
    set_name: str = "set"
    basemap_id: str = ""
    n_matched_documents: int = 0
    convention: str = CONVENTION
    disparity: str = DISPARITY
    timestamp: str = ""
    pairs: tuple = field(default=(), repr=False)

    def rao_line(self) -> str:
        name = self.set_name.replace("\t", " ")
        ts = self.timestamp or dt.datetime.now(dt.timezone.utc).replace(microsecond=0).isoformat()
        return (
            f"{name}\t{self.n_documents}\t{self.n_journals}\t{self.match_rate:.6f}\t"
            f"{self.diagonal_rule}\t{self.delta:.6f}\t{ts}\t{self.basemap_id}"
        )


def _positions(where, ids):
    if isinstance(where, BaseMap):
        return np.array([where.position(int(j)) for j in ids], dtype=np.float64).reshape(-1, 2)
    if isinstance(where, Layout):
        index = {int(j): k for k, j in enumerate(where.ids)}
        try:
            return where.coords[[index[int(j)] for j in ids]].reshape(-1, 2)
        except KeyError as exc:
            raise DataError(f"journal {exc.args[0]} is not in the layout") from None
    raise TypeError("positions must come from a BaseMap or a Layout")


def pair_distance(where, i: int, j: int, frame: MapFrame) -> float:
    """Map distance between journals ``i`` and ``j`` as a fraction of the diagonal."""
    if not frame.diagonal > 0:
        raise DataError("degenerate map frame")
    (xi, yi), (xj, yj) = _positions(where, [i, j])
    return math.hypot(xi - xj, yi - yj) / frame.diagonal


def weighted_pair_sum(p: np.ndarray, coords: np.ndarray, diagonal: float) -> float:
    """``sum_ij p_i p_j ||x_i - x_j|| / diagonal`` by row blocks, in fixed order."""
    total = 0.0
    for start in range(0, p.size, _CHUNK):
        block = cdist(coords[start : start + _CHUNK], coords)
        total += float(p[start : start + _CHUNK] @ (block @ p))
    return total / diagonal


def rao_stirling(
    overlay: OverlaySet,
    where,
    frame: MapFrame | None = None,
    *,
    rule: str = "square",
    set_name: str = "set",
    detail: bool = False,
) -> DiversityReport:
    """Rao-Stirling diversity of ``overlay`` on the map ``where`` (BaseMap or Layout).

    ``frame`` defaults to the frame of the whole map under ``rule``.
    Unmatched documents carry no position and are left out of the shares.
    """
    if not overlay.counts:
        raise DiversityUndefined("diversity undefined: no document matched a base-map journal")
    if frame is None:
        frame = map_frame(where.coords, rule)
    if not frame.diagonal > 0:
        raise DataError("degenerate map frame")
    ids = np.array(sorted(overlay.counts), dtype=np.int64)
    n = np.array([overlay.counts[int(j)] for j in ids], dtype=np.float64)
    p = n / n.sum()
    coords = _positions(where, ids)
    delta = weighted_pair_sum(p, coords, frame.diagonal)
    pairs = ()
    if detail:
        d = cdist(coords, coords) / frame.diagonal
        iu = np.triu_indices(ids.size, 1)
        contrib = 2 * p[iu[0]] * p[iu[1]] * d[iu]
        pairs = tuple(zip(ids[iu[0]].tolist(), ids[iu[1]].tolist(), d[iu].tolist(), contrib.tolist()))
    basemap_id = where.fingerprint() if isinstance(where, BaseMap) else ""
    return DiversityReport(
        delta=float(delta),
        n_documents=overlay.n_documents_total,
        n_journals=int(ids.size),
        match_rate=overlay.match_rate,
        diagonal_rule=frame.rule,
        set_name=set_name,
        basemap_id=basemap_id,
        n_matched_documents=overlay.n_matched,
        pairs=pairs,
    )


def append_rao(report: DiversityReport, path) -> str:
    line = report.rao_line()
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        f.write(line + "\n")
    return line


def read_rao(path) -> list[DiversityReport]:
    reports = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            p = line.rstrip("\n").split("\t")
            if len(p) not in (7, 8):
                raise CorpusFormatError(f"expected 7 or 8 fields, got {len(p)}", lineno, str(path))
            try:
                reports.append(
                    DiversityReport(
                        set_name=p[0],
                        n_documents=int(p[1]),
                        n_journals=int(p[2]),
                        match_rate=float(p[3]),
                        diagonal_rule=p[4],
                        delta=float(p[5]),
                        timestamp=p[6],
                        basemap_id=p[7] if len(p) == 8 else "",
                    )
                )
            except ValueError:
                raise CorpusFormatError("malformed rao line", lineno, str(path)) from None
    return reports


@dataclass(frozen=True)
class ComparisonRow:
    set_name: str
    n_documents: int
    n_journals: int
    delta: float


def compare_sets(reports: list[DiversityReport]) -> list[ComparisonRow]:
    """Rows sorted by decreasing diversity; all reports must share map and rule."""
    if not reports:
        raise DataError("nothing to compare")
    rules = {r.diagonal_rule for r in reports}
    if len(rules) > 1:
        raise DataError(f"reports mix diagonal rules: {sorted(rules)}")
    maps = {r.basemap_id for r in reports}
    if len(maps) > 1:
        raise DataError(f"reports come from different base maps: {sorted(maps)}")
    rows = [ComparisonRow(r.set_name, r.n_documents, r.n_journals, r.delta) for r in reports]
    return sorted(rows, key=lambda r: -r.delta)


def format_comparison(rows: list[ComparisonRow], rule: str | None = None) -> str:
    width = max([len("set")] + [len(r.set_name) for r in rows])
    lines = [f"{'set':<{width}}  {'n documents':>11}  {'n journals':>10}  {'Rao-Stirling':>12}"]
    for r in rows:
        lines.append(f"{r.set_name:<{width}}  {r.n_documents:>11}  {r.n_journals:>10}  {r.delta:>12.6f}")
    if rule:
        lines.append(f"(diagonal rule: {rule}; sum over ordered pairs; disparity: {DISPARITY})")
    return "\n".join(lines)
