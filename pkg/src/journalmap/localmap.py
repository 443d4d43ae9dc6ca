"""Ego networks around a seed journal and their local maps."""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from journalmap.cluster import ClusterConfig, Partition, louvain
from journalmap.corpus import CitationMatrix, JournalRecord
from journalmap.errors import DataError
from journalmap.layout import Layout, LayoutConfig, kamada_kawai
from journalmap.overlay import MapRow, node_size, write_map_rows
from journalmap.simmat import Direction, SimilarityMatrix

DEFAULT_THRESHOLD = 0.005


@dataclass(frozen=True, eq=False)
class EgoNetwork:
    seed: int
    direction: Direction
    members: np.ndarray  # sorted registry ids, seed included
    submatrix: CitationMatrix  # indexed like ``members``
    threshold: float
    seed_total: int
    contributions: dict

    def __len__(self):
        return int(self.members.size)


def _exceeds(contrib: int, total: int, threshold: Fraction) -> bool:
    return contrib * threshold.denominator > threshold.numerator * total


def ego_network(
    matrix: CitationMatrix, seed: int, direction=Direction.CITED, threshold: float = DEFAULT_THRESHOLD
) -> EgoNetwork:
    """Journals contributing strictly more than ``threshold`` of the seed's total.

    ``cited``: journals citing the seed, measured against the seed's total
    citations received.  ``citing``: journals the seed cites, against its
    total references.  Totals come from the full matrix, self-citations
    included.  ``threshold`` is read as the decimal it prints as, so 0.005
    means exactly one two-hundredth.
    """
    direction = Direction(direction)
    if not 0 <= seed < matrix.n:
        raise DataError(f"unknown seed journal id {seed}")
    if threshold < 0:
        raise DataError("threshold must be >= 0")
    if direction is Direction.CITED:
        mask = matrix.cols == seed
        partners, counts = matrix.rows[mask], matrix.counts[mask]
    else:
        mask = matrix.rows == seed
        partners, counts = matrix.cols[mask], matrix.counts[mask]
    total = int(counts.sum())
    if total == 0:
        raise DataError(f"seed journal {seed} has no {direction.value} citations")
    frac = Fraction(repr(float(threshold)))
    contributions = {}
    for j, c in zip(partners.tolist(), counts.tolist()):
        if j == seed or _exceeds(c, total, frac):
            contributions[j] = c
    contributions.setdefault(seed, 0)
    members = np.array(sorted(contributions), dtype=np.int64)
    return EgoNetwork(
        seed=seed,
        direction=direction,
        members=members,
        submatrix=matrix.submatrix(members),
        threshold=threshold,
        seed_total=total,
        contributions=contributions,
    )


def symmetrized_network(ego: EgoNetwork) -> SimilarityMatrix:
    """Undirected weights ``w_ij + w_ji`` among members, diagonal dropped."""
    sub = ego.submatrix
    off = sub.rows != sub.cols
    lo = np.minimum(sub.rows[off], sub.cols[off]).astype(np.int64)
    hi = np.maximum(sub.rows[off], sub.cols[off]).astype(np.int64)
    n = len(ego)
    keys = lo * n + hi
    uniq, inv = np.unique(keys, return_inverse=True)
    weights = np.bincount(inv, weights=sub.counts[off].astype(np.float64))
    return SimilarityMatrix.from_entries(n, uniq // n, uniq % n, weights, kind="citation", ids=ego.members)


def local_map(
    ego: EgoNetwork,
    cluster_config: ClusterConfig = ClusterConfig(),
    layout_config: LayoutConfig = LayoutConfig(method="kamada_kawai", tolerance=1e-9),
) -> tuple[Partition, Layout]:
    """Louvain communities and a Kamada-Kawai layout on raw symmetrised citations."""
    if len(ego) < 2:
        raise DataError("ego network holds only the seed journal; nothing to map")
    sim = symmetrized_network(ego)
    partition = louvain(sim, replace(cluster_config, objective="modularity"))
    lay = kamada_kawai(sim, replace(layout_config, method="kamada_kawai"))
    return partition, lay


def local_map_rows(
    ego: EgoNetwork, partition: Partition, lay: Layout, registry: list[JournalRecord]
) -> list[MapRow]:
    """Map-file rows; cluster is the 1-based local community, weight sizes the contribution."""
    rows = []
    for k, jid in enumerate(ego.members.tolist()):
        contrib = ego.contributions[jid] if jid != ego.seed else int(ego.submatrix.diagonal()[k])
        x, y = lay.coords[k]
        title = registry[jid].title if registry else str(jid)
        rows.append(MapRow(jid, title, float(x), float(y), int(partition.assignment[k]) + 1, node_size(contrib)))
    return rows


def write_local_map(ego, partition, lay, registry, path) -> list[MapRow]:
    rows = local_map_rows(ego, partition, lay, registry)
    write_map_rows(rows, path)
    return rows
