"""Planted-structure citation corpora and RIS fixtures.

Journals are split into fields; a journal sends most of its links to
journals of its own field, chosen with probability proportional to a
heavy-tailed popularity, and the rest anywhere.  Every journal cites
itself.  The number of distinct links and the share of single-citation
links are hit exactly, so a corpus can match the size profile of a real
extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from journalmap.corpus import CitationMatrix, JournalRecord, registry_from_matrix
from journalmap.errors import DataError


@dataclass(frozen=True)
class SyntheticSpec:
    n_journals: int = 2000
    n_edges: int = 100_000
    n_fields: int = 20
    single_fraction: float = 0.419
    in_field: float = 0.8
    seed: int = 0


def field_of(n_journals: int, n_fields: int, seed: int) -> np.ndarray:
    """Field label per journal: equal-size fields, shuffled over ids."""
    rng = np.random.default_rng([seed, 1])
    return rng.permutation((np.arange(n_journals) * n_fields) // n_journals)


def _sample_pairs(rng, n, fields, out_act, pop, in_field, m):
    rows = rng.choice(n, size=m, p=out_act / out_act.sum())
    order = np.argsort(fields, kind="stable")
    pop_sorted = pop[order]
    cum = np.cumsum(pop_sorted)
    f_sorted = fields[order]
    n_fields = int(fields.max()) + 1
    lo = np.searchsorted(f_sorted, np.arange(n_fields), side="left")
    hi = np.searchsorted(f_sorted, np.arange(n_fields), side="right")
    base = np.where(lo > 0, cum[np.maximum(lo - 1, 0)], 0.0)
    span = cum[hi - 1] - base

    local = rng.random(m) < in_field
    u = rng.random(m)
    f = fields[rows]
    target = np.where(local, base[f] + u * span[f], u * cum[-1])
    pos = np.minimum(np.searchsorted(cum, target, side="right"), n - 1)
    return rows, order[pos]


def generate_corpus(spec: SyntheticSpec) -> tuple[list[JournalRecord], CitationMatrix]:
    n, e = spec.n_journals, spec.n_edges
    if n < 2:
        raise DataError("need at least 2 journals")
    target_off = e - n
    if target_off < 0 or target_off > n * (n - 1):
        raise DataError(f"n_edges must lie in [{n}, {n * n}] (self-citations occupy the diagonal)")
    if not 0 <= spec.single_fraction < 1:
        raise DataError("single_fraction must lie in [0, 1)")
    rng = np.random.default_rng(spec.seed)
    fields = field_of(n, spec.n_fields, spec.seed)
    out_act = rng.lognormal(0.0, 1.0, n)
    pop = rng.lognormal(0.0, 1.2, n)

    keys = np.zeros(0, dtype=np.int64)
    rounds = 0
    while keys.size < target_off:
        need = target_off - keys.size
        if rounds < 40:
            r, c = _sample_pairs(rng, n, fields, out_act, pop, spec.in_field, int(need * 1.25) + 1000)
        else:
            # saturated popular rows: top up uniformly
            r, c = rng.integers(0, n, int(need * 2) + 1000), rng.integers(0, n, int(need * 2) + 1000)
        off = r != c
        keys = np.union1d(keys, r[off].astype(np.int64) * n + c[off])
        rounds += 1
    if keys.size > target_off:
        keys = np.sort(rng.choice(keys, size=target_off, replace=False))
    rows, cols = keys // n, keys % n

    same = fields[rows] == fields[cols]
    heavy = 2 + np.floor(rng.lognormal(1.6, 1.2, target_off)).astype(np.int64)
    counts = np.where(same, heavy * 3, heavy)
    n_single = int(round(spec.single_fraction * e))
    if n_single > target_off:
        raise DataError("single_fraction too high for the off-diagonal link count")
    # single citations fall preferentially on cross-field links
    weight = np.where(same, 1.0, 4.0)
    if n_single:
        singles = rng.choice(target_off, size=n_single, replace=False, p=weight / weight.sum())
        counts[singles] = 1

    diag = np.arange(n, dtype=np.int64)
    diag_counts = 2 + np.floor(10 * out_act * rng.lognormal(0.0, 0.5, n)).astype(np.int64)
    matrix = CitationMatrix.from_triples(
        n,
        np.concatenate([rows, diag]),
        np.concatenate([cols, diag]),
        np.concatenate([counts, diag_counts]),
    )
    width = len(str(n - 1))
    titles = [f"Journal of Field {int(fields[i])} Studies {i:0{width}d}" for i in range(n)]
    return registry_from_matrix(matrix, titles), matrix


def overlay_titles(
    pool: list[str],
    n_records: int,
    n_titles: int,
    seed: int = 0,
    unmatched: int = 0,
) -> list[str]:
    """Source titles of a synthetic download.

    ``n_titles`` distinct titles are drawn from ``pool``; each appears at
    least once and the remaining records follow a Zipf-like share.  Then
    ``unmatched`` records with titles absent from any map are appended.
    Output order is shuffled.
    """
    if n_titles > len(pool) or n_titles > n_records - unmatched or n_titles < 1:
        raise DataError("inconsistent overlay fixture sizes")
    rng = np.random.default_rng(seed)
    chosen = [pool[k] for k in rng.choice(len(pool), size=n_titles, replace=False)]
    extra = n_records - unmatched - n_titles
    share = 1.0 / np.arange(1, n_titles + 1)
    counts = np.ones(n_titles, dtype=np.int64) + rng.multinomial(extra, share / share.sum())
    titles = [t for t, c in zip(chosen, counts) for _ in range(int(c))]
    titles += [f"Unindexed Proceedings {k}" for k in range(unmatched)]
    return [titles[k] for k in rng.permutation(len(titles))]
