"""Symmetric similarity matrices derived from a citation matrix.

Inner products are accumulated row by row through an inverted index over
shared columns (Gustavson-style), so the work is bounded by the sum of the
squared column occupancies rather than ``n**2``.  The cosine is then the
quotient of the co-occurrence value and the two precomputed vector norms.
Only the strict upper triangle is stored.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np
import scipy.sparse as sp

from journalmap.corpus import CitationMatrix
from journalmap.errors import CorpusFormatError, DataError, PairLimitExceeded

DEFAULT_MAX_PAIRS = 400_000_000


class Direction(str, enum.Enum):
    CITED = "cited"
    CITING = "citing"


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Upper-triangular sparse similarity.

    ``upper`` is an ``n x n`` CSR matrix holding entries with ``i < j`` only,
    with sorted column indices.  ``ids`` maps local node index to registry
    journal id (identity unless this matrix is a subgraph).
    """

    n: int
    upper: sp.csr_matrix
    kind: str
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.ids is None:
            object.__setattr__(self, "ids", np.arange(self.n, dtype=np.int64))

    @classmethod
    def from_entries(cls, n, i, j, values, kind="cosine", ids=None) -> "SimilarityMatrix":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if np.any(i == j):
            raise DataError("similarity matrices carry no diagonal entries")
        if np.any(values == 0):
            raise DataError("explicit zero similarity entry")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            raise DataError("duplicate similarity pair")
        upper = sp.csr_matrix((values, (lo, hi)), shape=(n, n))
        upper.sort_indices()
        return cls(int(n), upper, kind, ids)

    @property
    def nnz(self) -> int:
        return int(self.upper.nnz)

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(i, j, value)`` arrays, ``i < j``, in row-major order."""
        indptr = self.upper.indptr
        i = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(indptr))
        return i, self.upper.indices.astype(np.int64), self.upper.data

    def entries(self):
        i, j, v = self.coo()
        return zip(i.tolist(), j.tolist(), v.tolist())

    def get(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        lo, hi = min(i, j), max(i, j)
        start, stop = self.upper.indptr[lo], self.upper.indptr[lo + 1]
        pos = np.searchsorted(self.upper.indices[start:stop], hi)
        if pos < stop - start and self.upper.indices[start + pos] == hi:
            return float(self.upper.data[start + pos])
        return 0.0

    def to_symmetric_csr(self) -> sp.csr_matrix:
        full = (self.upper + self.upper.T).tocsr()
        full.sort_indices()
        return full

    def to_dense(self) -> np.ndarray:
        return self.to_symmetric_csr().toarray()

    def strength(self) -> np.ndarray:
        u = self.upper
        return np.asarray(u.sum(axis=1)).ravel() + np.asarray(u.sum(axis=0)).ravel()

    def subgraph(self, local: np.ndarray) -> "SimilarityMatrix":
        """Induced subgraph on local node indices ``local`` (kept in sorted order)."""
        local = np.unique(np.asarray(local, dtype=np.int64))
        if local.size == self.n:
            return self
        u = self.upper
        new_id = np.full(self.n, -1, dtype=np.int64)
        new_id[local] = np.arange(local.size)
        ptr, idx, val = _induced(local, new_id, u.indptr.astype(np.int64), u.indices, u.data)
        sub = sp.csr_matrix((val, idx, ptr), shape=(local.size, local.size))
        sub.has_sorted_indices = True
        return SimilarityMatrix(local.size, sub, self.kind, self.ids[local])

    def adjacency(self) -> "Adjacency":
        return adjacency(self)


# -- kernels -------------------------------------------------------------------


class Adjacency(NamedTuple):
    """Both-direction neighbour lists without duplicating the weights.

    Row ``i`` of the upper CSR lists neighbours ``j > i``; the lower index
    lists neighbours ``j < i`` together with the position of their weight in
    ``udata``.  A plain symmetric CSR fits the same shape with an empty lower
    index.
    """

    uptr: np.ndarray
    uidx: np.ndarray
    udata: np.ndarray
    lptr: np.ndarray
    lidx: np.ndarray
    lpos: np.ndarray


@numba.njit(cache=True)
def _lower_index(n, indptr, indices, pos_dtype_probe):
    lptr = np.zeros(n + 1, dtype=np.int64)
    for e in range(indptr[n]):
        lptr[indices[e] + 1] += 1
    for i in range(n):
        lptr[i + 1] += lptr[i]
    lidx = np.empty(indptr[n], dtype=indices.dtype)
    lpos = np.empty(indptr[n], dtype=pos_dtype_probe.dtype)
    fill = lptr[:-1].copy()
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            lidx[fill[j]] = i
            lpos[fill[j]] = e
            fill[j] += 1
    return lptr, lidx, lpos


def adjacency(sim: "SimilarityMatrix") -> Adjacency:
    u = sim.upper
    uptr = u.indptr.astype(np.int64)
    probe = np.zeros(1, dtype=np.int32 if u.nnz < 2**31 else np.int64)
    lptr, lidx, lpos = _lower_index(sim.n, uptr, u.indices, probe)
    return Adjacency(uptr, u.indices, u.data, lptr, lidx, lpos)


def full_adjacency(n, ptr, idx, w) -> Adjacency:
    """Wrap an already symmetric CSR."""
    return Adjacency(ptr, idx, w, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=idx.dtype), np.zeros(0, dtype=np.int64))


@numba.njit(cache=True)
def _induced(local, new_id, indptr, indices, data):
    m = local.size
    ptr = np.zeros(m + 1, dtype=np.int64)
    for a in range(m):
        i = local[a]
        cnt = 0
        for e in range(indptr[i], indptr[i + 1]):
            if new_id[indices[e]] >= 0:
                cnt += 1
        ptr[a + 1] = ptr[a] + cnt
    idx = np.empty(ptr[m], dtype=indices.dtype)
    val = np.empty(ptr[m], dtype=data.dtype)
    for a in range(m):
        i = local[a]
        pos = ptr[a]
        for e in range(indptr[i], indptr[i + 1]):
            t = new_id[indices[e]]
            if t >= 0:
                idx[pos] = t
                val[pos] = data[e]
                pos += 1
    return ptr, idx, val


@numba.njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@numba.njit(cache=True)
def _component_labels(n, indptr, indices):
    """Labels numbered by first appearance in id order (label 0 holds node 0)."""
    parent = np.arange(n)
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            a = _find(parent, i)
            b = _find(parent, indices[e])
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    labels = np.full(n, -1, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for i in range(n):
        r = _find(parent, i)
        if root_label[r] < 0:
            root_label[r] = nxt
            nxt += 1
        labels[i] = root_label[r]
    return labels


@numba.njit(cache=True)
def _count_row(i, xp, xi, tp, ti, marker):
    cnt = 0
    for a in range(xp[i], xp[i + 1]):
        k = xi[a]
        for b in range(tp[k], tp[k + 1]):
            j = ti[b]
            if j > i and marker[j] != i:
                marker[j] = i
                cnt += 1
    return cnt


@numba.njit(parallel=True, cache=True)
def _count_pairs(n, xp, xi, tp, ti, n_chunks):
    counts = np.zeros(n, dtype=np.int64)
    step = (n + n_chunks - 1) // n_chunks
    for c in numba.prange(n_chunks):
        marker = np.full(n, -1, dtype=np.int64)
        for i in range(c * step, min(n, (c + 1) * step)):
            counts[i] = _count_row(i, xp, xi, tp, ti, marker)
    return counts


@numba.njit(parallel=True, cache=True)
def _fill_pairs(n, xp, xi, xd, tp, ti, td, out_ptr, out_idx, out_val, norms, use_norms, n_chunks):
    step = (n + n_chunks - 1) // n_chunks
    for c in numba.prange(n_chunks):
        acc = np.zeros(n, dtype=np.float64)
        marker = np.full(n, -1, dtype=np.int64)
        for i in range(c * step, min(n, (c + 1) * step)):
            pos = out_ptr[i]
            # contributions to every (i, j) arrive in increasing shared-column order
            for a in range(xp[i], xp[i + 1]):
                k = xi[a]
                v = xd[a]
                for b in range(tp[k], tp[k + 1]):
                    j = ti[b]
                    if j > i:
                        if marker[j] != i:
                            marker[j] = i
                            acc[j] = 0.0
                            out_idx[pos] = j
                            pos += 1
                        acc[j] += v * td[b]
            start = out_ptr[i]
            seg = np.sort(out_idx[start:pos])
            for q in range(seg.size):
                j = seg[q]
                out_idx[start + q] = j
                if use_norms:
                    value = acc[j] / (norms[i] * norms[j])
                    out_val[start + q] = value if value < 1.0 else 1.0
                else:
                    out_val[start + q] = acc[j]


def direction_vectors(matrix: CitationMatrix, direction, include_self_citations=True) -> sp.csr_matrix:
    """Rows of the returned CSR are the journal vectors for ``direction``."""
    direction = Direction(direction)
    keep = slice(None)
    if not include_self_citations:
        keep = matrix.rows != matrix.cols
    rows, cols, data = matrix.rows[keep], matrix.cols[keep], matrix.counts[keep].astype(np.float64)
    if direction is Direction.CITED:
        rows, cols = cols, rows
    x = sp.csr_matrix((data, (rows, cols)), shape=(matrix.n, matrix.n))
    x.sort_indices()
    return x


def pair_work(vectors: sp.csr_matrix) -> int:
    """Number of (i, j) contributions generated: the sum of squared column occupancies."""
    occ = np.bincount(vectors.indices, minlength=vectors.shape[1]).astype(np.int64)
    return int((occ * occ).sum())


def _inner_products(vectors: sp.csr_matrix, norms, max_pairs, n_chunks=None):
    n = vectors.shape[0]
    xt = vectors.T.tocsr()
    xt.sort_indices()
    xp = vectors.indptr.astype(np.int64)
    xi = vectors.indices.astype(np.int64)
    tp = xt.indptr.astype(np.int64)
    ti = xt.indices.astype(np.int64)
    if n_chunks is None:
        n_chunks = max(1, min(n, 8 * numba.get_num_threads()))
    row_counts = _count_pairs(n, xp, xi, tp, ti, n_chunks)
    total = int(row_counts.sum())
    if max_pairs is not None and total > max_pairs:
        raise PairLimitExceeded(
            f"similarity would hold {total:,} pairs, above the limit of {max_pairs:,}; "
            "raise max_pairs or filter the corpus"
        )
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(row_counts, out=out_ptr[1:])
    idx_dtype = np.int32 if n < 2**31 else np.int64
    out_idx = np.empty(total, dtype=idx_dtype)
    out_val = np.empty(total, dtype=np.float64)
    use_norms = norms is not None
    nrm = norms if use_norms else np.ones(n)
    _fill_pairs(
        n, xp, xi, vectors.data, tp, ti, xt.data, out_ptr, out_idx, out_val, nrm, use_norms, n_chunks
    )
    upper = sp.csr_matrix((out_val, out_idx, out_ptr), shape=(n, n))
    upper.has_sorted_indices = True
    return upper


def cooccurrence(matrix: CitationMatrix, direction=Direction.CITING, *, max_pairs=DEFAULT_MAX_PAIRS) -> SimilarityMatrix:
    """Non-normalised affiliation matrix: ``A A^T`` (citing) or ``A^T A`` (cited)."""
    x = direction_vectors(matrix, direction, include_self_citations=True)
    return SimilarityMatrix(matrix.n, _inner_products(x, None, max_pairs), "cooccurrence")


def cosine_similarity(
    matrix: CitationMatrix,
    direction=Direction.CITING,
    include_self_citations: bool = True,
    *,
    max_pairs=DEFAULT_MAX_PAIRS,
) -> SimilarityMatrix:
    """Cosine between journal vectors; zero-norm journals get no entries."""
    x = direction_vectors(matrix, direction, include_self_citations)
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
    return SimilarityMatrix(matrix.n, _inner_products(x, norms, max_pairs), "cosine")


def threshold_similarity(sim: SimilarityMatrix, tau: float) -> SimilarityMatrix:
    if tau < 0 or math.isnan(tau):
        raise DataError(f"threshold must be >= 0, got {tau}")
    if tau == 0:
        return sim
    upper = sim.upper.copy()
    upper.data[upper.data < tau] = 0.0
    upper.eliminate_zeros()
    return SimilarityMatrix(sim.n, upper, sim.kind, sim.ids)


def largest_component(sim: SimilarityMatrix) -> np.ndarray:
    """Sorted local indices of the largest connected component.

    Ties between equally large components go to the one holding the smallest
    index.  Isolated nodes are components of size one.
    """
    if sim.n == 0:
        return np.zeros(0, dtype=np.int64)
    labels = component_labels(sim)
    sizes = np.bincount(labels)
    # labels follow first appearance, so the lowest label among the largest
    # components holds the smallest node index
    best = int(np.flatnonzero(sizes == sizes.max())[0])
    return np.flatnonzero(labels == best).astype(np.int64)


def component_labels(sim: SimilarityMatrix) -> np.ndarray:
    return _component_labels(sim.n, sim.upper.indptr.astype(np.int64), sim.upper.indices)


def component_sizes(sim: SimilarityMatrix) -> np.ndarray:
    return np.bincount(component_labels(sim)) if sim.n else np.zeros(0, dtype=np.int64)


def write_sim(sim: SimilarityMatrix, path) -> None:
    i, j, v = sim.coo()
    gi, gj = sim.ids[i], sim.ids[j]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("i\tj\tvalue\n")
        for a, b, x in zip(gi.tolist(), gj.tolist(), v.tolist()):
            f.write(f"{a}\t{b}\t{x!r}\n")


def read_sim(path, n=None, kind="cosine") -> SimilarityMatrix:
    i, j, v = [], [], []
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        if header.rstrip("\n").split("\t") != ["i", "j", "value"]:
            raise CorpusFormatError("expected header i|j|value", 1, str(path))
        for lineno, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise CorpusFormatError("expected 3 fields", lineno, str(path))
            try:
                a, b, x = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise CorpusFormatError("malformed similarity row", lineno, str(path)) from None
            if a >= b:
                raise CorpusFormatError("rows must satisfy i < j", lineno, str(path))
            if x == 0:
                raise CorpusFormatError("explicit zero similarity", lineno, str(path))
            i.append(a)
            j.append(b)
            v.append(x)
    if n is None:
        n = (max(j) + 1) if j else 0
    return SimilarityMatrix.from_entries(n, i, j, v, kind=kind)
