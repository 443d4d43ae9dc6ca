"""Community detection on similarity networks.

One local-moving + aggregation engine serves two objectives, both written
as ``H = sum_c [W_c - res * A_c**2 / 2]`` where ``W_c`` is the weight inside
community ``c`` and ``A_c`` the summed node weight:

* modularity: node weight = strength, ``res = gamma / (2W)``, so that
  ``Q = H / W``;
* VOS: node weight = 1 (number of journals), ``res = gamma``, which equals
  ``sum_{i<j in same c} (s_ij - gamma)`` up to the constant ``gamma * n / 2``.
"""

from __future__ import annotations

import heapq
import logging
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from journalmap.errors import DataError, InvariantViolation
from journalmap.simmat import Adjacency, SimilarityMatrix, adjacency, full_adjacency

log = logging.getLogger(__name__)

OBJECTIVES = ("modularity", "vos")


@dataclass(frozen=True)
class ClusterConfig:
    objective: str = "modularity"
    resolution: float = 1.0
    # for the vos objective, multiply the resolution by the mean edge weight
    scale_resolution: bool = True
    seed: int = 0
    min_cluster_size: int = 1
    max_passes: int = 100

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise DataError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.resolution > 0:
            raise DataError(f"resolution must be > 0, got {self.resolution}")
        if self.min_cluster_size < 1:
            raise DataError("min_cluster_size must be >= 1")
        if self.max_passes < 1:
            raise DataError("max_passes must be >= 1")


@dataclass(frozen=True, eq=False)
class Partition:
    """Community assignment over the nodes of a similarity matrix.

    ``assignment[k]`` is the community of local node ``k`` (journal
    ``ids[k]``).  ``objective`` is ``q`` for modularity runs and the VOS
    value for vos runs.
    """

    assignment: np.ndarray
    ids: np.ndarray
    q: float
    objective_name: str = "modularity"
    objective: float = float("nan")
    converged: bool = True
    n_levels: int = 0
    history: list = field(default_factory=list)
    resolution: float = 1.0

    @property
    def n_communities(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_communities)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.ids.tolist(), self.assignment.tolist()))


# -- objective functions, from scratch ---------------------------------------


@numba.njit(cache=True)
def _intra_and_strength(n, indptr, indices, data, assignment, n_comm):
    intra = np.zeros(n_comm)
    strength = np.zeros(n_comm)
    for i in range(n):
        ci = assignment[i]
        for e in range(indptr[i], indptr[i + 1]):
            cj = assignment[indices[e]]
            v = data[e]
            strength[ci] += v
            strength[cj] += v
            if ci == cj:
                intra[ci] += v
    return intra, strength


def _check_assignment(sim, assignment):
    if isinstance(assignment, Partition):
        assignment = assignment.assignment
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (sim.n,):
        raise DataError(f"partition covers {assignment.size} nodes, network has {sim.n}")
    if assignment.size and assignment.min() < 0:
        raise DataError("partition is missing nodes (negative community id)")
    return assignment


def _community_sums(sim, assignment):
    n_comm = int(assignment.max()) + 1
    u = sim.upper
    return _intra_and_strength(sim.n, u.indptr.astype(np.int64), u.indices, u.data, assignment, n_comm)


def modularity(sim: SimilarityMatrix, assignment, resolution: float = 1.0) -> float:
    """Weighted modularity ``sum_c [W_c/W - (S_c/2W)**2]``.

    ``assignment`` may be a :class:`Partition` or an array of community ids
    indexed by local node.  Returns 0 for a network without edges.
    """
    assignment = _check_assignment(sim, assignment)
    total = float(sim.upper.data.sum())
    if sim.n == 0 or total == 0:
        return 0.0
    intra, strength = _community_sums(sim, assignment)
    return float(intra.sum() / total - resolution * ((strength / (2 * total)) ** 2).sum())


def vos_objective(sim: SimilarityMatrix, assignment, resolution: float) -> float:
    """``sum over same-community pairs i<j of (s_ij - resolution)``."""
    assignment = _check_assignment(sim, assignment)
    if sim.n == 0:
        return 0.0
    intra, _ = _community_sums(sim, assignment)
    sizes = np.bincount(assignment).astype(np.float64)
    return float(intra.sum() - resolution * (sizes * (sizes - 1) / 2).sum())


# -- numba engine ----------------------------------------------------------------
# Graphs are ``Adjacency`` tuples: neighbours j > i come from the upper CSR,
# neighbours j < i from the lower index pointing back into the upper weights.


@numba.njit(cache=True)
def _local_moving(n, g, a, res, order, comm, tot, max_sweeps, tol, history):
    uptr, uidx, udata, lptr, lidx, lpos = g
    neigh_w = np.zeros(n, dtype=np.float64)
    neigh_c = np.empty(n, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    visit = 0
    gain_total = 0.0
    moves = 0
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        moved = 0
        for idx in range(n):
            i = order[idx]
            visit += 1
            nn = 0
            for e in range(uptr[i], uptr[i + 1]):
                j = uidx[e]
                if j == i:
                    continue
                c = comm[j]
                if stamp[c] != visit:
                    stamp[c] = visit
                    neigh_w[c] = 0.0
                    neigh_c[nn] = c
                    nn += 1
                neigh_w[c] += udata[e]
            for e in range(lptr[i], lptr[i + 1]):
                c = comm[lidx[e]]
                if stamp[c] != visit:
                    stamp[c] = visit
                    neigh_w[c] = 0.0
                    neigh_c[nn] = c
                    nn += 1
                neigh_w[c] += udata[lpos[e]]
            d = comm[i]
            ai = a[i]
            tot[d] -= ai
            w_d = neigh_w[d] if stamp[d] == visit else 0.0
            stay = w_d - res * ai * tot[d]
            best_c = d
            best = stay
            for q in range(nn):
                c = neigh_c[q]
                gain = neigh_w[c] - res * ai * tot[c]
                if gain > best:
                    best = gain
                    best_c = c
            if best_c != d and best - stay > tol:
                comm[i] = best_c
                tot[best_c] += ai
                gain_total += best - stay
                moved += 1
            else:
                tot[d] += ai
        history[sweeps] = gain_total
        sweeps += 1
        moves += moved
        if moved == 0:
            converged = True
            break
    return moves, sweeps, gain_total, converged


@numba.njit(cache=True)
def _aggregate(n, g, comm, n_comm):
    """Collapse communities into nodes of a plain symmetric CSR.

    Self-loops carry twice the internal weight, so row sums stay strengths.
    """
    uptr, uidx, udata, lptr, lidx, lpos = g
    start = np.zeros(n_comm + 1, dtype=np.int64)
    for i in range(n):
        start[comm[i] + 1] += 1
    for c in range(n_comm):
        start[c + 1] += start[c]
    members = np.empty(n, dtype=np.int64)
    fill = start[:-1].copy()
    for i in range(n):
        members[fill[comm[i]]] = i
        fill[comm[i]] += 1

    stamp = np.full(n_comm, -1, dtype=np.int64)
    acc = np.zeros(n_comm, dtype=np.float64)
    out_ptr = np.zeros(n_comm + 1, dtype=np.int64)
    for c in range(n_comm):
        cnt = 0
        for m in range(start[c], start[c + 1]):
            i = members[m]
            for e in range(uptr[i], uptr[i + 1]):
                t = comm[uidx[e]]
                if stamp[t] != c:
                    stamp[t] = c
                    cnt += 1
            for e in range(lptr[i], lptr[i + 1]):
                t = comm[lidx[e]]
                if stamp[t] != c:
                    stamp[t] = c
                    cnt += 1
        out_ptr[c + 1] = out_ptr[c] + cnt
    out_idx = np.empty(out_ptr[n_comm], dtype=np.int64)
    out_w = np.empty(out_ptr[n_comm], dtype=np.float64)
    stamp[:] = -1
    for c in range(n_comm):
        pos = out_ptr[c]
        for m in range(start[c], start[c + 1]):
            i = members[m]
            for e in range(uptr[i], uptr[i + 1]):
                t = comm[uidx[e]]
                if stamp[t] != c:
                    stamp[t] = c
                    acc[t] = 0.0
                    out_idx[pos] = t
                    pos += 1
                acc[t] += udata[e]
            for e in range(lptr[i], lptr[i + 1]):
                t = comm[lidx[e]]
                if stamp[t] != c:
                    stamp[t] = c
                    acc[t] = 0.0
                    out_idx[pos] = t
                    pos += 1
                acc[t] += udata[lpos[e]]
        seg = np.sort(out_idx[out_ptr[c] : pos])
        for q in range(seg.size):
            out_idx[out_ptr[c] + q] = seg[q]
            out_w[out_ptr[c] + q] = acc[seg[q]]
    return out_ptr, out_idx, out_w


@numba.njit(cache=True)
def _node_strength(n, g):
    uptr, uidx, udata, lptr, lidx, lpos = g
    s = np.zeros(n)
    for i in range(n):
        for e in range(uptr[i], uptr[i + 1]):
            s[i] += udata[e]
        for e in range(lptr[i], lptr[i + 1]):
            s[i] += udata[lpos[e]]
    return s


# -- driver ------------------------------------------------------------------


def effective_resolution(sim: SimilarityMatrix, config: ClusterConfig) -> float:
    """The ``gamma`` actually subtracted per pair by the vos objective."""
    if config.scale_resolution and sim.nnz:
        return config.resolution * float(sim.upper.data.mean())
    return config.resolution


def _optimize(sim: SimilarityMatrix, config: ClusterConfig, graph: Adjacency | None = None) -> Partition:
    if sim.n == 0:
        raise DataError("cannot cluster an empty network")
    g0 = g = graph if graph is not None else adjacency(sim)
    total = float(sim.upper.data.sum())
    if config.objective == "modularity":
        a = _node_strength(sim.n, tuple(g))
        res = config.resolution / (2 * total) if total > 0 else 0.0
    else:
        a = np.ones(sim.n, dtype=np.float64)
        res = effective_resolution(sim, config)
    mean_w = total / sim.nnz if sim.nnz else 1.0
    tol = 1e-12 * max(mean_w, res * float(a.max()) ** 2, 1e-300)

    rng = np.random.default_rng(config.seed)
    h = -res * float((a * a).sum()) / 2
    history = [h]
    assignment = np.arange(sim.n, dtype=np.int64)
    converged = False
    n_levels = 0
    n = sim.n
    for _ in range(config.max_passes):
        order = rng.permutation(n).astype(np.int64)
        comm = np.arange(n, dtype=np.int64)
        tot = a.copy()
        sweep_hist = np.zeros(config.max_passes, dtype=np.float64)
        moves, sweeps, gain, level_conv = _local_moving(
            n, tuple(g), a, res, order, comm, tot, config.max_passes, tol, sweep_hist
        )
        n_levels += 1
        level_trace = [h + float(x) for x in sweep_hist[:sweeps]]
        prev = [h] + level_trace
        for before, after in zip(prev, level_trace):
            if after < before - 1e-12 * max(1.0, abs(before)):
                raise InvariantViolation("objective decreased during local moving")
        history.extend(level_trace)
        h += gain
        log.debug("level %d: %d nodes, %d moves in %d sweeps", n_levels, n, moves, sweeps)
        if not level_conv:
            warnings.warn(
                f"local moving did not settle within {config.max_passes} sweeps", RuntimeWarning, stacklevel=3
            )
        if moves == 0:
            converged = level_conv
            break
        labels, comm = np.unique(comm, return_inverse=True)
        assignment = comm[assignment]
        ptr, idx, w = _aggregate(n, tuple(g), comm, labels.size)
        n = labels.size
        g = full_adjacency(n, ptr, idx, w)
        a = np.bincount(comm, weights=a, minlength=n)
    else:
        warnings.warn(
            f"clustering did not converge within {config.max_passes} passes", RuntimeWarning, stacklevel=3
        )
    del g
    _, assignment = np.unique(assignment, return_inverse=True)
    assignment = assignment.astype(np.int64)
    if config.objective == "modularity":
        value = modularity(sim, assignment, config.resolution)
        incremental = h / total if total > 0 else 0.0
        history = [x / total for x in history] if total > 0 else [0.0 for _ in history]
    else:
        value = vos_objective(sim, assignment, res)
        incremental = h + res * sim.n / 2
        history = [x + res * sim.n / 2 for x in history]
    if abs(incremental - value) > 1e-9 * max(1.0, abs(value)):
        raise InvariantViolation(
            f"incremental objective {incremental!r} disagrees with recomputed {value!r}"
        )
    part = Partition(
        assignment=assignment,
        ids=sim.ids,
        q=modularity(sim, assignment) if config.objective == "vos" else value,
        objective_name=config.objective,
        objective=value,
        converged=converged,
        n_levels=n_levels,
        history=history,
        resolution=config.resolution if config.objective == "modularity" else res,
    )
    if config.min_cluster_size > 1:
        part = merge_small_clusters(sim, part, config.min_cluster_size, g0)
    return relabel_by_size(part)


def louvain(sim: SimilarityMatrix, config: ClusterConfig = ClusterConfig(), graph=None) -> Partition:
    """Modularity optimisation by local moving and aggregation (Blondel et al.).

    ``graph`` may pass a prebuilt :func:`~journalmap.simmat.adjacency` to share
    it with other stages.
    """
    if config.objective != "modularity":
        raise DataError("louvain requires objective='modularity'")
    return _optimize(sim, config, graph)


def vos_cluster(sim: SimilarityMatrix, config: ClusterConfig, graph=None) -> Partition:
    if config.objective != "vos":
        raise DataError("vos_cluster requires objective='vos'")
    return _optimize(sim, config, graph)


def cluster(sim: SimilarityMatrix, config: ClusterConfig, graph=None) -> Partition:
    if config.objective == "modularity":
        return louvain(sim, config, graph)
    return vos_cluster(sim, config, graph)


def _with_assignment(part: Partition, assignment: np.ndarray, sim=None, **changes) -> Partition:
    fields = dict(
        assignment=assignment,
        ids=part.ids,
        q=part.q,
        objective_name=part.objective_name,
        objective=part.objective,
        converged=part.converged,
        n_levels=part.n_levels,
        history=part.history,
        resolution=part.resolution,
    )
    fields.update(changes)
    return Partition(**fields)


def relabel_by_size(part: Partition) -> Partition:
    """Renumber communities by decreasing size; ties go to the smallest member index."""
    assignment = part.assignment
    if assignment.size == 0:
        return part
    n_comm = int(assignment.max()) + 1
    sizes = np.bincount(assignment, minlength=n_comm)
    first = np.full(n_comm, assignment.size, dtype=np.int64)
    np.minimum.at(first, assignment, np.arange(assignment.size))
    present = sizes > 0
    labels = np.flatnonzero(present)
    order = labels[np.lexsort((first[labels], -sizes[labels]))]
    new_label = np.full(n_comm, -1, dtype=np.int64)
    new_label[order] = np.arange(order.size)
    return _with_assignment(part, new_label[assignment])


def merge_small_clusters(sim: SimilarityMatrix, part: Partition, min_size: int, graph=None) -> Partition:
    """Fold communities below ``min_size`` into their best-connected neighbour.

    Smallest communities go first (ties by label); a community without any
    link to another community is left alone.
    """
    assignment = part.assignment.astype(np.int64)
    n_comm = int(assignment.max()) + 1
    g = graph if graph is not None else adjacency(sim)
    ptr, idx, w = _aggregate(sim.n, tuple(g), assignment, n_comm)
    links = [dict(zip(idx[ptr[c] : ptr[c + 1]].tolist(), w[ptr[c] : ptr[c + 1]].tolist())) for c in range(n_comm)]
    for c in range(n_comm):
        links[c].pop(c, None)
    sizes = np.bincount(assignment, minlength=n_comm).tolist()
    target = list(range(n_comm))
    heap = [(sizes[c], c) for c in range(n_comm) if 0 < sizes[c] < min_size]
    heapq.heapify(heap)
    while heap:
        size, c = heapq.heappop(heap)
        if target[c] != c or size != sizes[c] or not links[c]:
            continue
        # highest weight, ties to the lowest label
        t = min(links[c], key=lambda k: (-links[c][k], k))
        target[c] = t
        sizes[t] += sizes[c]
        sizes[c] = 0
        for k, v in links[c].items():
            del links[k][c]
            if k != t:
                links[t][k] = links[t].get(k, 0.0) + v
                links[k][t] = links[k].get(t, 0.0) + v
        links[c] = {}
        if sizes[t] < min_size:
            heapq.heappush(heap, (sizes[t], t))
    root = np.array(target, dtype=np.int64)
    for _ in range(n_comm):
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    _, assignment = np.unique(root[assignment], return_inverse=True)
    assignment = assignment.astype(np.int64)
    if part.objective_name == "vos":
        return _with_assignment(
            part, assignment, q=modularity(sim, assignment), objective=vos_objective(sim, assignment, part.resolution)
        )
    q = modularity(sim, assignment, part.resolution)
    return _with_assignment(part, assignment, q=q, objective=q)
