"""Two-dimensional embeddings of similarity networks.

``vos_layout`` minimises ``sum_{i<j} s_ij * ||x_i - x_j||**2`` subject to a
unit mean distance, taken over all pairs (default) or over linked pairs
only.  Because the objective is quadratic and the constraint linear in
scale, this is the same as minimising the scale-free ratio
``a(X) / mean_d(X)**2`` with ``a`` the weighted sum of squared distances.
Each sweep visits nodes in id order and moves every node to the minimiser
of a majorising quadratic of ``a(X) - sum_{pairs} ||x_i - x_j||`` (with the
other nodes fixed); the configuration is then rescaled to its optimal
scale, which makes the ratio non-increasing from sweep to sweep.

``kamada_kawai`` minimises the stress ``sum (||x_i - x_j|| - d_ij)**2 / d_ij**2``
over all pairs, with ``d_ij`` shortest-path lengths over edge lengths
``1 / s_ij``, by SMACOF (Guttman transform), which is monotone too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.sparse.csgraph import shortest_path

from journalmap.errors import DataError, InvariantViolation
from journalmap.simmat import SimilarityMatrix, adjacency, component_sizes

METHODS = ("vos", "kamada_kawai")
MEAN_OVER = ("all", "linked")
DIAGONAL_RULES = ("square", "rectangle")


@dataclass(frozen=True)
class LayoutConfig:
    method: str = "vos"
    max_iterations: int = 1000
    tolerance: float = 1e-7
    seed: int = 0
    # pairs averaged by the vos unit-distance constraint
    mean_over: str = "all"

    def __post_init__(self):
        if self.method not in METHODS:
            raise DataError(f"layout method must be one of {METHODS}, got {self.method!r}")
        if self.mean_over not in MEAN_OVER:
            raise DataError(f"mean_over must be one of {MEAN_OVER}, got {self.mean_over!r}")
        if not self.tolerance > 0:
            raise DataError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class Layout:
    ids: np.ndarray
    coords: np.ndarray
    method: str
    objective_value: float = float("nan")
    history: list = field(default_factory=list)
    n_iterations: int = 0
    converged: bool = True

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.coords[:, 1]

    def as_dict(self) -> dict[int, tuple[float, float]]:
        return {int(i): (float(x), float(y)) for i, (x, y) in zip(self.ids, self.coords)}


@dataclass(frozen=True)
class MapFrame:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    diagonal: float
    rule: str = "square"


def _random_disc(n, seed):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n))
    theta = rng.random(n) * 2 * np.pi
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def _require_connected(sim: SimilarityMatrix):
    if sim.n < 2:
        raise DataError(f"layout needs at least 2 nodes, got {sim.n}")
    n_comp = component_sizes(sim).size
    if n_comp != 1:
        raise DataError(f"layout input is disconnected ({n_comp} components); restrict to the largest component")


# -- vos ---------------------------------------------------------------------


@numba.njit(cache=True)
def _pair_sums(n, indptr, indices, w, x, y):
    a = 0.0
    b = 0.0
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            d2 = dx * dx + dy * dy
            a += w[e] * d2
            b += math.sqrt(d2)
    return a, b


# Reassociation lets the all-pairs loops vectorise.  Results stay
# deterministic for a given build; they may differ in the last bits between
# CPUs.
_VECTOR_MATH = {"reassoc", "nsz", "arcp", "contract"}


@numba.njit(cache=True, fastmath=_VECTOR_MATH)
def _repulsion(i, n, x, y):
    xi = x[i]
    yi = y[i]
    rx = 0.0
    ry = 0.0
    for j in range(n):
        dx = xi - x[j]
        dy = yi - y[j]
        d2 = dx * dx + dy * dy
        inv = 1.0 / math.sqrt(d2) if d2 > 0.0 else 0.0
        rx += dx * inv
        ry += dy * inv
    return rx, ry


@numba.njit(cache=True, fastmath=_VECTOR_MATH)
def _weighted_squares(n, indptr, indices, w, x, y):
    a = 0.0
    for i in range(n):
        xi = x[i]
        yi = y[i]
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            dx = xi - x[j]
            dy = yi - y[j]
            a += w[e] * (dx * dx + dy * dy)
    return a


@numba.njit(cache=True, fastmath=_VECTOR_MATH)
def _all_pair_distance(n, x, y):
    b = 0.0
    for i in range(n):
        xi = x[i]
        yi = y[i]
        row = 0.0
        for j in range(i + 1, n):
            dx = xi - x[j]
            dy = yi - y[j]
            row += math.sqrt(dx * dx + dy * dy)
        b += row
    return b


@numba.njit(cache=True)
def _vos_sweep_linked(n, g, x, y):
    uptr, uidx, udata, lptr, lidx, lpos = g
    for i in range(n):
        sw = 0.0
        sx = 0.0
        sy = 0.0
        rx = 0.0
        ry = 0.0
        xi = x[i]
        yi = y[i]
        for seg in range(2):
            lo = uptr[i] if seg == 0 else lptr[i]
            hi = uptr[i + 1] if seg == 0 else lptr[i + 1]
            for e in range(lo, hi):
                if seg == 0:
                    j = uidx[e]
                    s = udata[e]
                else:
                    j = lidx[e]
                    s = udata[lpos[e]]
                sw += s
                sx += s * x[j]
                sy += s * y[j]
                dx = xi - x[j]
                dy = yi - y[j]
                d = math.sqrt(dx * dx + dy * dy)
                if d > 0.0:
                    rx += dx / d
                    ry += dy / d
        x[i] = (sx + 0.5 * rx) / sw
        y[i] = (sy + 0.5 * ry) / sw


@numba.njit(cache=True)
def _vos_sweep_all_pairs(n, uptr, uidx, udata, strength, x, y):
    """Gauss-Seidel sweep reading the upper triangle only.

    Neighbours ``k > i`` still hold old positions and are pulled from row
    ``i``; neighbours ``j < i`` were already moved and pushed ``s_jk * x_j``
    into the accumulators when their own row was visited.
    """
    accx = np.zeros(n)
    accy = np.zeros(n)
    for i in range(n):
        sx = accx[i]
        sy = accy[i]
        for e in range(uptr[i], uptr[i + 1]):
            j = uidx[e]
            sx += udata[e] * x[j]
            sy += udata[e] * y[j]
        rx, ry = _repulsion(i, n, x, y)
        xi = (sx + 0.5 * rx) / strength[i]
        yi = (sy + 0.5 * ry) / strength[i]
        x[i] = xi
        y[i] = yi
        for e in range(uptr[i], uptr[i + 1]):
            j = uidx[e]
            accx[j] += udata[e] * xi
            accy[j] += udata[e] * yi


def _weighted_and_mean_sums(sim, x, y, all_pairs):
    u = sim.upper
    indptr = u.indptr.astype(np.int64)
    if all_pairs:
        return _weighted_squares(sim.n, indptr, u.indices, u.data, x, y), _all_pair_distance(sim.n, x, y)
    return _pair_sums(sim.n, indptr, u.indices, u.data, x, y)


def vos_layout(sim: SimilarityMatrix, config: LayoutConfig = LayoutConfig(), graph=None) -> Layout:
    """Constrained weighted-distance layout of a connected similarity network.

    Returns centred coordinates whose mean distance (over the pairs named by
    ``config.mean_over``) is 1; ``objective_value`` is the weighted sum of
    squared distances at that scale.  ``graph`` may pass a prebuilt
    :func:`~journalmap.simmat.adjacency`.  The all-pairs constraint costs
    ``n**2`` per sweep on top of the links.
    """
    _require_connected(sim)
    n = sim.n
    all_pairs = config.mean_over == "all"
    u = sim.upper
    uptr = u.indptr.astype(np.int64)
    if all_pairs:
        strength = sim.strength()
    else:
        g = tuple(graph if graph is not None else adjacency(sim))
    m = n * (n - 1) // 2 if all_pairs else sim.nnz
    xy = _random_disc(n, config.seed)
    x = np.ascontiguousarray(xy[:, 0])
    y = np.ascontiguousarray(xy[:, 1])

    def ratio_and_rescale():
        a, b = _weighted_and_mean_sums(sim, x, y, all_pairs)
        if b == 0:
            raise InvariantViolation("layout collapsed to a point")
        t = b / (2 * a)
        x[:] *= t
        y[:] *= t
        return a * m * m / (b * b)

    value = ratio_and_rescale()
    history = [value]
    converged = False
    it = 0
    while it < config.max_iterations:
        if all_pairs:
            _vos_sweep_all_pairs(n, uptr, u.indices, u.data, strength, x, y)
        else:
            _vos_sweep_linked(n, g, x, y)
        it += 1
        new = ratio_and_rescale()
        if new > value * (1 + 1e-12):
            raise InvariantViolation(f"vos objective increased at sweep {it}: {value!r} -> {new!r}")
        history.append(new)
        done = (value - new) <= config.tolerance * value
        value = new
        if done:
            converged = True
            break

    x -= x.mean()
    y -= y.mean()
    _, b = _weighted_and_mean_sums(sim, x, y, all_pairs)
    scale = m / b
    coords = np.column_stack((x * scale, y * scale))
    return Layout(sim.ids, coords, "vos", value, history, it, converged)


def mean_pair_distance(coords: np.ndarray) -> float:
    """Mean distance over all unordered pairs."""
    n = len(coords)
    x = np.ascontiguousarray(coords[:, 0], dtype=np.float64)
    y = np.ascontiguousarray(coords[:, 1], dtype=np.float64)
    return _all_pair_distance(n, x, y) / (n * (n - 1) // 2)


def mean_linked_distance(sim: SimilarityMatrix, layout: Layout) -> float:
    u = sim.upper
    x = np.ascontiguousarray(layout.coords[:, 0])
    y = np.ascontiguousarray(layout.coords[:, 1])
    _, b = _pair_sums(sim.n, u.indptr.astype(np.int64), u.indices, u.data, x, y)
    return b / sim.nnz


def vos_objective_value(sim: SimilarityMatrix, coords: np.ndarray) -> float:
    u = sim.upper
    x = np.ascontiguousarray(coords[:, 0], dtype=np.float64)
    y = np.ascontiguousarray(coords[:, 1], dtype=np.float64)
    a, _ = _pair_sums(sim.n, u.indptr.astype(np.int64), u.indices, u.data, x, y)
    return a


# -- kamada-kawai ------------------------------------------------------------


def target_distances(sim: SimilarityMatrix) -> np.ndarray:
    """All-pairs shortest path lengths with edge length ``1 / s_ij``."""
    lengths = sim.upper.copy()
    lengths.data = 1.0 / lengths.data
    return shortest_path(lengths, method="D", directed=False)


def kk_stress(coords: np.ndarray, targets: np.ndarray) -> float:
    iu = np.triu_indices(len(coords), 1)
    d = np.linalg.norm(coords[iu[0]] - coords[iu[1]], axis=1)
    t = targets[iu]
    return float((((d - t) / t) ** 2).sum())


def _stress_derivatives(x, targets, weights):
    """Gradient and Hessian of the stress at ``x`` (flattened, 2 per node)."""
    n = x.shape[0]
    r = x[:, None, :] - x[None, :, :]
    d = np.sqrt((r**2).sum(axis=2))
    safe = np.where(d > 0, d, 1.0)
    targets_off = targets.copy()
    np.fill_diagonal(targets_off, 0.0)
    coef = 2 * weights * (d - targets_off) / safe
    grad = (coef[:, :, None] * r).sum(axis=1)
    u = r / safe[:, :, None]
    ratio = targets_off / safe
    blk = (2 * weights)[:, :, None, None] * (
        (1 - ratio)[:, :, None, None] * np.eye(2) + ratio[:, :, None, None] * u[:, :, :, None] * u[:, :, None, :]
    )
    hess = -blk
    idx = np.arange(n)
    hess[idx, idx] = blk.sum(axis=1)
    return grad.ravel(), hess.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def _newton_polish(x, targets, weights, value, history, max_steps):
    """Levenberg-damped Newton steps, each accepted only if the stress does not rise.

    Stress majorization crawls where the stress is flat to higher than second
    order (a path straightening out); exact second derivatives settle those.
    """
    lam = 1e-3
    steps = 0
    scale = float(weights.max())
    while steps < max_steps:
        grad, hess = _stress_derivatives(x, targets, weights)
        if np.abs(grad).max() <= 1e-13 * scale:
            return x, value, steps, True
        while True:
            step = np.linalg.solve(hess + lam * np.eye(hess.shape[0]), -grad)
            cand = x + step.reshape(-1, 2)
            new = kk_stress(cand, targets)
            if new <= value:
                break
            lam *= 10
            if lam > 1e12:
                return x, value, steps, True
        steps += 1
        done = value - new <= 1e-15 * max(value, 1e-300) and value > 0
        x, value = cand, new
        history.append(value)
        lam = max(lam / 3, 1e-12)
        if done or value == 0:
            return x, value, steps, True
    return x, value, steps, False


NEWTON_MAX_NODES = 300


def kamada_kawai(sim: SimilarityMatrix, config: LayoutConfig = LayoutConfig(method="kamada_kawai")) -> Layout:
    """Stress layout by SMACOF, finished with damped Newton steps on small graphs."""
    _require_connected(sim)
    n = sim.n
    targets = target_distances(sim)
    weights = np.zeros_like(targets)
    off = ~np.eye(n, dtype=bool)
    weights[off] = targets[off] ** -2.0
    v = -weights
    v[np.diag_indices(n)] = weights.sum(axis=1)
    ones = np.full((n, n), 1.0 / n)
    v_pinv = np.linalg.inv(v + ones) - ones

    x = _random_disc(n, config.seed)
    value = kk_stress(x, targets)
    history = [value]
    converged = False
    it = 0
    while it < config.max_iterations:
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        with np.errstate(divide="ignore", invalid="ignore"):
            bmat = np.where(dist > 0, -weights * targets / dist, 0.0)
        bmat[np.diag_indices(n)] = 0.0
        bmat[np.diag_indices(n)] = -bmat.sum(axis=1)
        x = v_pinv @ (bmat @ x)
        it += 1
        new = kk_stress(x, targets)
        if new > value * (1 + 1e-10) + 1e-15:
            raise InvariantViolation(f"stress increased at iteration {it}: {value!r} -> {new!r}")
        history.append(new)
        done = (value - new) <= config.tolerance * max(value, 1e-300)
        value = new
        if done:
            converged = True
            break
    if n <= NEWTON_MAX_NODES and value > 0:
        x, value, steps, converged = _newton_polish(x, targets, weights, value, history, config.max_iterations)
        it += steps
    x = x - x.mean(axis=0)
    return Layout(sim.ids, x, "kamada_kawai", value, history, it, converged)


def layout(sim: SimilarityMatrix, config: LayoutConfig) -> Layout:
    return vos_layout(sim, config) if config.method == "vos" else kamada_kawai(sim, config)


# -- geometry ------------------------------------------------------------------


def center_layout(lay: Layout) -> Layout:
    coords = lay.coords - lay.coords.mean(axis=0)
    return Layout(lay.ids, coords, lay.method, lay.objective_value, lay.history, lay.n_iterations, lay.converged)


def map_frame(coords, rule: str = "square") -> MapFrame:
    """Bounding frame and its diagonal.

    ``square``: side is the larger of the x and y extents, diagonal
    ``side * sqrt(2)``; ``rectangle``: diagonal of the bounding box.
    """
    if isinstance(coords, Layout):
        coords = coords.coords
    coords = np.asarray(coords, dtype=np.float64)
    if rule not in DIAGONAL_RULES:
        raise DataError(f"diagonal rule must be one of {DIAGONAL_RULES}, got {rule!r}")
    if coords.shape[0] < 2:
        raise DataError("map frame needs at least 2 points")
    x_min, y_min = coords.min(axis=0)
    x_max, y_max = coords.max(axis=0)
    dx, dy = x_max - x_min, y_max - y_min
    if rule == "square":
        diagonal = max(dx, dy) * math.sqrt(2)
    else:
        diagonal = math.hypot(dx, dy)
    if not diagonal > 0:
        raise DataError("degenerate layout: all points coincide, diversity undefined")
    return MapFrame(float(x_min), float(x_max), float(y_min), float(y_max), float(diagonal), rule)


def write_layout(lay: Layout, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("journal_id\tx\ty\n")
        for jid, (x, y) in zip(lay.ids.tolist(), lay.coords.tolist()):
            f.write(f"{jid}\t{x!r}\t{y!r}\n")


def read_layout(path, method="vos") -> Layout:
    data = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    return Layout(data[:, 0].astype(np.int64), data[:, 1:3].copy(), method)
