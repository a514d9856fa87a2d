"""(k, z)-clustering costs and solvers over candidate center sets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .geometry import GeometryError, WeightedPointSet, check_power, distance_matrix
from .projection import GaussianMap

EXACT_BUDGET = 2_000_000


class ClusteringError(ValueError):
    pass


class BudgetExceeded(ClusteringError):
    """Exhaustive enumeration would exceed the configured budget."""


@dataclass(frozen=True, eq=False)
class ClusteringInstance:
    P: WeightedPointSet
    Q: WeightedPointSet
    k: int
    z: float = 1.0

    def __post_init__(self):
        check_power(self.z)
        if self.P.dim != self.Q.dim:
            raise GeometryError(f"P has dimension {self.P.dim}, Q has {self.Q.dim}")
        if self.k < 1:
            raise ClusteringError("k must be >= 1")
        if self.k > self.Q.size:
            raise ClusteringError(f"k={self.k} exceeds the candidate set size {self.Q.size}")

    @classmethod
    def discrete(cls, P: WeightedPointSet, k: int, z: float = 1.0) -> "ClusteringInstance":
        return cls(P, P, k, z)

    @property
    def n_centers(self) -> int:
        """Size of the center sets actually enumerated: ``min(k, |Q|)`` distinct candidates."""
        return min(self.k, len(self.Q))

    def cost_matrix(self) -> np.ndarray:
        return distance_matrix(self.P.points, self.Q.points, self.z)

    def projected_cost_matrix(self, G: GaussianMap) -> np.ndarray:
        return distance_matrix(G.image(self.P.points), G.image(self.Q.points), self.z)


@dataclass(frozen=True)
class Solution:
    center_indices: tuple
    partition: np.ndarray | None = None


@dataclass(frozen=True)
class OptResult:
    value: float
    solution: Solution
    exact: bool


def _center_list(inst: ClusteringInstance, C) -> list[int]:
    C = [int(c) for c in C]
    if not C:
        raise ClusteringError("center set must be nonempty")
    if len(set(C)) != len(C):
        raise ClusteringError("center indices must be distinct")
    if min(C) < 0 or max(C) >= len(inst.Q):
        raise ClusteringError("center index out of range")
    return C


def cost(inst: ClusteringInstance, C) -> float:
    C = _center_list(inst, C)
    M = distance_matrix(inst.P.points, inst.Q.points[C], inst.z)
    return float(inst.P.weights @ M.min(axis=1))


def cost_partition(inst: ClusteringInstance, partition, C) -> float:
    """Cost when point ``i`` is charged to ``C[partition[i]]``."""
    C = _center_list(inst, C)
    part = np.asarray(partition)
    if part.shape != (len(inst.P),):
        raise ClusteringError("partition must assign every point exactly once")
    if part.size and (part.min() < 0 or part.max() >= len(C)):
        raise ClusteringError("partition refers to a nonexistent center slot")
    M = distance_matrix(inst.P.points, inst.Q.points[C], inst.z)
    return float(inst.P.weights @ M[np.arange(len(inst.P)), part])


def unrank_combination(rank: int, s: int, k: int) -> tuple:
    """The ``rank``-th k-subset of ``range(s)`` in lexicographic order."""
    out = []
    x = 0
    for i in range(k):
        while True:
            c = math.comb(s - x - 1, k - i - 1)
            if rank < c:
                break
            rank -= c
            x += 1
        out.append(x)
        x += 1
    return tuple(out)


def all_subset_costs(M: np.ndarray, w, k: int) -> np.ndarray:
    return _backend.subset_costs(M, w, k)


def opt_exact(inst: ClusteringInstance, budget: int = EXACT_BUDGET) -> OptResult:
    return _exact_from_matrix(inst.cost_matrix(), inst.P.weights, inst.n_centers, budget)


def _exact_from_matrix(M: np.ndarray, w, m: int, budget: int) -> OptResult:
    s = M.shape[1]
    count = math.comb(s, m)
    if count > budget:
        raise BudgetExceeded(f"C({s},{m}) = {count} center sets exceeds budget {budget}")
    costs = all_subset_costs(M, w, m)
    best = int(np.argmin(costs))
    return OptResult(float(costs[best]), Solution(unrank_combination(best, s, m)), True)


def _swap_search(M: np.ndarray, w: np.ndarray, C: list[int]) -> tuple[list[int], float]:
    """Best-improvement single swaps until no swap lowers the cost."""
    s = M.shape[1]
    C = list(C)
    cur = float(w @ M[:, C].min(axis=1))
    while True:
        sub = M[:, C]
        order = np.argsort(sub, axis=1, kind="stable")
        d1 = sub[np.arange(sub.shape[0]), order[:, 0]]
        d2 = sub[np.arange(sub.shape[0]), order[:, 1]] if len(C) > 1 else np.full(sub.shape[0], np.inf)
        best_val, best_move = cur, None
        in_C = np.zeros(s, dtype=bool)
        in_C[C] = True
        for slot in range(len(C)):
            base = np.where(order[:, 0] == slot, d2, d1)
            vals = w @ np.minimum(M, base[:, None])
            vals[in_C] = np.inf
            b = int(np.argmin(vals))
            if vals[b] < best_val - 1e-12 * max(1.0, abs(best_val)):
                best_val, best_move = float(vals[b]), (slot, b)
        if best_move is None:
            return sorted(C), cur
        slot, b = best_move
        C[slot] = b
        cur = float(w @ M[:, C].min(axis=1))


def _farthest_first(Qpts: np.ndarray, k: int, first: int) -> list[int]:
    chosen = [first]
    dmin = distance_matrix(Qpts, Qpts[first:first + 1])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, distance_matrix(Qpts, Qpts[nxt:nxt + 1])[:, 0])
    return chosen


def opt_local(inst: ClusteringInstance, restarts: int = 4, seed: int = 0) -> OptResult:
    """PAM-style local search from farthest-first seeds; ``exact`` is False.

    Restart 0 seeds from candidate 0, later restarts from a seeded random candidate.
    """
    return _local_from_matrix(inst.cost_matrix(), inst.P.weights, inst.n_centers, inst.Q.points, restarts, seed)


def _local_from_matrix(M, w, m, Qpts, restarts=1, seed=0) -> OptResult:
    w = np.asarray(w, dtype=np.float64)
    s = M.shape[1]
    if m == s:
        return OptResult(float(w @ M.min(axis=1)), Solution(tuple(range(s))), False)
    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(1, restarts)):
        first = 0 if r == 0 else int(rng.integers(s))
        init = _farthest_first(Qpts, m, first)
        if len(set(init)) < m:  # duplicate-free fill when the traversal stalls
            init = list(dict.fromkeys(init + list(range(s))))[:m]
        C, val = _swap_search(M, w, init)
        key = (val, tuple(C))
        if best is None or key < best:
            best = key
    return OptResult(best[0], Solution(best[1]), False)


def opt(inst: ClusteringInstance, budget: int = EXACT_BUDGET, restarts: int = 4, seed: int = 0) -> OptResult:
    """Exact when affordable, otherwise local search (flagged ``exact=False``)."""
    return opt_from_matrix(inst.cost_matrix(), inst.P.weights, inst.n_centers, inst.Q.points,
                           budget, restarts, seed)


def opt_from_matrix(M, w, m, Qpts, budget=EXACT_BUDGET, restarts=4, seed=0) -> OptResult:
    """:func:`opt` on a precomputed ``(n, s)`` cost matrix; ``Qpts`` seeds local search."""
    try:
        return _exact_from_matrix(M, w, m, budget)
    except BudgetExceeded:
        return _local_from_matrix(M, w, m, Qpts, restarts, seed)


# -- continuous centers ------------------------------------------------------------


def _median_at_data_point(X: np.ndarray, w: np.ndarray):
    """Index of a data point that is the unique minimiser, else None.

    That holds when the pull of the other points is strictly below the point's
    own weight; Weiszfeld only creeps towards such a point, so test directly.
    """
    m = X.shape[0]
    if m < 2 or m * m > 4_000_000:
        return None
    diff = X[None, :, :] - X[:, None, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(d, np.inf)
    R = np.linalg.norm(np.einsum("j,ijk->ik", w, diff / d[:, :, None]), axis=1)
    ok = np.flatnonzero(R < w * (1.0 - 1e-12))
    return int(ok[0]) if ok.size else None


def _weiszfeld(X: np.ndarray, w: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Weiszfeld iteration safeguarded by Newton steps.

    Each round also tries a Newton step on the (smooth, away from data points)
    objective and keeps whichever candidate is cheaper, so descent stays
    monotone while near-degenerate sets converge quadratically instead of
    crawling.
    """
    j = _median_at_data_point(X, w)
    if j is not None:
        return X[j].copy()

    def f(y):
        diff = X - y
        return float(w @ np.sqrt(np.einsum("ij,ij->i", diff, diff)))

    x = (w @ X) / w.sum()
    dim = X.shape[1]
    scale = 1.0 + float(np.abs(X).max())
    guard = 1e-12 * scale
    for _ in range(max_iter):
        diff = x - X
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if d.min() < guard:
            near = d < guard
            far = ~near
            if not far.any():
                return x
            # Vardi-Zhang step at a data point: stop if the subgradient contains 0
            eta = float(w[near].sum())
            wd = w[far] / d[far]
            r = float(np.linalg.norm(wd @ diff[far]))
            if r <= eta:
                return X[int(np.flatnonzero(near)[0])].copy()
            T = (wd @ X[far]) / wd.sum()
            x_new = (1.0 - eta / r) * T + (eta / r) * x
        else:
            wd = w / d
            x_new = (wd @ X) / wd.sum()
            u = diff / d[:, None]
            grad = wd @ diff
            H = wd.sum() * np.eye(dim) - (u * wd[:, None]).T @ u
            ev = np.linalg.eigvalsh(H)
            # flat directions (collinear sets) make the minimiser non-unique: leave them to Weiszfeld
            if ev[0] > 1e-8 * wd.sum():
                x_nt = x - np.linalg.solve(H, grad)
                if f(x_nt) < f(x_new):
                    x_new = x_nt
        step = x_new - x
        x = x_new
        if math.sqrt(step @ step) <= tol * max(1.0, math.sqrt(x @ x)):
            break
    return x


def continuous_center(P: WeightedPointSet, z: float, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Optimal unconstrained center for z = 2 (weighted centroid) or z = 1 (Weiszfeld)."""
    z = check_power(z)
    w = P.weights.astype(np.float64)
    if z == 2.0:
        return (w @ P.points) / w.sum()
    if z == 1.0:
        return _weiszfeld(P.points, w, tol, max_iter)
    raise ClusteringError(f"continuous_center supports z in {{1, 2}}, got {z}")


def _set_partitions(m: int, k: int):
    """Restricted-growth strings of length m with at most k blocks."""
    a = [0] * m

    def rec(i, nblocks):
        if i == m:
            yield tuple(a)
            return
        for b in range(min(nblocks + 1, k)):
            a[i] = b
            yield from rec(i + 1, max(nblocks, b + 1))

    yield from rec(0, 0)


def count_set_partitions(m: int, k: int) -> int:
    """Number of partitions of m labelled items into at most k nonempty blocks."""
    # Stirling numbers of the second kind, row by row
    S = [1] + [0] * k
    for _ in range(m):
        S = [0] + [j * S[j] + S[j - 1] for j in range(1, k + 1)]
    return sum(S[1:])


def optcont_small(P: WeightedPointSet, k: int, z: float, budget: int = 200_000, tol: float = 1e-12) -> float:
    """Continuous optimum by enumerating every partition into at most k clusters."""
    m = len(P)
    if k >= m:
        return 0.0
    count = count_set_partitions(m, k)
    if count > budget:
        raise BudgetExceeded(f"{count} partitions exceed budget {budget}")
    best = math.inf
    cache = {}
    for labels in _set_partitions(m, k):
        lab = np.asarray(labels)
        total = 0.0
        for b in range(lab.max() + 1):
            members = tuple(np.flatnonzero(lab == b))
            if members not in cache:
                sub = P.subset(members)
                c = continuous_center(sub, z, tol)
                cache[members] = float(sub.weights @ (np.linalg.norm(sub.points - c, axis=1) ** z))
            total += cache[members]
            if total >= best:
                break
        best = min(best, total)
    return best


# -- assignments -------------------------------------------------------------------


def assign_source(inst: ClusteringInstance, C) -> np.ndarray:
    """Slot of the nearest center (lowest slot on ties) for each point of P."""
    C = _center_list(inst, C)
    return np.argmin(distance_matrix(inst.P.points, inst.Q.points[C]), axis=1)


def assign_target(inst: ClusteringInstance, C, G: GaussianMap) -> np.ndarray:
    """Slot of the center whose image is nearest to each projected point."""
    C = _center_list(inst, C)
    return np.argmin(distance_matrix(G.image(inst.P.points), G.image(inst.Q.points[C])), axis=1)
