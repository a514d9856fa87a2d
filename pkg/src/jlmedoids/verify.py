"""Executable checkers for the projection guarantees and the good-events diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .clustering import (
    EXACT_BUDGET,
    BudgetExceeded,
    ClusteringInstance,
    continuous_center,
    opt_from_matrix,
    optcont_small,
    unrank_combination,
)
from .geometry import WeightedPointSet, as_point, check_power, distance_matrix
from .nets import NetHierarchy, build_hierarchy, levels_for
from .projection import GaussianMap, sample_map

REPORT_SCHEMA = 1
DEFAULT_ALPHA = 100.0
DEFAULT_L = 4.0
DEFAULT_TAIL_RATE = 1.0 / 8.0
SAMPLE_SIZE = 10_000
_REL_TOL = 1e-12


class VerifyError(ValueError):
    pass


@dataclass(frozen=True)
class GuaranteeReport:
    check_name: str
    passed: bool
    worst_ratio: float
    witness: object = None
    details: dict = field(default_factory=dict)
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "check": self.check_name,
            "pass": bool(self.passed),
            "worst_ratio": _jsonable(self.worst_ratio),
            "witness": _jsonable(self.witness),
            "details": _jsonable(self.details),
            "exact": bool(self.exact),
        }


@dataclass(frozen=True)
class TrialSummary:
    trials: int
    successes: int
    success_rate: float
    seeds: list
    reports: list = field(default_factory=list, repr=False)

    def stderr(self) -> float:
        p = self.success_rate
        return math.sqrt(p * (1.0 - p) / self.trials)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 1.0 if num <= 0 else math.inf


def _check_map(inst: ClusteringInstance, G: GaussianMap):
    if G.d != inst.P.dim:
        raise VerifyError(f"map expects dimension {G.d}, instance has {inst.P.dim}")


# -- center-set enumeration -----------------------------------------------------------


class _CenterSets:
    """All k-subsets of Q in lexicographic order, or a seeded sample when over budget."""

    def __init__(self, s: int, m: int, budget: int, sample_size: int, seed: int):
        self.s, self.m = s, m
        self.count = math.comb(s, m)
        self.exact = self.count <= budget
        if self.exact:
            self.sets = None
        else:
            rng = np.random.default_rng(seed)
            self.sets = np.sort(
                np.array([rng.choice(s, size=m, replace=False) for _ in range(sample_size)]), axis=1
            )

    def values(self, M: np.ndarray, w: np.ndarray) -> np.ndarray:
        """``sum_p w_p min_{c in C} M[p, c]`` for every enumerated ``C``."""
        if self.exact:
            return _backend.subset_costs(M, w, self.m)
        return np.einsum("p,pk->k", w, M[:, self.sets].min(axis=2))

    def center(self, idx: int) -> tuple:
        if self.exact:
            return unrank_combination(idx, self.s, self.m)
        return tuple(int(c) for c in self.sets[idx])

    def flags(self) -> dict:
        return {"center_sets": self.count if self.exact else int(self.sets.shape[0]),
                "sampled": not self.exact}


# -- expansion ------------------------------------------------------------------------


def check_expansion(inst: ClusteringInstance, G: GaussianMap, eps: float, budget: int = EXACT_BUDGET,
                    restarts: int = 4, seed: int = 0) -> GuaranteeReport:
    """Pass iff ``opt(G(P), G(Q)) <= (1 + eps) opt(P, Q)``; ratio is projected over original."""
    _check_map(inst, G)
    w = inst.P.weights.astype(np.float64)
    m = inst.n_centers
    src = opt_from_matrix(inst.cost_matrix(), w, m, inst.Q.points, budget, restarts, seed)
    GQ = G.image(inst.Q.points)
    MG = distance_matrix(G.image(inst.P.points), GQ, inst.z)
    tgt = opt_from_matrix(MG, w, m, GQ, budget, restarts, seed)
    ratio = _ratio(tgt.value, src.value)
    passed = tgt.value <= (1.0 + eps) * src.value + _REL_TOL * src.value
    return GuaranteeReport(
        "expansion", bool(passed), ratio,
        {"target_centers": tgt.solution.center_indices, "source_centers": src.solution.center_indices},
        {"opt": src.value, "opt_projected": tgt.value, "eps": eps},
        src.exact and tgt.exact,
    )


def check_fixed_solution_expansion(inst: ClusteringInstance, C, partition, G: GaussianMap,
                                   eps: float) -> GuaranteeReport:
    """Pass iff ``cost(G(partition), G(C)) <= (1 + eps) cost(partition, C)``."""
    _check_map(inst, G)
    C = [int(c) for c in C]
    part = np.asarray(partition, dtype=np.intp)
    if part.shape != (len(inst.P),) or (part.size and (part.min() < 0 or part.max() >= len(C))):
        raise VerifyError("partition must map every point to a slot of C")
    w = inst.P.weights.astype(np.float64)
    rows = np.arange(len(inst.P))
    a = distance_matrix(G.image(inst.P.points), G.image(inst.Q.points[C]), inst.z)[rows, part]
    b = distance_matrix(inst.P.points, inst.Q.points[C], inst.z)[rows, part]
    ca, cb = float(w @ a), float(w @ b)
    passed = ca <= (1.0 + eps) * cb + _REL_TOL * cb
    return GuaranteeReport("fixed-solution", bool(passed), _ratio(ca, cb),
                           {"centers": tuple(C), "partition": part.tolist()},
                           {"cost": cb, "cost_projected": ca, "eps": eps})


# -- contraction ----------------------------------------------------------------------


def _worst_partition_ratio(sets: _CenterSets, M, MG, w, scale):
    """``min_C min_partition cost_G / cost`` by Dinkelbach iteration over all enumerated C.

    Every iterate is the ratio of an actual (C, partition) pair, so the final
    value is achieved and the witness reproduces it.
    """
    base = sets.values(M, w)
    top = int(np.argmax(base))
    if not base[top] > 0:
        C = sets.center(0)
        return 1.0, C, np.zeros(M.shape[0], dtype=np.intp)
    rows = np.arange(M.shape[0])
    C = sets.center(top)
    part = np.argmin(M[:, C], axis=1)
    lam = float(w @ MG[:, C][rows, part]) / float(w @ M[:, C][rows, part])
    for _ in range(200):
        F = sets.values(MG - lam * M, w)
        i = int(np.argmin(F))
        if F[i] >= -_REL_TOL * scale:
            break
        Ci = sets.center(i)
        sub = MG[:, Ci] - lam * M[:, Ci]
        pi = np.argmin(sub, axis=1)
        A = float(w @ MG[:, Ci][rows, pi])
        B = float(w @ M[:, Ci][rows, pi])
        new = A / B
        if not new < lam:
            break
        lam, C, part = new, Ci, pi
    return lam, C, part


def check_contraction_all_centers_partitions(inst: ClusteringInstance, G: GaussianMap, eps: float,
                                             budget: int = EXACT_BUDGET, sample_size: int = SAMPLE_SIZE,
                                             seed: int = 0) -> GuaranteeReport:
    """For every k-subset C of Q and every partition, ``cost_G >= (1 - eps) cost``.

    The worst partition for a fixed C sends each point to the slot minimising
    ``w_p (||Gp - Gc_i||^z - (1 - eps) ||p - c_i||^z)``, so the per-C margin is a
    sum of per-point minima.  Over budget, a seeded sample of C is checked and
    the report is flagged non-exact.
    """
    _check_map(inst, G)
    w = inst.P.weights.astype(np.float64)
    M = inst.cost_matrix()
    MG = inst.projected_cost_matrix(G)
    sets = _CenterSets(len(inst.Q), inst.n_centers, budget, sample_size, seed)
    scale = max(float(w @ M.max(axis=1)), 1e-300)
    margins = sets.values(MG - (1.0 - eps) * M, w)
    worst_C = int(np.argmin(margins))
    passed = bool(margins[worst_C] >= -_REL_TOL * scale)
    lam, C, part = _worst_partition_ratio(sets, M, MG, w, scale)
    return GuaranteeReport(
        "contraction", passed, lam,
        {"centers": tuple(C), "partition": np.asarray(part).tolist()},
        {"min_margin": float(margins[worst_C]), "min_margin_centers": sets.center(worst_C), "eps": eps,
         **sets.flags()},
        sets.exact,
    )


def worst_partition_value(inst: ClusteringInstance, G: GaussianMap, C, lam: float) -> tuple[float, np.ndarray]:
    """``min_partition sum_p w_p (||Gp - Gc||^z - lam ||p - c||^z)`` for one fixed C."""
    C = list(C)
    w = inst.P.weights.astype(np.float64)
    sub = distance_matrix(G.image(inst.P.points), G.image(inst.Q.points[C]), inst.z) - lam * distance_matrix(
        inst.P.points, inst.Q.points[C], inst.z)
    part = np.argmin(sub, axis=1)
    return float(w @ sub[np.arange(sub.shape[0]), part]), part


def check_relaxed_contraction(inst: ClusteringInstance, G: GaussianMap, eps: float, alpha: float = DEFAULT_ALPHA,
                              budget: int = EXACT_BUDGET, sample_size: int = SAMPLE_SIZE, seed: int = 0,
                              opt_value: float | None = None) -> GuaranteeReport:
    """For every k-subset C, ``cost(G(P), G(C)) >= min(alpha opt, (1 - eps) cost(P, C))``.

    ``worst_ratio`` is the smallest ``cost_G(C) / min(alpha opt, (1 - eps) cost(C))``
    (pass iff it is at least 1); ``details`` counts the C whose bound is the
    ``alpha`` branch and those in the ``eps`` branch.
    """
    _check_map(inst, G)
    w = inst.P.weights.astype(np.float64)
    M = inst.cost_matrix()
    MG = inst.projected_cost_matrix(G)
    sets = _CenterSets(len(inst.Q), inst.n_centers, budget, sample_size, seed)
    costs = sets.values(M, w)
    costs_G = sets.values(MG, w)
    exact = sets.exact
    if opt_value is None:
        if sets.exact:
            opt_value = float(costs.min())
        else:
            res = opt_from_matrix(M, w, inst.n_centers, inst.Q.points, budget, 4, seed)
            opt_value = min(res.value, float(costs.min()))
            exact = False
    opt_branch = alpha * opt_value
    eps_branch = (1.0 - eps) * costs
    bound = np.minimum(opt_branch, eps_branch)
    in_alpha = opt_branch < eps_branch
    ok = costs_G >= bound - _REL_TOL * np.maximum(bound, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bound > 0, costs_G / bound, np.where(costs_G > 0, np.inf, 1.0))
    i = int(np.argmin(ratios))
    eps_ratios = np.where(~in_alpha & (costs > 0), costs_G / np.where(costs > 0, costs, 1.0), np.inf)
    return GuaranteeReport(
        "relaxed-contraction", bool(ok.all()), float(ratios[i]),
        {"centers": sets.center(i)},
        {
            "opt": opt_value,
            "alpha": alpha,
            "eps": eps,
            "alpha_branch": int(in_alpha.sum()),
            "eps_branch": int((~in_alpha).sum()),
            "alpha_branch_failures": int((in_alpha & ~ok).sum()),
            "eps_branch_failures": int((~in_alpha & ~ok).sum()),
            "eps_branch_worst_ratio": float(eps_ratios.min()) if np.isfinite(eps_ratios).any() else None,
            "witness_branch": "alpha" if in_alpha[i] else "eps",
            **sets.flags(),
        },
        exact,
    )


# -- subsets and symmetric sets ---------------------------------------------------------


def preserve_sum_terms(P: WeightedPointSet, c, z: float, G: GaussianMap):
    c = as_point(c)
    z = check_power(z)
    a = distance_matrix(G.image(P.points), (G.matrix @ c)[None, :], z)[:, 0]
    b = distance_matrix(P.points, c[None, :], z)[:, 0]
    return a, b


def worst_subset(a: np.ndarray, b: np.ndarray, w: np.ndarray, factor: float):
    """Closed-form minimiser of ``sum_{P'} w (a - factor b)``: keep exactly the negative terms."""
    terms = w * (a - factor * b)
    mask = terms < 0
    return mask, float(terms[mask].sum())


def optcont_value(P: WeightedPointSet, k: int, z: float, budget: int = 200_000) -> tuple[float, bool]:
    """Continuous optimum by partition enumeration, or the discrete optimum (an upper
    bound, flagged ``False``) when enumeration is over budget."""
    try:
        return optcont_small(P, k, z, budget), True
    except BudgetExceeded:
        res = opt_from_matrix(distance_matrix(P.points, P.points, z), P.weights, min(k, len(P)), P.points)
        return res.value, False


def check_preserve_sum(P: WeightedPointSet, c, k: int, z: float, eps: float, G: GaussianMap,
                       optcont: float | None = None, budget: int = 200_000,
                       optcont_exact: bool = True) -> GuaranteeReport:
    """Worst subset ``P'`` for ``sum ||Gp - Gc||^z >= (1-eps)^(3z) sum ||p - c||^z - eps/k^2 optcont``."""
    if G.d != P.dim:
        raise VerifyError(f"map expects dimension {G.d}, set has {P.dim}")
    exact = optcont_exact
    if optcont is None:
        optcont, exact = optcont_value(P, k, z, budget)
    factor = (1.0 - eps) ** (3 * z)
    w = P.weights.astype(np.float64)
    a, b = preserve_sum_terms(P, c, z, G)
    mask, excess = worst_subset(a, b, w, factor)
    slack = eps / k**2 * optcont
    lhs = float(w[mask] @ a[mask])
    rhs_main = factor * float(w[mask] @ b[mask])
    passed = excess >= -slack - _REL_TOL * max(rhs_main, slack, 1e-300)
    return GuaranteeReport(
        "preserve-sum", bool(passed), _ratio(lhs, float(w[mask] @ b[mask])),
        {"subset": np.flatnonzero(mask).tolist()},
        {"min_excess": excess, "slack": slack, "optcont": optcont, "margin": excess + slack, "factor": factor},
        exact,
    )


def _symmetry_check(X: WeightedPointSet, c: np.ndarray, tol: float) -> None:
    mirror = 2.0 * c - X.points
    scale = max(1.0, float(np.abs(X.points).max()), float(np.abs(c).max()))
    D = distance_matrix(mirror, X.points)
    j = np.argmin(D, axis=1)
    if np.any(D[np.arange(len(X)), j] > tol * scale) or np.any(X.weights[j] != X.weights):
        raise VerifyError("point set is not symmetric about the given center")


def _cost_at(X: WeightedPointSet, centers: np.ndarray, z: float) -> np.ndarray:
    return distance_matrix(centers, X.points, z) @ X.weights.astype(np.float64)


def check_central_symmetric(X: WeightedPointSet, c, z: float, probes: int = 1000, seed: int = 0,
                            tol: float = 1e-9, symmetry_tol: float = 1e-9) -> GuaranteeReport:
    """The symmetry center minimises the 1-center cost of a centrally symmetric set.

    Competitors: the computed continuous center plus ``probes`` seeded points
    (data points, jittered copies of ``c`` at scales across the diameter, and
    random convex combinations).
    """
    c = as_point(c)
    z = check_power(z)
    if c.shape[0] != X.dim:
        raise VerifyError("center dimension does not match the set")
    _symmetry_check(X, c, symmetry_tol)
    rng = np.random.default_rng(seed)
    cc = continuous_center(X, z)
    diam = max(X.diameter(), 1e-12)
    n_jit = probes // 2
    n_data = min(len(X), probes // 4)
    scales = diam * 10.0 ** rng.uniform(-8, 0, size=(n_jit, 1))
    dirs = rng.standard_normal((n_jit, X.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    mix = rng.dirichlet(np.ones(len(X)), size=probes - n_jit - n_data)
    cand = np.vstack([cc[None, :], c + scales * dirs, X.points[:n_data], mix @ X.points])
    costs = _cost_at(X, cand, z)
    base = float(_cost_at(X, c[None, :], z)[0])
    j = int(np.argmin(costs))
    passed = base <= float(costs[j]) + tol * max(1.0, base)
    rel = float(np.linalg.norm(cc - c)) / max(1.0, float(np.linalg.norm(c)), diam)
    return GuaranteeReport(
        "central-symmetric", bool(passed), _ratio(base, float(costs[j])),
        {"competitor": cand[j].tolist()},
        {"cost_center": base, "cost_best_probe": float(costs[j]), "continuous_center_offset": rel,
         "probes": int(cand.shape[0])},
    )


# -- witness re-evaluation ----------------------------------------------------------


def reevaluate(report: GuaranteeReport, inst: ClusteringInstance, G: GaussianMap, **kw) -> float:
    """Recompute ``worst_ratio`` from the report's witness alone."""
    w = inst.P.weights.astype(np.float64)
    rows = np.arange(len(inst.P))
    name = report.check_name
    if name == "expansion":
        Ct = list(report.witness["target_centers"])
        Cs = list(report.witness["source_centers"])
        a = float(w @ distance_matrix(G.image(inst.P.points), G.image(inst.Q.points[Ct]), inst.z).min(axis=1))
        b = float(w @ distance_matrix(inst.P.points, inst.Q.points[Cs], inst.z).min(axis=1))
        return _ratio(a, b)
    if name in ("contraction", "fixed-solution"):
        C = list(report.witness["centers"])
        part = np.asarray(report.witness["partition"], dtype=np.intp)
        a = float(w @ distance_matrix(G.image(inst.P.points), G.image(inst.Q.points[C]), inst.z)[rows, part])
        b = float(w @ distance_matrix(inst.P.points, inst.Q.points[C], inst.z)[rows, part])
        return _ratio(a, b)
    if name == "relaxed-contraction":
        C = list(report.witness["centers"])
        a = float(w @ distance_matrix(G.image(inst.P.points), G.image(inst.Q.points[C]), inst.z).min(axis=1))
        b = float(w @ distance_matrix(inst.P.points, inst.Q.points[C], inst.z).min(axis=1))
        bound = min(report.details["alpha"] * report.details["opt"], (1.0 - report.details["eps"]) * b)
        return _ratio(a, bound)
    if name == "preserve-sum":
        mask = np.zeros(len(inst.P), dtype=bool)
        mask[report.witness["subset"]] = True
        a, b = preserve_sum_terms(inst.P, kw["c"], inst.z, G)
        return _ratio(float(w[mask] @ a[mask]), float(w[mask] @ b[mask]))
    raise VerifyError(f"no re-evaluation rule for {name!r}")


# -- good events --------------------------------------------------------------------


@dataclass(frozen=True)
class GoodEventsReport:
    events: dict
    thresholds: list
    buffers: list
    beta: dict
    gamma: dict
    notes: list

    @property
    def all_pass(self) -> bool:
        return all(e["pass"] for e in self.events.values())


def threshold_levels(inst: ClusteringInstance, centers: np.ndarray, opt_value: float, alpha: float):
    """``l_i = max{l : w(S_i* within r_l of c_i) * r_l^z > alpha opt}`` per center (None if S_i* empty)."""
    z = inst.z
    if not opt_value > 0:
        raise VerifyError("threshold levels need a positive optimum")
    r0 = opt_value ** (1.0 / z)
    D = distance_matrix(inst.P.points, centers)
    owner = np.argmin(D, axis=1)
    dist = D[np.arange(D.shape[0]), owner]
    out = []
    for i in range(centers.shape[0]):
        mine = owner == i
        total = int(inst.P.weights[mine].sum())
        if total == 0:
            out.append(None)
            continue
        # the condition reads |P_l| > alpha 2^(lz); it fails once alpha 2^(lz) >= |S_i*|
        top = int(math.ceil(math.log2(max(total, 2)) / z)) + 1
        ell = top
        while True:
            cnt = int(inst.P.weights[mine & (dist <= r0 / 2.0**ell)].sum())
            if cnt * (r0 / 2.0**ell) ** z > alpha * opt_value:
                break
            ell -= 1
        out.append(ell)
    return out


def diagnostic_level_range(inst: ClusteringInstance, centers, opt_value: float, eps: float,
                           alpha: float = DEFAULT_ALPHA, L: float = DEFAULT_L) -> tuple[int, int]:
    """Smallest level range covering every ``j_p`` over P and Q and every buffer."""
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    r0 = opt_value ** (1.0 / inst.z)
    U = np.vstack([inst.P.points, inst.Q.points])
    lev, _, _, d = levels_for(U, C, r0)
    lev = lev[d > 0]
    lo_b = math.ceil(math.log2(2000.0 * L * L))
    hi_b = math.ceil(math.log2(alpha * inst.k))
    th = [t for t in threshold_levels(inst, C, opt_value, alpha) if t is not None]
    lo = int(lev.min()) if lev.size else 0
    hi = int(lev.max()) if lev.size else 0
    if th:
        lo = min(lo, min(th) - lo_b)
        hi = max(hi, max(th) + hi_b)
    return lo, hi


def build_diagnostic_hierarchy(inst: ClusteringInstance, centers, opt_value: float, eps: float,
                               alpha: float = DEFAULT_ALPHA, L: float = DEFAULT_L) -> NetHierarchy:
    lo, hi = diagnostic_level_range(inst, centers, opt_value, eps, alpha, L)
    r0 = opt_value ** (1.0 / inst.z)
    return build_hierarchy(inst.P, inst.Q, centers, r0, lo, hi, eps, "relaxed", opt_value)


def _event(value, bound, passed, margin, **extra):
    return {"value": float(value), "bound": float(bound), "pass": bool(passed), "margin": float(margin), **extra}


def good_events_diagnostics(inst: ClusteringInstance, hierarchy: NetHierarchy, G: GaussianMap,
                            alpha: float = DEFAULT_ALPHA, L: float = DEFAULT_L,
                            tail_rate: float = DEFAULT_TAIL_RATE) -> GoodEventsReport:
    """Evaluate events (a), (c)-(h) around the optimal centers stored in ``hierarchy``.

    Every "for all y" ranges over the finite set P and Q.  Asymptotic bounds are
    instantiated as ``exp(-tail_rate eps^2 t) opt`` for the first sum of (a),
    ``20^z opt`` for its second sum, and ``exp(-tail_rate t)`` in (h).
    """
    if hierarchy.opt_value is None:
        raise VerifyError("hierarchy must carry the optimal value")
    z, eps, k = inst.z, hierarchy.eps, inst.k
    opt_value = float(hierarchy.opt_value)
    t = G.t
    C = hierarchy.centers
    U = hierarchy.points
    n = hierarchy.n_data
    w = inst.P.weights.astype(np.float64)
    if U.shape[0] != n + len(inst.Q) and U.shape[0] != n:
        raise VerifyError("hierarchy was not built on this instance")
    r0 = hierarchy.r0
    GU = G.image(U)
    GC = G.image(C)
    lev, rad, own, dist = levels_for(U, C, r0)
    on_center = dist <= 0
    rad = np.where(on_center, 0.0, rad)

    needed = set(lev[~on_center].tolist())
    thresholds = threshold_levels(inst, C, opt_value, alpha)
    lo_b = math.ceil(math.log2(2000.0 * L * L))
    hi_b = math.ceil(math.log2(alpha * k))
    buffers = [None if th is None else (th - lo_b, th + hi_b) for th in thresholds]
    for b in buffers:
        if b is not None:
            needed.update(range(b[0], b[1] + 1))
    missing = sorted(lv for lv in needed if lv not in hierarchy.nets)
    if missing:
        raise VerifyError(f"hierarchy lacks levels {missing}")

    D = distance_matrix(U, U)
    DG = distance_matrix(GU, GU)
    beta, gamma = {}, {}
    for ell, net in hierarchy.nets.items():
        idx = net.member_indices
        if idx.size > 1:
            sub = D[np.ix_(idx, idx)]
            iu = np.triu_indices(idx.size, 1)
            shrink = (1.0 - eps - DG[np.ix_(idx, idx)][iu] / sub[iu]) / eps
            beta[ell] = max(0.0, float(shrink.max()))
        else:
            beta[ell] = 0.0
        rr = eps**3 * hierarchy.radius(ell)
        near = D[idx] <= rr
        gamma[ell] = float((DG[idx][near]).max() / rr) if near.any() else 0.0

    P_rows = np.arange(n)
    beta_p = np.array([0.0 if on_center[p] else beta[int(lev[p])] for p in P_rows])
    gamma_p = np.array([0.0 if on_center[p] else gamma[int(lev[p])] for p in P_rows])
    rz = rad[:n] ** z
    events = {}

    a1 = float(w @ (beta_p * rz))
    b1 = math.exp(-tail_rate * eps * eps * t) * opt_value
    a2 = float(w @ (gamma_p**z * rz))
    b2 = 20.0**z * opt_value
    events["a"] = _event(a1, b1, a1 <= b1 and a2 <= b2, min(b1 - a1, b2 - a2),
                         gamma_sum=a2, gamma_bound=b2)

    buf_levels = sorted({lv for b in buffers if b is not None for lv in range(b[0], b[1] + 1)})
    worst_gamma = max((gamma[lv] for lv in buf_levels), default=0.0)
    events["c"] = _event(worst_gamma, 10.0, worst_gamma <= 10.0, 10.0 - worst_gamma)

    factor = (1.0 - eps) ** (3 * z)
    slack = eps / k**2 * opt_value
    worst_excess = 0.0
    MP = distance_matrix(inst.P.points, U, z)
    MGP = distance_matrix(GU[:n], GU, z)
    for lv in buf_levels:
        for u in hierarchy.nets[lv].member_indices:
            _, ex = worst_subset(MGP[:, u], MP[:, u], w, factor)
            worst_excess = min(worst_excess, ex)
    events["d"] = _event(worst_excess, -slack, worst_excess >= -slack, worst_excess + slack)

    DC = distance_matrix(U, C)
    DGC = distance_matrix(GU, GC)
    e_margin, f_margin = math.inf, math.inf
    e_val, f_val = 0.0, math.inf
    for i, th in enumerate(thresholds):
        if th is None:
            continue
        r = r0 / 2.0**th
        inside = DC[:, i] <= 40.0 * L * r
        if inside.any():
            v = float(DGC[inside, i].max())
            e_val = max(e_val, v / r)
            e_margin = min(e_margin, (400.0 * L * r - v) / r)
        outside = DC[:, i] > 2000.0 * L * L * r
        if outside.any():
            v = float(DGC[outside, i].min())
            f_val = min(f_val, v / r)
            f_margin = min(f_margin, (v - 2000.0 * L * r) / r)
    events["e"] = _event(e_val, 400.0 * L, e_margin >= 0, e_margin)
    events["f"] = _event(f_val, 2000.0 * L, f_margin > 0, f_margin)

    owner_P = own[:n]
    g_ok, g_margin, g_vals = True, math.inf, []
    for i, th in enumerate(thresholds):
        if th is None:
            continue
        r = r0 / 2.0**th
        members = np.flatnonzero((owner_P == i) & (dist[:n] <= r))
        far = D[members] > 9.0 * L * r
        xi = np.where(far, DG[members], np.inf).min(axis=1)
        total = float(w[members] @ (xi**z))
        g_vals.append(total)
        g_ok &= total > alpha * opt_value
        g_margin = min(g_margin, total / (alpha * opt_value) - 1.0 if opt_value > 0 else math.inf)
    events["g"] = _event(min(g_vals) if g_vals else math.inf, alpha * opt_value, g_ok, g_margin)

    h_ok, h_margin, h_val = True, math.inf, 0.0
    h_rate = math.exp(-tail_rate * t)
    for i in range(C.shape[0]):
        members = np.flatnonzero(owner_P == i)
        if members.size == 0:
            continue
        rp = rad[members]
        far = D[members] > 9.0 * L * rp[:, None]
        eta = np.where(far, DG[members], np.inf).min(axis=1)
        deficit = float(w[members] @ np.maximum(0.0, (9.0 * rp) ** z - eta**z))
        bound = h_rate * float(w[members] @ rp**z)
        h_val = max(h_val, deficit)
        h_ok &= deficit <= bound
        h_margin = min(h_margin, bound - deficit)
    events["h"] = _event(h_val, h_rate, h_ok, h_margin)

    notes = ["the event list has no item (b); items are labelled a, c, d, e, f, g, h"]
    return GoodEventsReport(events, thresholds, buffers, beta, gamma, notes)


# -- trials ---------------------------------------------------------------------------


def run_trials(check_fn, trials: int, base_seed: int, workers: int = 1) -> TrialSummary:
    """Run ``check_fn(seed)`` for ``seed = base_seed + i``; results keep seed order."""
    if trials < 1:
        raise VerifyError("trials must be >= 1")
    seeds = [base_seed + i for i in range(trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(check_fn, seeds))
    else:
        reports = [check_fn(s) for s in seeds]
    ok = sum(bool(r.passed if isinstance(r, GuaranteeReport) else r) for r in reports)
    return TrialSummary(trials, ok, ok / trials, seeds, reports)


def seeded_check(name: str, inst: ClusteringInstance, t: int | None, eps: float, alpha: float = DEFAULT_ALPHA,
                 identity: bool = False, **params):
    """A ``seed -> GuaranteeReport`` closure drawing a fresh t x d map per seed."""
    if name not in CHECKS:
        raise VerifyError(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
    d = inst.P.dim
    if name == "preserve-sum" and params.get("optcont") is None:
        # independent of the map, so settle it once for all seeds
        params["optcont"], params["optcont_exact"] = optcont_value(inst.P, inst.k, inst.z)

    def run(seed: int) -> GuaranteeReport:
        G = GaussianMap.identity(d) if identity else sample_map(d, t, seed)
        return CHECKS[name](inst, G, eps, alpha, params)

    return run


def _run_fixed_solution(inst, G, eps, alpha, params):
    C = params.get("centers")
    if C is None:
        C = opt_from_matrix(inst.cost_matrix(), inst.P.weights, inst.n_centers, inst.Q.points).solution.center_indices
    part = params.get("partition")
    if part is None:
        part = np.argmin(distance_matrix(inst.P.points, inst.Q.points[list(C)]), axis=1)
    return check_fixed_solution_expansion(inst, C, part, G, eps)


def _run_preserve_sum(inst, G, eps, alpha, params):
    c = params.get("center")
    c = inst.P.points[0] if c is None else c
    return check_preserve_sum(inst.P, c, inst.k, inst.z, eps, G, params.get("optcont"),
                              optcont_exact=params.get("optcont_exact", True))


CHECKS = {
    "expansion": lambda inst, G, eps, alpha, p: check_expansion(inst, G, eps, p.get("budget", EXACT_BUDGET)),
    "contraction": lambda inst, G, eps, alpha, p: check_contraction_all_centers_partitions(
        inst, G, eps, p.get("budget", EXACT_BUDGET)),
    "relaxed-contraction": lambda inst, G, eps, alpha, p: check_relaxed_contraction(
        inst, G, eps, alpha, p.get("budget", EXACT_BUDGET), opt_value=p.get("opt")),
    "fixed-solution": _run_fixed_solution,
    "preserve-sum": _run_preserve_sum,
}
