"""Hard instances for the lower bounds and benign doubling fixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusteringInstance, _farthest_first
from .geometry import WeightedPointSet, distance_matrix
from .projection import GaussianMap


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int | None = None


def _half_log(n: int) -> int:
    return int(math.floor(0.5 * math.log2(n)))


def gen_basis(n: int, k: int = 2, z: float = 1.0) -> ClusteringInstance:
    """The first n standard basis vectors of R^n."""
    if n < 4 or n % 2:
        raise InstanceError(f"basis family needs an even n >= 4, got {n}")
    P = WeightedPointSet(np.eye(n), np.ones(n, dtype=np.int64))
    return ClusteringInstance(P, P, k, z)


def _axis_family(n: int, scales: np.ndarray, k: int) -> ClusteringInstance:
    m = scales.shape[0]
    d = m
    pts = np.zeros((m + 1, d))
    pts[np.arange(m), np.arange(m)] = scales
    origin_weight = n - m
    if origin_weight < 1:
        raise InstanceError("n too small for the requested number of axis points")
    w = np.ones(m + 1, dtype=np.int64)
    w[-1] = origin_weight
    P = WeightedPointSet(pts, w)
    return ClusteringInstance(P, P, k, 1.0)


def gen_decay(n: int) -> ClusteringInstance:
    """``2**-i e_i`` for ``i = 0..floor(log2(n)/2)`` plus the origin carrying the rest of n.

    The ambient dimension is the number of used axes; the origin is the last row.
    """
    if n < 16:
        raise InstanceError(f"decay family needs n >= 16, got {n}")
    m = _half_log(n)
    return _axis_family(n, 2.0 ** -np.arange(m + 1, dtype=np.float64), k=1)


def gen_eps_decay(n: int, eps: float) -> ClusteringInstance:
    """``(1-eps)**i e_i`` for ``i = 0..floor(log2(n)/2)`` plus a weighted origin; k = 2."""
    if n < 16:
        raise InstanceError(f"eps-decay family needs n >= 16, got {n}")
    if not 0 < eps < 0.5:
        raise InstanceError("eps must lie in (0, 1/2)")
    m = _half_log(n)
    return _axis_family(n, (1.0 - eps) ** np.arange(m + 1, dtype=np.float64), k=2)


def eps_decay_opt(n: int, eps: float) -> float:
    """Closed-form optimum of :func:`gen_eps_decay`: centers at the origin and e_0."""
    m = _half_log(n)
    return float(sum((1.0 - eps) ** i for i in range(1, m + 1)))


def adversarial_block_size(eps: float, i_star: int) -> int:
    return math.ceil(50.0 / eps * (1.0 - eps) ** (-i_star))


def adversarial_partition_feasible(n: int, eps: float, i_star: int) -> bool:
    """Whether the origin block of the partition fits inside half of the origin mass."""
    return adversarial_block_size(eps, i_star) <= n / 2


def candidate_exponents(s: int) -> np.ndarray:
    return np.arange(1, s + 1, dtype=np.float64)


def gen_candidate(n: int, s: int, base: float = 2.0) -> ClusteringInstance:
    """P = origin with weight n; Q = ``base**i e_i`` for ``i = 1..s``; k = 1.

    The candidate set is materialised densely (s x s), so keep s modest; the
    lower-bound experiment for large s uses :func:`candidate_column_ratios`.
    """
    if n < 1 or s < 1:
        raise InstanceError("need n >= 1 and s >= 1")
    if not base > 1:
        raise InstanceError("base must exceed 1")
    with np.errstate(over="ignore"):
        scales = base ** candidate_exponents(s)
    if not np.all(np.isfinite(scales)):
        raise InstanceError(f"base**s overflows float64 for base={base}, s={s}")
    P = WeightedPointSet(np.zeros((1, s)), np.array([n]))
    Q = WeightedPointSet(np.diag(scales), np.ones(s, dtype=np.int64))
    return ClusteringInstance(P, Q, 1, 1.0)


def candidate_column_ratios(G: GaussianMap) -> np.ndarray:
    """``cost(G(P), Gc) / cost(P, c)`` for every candidate ``c = base**i e_i``.

    With P at the origin both costs scale by ``n * base**i``, so the ratio is the
    norm of column ``i-1`` of G, whatever the base.
    """
    return np.linalg.norm(G.matrix, axis=0)


def gen_pairs(k: int) -> ClusteringInstance:
    """``(k+1)/2`` pairs ``(10 i e_1, 10 i e_1 + e_i)``; even k adds one far point."""
    if k < 1:
        raise InstanceError("k must be >= 1")
    kk = k if k % 2 else k - 1
    m = (kk + 1) // 2
    d = max(m, 1)
    rows = []
    for i in range(1, m + 1):
        a = np.zeros(d)
        a[0] = 10.0 * i
        b = a.copy()
        b[i - 1] += 1.0
        rows += [a, b]
    if kk != k:
        far = np.zeros(d)
        far[0] = -100.0 * (k + 1)
        rows.append(far)
    P = WeightedPointSet(np.array(rows), np.ones(len(rows), dtype=np.int64))
    return ClusteringInstance(P, P, k, 1.0)


def gen_kernel_demo(n: int, d: int) -> ClusteringInstance:
    """P = {0_d}^n as one point of weight n; pair with :func:`kernel_center`."""
    if d < 2:
        raise InstanceError("kernel demo needs d >= 2")
    P = WeightedPointSet(np.zeros((1, d)), np.array([n]))
    return ClusteringInstance(P, P, 1, 1.0)


def kernel_center(G: GaussianMap) -> np.ndarray:
    """A unit vector in the kernel of G (orthogonal complement of its row space)."""
    t, d = G.matrix.shape
    if t >= d:
        raise InstanceError(f"kernel may be trivial for t={t} >= d={d}")
    q, _ = np.linalg.qr(G.matrix.T, mode="complete")
    c = q[:, t]
    # one Gram-Schmidt pass against the rows to scrub rounding
    rows_q = q[:, :t]
    c = c - rows_q @ (rows_q.T @ c)
    c = c / np.linalg.norm(c)
    return _polish_unit(c)


def _polish_unit(c: np.ndarray) -> np.ndarray:
    """Nudge the largest coordinate by single ulps until the distance to the origin,
    as computed by :func:`distance_matrix`, is exactly 1."""
    c = c.copy()
    i = int(np.argmax(np.abs(c)))
    origin = np.zeros((1, c.shape[0]))
    for _ in range(64):
        nrm = float(distance_matrix(origin, c[None, :])[0, 0])
        if nrm == 1.0:
            break
        toward = 0.0 if nrm > 1.0 else np.copysign(np.inf, c[i])
        c[i] = np.nextafter(c[i], toward)
    return c


def gen_doubling(
    n: int,
    ddim_target: int,
    spread: float = 1.0,
    seed: int = 0,
    k: int = 2,
    z: float = 1.0,
    candidates: int | None = None,
    far_candidates: int = 0,
) -> ClusteringInstance:
    """n jittered sites of a ``ddim_target``-dimensional lattice patch, isometrically
    embedded in ``R^(4*ddim_target)``.

    ``candidates`` picks Q as a farthest-first subset of P of that size;
    ``far_candidates`` appends that many extra candidates on the lattice plane at
    50 times the patch diameter from its centroid.
    """
    m = int(ddim_target)
    if not 1 <= m <= 6:
        raise InstanceError("ddim_target must lie in [1, 6]")
    if n < 1:
        raise InstanceError("n must be >= 1")
    rng = np.random.default_rng(seed)
    side = math.ceil(n ** (1.0 / m) - 1e-9)
    while side**m < n:
        side += 1
    flat = rng.choice(side**m, size=n, replace=False)
    flat.sort()
    sites = np.stack(np.unravel_index(flat, (side,) * m), axis=1).astype(np.float64) * spread
    d = 4 * m
    frame, _ = np.linalg.qr(rng.standard_normal((d, m)))
    jitter_dir = rng.standard_normal((n, d))
    jitter_dir /= np.linalg.norm(jitter_dir, axis=1, keepdims=True)
    jitter = jitter_dir * (rng.uniform(0.0, 1.0, size=(n, 1)) * spread / 10.0)
    pts = sites @ frame.T + jitter
    P = WeightedPointSet(pts, np.ones(n, dtype=np.int64))
    if candidates is None and not far_candidates:
        return ClusteringInstance(P, P, k, z)
    Qrows = pts if candidates is None else pts[sorted(_farthest_first(pts, min(candidates, n), 0))]
    if far_candidates:
        center = sites.mean(axis=0)
        diam = max(spread, float(np.linalg.norm(sites.max(axis=0) - sites.min(axis=0))))
        dirs = rng.standard_normal((far_candidates, m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        far = (center + 50.0 * diam * dirs) @ frame.T
        Qrows = np.vstack([Qrows, far])
    Q = WeightedPointSet(Qrows, np.ones(Qrows.shape[0], dtype=np.int64))
    return ClusteringInstance(P, Q, k, z)


FAMILIES = {
    "basis": gen_basis,
    "decay": gen_decay,
    "eps-decay": gen_eps_decay,
    "candidate": gen_candidate,
    "pairs": gen_pairs,
    "kernel": gen_kernel_demo,
    "doubling": gen_doubling,
}


def make_instance(spec: InstanceSpec) -> ClusteringInstance:
    if spec.family not in FAMILIES:
        raise InstanceError(f"unknown family {spec.family!r}; choose from {sorted(FAMILIES)}")
    params = dict(spec.params)
    if spec.family == "doubling" and spec.seed is not None:
        params.setdefault("seed", spec.seed)
    try:
        return FAMILIES[spec.family](**params)
    except TypeError as exc:
        raise InstanceError(f"bad parameters for family {spec.family!r}: {exc}") from None
