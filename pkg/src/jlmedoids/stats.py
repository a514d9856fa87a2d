"""Chi-square lower tail, norm concentration, and distortion statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import WeightedPointSet, as_point, distance_matrix
from .projection import GaussianMap, normals, sample_map

_CHUNK = 1 << 22  # normals per batch


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    stderr: float
    method: str
    trials: int = 0


def chi_square_lower_tail(t: int, eps: float, trials: int, seed: int) -> TailEstimate:
    """Monte Carlo ``Pr(X_t < t / (1 + eps))`` with ``X_t`` a sum of t squared normals."""
    if t <= 2:
        raise StatsError("t must exceed 2")
    if not 0 < eps < 0.5:
        raise StatsError("eps must lie in (0, 1/2)")
    if trials < 100:
        raise StatsError("need at least 100 trials")
    threshold = t / (1.0 + eps)
    per_batch = max(1, _CHUNK // t)
    hits = 0
    done = 0
    while done < trials:
        m = min(per_batch, trials - done)
        g = normals(seed, m * t, offset=done * t).reshape(m, t)
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", g, g) < threshold))
        done += m
    p = hits / trials
    return TailEstimate(p, math.sqrt(p * (1.0 - p) / trials), "monte-carlo", trials)


def chi_square_cdf_even(t: int, x: float) -> float:
    """Closed-form CDF ``1 - exp(-x/2) sum_{j < t/2} (x/2)^j / j!`` for even t."""
    if t < 2 or t % 2:
        raise StatsError(f"closed form needs an even t >= 2, got {t}")
    if x < 0:
        raise StatsError("x must be nonnegative")
    if x == 0:
        return 0.0
    h = 0.5 * x
    term = 1.0
    acc = 1.0
    for j in range(1, t // 2):
        term *= h / j
        acc += term
    return max(0.0, 1.0 - math.exp(-h) * acc)


def lower_tail_bound(t: int, eps: float, c: float) -> float:
    return math.exp(-c * eps * eps * t) / t


def fit_tail_constant(points) -> float:
    """Smallest ``c >= 0`` with ``p >= exp(-c eps^2 t) / t`` at every ``(t, eps, p)``."""
    c = 0.0
    for t, eps, p in points:
        if p <= 0:
            return math.inf
        if p * t < 1.0:
            c = max(c, -math.log(p * t) / (eps * eps * t))
    return c


def norm_failure_rate(x, t: int, eps: float, seeds) -> TailEstimate:
    """Fraction of seeded maps with ``||Gx||`` outside ``(1 +- eps) ||x||``."""
    x = as_point(x)
    nx = float(np.linalg.norm(x))
    if nx == 0:
        raise StatsError("x must be nonzero")
    seeds = list(seeds)
    fails = 0
    for s in seeds:
        r = float(np.linalg.norm(sample_map(x.shape[0], t, s).matrix @ x)) / nx
        fails += not (1.0 - eps < r < 1.0 + eps)
    p = fails / len(seeds)
    return TailEstimate(p, math.sqrt(p * (1 - p) / len(seeds)), "monte-carlo", len(seeds))


def norm_distortion_stats(P: WeightedPointSet, G: GaussianMap, bins: int = 20) -> dict:
    """Distribution of ``||Gp - Gq|| / ||p - q||`` over pairs of distinct stored points."""
    if len(P) < 2:
        raise StatsError("need at least two distinct points")
    X = P.points
    iu = np.triu_indices(X.shape[0], 1)
    D = distance_matrix(X, X)[iu]
    GX = G.image(X)
    DG = distance_matrix(GX, GX)[iu]
    ratios = DG / D
    counts, edges = np.histogram(ratios, bins=bins)
    worst = int(np.argmin(ratios))
    return {
        "pairs": int(ratios.size),
        "min": float(ratios.min()),
        "max": float(ratios.max()),
        "mean": float(ratios.mean()),
        "argmin_pair": (int(iu[0][worst]), int(iu[1][worst])),
        "histogram": counts.tolist(),
        "edges": edges.tolist(),
    }


def expected_excess_distortion(p, q, z: float, t: int, eps: float, trials: int, seed: int) -> TailEstimate:
    """MC mean of ``max(0, ||Gp-Gq||^z / ||p-q||^z - (1+eps)^z)`` over maps seeded ``seed + i``."""
    p, q = as_point(p), as_point(q)
    diff = p - q
    nd = float(np.linalg.norm(diff))
    if nd == 0:
        raise StatsError("p and q must differ")
    vals = np.empty(trials)
    cap = (1.0 + eps) ** z
    for i in range(trials):
        G = sample_map(diff.shape[0], t, seed + i)
        vals[i] = max(0.0, (float(np.linalg.norm(G.matrix @ diff)) / nd) ** z - cap)
    return TailEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
                        "monte-carlo", trials)
