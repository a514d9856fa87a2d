"""Phase experiments on the hard instances: how often a map of dimension t lets
some center look cheaper than it is."""

from __future__ import annotations

import numpy as np

from .clustering import ClusteringInstance
from .geometry import distance_matrix
from .instances import candidate_column_ratios, gen_candidate, gen_decay, gen_kernel_demo, kernel_center
from .projection import GaussianMap, sample_map


def center_ratios(inst: ClusteringInstance, G: GaussianMap) -> np.ndarray:
    """``cost(G(P), Gc) / cost(P, c)`` for every candidate ``c`` of Q (1-center costs)."""
    w = inst.P.weights.astype(np.float64)
    src = w @ distance_matrix(inst.P.points, inst.Q.points, inst.z)
    tgt = w @ distance_matrix(G.image(inst.P.points), G.image(inst.Q.points), inst.z)
    out = np.ones_like(src)
    np.divide(tgt, src, out=out, where=src > 0)
    return out


def kernel_trial(n: int, d: int, seed: int, t: int | None = None) -> dict:
    """Draw ``G`` with ``t = d - 1`` rows, pick ``c`` in its kernel, and measure both costs."""
    inst = gen_kernel_demo(n, d)
    G = sample_map(d, d - 1 if t is None else t, seed)
    c = kernel_center(G)
    w = inst.P.weights.astype(np.float64)
    gc = G.matrix @ c
    return {
        "seed": seed,
        "gc_norm": float(np.linalg.norm(gc)),
        "c_norm": float(np.linalg.norm(c)),
        "cost_projected": float(w @ distance_matrix(G.image(inst.P.points), gc[None, :])[:, 0]),
        "cost": float(w @ distance_matrix(inst.P.points, c[None, :])[:, 0]),
    }


def decay_event(inst: ClusteringInstance, t: int, eps_prime: float, seed: int) -> tuple[bool, float]:
    """Whether some ``c`` in P has projected cost at most ``(1 - eps') cost(P, c)``."""
    r = center_ratios(inst, sample_map(inst.P.dim, t, seed))
    best = float(r.min())
    return best <= 1.0 - eps_prime, best


def decay_phase(n: int, ts, eps_prime: float, seeds) -> dict:
    """Event rate per t on the decay family (one weighted origin)."""
    inst = gen_decay(n)
    seeds = list(seeds)
    return {t: sum(decay_event(inst, t, eps_prime, s)[0] for s in seeds) / len(seeds) for t in ts}


def candidate_event(s: int, t: int, eps_prime: float, seed: int) -> tuple[bool, float]:
    """Candidate family with ``s`` candidates: the ratio for ``base**i e_i`` is column i's norm."""
    best = float(candidate_column_ratios(sample_map(s, t, seed)).min())
    return best <= 1.0 - eps_prime, best


def candidate_event_dense(n: int, s: int, t: int, eps_prime: float, seed: int) -> tuple[bool, float]:
    """Same event evaluated on the materialised instance (small s only)."""
    inst = gen_candidate(n, s)
    best = float(center_ratios(inst, sample_map(s, t, seed)).min())
    return best <= 1.0 - eps_prime, best


def candidate_phase(s: int, ts, eps_prime: float, seeds) -> dict:
    seeds = list(seeds)
    return {t: sum(candidate_event(s, t, eps_prime, sd)[0] for sd in seeds) / len(seeds) for t in ts}


def is_nonincreasing(rates: dict) -> bool:
    vals = [rates[t] for t in sorted(rates)]
    return all(a >= b for a, b in zip(vals, vals[1:]))
