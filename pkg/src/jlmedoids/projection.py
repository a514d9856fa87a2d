"""Seeded Gaussian JL maps and target-dimension recipes.

Random stream ``splitmix64-boxmuller-v1``
-----------------------------------------
Uniform word ``i`` (``i = 0, 1, ...``) of seed ``s`` is SplitMix64 applied to the
counter state ``s + (i + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``.  Words are paired
``(2j, 2j + 1)`` into ``u1 = ((x >> 11) + 1) / 2**53`` in (0, 1] and
``u2 = (x >> 11) / 2**53`` in [0, 1); normal ``2j`` is
``sqrt(-2 ln u1) cos(2 pi u2)`` and normal ``2j + 1`` the matching sine.
A t x d map takes the first ``t*d`` normals in row-major order, scaled by
``1/sqrt(t)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import DimensionMismatch, WeightedPointSet, as_point

STREAM_NAME = "splitmix64-boxmuller-v1"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53

MAP_MAGIC = b"GJLMAP01"
_HEADER = struct.Struct("<8sIIQ")  # 24 bytes
_NO_SEED = _MASK64


class ProjectionError(ValueError):
    pass


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Words ``start .. start+count-1`` of the counter-based SplitMix64 stream."""
    counters = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(seed & _MASK64) + counters * _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def normals(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Standard normals ``offset .. offset+count-1`` of the seeded stream."""
    if count <= 0:
        return np.empty(0, dtype=np.float64)
    first_pair = offset // 2
    last_pair = (offset + count - 1) // 2
    words = splitmix64(seed, 2 * first_pair, 2 * (last_pair - first_pair + 1)).reshape(-1, 2)
    u1 = ((words[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53
    u2 = (words[:, 1] >> np.uint64(11)).astype(np.float64) * _TWO_M53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * words.shape[0], dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    lo = offset - 2 * first_pair
    return out[lo:lo + count]


@dataclass(frozen=True, eq=False)
class GaussianMap:
    """A linear map R^d -> R^t given by its ``(t, d)`` matrix.

    ``seed`` is None for maps that were not drawn from the stream (e.g. the
    identity injected in tests).
    """

    matrix: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ProjectionError(f"map matrix must be 2-d and non-empty, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def t(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, d: int) -> "GaussianMap":
        return cls(np.eye(d))

    def apply(self, p) -> np.ndarray:
        return apply(self, p)

    def apply_set(self, P: WeightedPointSet) -> WeightedPointSet:
        return apply_set(self, P)

    def image(self, X: np.ndarray) -> np.ndarray:
        """Rows of ``X`` mapped; no validation, for internal hot paths."""
        return X @ self.matrix.T


def sample_map(d: int, t: int, seed: int) -> GaussianMap:
    if d < 1 or t < 1:
        raise ProjectionError(f"need d >= 1 and t >= 1, got d={d}, t={t}")
    g = normals(seed, t * d).reshape(t, d) / math.sqrt(t)
    return GaussianMap(g, seed=int(seed))


def apply(G: GaussianMap, p) -> np.ndarray:
    p = as_point(p)
    if p.shape[0] != G.d:
        raise DimensionMismatch(f"point has dimension {p.shape[0]}, map expects {G.d}")
    return G.matrix @ p


def apply_set(G: GaussianMap, P: WeightedPointSet) -> WeightedPointSet:
    """Image of ``P``; row ``i`` of the result is the image of row ``i`` of ``P``.

    Distinct points may collide under G (e.g. kernel directions); the
    correspondence is kept by returning a set whose rows stay aligned, so the
    result is only a valid WeightedPointSet when images are distinct.  Use
    :meth:`GaussianMap.image` when alignment matters more than distinctness.
    """
    if P.dim != G.d:
        raise DimensionMismatch(f"set has dimension {P.dim}, map expects {G.d}")
    return WeightedPointSet(G.image(P.points), P.weights)


# -- binary export ------------------------------------------------------------


def write_map(G: GaussianMap, path) -> None:
    seed = _NO_SEED if G.seed is None else G.seed & _MASK64
    header = _HEADER.pack(MAP_MAGIC, G.t, G.d, seed)
    body = np.ascontiguousarray(G.matrix, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_map(path) -> GaussianMap:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ProjectionError(f"{path}: truncated header")
    magic, t, d, seed = _HEADER.unpack_from(raw)
    if magic != MAP_MAGIC:
        raise ProjectionError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * t * d:
        raise ProjectionError(f"{path}: expected {8 * t * d} payload bytes, got {len(body)}")
    m = np.frombuffer(body, dtype="<f8").reshape(t, d).astype(np.float64)
    return GaussianMap(m, seed=None if seed == _NO_SEED else int(seed))


# -- target dimension ----------------------------------------------------------

VARIANTS = (
    "forall-centers-partitions",
    "relaxed",
    "candidate-multiplicative",
    "candidate-relaxed",
    "fixed-solution",
)


@dataclass(frozen=True)
class DimensionRecipe:
    variant: str
    eps: float
    z: float = 1.0
    ddim: float = 1.0
    k: int = 1
    n: int | None = None
    s: int | None = None
    alpha: float | None = None
    c_const: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ProjectionError(f"unknown recipe variant {self.variant!r}; choose from {VARIANTS}")
        # 0.5 itself is admitted so the worked examples at eps = 1/2 evaluate
        if not 0.0 < self.eps <= 0.5:
            raise ProjectionError(f"eps must lie in (0, 1/2], got {self.eps}")
        if self.k < 1:
            raise ProjectionError("k must be >= 1")
        if self.z < 1:
            raise ProjectionError("z must be >= 1")
        if self.c_const <= 0:
            raise ProjectionError("c_const must be positive")
        if self.variant in ("relaxed", "candidate-relaxed"):
            if self.alpha is None:
                raise ProjectionError(f"variant {self.variant} requires alpha")
            if not self.alpha > 2:
                raise ProjectionError("alpha must exceed 2")
        if self.variant in ("forall-centers-partitions", "candidate-relaxed") and self.n is None:
            raise ProjectionError(f"variant {self.variant} requires n")
        if self.variant == "candidate-multiplicative" and self.s is None:
            raise ProjectionError("variant candidate-multiplicative requires s")

    @classmethod
    def from_mapping(cls, m: dict) -> "DimensionRecipe":
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        unknown = set(m) - known
        if unknown:
            raise ProjectionError(f"unknown recipe fields: {sorted(unknown)}")
        return cls(**m)


def _lg(x: float) -> float:
    """log2 clamped below at 1."""
    if x <= 2.0:
        return 1.0
    return math.log2(x)


def target_dimension(recipe: DimensionRecipe) -> int:
    """Target dimension for a guarantee, with the hidden constant made explicit.

    ``ceil(c_const * z^2 / eps^2 * (log terms))`` where every log is base 2 and
    clamped below at 1.
    """
    r = recipe
    zq = _lg(r.z / r.eps)
    if r.variant == "forall-centers-partitions":
        terms = r.ddim * zq + _lg(r.k) + _lg(_lg(r.n))
    elif r.variant == "relaxed":
        terms = r.ddim * zq + r.z * zq + _lg(r.k) + _lg(_lg(r.alpha))
    elif r.variant == "candidate-multiplicative":
        terms = _lg(r.s) + r.z * zq
    elif r.variant == "candidate-relaxed":
        terms = r.ddim * zq + _lg(r.k) + _lg(_lg(r.alpha)) + _lg(_lg(r.n))
    else:  # fixed-solution
        terms = _lg(1.0 / r.eps)
    value = r.c_const * r.z**2 / r.eps**2 * terms
    # guard against 16.000000000000004-style round-up
    return max(1, math.ceil(round(value, 9)))
