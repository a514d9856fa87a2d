"""Points, weighted point sets, distances and the generalized triangle bounds.

A point is a 1-d float64 array; a :class:`WeightedPointSet` stores distinct
points plus positive integer multiplicities.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_RTOL = 1e-9


class GeometryError(ValueError):
    """Invalid point, point set, or parameter."""


class DimensionMismatch(GeometryError):
    pass


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise GeometryError(f"a point must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point has non-finite coordinates")
    return arr


def check_power(z: float) -> float:
    z = float(z)
    if not z >= 1.0 or not math.isfinite(z):
        raise GeometryError(f"power exponent z must be >= 1, got {z}")
    return z


def _same_dim(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape:
        raise DimensionMismatch(f"dimension mismatch: {p.shape[0]} vs {q.shape[0]}")


def dist(p, q) -> float:
    p, q = as_point(p), as_point(q)
    _same_dim(p, q)
    return float(np.linalg.norm(p - q))


def powered_dist(p, q, z: float) -> float:
    z = check_power(z)
    d = dist(p, q)
    return d if z == 1.0 else d**z


def triangle_bounds(d_pr: float, d_qr: float, z: float, eps: float) -> tuple[float, float]:
    """Bracket ``dist(p, q)**z`` given ``dist(p, r)`` and ``dist(q, r)``.

    For any metric triple the returned ``(lower, upper)`` satisfy
    ``lower <= dist(p, q)**z <= upper``.
    """
    z = check_power(z)
    if not 0.0 < eps < 1.0:
        raise GeometryError(f"eps must lie in (0, 1), got {eps}")
    if d_pr < 0 or d_qr < 0:
        raise GeometryError("distances must be nonnegative")
    a, b = d_pr**z, d_qr**z
    lower = (1.0 - z * eps) * a - eps ** (-z) * b
    upper = (1.0 + eps) ** (z - 1.0) * a + ((1.0 + eps) / eps) ** (z - 1.0) * b
    return lower, upper


def distance_matrix(a: np.ndarray, b: np.ndarray, z: float = 1.0) -> np.ndarray:
    """All pairwise ``||a_i - b_j||**z`` as an ``(len(a), len(b))`` array."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = cdist(a, b)
    if z != 1.0:
        out **= z
    return out


@dataclass(frozen=True, eq=False)
class WeightedPointSet:
    """Finite multiset of points in R^d.

    ``points`` holds distinct rows; ``weights`` are their multiplicities.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise GeometryError(f"points must be a non-empty (m, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point set has non-finite coordinates")
        w = np.asarray(self.weights)
        if w.shape != (pts.shape[0],):
            raise GeometryError("need exactly one weight per point")
        if not np.all(np.equal(np.mod(w, 1), 0)) or np.any(w < 1):
            raise GeometryError("weights must be positive integers")
        w = w.astype(np.int64)
        if pts.shape[0] > 1 and np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise GeometryError("stored points must be distinct; carry multiplicity in weights")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points, weights=None, merge=False) -> "WeightedPointSet":
        """Build a set, optionally folding repeated rows into their weight."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        w = np.ones(pts.shape[0], dtype=np.int64) if weights is None else np.asarray(weights)
        if merge and pts.shape[0] > 1:
            uniq, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
            inverse = inverse.reshape(-1)
            merged = np.zeros(uniq.shape[0], dtype=np.int64)
            np.add.at(merged, inverse, w.astype(np.int64))
            # keep first-occurrence order
            order = np.argsort(first, kind="stable")
            return cls(uniq[order], merged[order])
        return cls(pts, w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        """Total multiplicity ``n``."""
        return int(self.weights.sum())

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.points[i]

    def subset(self, indices) -> "WeightedPointSet":
        idx = np.asarray(indices, dtype=np.intp)
        return WeightedPointSet(self.points[idx], self.weights[idx])

    def union(self, other: "WeightedPointSet") -> "WeightedPointSet":
        if other.dim != self.dim:
            raise DimensionMismatch(f"dimension mismatch: {self.dim} vs {other.dim}")
        return WeightedPointSet.from_points(
            np.vstack([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
            merge=True,
        )

    def expanded(self) -> np.ndarray:
        """Rows repeated by multiplicity; only sensible for small sets."""
        return np.repeat(self.points, self.weights, axis=0)

    def diameter(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(distance_matrix(self.points, self.points).max())


def is_metric_sample(points: np.ndarray, rtol: float = 1e-12) -> bool:
    D = distance_matrix(points, points)
    if not np.array_equal(D, D.T):
        return False
    # D[i,k] <= D[i,j] + D[j,k] for all triples
    slack = D[:, None, :] - (D[:, :, None] + D[None, :, :])
    return bool(np.all(slack <= rtol * (1.0 + D.max())))


# -- CSV point-set format ---------------------------------------------------


def write_point_set(ps: WeightedPointSet, path) -> None:
    """Write ``# dim=<d>`` then one ``w,x1,...,xd`` line per point."""
    buf = io.StringIO()
    buf.write(f"# dim={ps.dim}\n")
    for w, row in zip(ps.weights, ps.points):
        buf.write(str(int(w)))
        for x in row:
            buf.write(",")
            buf.write(repr(float(x)))
        buf.write("\n")
    Path(path).write_text(buf.getvalue())


def read_point_set(path) -> WeightedPointSet:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# dim="):
        raise GeometryError(f"{path}: missing '# dim=<d>' header")
    d = int(lines[0][len("# dim="):])
    weights, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != d + 1:
            raise GeometryError(f"{path}:{lineno}: expected {d + 1} fields, got {len(fields)}")
        weights.append(int(fields[0]))
        rows.append([float(x) for x in fields[1:]])
    if not rows:
        raise GeometryError(f"{path}: no points")
    return WeightedPointSet(np.array(rows, dtype=np.float64).reshape(-1, d), np.array(weights))
