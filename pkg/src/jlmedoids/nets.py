"""rho-nets, net hierarchies around optimal centers, and doubling-dimension estimates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .geometry import GeometryError, WeightedPointSet, as_point, distance_matrix

DEFAULT_LEVEL_CAP = 64


class NetError(ValueError):
    pass


def _coords(P) -> np.ndarray:
    if isinstance(P, WeightedPointSet):
        return P.points
    X = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if X.ndim != 2:
        raise GeometryError("expected an (m, d) array of points")
    return X


@dataclass(frozen=True, eq=False)
class Net:
    """Members and host are index arrays into the same point array."""

    member_indices: np.ndarray
    rho: float
    host_indices: np.ndarray

    def __len__(self):
        return int(self.member_indices.shape[0])

    def is_packing(self, points) -> bool:
        X = _coords(points)[self.member_indices]
        if X.shape[0] < 2:
            return True
        D = distance_matrix(X, X)
        np.fill_diagonal(D, np.inf)
        return bool(np.all(D > self.rho))

    def is_covering(self, points) -> bool:
        X = _coords(points)
        if self.host_indices.size == 0:
            return True
        if self.member_indices.size == 0:
            return False
        D = distance_matrix(X[self.host_indices], X[self.member_indices])
        return bool(np.all(D.min(axis=1) <= self.rho))


def build_net(P, host, rho: float) -> Net:
    """Greedy rho-net of ``host`` (indices into ``P``), scanned in ascending index order."""
    if not rho > 0:
        raise NetError(f"rho must be positive, got {rho}")
    host = np.unique(np.asarray(host, dtype=np.intp))
    if host.size == 0:
        raise NetError("cannot build a net of an empty host set")
    X = _coords(P)
    local = _backend.greedy_net(X[host], rho)
    return Net(host[local], float(rho), host)


def check_packing_bound(net: Net, P, ddim: float, c: float) -> dict:
    X = _coords(P)
    H = X[net.host_indices]
    diam = float(distance_matrix(H, H).max()) if H.shape[0] > 1 else 0.0
    bound = max(1.0, diam / net.rho) ** (c * ddim)
    size = len(net)
    return {"size": size, "bound": bound, "ratio": size / bound, "pass": size <= bound}


@dataclass(frozen=True)
class DdimEstimate:
    value: float
    method: str
    witness: tuple  # (center index, radius)
    cover_size: int = 1


def _thin_radii(radii: np.ndarray, ratio: float | None) -> np.ndarray:
    if ratio is None or radii.size <= 1:
        return radii
    kept = [radii[0]]
    for r in radii[1:]:
        if r >= kept[-1] * ratio:
            kept.append(r)
    if kept[-1] != radii[-1]:
        kept.append(radii[-1])
    return np.asarray(kept)


def estimate_ddim(P, centers=None, radius_ratio: float | None = None) -> DdimEstimate:
    """Greedy-cover upper estimate of the doubling dimension of ``P``.

    For every center ``p`` and every radius ``r`` in the distances from ``p`` to
    the other points, cover ``B(p, r)`` by radius-``r/2`` balls centred at points
    of ``P`` with greedy set cover; the estimate is ``max log2(cover size)``.

    Parameters
    ----------
    centers : sequence of int, optional
        Restrict the ball centers (default: all points).
    radius_ratio : float, optional
        Keep only radii growing by at least this factor per center, which makes
        large sets tractable at the cost of exhaustiveness.
    """
    X = _coords(P)
    n = X.shape[0]
    if n == 1:
        return DdimEstimate(0.0, "greedy-cover", (0, 0.0), 1)
    D = distance_matrix(X, X)
    cidx = range(n) if centers is None else centers
    qc, qr = [], []
    for p in cidx:
        radii = np.unique(D[p][D[p] > 0])
        radii = _thin_radii(radii, radius_ratio)
        qc.append(np.full(radii.size, p, dtype=np.intp))
        qr.append(radii)
    qc = np.concatenate(qc)
    qr = np.concatenate(qr)
    if qc.size == 0:  # every distance underflowed to 0
        return DdimEstimate(0.0, "greedy-cover", (0, 0.0), 1)
    sizes = _backend.cover_sizes(D, qc, qr)
    best = int(np.argmax(sizes))
    size = int(sizes[best])
    return DdimEstimate(math.log2(size), "greedy-cover", (int(qc[best]), float(qr[best])), size)


def level_of(p, centers, r0: float, ell_cap: int = DEFAULT_LEVEL_CAP) -> tuple[int, float, int]:
    """Level ``j`` with ``r0/2**(j+1) <= ||p - C*(p)|| <= r0/2**j`` and the owning center.

    The largest such ``j`` is returned; distances above ``r0`` give negative
    levels and a point on its center gets ``ell_cap``.
    """
    p = as_point(p)
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    d = distance_matrix(p[None, :], C)[0]
    owner = int(np.argmin(d))
    j = _level_from_distance(float(d[owner]), r0, ell_cap)
    return j, r0 / 2.0**j, owner


def _level_from_distance(d: float, r0: float, ell_cap: int) -> int:
    if d <= 0.0:
        return ell_cap
    j = math.floor(math.log2(r0 / d))
    # repair log rounding so the bracket holds exactly
    while r0 / 2.0**j < d:
        j -= 1
    while r0 / 2.0 ** (j + 1) >= d:
        j += 1
    return min(j, ell_cap)


def levels_for(points: np.ndarray, centers: np.ndarray, r0: float, ell_cap: int = DEFAULT_LEVEL_CAP):
    """Vectorised :func:`level_of` over rows: returns ``(levels, radii, owners, dists)``."""
    D = distance_matrix(points, centers)
    owners = np.argmin(D, axis=1)
    dists = D[np.arange(D.shape[0]), owners]
    levels = np.array([_level_from_distance(float(d), r0, ell_cap) for d in dists], dtype=np.int64)
    radii = r0 / np.power(2.0, levels.astype(np.float64))
    return levels, radii, owners, dists


@dataclass(eq=False)
class NetHierarchy:
    centers: np.ndarray
    r0: float
    ell_min: int
    ell_max: int
    eps: float
    variant: str
    points: np.ndarray  # rows of P followed by rows of Q
    n_data: int
    nets: dict = field(default_factory=dict)
    opt_value: float | None = None

    def radius(self, ell: int) -> float:
        return self.r0 / 2.0**ell

    @property
    def levels(self) -> range:
        return range(self.ell_min, self.ell_max + 1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant,
                "r0": self.r0,
                "eps": self.eps,
                "ell_min": self.ell_min,
                "ell_max": self.ell_max,
                "n_data": self.n_data,
                "centers": self.centers.tolist(),
                "levels": [
                    {
                        "level": ell,
                        "radius": self.radius(ell),
                        "rho": net.rho,
                        "members": net.member_indices.tolist(),
                        "hosts": int(net.host_indices.size),
                    }
                    for ell, net in sorted(self.nets.items())
                ],
            },
            indent=1,
        )


def build_hierarchy(
    P: WeightedPointSet,
    Q: WeightedPointSet | None,
    centers,
    r0: float,
    ell_min: int,
    ell_max: int,
    eps: float,
    variant: str = "relaxed",
    opt_value: float | None = None,
) -> NetHierarchy:
    """Nets at scale ``eps**3 * r_l`` for levels ``ell_min..ell_max``, ``r_l = r0 / 2**l``.

    ``variant="relaxed"`` hosts level ``l`` on the points of P and Q inside
    ``B(c_i, r_{l - ceil(log2 1/eps)})`` for any center; ``variant="forall"``
    hosts it on the points of each nearest-center cluster of P inside
    ``B(c_j, r_l)``.  Levels with no hosts are omitted.
    """
    if not r0 > 0:
        raise NetError("r0 must be positive")
    if ell_min > ell_max:
        raise NetError(f"invalid level range [{ell_min}, {ell_max}]")
    if not 0 < eps <= 0.5:
        raise NetError("eps must lie in (0, 1/2]")
    if variant not in ("relaxed", "forall"):
        raise NetError(f"unknown hierarchy variant {variant!r}")
    C = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    pts = P.points if Q is None or variant == "forall" else np.vstack([P.points, Q.points])
    D = distance_matrix(pts, C)
    h = NetHierarchy(C, float(r0), ell_min, ell_max, eps, variant, pts, len(P), opt_value=opt_value)
    shift = math.ceil(math.log2(1.0 / eps))
    if variant == "forall":
        owners = np.argmin(D, axis=1)
        own_dist = D[np.arange(D.shape[0]), owners]
    for ell in range(ell_min, ell_max + 1):
        if variant == "relaxed":
            host = np.flatnonzero((D <= r0 / 2.0 ** (ell - shift)).any(axis=1))
        else:
            host = np.flatnonzero(own_dist <= r0 / 2.0**ell)
        if host.size:
            h.nets[ell] = build_net(pts, host, eps**3 * h.radius(ell))
    return h


def snap(p, net: Net, points) -> tuple[int, float]:
    if len(net) == 0:
        raise NetError("cannot snap to an empty net")
    p = as_point(p)
    X = _coords(points)[net.member_indices]
    d = distance_matrix(p[None, :], X)[0]
    i = int(np.argmin(d))
    return int(net.member_indices[i]), float(d[i])
