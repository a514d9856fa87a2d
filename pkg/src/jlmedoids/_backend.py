"""Kernel backend selection.

The compiled extension is used when importable; set ``JLMEDOIDS_BACKEND=python``
to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

_requested = os.environ.get("JLMEDOIDS_BACKEND", "").lower()
if _requested and _requested not in BACKENDS:
    raise ImportError(f"JLMEDOIDS_BACKEND={_requested!r} is not available; have {sorted(BACKENDS)}")
NAME = _requested or ("cython" if _compiled is not None else "python")
kernels = BACKENDS[NAME]


def use(name):
    """Switch the active backend at runtime (tests and benchmarks)."""
    global NAME, kernels
    kernels = BACKENDS[name]
    NAME = name


def subset_costs(M, w, k):
    """Weighted min-cost of every k-subset of columns of ``M`` (lexicographic order)."""
    MT = np.ascontiguousarray(np.asarray(M, dtype=np.float64).T)
    return kernels.subset_costs(MT, np.ascontiguousarray(w, dtype=np.float64), int(k))


def greedy_net(X, rho):
    return kernels.greedy_net(np.ascontiguousarray(X, dtype=np.float64), float(rho))


def cover_sizes(D, centers, radii):
    return kernels.cover_sizes(
        np.ascontiguousarray(D, dtype=np.float64),
        np.ascontiguousarray(centers, dtype=np.intp),
        np.ascontiguousarray(radii, dtype=np.float64),
    )
