"""Numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics; summation order may differ, so results agree
to rounding rather than bit-for-bit.
"""

from itertools import combinations
from math import comb

import numpy as np
from scipy.spatial.distance import cdist


def subset_costs(MT, w, k):
    MT = np.asarray(MT, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    s, n = MT.shape
    if k < 1 or k > s:
        raise ValueError("need 1 <= k <= number of candidates")
    if k == 1:
        return MT @ w
    out = np.empty(comb(s, k), dtype=np.float64)
    pos = 0
    # fixed (k-1)-prefix, vectorised over the last index
    for prefix in combinations(range(s - 1), k - 1):
        last = prefix[-1]
        if last >= s - 1:
            continue
        base = MT[list(prefix)].min(axis=0)
        tail = np.minimum(MT[last + 1:], base[None, :]) @ w
        out[pos:pos + tail.shape[0]] = tail
        pos += tail.shape[0]
    assert pos == out.shape[0]
    return out


def greedy_net(X, rho):
    X = np.asarray(X, dtype=np.float64)
    members = []
    for i in range(X.shape[0]):
        if members:
            d = cdist(X[i:i + 1], X[members])[0]
            if np.any(d <= rho):
                continue
        members.append(i)
    return np.asarray(members, dtype=np.intp)


def cover_sizes(D, centers, radii):
    D = np.asarray(D, dtype=np.float64)
    out = np.zeros(len(centers), dtype=np.int64)
    for qi, (p, r) in enumerate(zip(centers, radii)):
        h = 0.5 * r
        members = np.flatnonzero(D[p] <= r)
        within = D[:, members] <= h
        cand = np.flatnonzero(within.any(axis=1))
        within = within[cand]
        counts = within.sum(axis=1)
        uncovered = np.ones(members.size, dtype=bool)
        size = 0
        while uncovered.any():
            best = int(np.argmax(counts))
            size += 1
            newly = within[best] & uncovered
            uncovered &= ~newly
            counts = counts - within[:, newly].sum(axis=1)
        out[qi] = size
    return out
