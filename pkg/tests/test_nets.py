import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.distance import cdist

from jlmedoids.clustering import opt_exact
from jlmedoids.geometry import WeightedPointSet
from jlmedoids.instances import gen_basis, gen_doubling
from jlmedoids.nets import (
    DEFAULT_LEVEL_CAP,
    Net,
    NetError,
    build_hierarchy,
    build_net,
    check_packing_bound,
    estimate_ddim,
    level_of,
    levels_for,
    snap,
)

import oracles

line = np.arange(11.0)[:, None]


def test_single_host_point():
    net = build_net(line, [4], 1.0)
    assert net.member_indices.tolist() == [4]


def test_collinear_greedy_example():
    net = build_net(line, np.arange(11), 1.0)
    assert net.member_indices.tolist() == [0, 2, 4, 6, 8, 10]
    assert net.is_packing(line) and net.is_covering(line)


def test_small_rho_keeps_everything():
    X = np.random.default_rng(1).random((15, 3))
    D = cdist(X, X)
    rho = D[D > 0].min() * 0.999
    assert build_net(X, np.arange(15), rho).member_indices.tolist() == list(range(15))


def test_build_net_errors():
    with pytest.raises(NetError):
        build_net(line, [], 1.0)
    with pytest.raises(NetError):
        build_net(line, [0], 0.0)


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 3)), elements=st.floats(-5, 5)),
       st.floats(0.05, 3), st.data())
def test_nets_satisfy_both_predicates(X, rho, data):
    host = data.draw(st.lists(st.integers(0, X.shape[0] - 1), min_size=1, unique=True))
    net = build_net(X, host, rho)
    assert net.is_packing(X) and net.is_covering(X)
    assert set(net.member_indices.tolist()) <= set(host)
    order = sorted(host)
    assert net.member_indices.tolist() == [order[i] for i in oracles.greedy_net(X[order], rho)]


def test_packing_bound_examples():
    single = build_net(line, [0], 1.0)
    assert check_packing_bound(single, line, 1.0, 1.0)["pass"]
    grid = np.arange(16.0)[:, None]
    net = build_net(grid, np.arange(16), 1.0)
    rep = check_packing_bound(net, grid, estimate_ddim(grid).value, 2.0)
    assert rep["size"] == 8 and rep["pass"]
    assert rep["bound"] >= 15.0**2


def test_basis_net_needs_log_n_dimension():
    n = 16
    E = np.eye(n)
    net = build_net(E, np.arange(n), 1.0)
    assert len(net) == n
    # (diam / rho)^(c ddim) = sqrt(2)^(2 ddim) = 2^ddim must reach n
    assert check_packing_bound(net, E, math.log2(n), 2.0)["pass"]
    assert not check_packing_bound(net, E, math.log2(n) - 0.5, 2.0)["pass"]


def test_ddim_examples():
    assert estimate_ddim(np.zeros((1, 3))).value == 0.0
    est = estimate_ddim(gen_basis(32).P)
    assert est.value == 5.0 and est.method == "greedy-cover"
    assert estimate_ddim(np.linspace(0.0, 1.0, 64)[:, None]).value <= 2.0


@given(arrays(np.float64, st.tuples(st.integers(2, 9), st.integers(1, 2)), elements=st.floats(-3, 3)))
def test_greedy_estimate_dominates_exact_cover(X):
    X = np.unique(X, axis=0)
    D = cdist(X, X)
    exact = 1
    for p in range(X.shape[0]):
        for r in np.unique(D[p][D[p] > 0]):
            exact = max(exact, oracles.min_cover(D, np.flatnonzero(D[p] <= r), r / 2))
    assert estimate_ddim(X).value >= math.log2(exact) - 1e-12


def test_union_estimate_not_far_below_parts():
    a = gen_doubling(40, 1, seed=3).P
    b = WeightedPointSet(gen_doubling(40, 1, seed=4).P.points + 100.0, np.ones(40, dtype=int))
    u = a.union(b)
    assert estimate_ddim(u).value >= max(estimate_ddim(a).value, estimate_ddim(b).value) - 1


def test_doubling_fixture_line_within_target_plus_one():
    assert estimate_ddim(gen_doubling(128, 1, seed=0).P).value <= 2.0


@pytest.mark.xfail(strict=True, reason="a jittered square lattice needs 10+ half-radius balls; see decisions")
def test_doubling_fixture_plane_within_target_plus_one():
    # thinning radii can only lower the max, so exceeding 3 here means the full sweep does too
    assert estimate_ddim(gen_doubling(512, 2, seed=0).P, radius_ratio=1.5).value <= 3.0


def test_level_of_examples():
    c = np.zeros((1, 2))
    assert level_of([4.0, 0.0], c, 4.0) == (0, 4.0, 0)
    assert level_of([1.2, 0.0], c, 4.0) == (1, 2.0, 0)
    j, r, owner = level_of([0.0, 0.0], c, 4.0)
    assert j == DEFAULT_LEVEL_CAP and r == 4.0 / 2**DEFAULT_LEVEL_CAP and owner == 0
    # lowest-index owner on ties
    assert level_of([0.0, 0.0], [[1.0, 0.0], [-1.0, 0.0]], 4.0)[2] == 0


@given(st.floats(1e-6, 1e3), st.floats(0.01, 100))
def test_level_bracket_holds(d, r0):
    j, r, _ = level_of([d], [[0.0]], r0)
    assert r0 / 2.0 ** (j + 1) <= d <= r0 / 2.0**j
    assert r == r0 / 2.0**j


@pytest.mark.parametrize("z", [1.0, 2.0])
@pytest.mark.parametrize("seed", range(5))
def test_radii_sum_bounded_by_opt(seed, z):
    inst = gen_doubling(30, 2, seed=seed, k=2, z=z)
    res = opt_exact(inst)
    C = inst.Q.points[list(res.solution.center_indices)]
    r0 = res.value ** (1.0 / z)
    _, radii, _, dists = levels_for(inst.P.points, C, r0)
    keep = dists > 0
    assert float(inst.P.weights[keep] @ radii[keep] ** z) <= 2**z * res.value * (1 + 1e-12)


def test_hierarchy_single_level_toy():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (20, 2)) * 0.5
    P = WeightedPointSet(X, np.ones(20, dtype=int))
    eps = 0.25
    h = build_hierarchy(P, None, [[0.0, 0.0]], 1.0, 0, 0, eps)
    net = h.nets[0]
    assert net.host_indices.tolist() == list(range(20))
    assert net.rho == eps**3 and net.is_packing(X) and net.is_covering(X)


def test_hierarchy_half_eps_reaches_twice_the_radius():
    X = np.array([[0.5], [1.5], [1.9], [2.1], [3.0]])
    P = WeightedPointSet(X, np.ones(5, dtype=int))
    h = build_hierarchy(P, None, [[0.0]], 4.0, 1, 1, 0.5)
    # r_1 = 2; enlarged ball radius r_0 = 4
    assert h.nets[1].host_indices.tolist() == [0, 1, 2, 3, 4]
    h = build_hierarchy(P, None, [[0.0]], 4.0, 2, 2, 0.5)
    assert h.nets[2].host_indices.tolist() == [0, 1, 2]


def test_hierarchy_forall_variant_restricts_to_own_cluster():
    X = np.array([[0.0], [0.5], [0.9], [10.0], [10.4], [11.5]])
    P = WeightedPointSet(X, np.ones(6, dtype=int))
    Q = WeightedPointSet(np.array([[0.2], [10.2]]), np.ones(2, dtype=int))
    h = build_hierarchy(P, Q, [[0.0], [10.0]], 1.0, 0, 0, 0.25, variant="forall")
    # S_1 inside B(0, 1) and S_2 inside B(10, 1); 11.5 is outside, Q is never a host
    assert h.nets[0].host_indices.tolist() == [0, 1, 2, 3, 4]
    h = build_hierarchy(P, Q, [[0.0], [10.0]], 1.0, 0, 0, 0.25)
    assert 6 in h.nets[0].host_indices.tolist()  # relaxed variant hosts Q points too


def test_hierarchy_validation_and_dump():
    P = WeightedPointSet(line, np.ones(11, dtype=int))
    with pytest.raises(NetError):
        build_hierarchy(P, None, [[0.0]], 1.0, 2, 1, 0.25)
    with pytest.raises(NetError):
        build_hierarchy(P, None, [[0.0]], 0.0, 0, 1, 0.25)
    with pytest.raises(NetError):
        build_hierarchy(P, None, [[0.0]], 1.0, 0, 1, 0.75)
    h = build_hierarchy(P, None, [[-0.5]], 16.0, 0, 30, 0.25)
    doc = json.loads(h.to_json())
    assert [lv["level"] for lv in doc["levels"]] == sorted(h.nets)
    assert all(lv["radius"] == 16.0 / 2 ** lv["level"] for lv in doc["levels"])
    assert max(h.nets) < 30  # deep levels beyond every point are left out


def test_snap_examples():
    X = np.array([[0.0], [5.0], [9.0], [-2.0], [2.0], [20.0], [30.0], [4.0]])
    net = Net(np.array([3, 7]), 3.0, np.arange(8))
    assert snap(X[3], net, X) == (3, 0.0)
    assert snap([1.0], net, X)[0] == 3  # -2 and 4 are both at distance 3
    idx, d = snap([4.0 + 0.9 * 3.0], net, X)
    assert idx == 7 and d == pytest.approx(0.9 * 3.0, rel=1e-15)
    with pytest.raises(NetError):
        snap([0.0], Net(np.array([], dtype=int), 1.0, np.arange(8)), X)


def test_hierarchy_on_doubling_fixture_is_valid():
    inst = gen_doubling(60, 2, seed=5, k=2)
    res = opt_exact(inst)
    C = inst.P.points[list(res.solution.center_indices)]
    h = build_hierarchy(inst.P, inst.Q, C, res.value, -3, 12, 0.25)
    for ell, net in h.nets.items():
        assert net.is_packing(h.points) and net.is_covering(h.points)
        assert net.rho == pytest.approx(0.25**3 * res.value / 2**ell)
