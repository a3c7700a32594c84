import warnings

import numpy as np
import pytest

from fourierfmm.engine import (CoincidentPointsError, l2l, m2m, make_plan, p2m, run_fmm)
from fourierfmm.octree import build_tree
from fourierfmm.oracle import direct_sum
from fourierfmm.series import LowFrequencyBreakdownWarning


def cloud(n, seed):
    rng = np.random.default_rng(seed)
    return rng.random((n, 3)), rng.standard_normal(n) + 1j * rng.standard_normal(n)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def setup60():
    pts, w = cloud(800, 1)
    return pts, w, 60.0, direct_sum(pts, w, 60.0)


def test_p2m_single_particle():
    pts = np.array([[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]])
    tree = build_tree(pts, 2, domain=(np.zeros(3), 1.0))
    plan = make_plan(40.0, 1e-4, 2, 1.0, transfers=False)
    lp = plan.levels[2]
    w = np.array([2.0 + 1j, 0.0])
    out = p2m(tree, w[tree.perm], plan)
    b = int(np.flatnonzero(tree.leaves.start == np.flatnonzero(tree.perm == 0)[0])[0])
    d = pts[0] - tree.leaves.centers[b]
    assert np.abs(out[b] - w[0] * np.exp(1j * 40.0 * lp.directions @ d)).max() < 1e-13
    assert np.abs(out[1 - b]).max() == 0.0


def test_p2m_center_particle_is_constant():
    tree = build_tree(np.array([[0.125, 0.125, 0.125]]), 2, domain=(np.zeros(3), 1.0))
    plan = make_plan(40.0, 1e-4, 2, 1.0, transfers=False)
    out = p2m(tree, np.array([1.0 + 0j]), plan)
    assert np.abs(out - 1.0).max() < 1e-15


def test_m2m_matches_direct_p2m():
    pts, w = cloud(300, 2)
    kappa = 30.0
    tree = build_tree(pts, 4)
    plan = make_plan(kappa, 1e-6, 4, tree.root_size, transfers=False)
    m3 = m2m(tree, p2m(tree, w[tree.perm], plan), 3, plan)
    t3 = build_tree(pts, 3, domain=(tree.root_corner, tree.root_size))
    plan3 = make_plan(kappa, 1e-6, 3, tree.root_size, transfers=False)
    d3 = p2m(t3, w[t3.perm], plan3)
    assert plan3.levels[3].quadrature == plan.levels[3].quadrature
    assert np.abs(m3 - d3).max() < 1e-12 * np.abs(d3).max()


def test_fmm_accuracy_two_and_three_levels(setup60):
    pts, w, kappa, ref = setup60
    for L in (2, 3):
        s = run_fmm(pts, w, kappa, 1e-4, L)
        assert rel(s, ref) < 1e-4


def test_fmm_2000_points():
    pts, w = cloud(2000, 4)
    kappa = 40.0
    s = run_fmm(pts, w, kappa, 1e-4, 2)
    assert rel(s, direct_sum(pts, w, kappa)) < 1e-3


def test_fmm_is_linear(setup60):
    # two levels: at L=3 the transfer amplitude (~1e10) lifts roundoff to ~1e-8
    pts, w, kappa, _ = setup60
    w2 = np.random.default_rng(9).standard_normal(len(w)) + 0j
    res = run_fmm(pts, w, kappa, 1e-4, 2, full_result=True)
    s2 = run_fmm(pts, w2, kappa, 1e-4, 2, plan=res.plan)
    s12 = run_fmm(pts, 2 * w - 3j * w2, kappa, 1e-4, 2, plan=res.plan)
    assert np.abs(s12 - (2 * res.sigma - 3j * s2)).max() < 1e-11 * np.abs(s12).max()


def test_fmm_permutation_invariant(setup60):
    pts, w, kappa, _ = setup60
    perm = np.random.default_rng(3).permutation(len(w))
    a = run_fmm(pts, w, kappa, 1e-4, 2)
    b = run_fmm(pts[perm], w[perm], kappa, 1e-4, 2)
    assert np.abs(a[perm] - b).max() < 1e-10 * np.abs(a).max()


def test_full_result_reports_timings(setup60):
    pts, w, kappa, _ = setup60
    res = run_fmm(pts, w, kappa, 1e-4, 3, full_result=True)
    assert set(res.timings) >= {"tree", "plan", "p2m", "m2m", "m2l", "l2l", "l2p", "near"}
    assert [r["level"] for r in res.plan.summary()] == [2, 3]


def test_l2l_order_guard(setup60):
    pts, w, kappa, ref = setup60
    with pytest.raises(ValueError):
        run_fmm(pts, w, kappa, 1e-4, 3, l2l_order="sideways")
    alt = run_fmm(pts, w, kappa, 1e-4, 3, l2l_order="anterpolate_first")
    assert rel(alt, ref) < 1e-3


def test_plan_mismatch_and_missing_tables(setup60):
    pts, w, kappa, _ = setup60
    plan = make_plan(kappa, 1e-4, 2, 5.0)
    with pytest.raises(ValueError):
        run_fmm(pts, w, kappa, 1e-4, 2, plan=plan)
    tree = build_tree(pts, 2)
    bare = make_plan(kappa, 1e-4, 2, tree.root_size, transfers=False)
    with pytest.raises(ValueError):
        run_fmm(pts, w, kappa, 1e-4, 2, plan=bare)
    with pytest.raises(ValueError):
        make_plan(-1.0, 1e-4, 2, 1.0)
    with pytest.raises(ValueError):
        run_fmm(pts, w[:-1], kappa, 1e-4, 2)


def test_coincident_points_raise():
    pts, w = cloud(50, 5)
    pts[7] = pts[3]
    with pytest.raises(CoincidentPointsError, match="1 coincident"):
        run_fmm(pts, w, 40.0, 1e-4, 2)


def test_low_frequency_levels_warn():
    pts, w = cloud(200, 6)
    with pytest.warns(LowFrequencyBreakdownWarning):
        make_plan(30.0, 1e-4, 3, 1.0, transfers=False)


def test_plan_overrides():
    plan = make_plan(60.0, 1e-4, 3, 1.0, ell={2: 45}, quad_eps=1e-6, transfers=(2,))
    assert plan.levels[2].ell == 45 and plan.levels[3].ell != 45
    assert plan.levels[2].transfers is not None and plan.levels[3].transfers is None
    assert plan.levels[2].quad_epsilon == 1e-6
