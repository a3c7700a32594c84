import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourierfmm.series import (KernelGeometry, LowFrequencyBreakdownWarning,
                               TruncationChoice, TruncationMethod, TruncationSearchError,
                               check_low_frequency, choose_ell, choose_ell_ebf, exact_kernel,
                               gegenbauer_partial_sum, gegenbauer_partial_sums,
                               gegenbauer_tail_bound,
                               transfer_function)

mp.mp.dps = 50


def mp_hankel(n, x):
    x = mp.mpf(x)
    return mp.sqrt(mp.pi / (2 * x)) * (mp.besselj(n + 0.5, x) + 1j * mp.bessely(n + 0.5, x))


def mp_sph_j(n, x):
    x = mp.mpf(x)
    if x == 0:
        return mp.mpf(1 if n == 0 else 0)
    return mp.sqrt(mp.pi / (2 * x)) * mp.besselj(n + 0.5, x)


def test_partial_sum_at_zero_r():
    g = KernelGeometry(3.0, np.zeros(3), np.array([0.0, 1.0, 1.0]))
    d = math.sqrt(2.0)
    assert gegenbauer_partial_sum(g, 0) == pytest.approx(np.exp(3j * d) / d, rel=1e-14)


def test_partial_sum_needs_r0():
    with pytest.raises(ValueError):
        gegenbauer_partial_sum(KernelGeometry(1.0, np.ones(3), np.zeros(3)), 5)


def test_partial_sum_vs_mpmath():
    kappa = 7.0
    r = np.array([0.3, -0.2, 0.5])
    r0 = np.array([0.4, 1.1, 1.9])
    ell = 200
    ra, r0a = np.linalg.norm(r), np.linalg.norm(r0)
    c = float(np.dot(r, r0) / (ra * r0a))
    # terms beyond n ~ 60 are far below double precision
    ref = sum((-1) ** n * (2 * n + 1) * mp_hankel(n, kappa * r0a) * mp_sph_j(n, kappa * ra)
              * mp.legendre(n, c) for n in range(80))
    ref = complex(1j * kappa * ref)
    got = gegenbauer_partial_sum(KernelGeometry(kappa, r, r0), ell)
    assert abs(got - ref) <= 1e-12 * abs(ref)


def test_partial_sum_kappa100_eps4():
    kappa, a, alpha = 100.0, 1.0, 0.8
    g = KernelGeometry.worst_case(kappa, a, alpha)
    ell = choose_ell(g, 1e-4).ell
    val = gegenbauer_partial_sum(g, ell)
    assert abs(val - exact_kernel(kappa, g.r, g.r0)) < 1e-4


def test_transfer_function_single_term():
    kappa, r0 = 4.0, np.array([0.0, 2.0, 0.0])
    h0 = complex(mp_hankel(0, 8.0))
    assert transfer_function(0, kappa, r0, [1.0, 0, 0]) == pytest.approx(
        1j * kappa / (4 * np.pi) * h0, rel=1e-14)


def test_transfer_function_spot_value():
    kappa, ell = 10.0, 20
    ref = sum(1j**n * (2 * n + 1) * mp_hankel(n, 20.0) for n in range(ell + 1))
    ref = complex(1j * kappa / (4 * mp.pi) * ref)
    got = transfer_function(ell, kappa, [0, 0, 2.0], [0, 0, 1.0])
    assert abs(got - ref) <= 1e-12 * abs(ref)


def test_transfer_function_depends_on_dot_product_only():
    r0 = np.array([0.0, 0.0, 2.0])
    t = 0.7
    s1 = np.array([math.sin(t), 0.0, math.cos(t)])
    s2 = np.array([math.sin(t) * math.cos(1.3), math.sin(t) * math.sin(1.3), math.cos(t)])
    s3 = np.array([-math.sin(t), 0.0, math.cos(t)])  # mirror across the axis
    vals = transfer_function(30, 12.0, r0, np.array([s1, s2, s3]))
    assert np.abs(vals - vals[0]).max() <= 1e-13 * abs(vals[0])


def test_transfer_function_rejects_bad_input():
    with pytest.raises(ValueError):
        transfer_function(5, 1.0, [0, 0, 0], [0, 0, 1.0])
    with pytest.raises(ValueError):
        transfer_function(5, 1.0, [0, 0, 1], [0, 0, 1.1])


def test_ebf_formula():
    assert choose_ell_ebf(100, 4) == math.ceil(100 + 1.8 * 4 ** (2 / 3) * 100 ** (1 / 3))
    assert choose_ell_ebf(1e-9, 4) >= 1


@given(st.floats(0.01, 5000))
@settings(max_examples=50, deadline=None)
def test_ebf_monotone_in_digits(kr):
    assert choose_ell_ebf(kr, 8) >= choose_ell_ebf(kr, 4)


def test_tail_bound_decays_and_validates():
    kappa, r, r0 = 20.0, 0.8 * math.sqrt(3), 2.0
    b = [gegenbauer_tail_bound(l, kappa, r, r0, "plus") for l in range(41, 90)]
    assert all(b1 <= b0 for b0, b1 in zip(b, b[1:]))
    assert b[-1] < 1e-10
    with pytest.raises(ValueError):
        gegenbauer_tail_bound(10, 1.0, 2.0, 1.0, "plus")
    with pytest.raises(ValueError):
        gegenbauer_tail_bound(10, 1.0, 1.0, 2.0, "both")


@pytest.mark.parametrize("kappa", [5.0, 30.0, 100.0])
def test_tail_bound_covers_aligned_error(kappa):
    r_abs, r0_abs = 0.5, 1.0
    for sign, d in (("plus", 1.0), ("minus", -1.0)):
        for ell in range(int(kappa * r_abs) + 1, int(kappa * r_abs) + 30, 4):
            g = KernelGeometry(kappa, np.array([0, 0, d * r_abs]), np.array([0, 0, r0_abs]))
            err = abs(exact_kernel(kappa, g.r, g.r0) - gegenbauer_partial_sum(g, ell))
            bound = gegenbauer_tail_bound(ell, kappa, r_abs, r0_abs, sign)
            assert err <= bound * (1 + 1e-6) + 1e-13


def test_choose_ell_kappa100():
    g = KernelGeometry.worst_case(100.0, 1.0, 0.8)
    ch = choose_ell(g, 1e-4)
    assert ch.method is TruncationMethod.REFINED
    assert ch.predicted_tail < 1e-4
    # minimality: one less fails the bound
    r, r0 = g.r_abs, g.r0_abs
    prev = max(gegenbauer_tail_bound(ch.ell - 1, 100.0, r, r0, s) for s in ("plus", "minus"))
    assert prev >= 1e-4
    for eps in (1e-4, 1e-8):
        ell = choose_ell(g, eps).ell
        for d in (1.0, -1.0):
            gg = KernelGeometry(100.0, d * g.r, g.r0)
            err = abs(exact_kernel(100.0, gg.r, gg.r0) - gegenbauer_partial_sum(gg, ell))
            assert err <= 2 * eps


def test_choose_ell_small_kr_uses_ebf():
    g = KernelGeometry.worst_case(0.5, 1.0, 0.8)
    ch = choose_ell(g, 1e-6)
    assert ch.method is TruncationMethod.EBF
    assert ch.ell == choose_ell_ebf(0.5 * 0.8 * math.sqrt(3), 6)


def test_choose_ell_search_failure():
    g = KernelGeometry.worst_case(100.0, 1.0, 0.8)
    with pytest.raises(TruncationSearchError):
        choose_ell(g, 1e-4, ell_max=150)


def test_truncation_choice_validation():
    with pytest.raises(ValueError):
        TruncationChoice(3, -1.0, TruncationMethod.EBF)


def test_geometry_convergence_region():
    assert KernelGeometry.worst_case(1.0, 1.0, 1.0).converges
    assert not KernelGeometry(1.0, np.array([0, 0, 1.9]), np.array([0, 0, 2.0])).converges
    with pytest.raises(ValueError):
        KernelGeometry(0.0, np.zeros(3), np.ones(3))


def test_series_converges_then_roundoff_floor():
    kappa = 20.0
    g = KernelGeometry(kappa, np.array([0, 0, 0.5]), np.array([0, 0, 1.5]))
    exact = exact_kernel(kappa, g.r, g.r0)
    errs = [abs(gegenbauer_partial_sum(g, l) - exact) for l in range(10, 120, 10)]
    assert errs[-1] < 1e-12
    assert errs[0] > errs[1] > errs[2] > 1e-13


def test_low_frequency_warning():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        relaxed = check_low_frequency(42, 10.0, 1.0, 1e-6)
    hits = [x for x in w if issubclass(x.category, LowFrequencyBreakdownWarning)]
    assert hits and hits[0].message.amplitude > 1e6
    assert relaxed >= 1e-6
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_low_frequency(162, 100.0, 1.0, 1e-4) == 1e-4


def test_batched_partial_sums_match_scalar():
    kappa, r_abs, r0 = 25.0, 0.6, np.array([0.0, 2.0, 0.0])
    rng = np.random.default_rng(4)
    d = rng.standard_normal((20, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    got = gegenbauer_partial_sums(kappa, r_abs, 2.0, d @ r0 / 2.0, 60)
    ref = [gegenbauer_partial_sum(KernelGeometry(kappa, r_abs * v, r0), 60) for v in d]
    assert np.abs(got - ref).max() < 1e-13 * np.abs(ref).max()
