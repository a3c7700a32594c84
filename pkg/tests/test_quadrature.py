import warnings

import numpy as np
import pytest

from fourierfmm.quadrature import (QuadratureSpec, SphereQuadrature, abs_sin_fourier,
                                   build_quadrature, choose_n_theta, gauss_legendre_count,
                                   modified_transfer_columns, phase_tables, phi_error_bound,
                                   theta_error_bound)
from fourierfmm.series import LowFrequencyBreakdownWarning, choose_ell


def spec_for(kappa, eps, alpha=0.8):
    g = QuadratureSpec(kappa, 1.0, alpha, eps, 0).geometry()
    return QuadratureSpec(kappa, 1.0, alpha, eps, choose_ell(g, eps).ell)


def test_abs_sin_fourier_matches_fft():
    k = 4096
    t = 2 * np.pi * np.arange(k) / k
    c = np.fft.fft(np.abs(np.sin(t))).real / k
    n = np.arange(-20, 21)
    # |sin| has a kink, so the discrete aliasing error is O(1/k^2)
    assert np.abs(abs_sin_fourier(n) - c[n % k]).max() < 1e-6
    assert abs_sin_fourier(0) == pytest.approx(2 / np.pi)
    assert abs_sin_fourier(3) == 0.0


def test_uniform_layout_and_weights():
    q = SphereQuadrature.uniform(8, 12)
    assert q.n_rows == 5
    assert q.size == 60
    assert q.torus_points == 8 * 12
    assert q.sphere_points == 4 * 12
    assert q.weights().sum() == pytest.approx(4 * np.pi**2, rel=1e-14)
    th, ph = q.angles()
    assert th[q.row_slice(2)][0] == pytest.approx(np.pi / 2)
    assert ph[q.row_slice(1)][3] == pytest.approx(np.pi / 2)
    assert np.allclose(np.linalg.norm(q.directions(), axis=-1), 1.0)


def test_quadrature_validation():
    with pytest.raises(ValueError):
        SphereQuadrature(7, np.full(4, 4))
    with pytest.raises(ValueError):
        SphereQuadrature(8, np.full(4, 4))
    with pytest.raises(ValueError):
        SphereQuadrature(8, np.array([4, 4, 6, 4, 4]))
    with pytest.raises(ValueError):
        QuadratureSpec(1.0, 1.0, 1.5, 1e-4, 3)


def test_text_roundtrip_and_hash():
    q = SphereQuadrature(6, np.array([4, 8, 12, 4]))
    back = SphereQuadrature.from_text(q.to_text())
    assert back == q and hash(back) == hash(q)
    with pytest.raises(ValueError):
        SphereQuadrature.from_text("6\n")


def test_kappa20_quadrature_shape():
    sp = spec_for(20.0, 1e-6)
    q = build_quadrature(sp)
    assert q.n_theta >= 2 * sp.ell
    assert q.n_phi[0] == 4 and q.n_phi[-1] == 4
    # mirrored about the equator and rising towards it
    assert np.array_equal(q.n_phi, q.n_phi[::-1])
    half = q.n_phi[: q.n_rows // 2 + 1]
    assert np.all(np.diff(half[1:]) >= 0)
    assert q.sphere_points < gauss_legendre_count(sp.ell)


def test_n_theta_is_minimal():
    sp = spec_for(30.0, 1e-4)
    n = choose_n_theta(sp)
    assert theta_error_bound(sp, n) < sp.epsilon
    if n - 2 >= 2 * sp.ell:
        assert theta_error_bound(sp, n - 2) >= sp.epsilon


def test_phi_bound_met_on_every_row():
    sp = spec_for(30.0, 1e-4)
    q = build_quadrature(sp)
    assert phi_error_bound(sp, q.n_theta, q.n_phi).max() < sp.epsilon


def _filtered_product(ell, kappa, r0, th, phi):
    from fourierfmm.series import transfer_function
    s = np.stack([np.sin(th)[:, None] * np.cos(phi), np.sin(th)[:, None] * np.sin(phi),
                  np.broadcast_to(np.cos(th)[:, None], (th.size, phi.size))], axis=-1)
    t = transfer_function(ell, kappa, r0, s.reshape(-1, 3)).reshape(th.size, phi.size)
    return t * np.abs(np.sin(th))[:, None] / 2


def test_modified_transfer_keeps_low_frequencies_exactly():
    ell, kappa, r0 = 6, 3.0, np.array([0.0, 0.0, 2.0])
    n_theta = 4 * ell + 8
    phi = np.array([0.0, 1.1])
    cols = modified_transfer_columns(ell, kappa, r0, n_theta, phi)
    fine = 20000
    ref = _filtered_product(ell, kappa, r0, 2 * np.pi * np.arange(fine) / fine, phi)
    c_ref = np.fft.fft(ref, axis=0) / fine
    c_got = np.fft.fft(cols, axis=0) / n_theta
    q = np.r_[0:n_theta // 2, -n_theta // 2 + 1:0]
    # the fine reference carries O(1/fine^2) aliasing from the |sin| kink
    assert np.abs(c_got[q % n_theta] - c_ref[q % fine]).max() < 1e-8
    assert np.abs(c_got[n_theta // 2]).max() < 1e-14


def test_low_frequency_relaxation_warns():
    sp = QuadratureSpec(1.0, 1.0, 1.0, 1e-8, 40)
    with pytest.warns(LowFrequencyBreakdownWarning):
        q = build_quadrature(sp)
    assert q.n_theta >= 80


def test_phase_tables_mirror_rows():
    q = SphereQuadrature(10, np.array([4, 8, 12, 8, 4, 4]))
    n_phi, off, ct, st, cp, sp = phase_tables(q)
    h = q.n_rows
    for n in range(h):
        assert ct[n] == -ct[h - 1 - n] or n == h - 1 - n
    assert st[0] == 0.0 and ct[0] == 1.0
    assert np.allclose(cp**2 + sp**2, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert phase_tables(q) is phase_tables(SphereQuadrature.from_text(q.to_text()))
