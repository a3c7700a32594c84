"""Experiment drivers shared by the CLI and the acceptance tests.

Each driver returns a list of flat dict rows so callers can write CSV,
plot, or assert on them directly.
"""

import math
import time
import warnings

import numpy as np

from . import engine, oracle
from .quadrature import QuadratureSpec, build_quadrature, gauss_legendre_count
from .series import (KernelGeometry, LowFrequencyBreakdownWarning, choose_ell,
                     choose_ell_ebf, exact_kernel, gegenbauer_partial_sum)

TOY_EXACT = math.sin(64.0) / 16.0


def _toy_g(theta):
    return np.cos(64.0 * np.cos(theta))


def toy_integral(ns):
    """Errors of two K = 2N + 1 point rules for int_0^{2pi} |sin t| cos(64 cos t) dt.

    The filtered rule replaces |sin| by its Fourier partial sum of degree N;
    the trapezoid rule samples |sin| itself.
    """
    rows = []
    for n in ns:
        n = int(n)
        if n < 1:
            raise ValueError("N must be positive")
        k = 2 * n + 1
        t = 2 * np.pi * np.arange(k) / k
        g = _toy_g(t)
        j = np.arange(2, n + 1, 2)
        # |sin t| = 2/pi - (4/pi) sum_{j even} cos(j t) / (j^2 - 1)
        f_n = 2 / np.pi - 4 / np.pi * (np.cos(np.outer(t, j)) / (j**2 - 1.0)).sum(axis=1)
        filt = 2 * np.pi / k * np.dot(f_n, g)
        trap = 2 * np.pi / k * np.dot(np.abs(np.sin(t)), g)
        rows.append(dict(N=n, K=k, filtered_error=abs(filt - TOY_EXACT),
                         trapezoid_error=abs(trap - TOY_EXACT)))
    return rows


def toy_spectrum(n_samples=256):
    """|Fourier coefficients| of cos(64 cos t) from ``n_samples`` points."""
    t = 2 * np.pi * np.arange(n_samples) / n_samples
    c = np.fft.fft(_toy_g(t)) / n_samples
    n = np.fft.fftfreq(n_samples, 1.0 / n_samples).astype(int)
    order = np.argsort(n)
    return [dict(n=int(n[i]), abs_coef=float(abs(c[i]))) for i in order]


def loglog_slope(x, y):
    x = np.log(np.asarray(x, float))
    y = np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


# --- single level ------------------------------------------------------------

AXES = {"z": np.array([0.0, 0.0, 1.0]), "x": np.array([1.0, 0.0, 0.0])}


def _scan_max(kappa, r_abs, r0, ell, quad, dirs):
    e_t, e_g, e_i = oracle.scan_errors(kappa, r_abs, r0, ell, quad, dirs)
    k = int(np.argmax(np.abs(e_i)))
    return (float(np.abs(e_t).max()), float(np.abs(e_g).max()), float(np.abs(e_i).max()),
            dirs[k])


def single_level_row(kappa, epsilon, axis="z", alpha=0.8, box_size=1.0, dirs=None,
                     ebf=True):
    """Max errors over a direction scan for one (kappa, epsilon, axis) case."""
    if dirs is None:
        dirs = oracle.scan_directions()
    a = float(box_size)
    r_abs = alpha * a * math.sqrt(3.0)
    r0 = 2 * a * AXES[axis]
    ell = choose_ell(KernelGeometry.worst_case(kappa, a, alpha), epsilon).ell
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        quad = build_quadrature(QuadratureSpec(kappa, a, alpha, epsilon, ell))
    # flag only cases where the quadrature target actually had to be relaxed
    breakdown = any(issubclass(w.category, LowFrequencyBreakdownWarning)
                    and (w.message.relaxed_epsilon or 0.0) > epsilon for w in caught)
    e_t, e_g, e_i, worst = _scan_max(kappa, r_abs, r0, ell, quad, dirs)
    row = dict(kappa=kappa, epsilon=epsilon, axis=axis, ell=ell, n_theta=quad.n_theta,
               quad_size=quad.sphere_points, gl_size=gauss_legendre_count(ell),
               ratio=quad.sphere_points / gauss_legendre_count(ell),
               eps_G=e_g, eps_I=e_i, eps_T=e_t, breakdown=int(breakdown),
               worst_x=worst[0], worst_y=worst[1], worst_z=worst[2])
    if ebf:
        digits = -math.log10(epsilon)
        ell_e = choose_ell_ebf(kappa * r_abs, digits)
        qe = oracle.ebf_comparison_quadrature(ell_e)
        et, _, ei, _ = _scan_max(kappa, r_abs, r0, ell_e, qe, dirs)
        row.update(ell_ebf=ell_e, quad_size_ebf=qe.sphere_points, eps_I_ebf=ei, eps_T_ebf=et)
    return row


def single_level_sweep(kappas, epsilon, axes=("z", "x"), alpha=0.8, box_size=1.0,
                       n_dirs=642, ebf=True):
    dirs = oracle.scan_directions(n_dirs)
    return [single_level_row(float(k), epsilon, ax, alpha, box_size, dirs, ebf)
            for ax in axes for k in kappas]


# --- multilevel pair -----------------------------------------------------------

def corner_pair(alpha=0.8, top_box=1.0, axis="z"):
    """Two particles at opposite alpha-scaled corners of level-2 boxes 2a apart.

    Returns (points, domain) with the root cube of side 4 a so level 2 has box
    size ``top_box``; the source is particle 1.
    """
    a = float(top_box)
    c_t = np.array([1.5, 1.5, 0.5]) * a
    c_s = c_t + 2 * a * AXES[axis]
    d = 0.5 * alpha * a * np.ones(3)
    pts = np.array([c_t - d, c_s + d])
    return pts, (np.zeros(3), 4 * a)


def _pair_plan(kappa, epsilon, n_levels, alpha, ell, quad_eps):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowFrequencyBreakdownWarning)
        return engine.make_plan(kappa, epsilon, n_levels, 4.0, alpha, ell=ell,
                                quad_eps=quad_eps, transfers=(2,))


def _truncate_plan(plan, n_levels):
    """The same per-level choices restricted to levels 2..n_levels."""
    levels = {l: lp for l, lp in plan.levels.items() if l <= n_levels}
    return engine.FmmPlan(plan.kappa, plan.epsilon, plan.alpha, n_levels, plan.root_size,
                          levels, plan.build_seconds)


def multilevel_row(kappa, epsilon, n_levels, alpha=0.8, ell=None, quad_eps=None,
                   method="coeff", l2l_order="translate_first", plan=None):
    """FMM value at the target of the corner pair versus kernel and series."""
    pts, domain = corner_pair(alpha)
    w = np.array([0.0, 1.0], dtype=complex)
    if plan is None:
        plan = _pair_plan(kappa, epsilon, n_levels, alpha, ell, quad_eps)
    elif plan.n_levels != n_levels:
        plan = _truncate_plan(plan, n_levels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowFrequencyBreakdownWarning)
        res = engine.run_fmm(pts, w, kappa, epsilon, n_levels, alpha, domain=domain,
                             plan=plan, method=method, l2l_order=l2l_order,
                             full_result=True)
    lp2 = plan.levels[2]
    a = lp2.box_size
    c_t = np.array([1.5, 1.5, 0.5]) * a
    c_s = c_t + np.array([0.0, 0.0, 2 * a])
    r0 = c_s - c_t
    r = (pts[1] - c_s) - (pts[0] - c_t)
    exact = complex(exact_kernel(kappa, r, r0))
    ser = gegenbauer_partial_sum(KernelGeometry(kappa, r, r0), lp2.ell)
    tri = oracle.ErrorTriple.from_values(exact, ser, complex(res.sigma[0]))
    return dict(L=n_levels, kappa=kappa, epsilon=epsilon, ell=lp2.ell,
                quad_size=lp2.quadrature.sphere_points,
                eps_G=abs(tri.eps_G), eps_I=abs(tri.eps_I), eps_T=abs(tri.eps_T),
                eps_I_complex=tri.eps_I)


def multilevel_sweep(kappa, epsilons, levels=range(2, 9), alpha=0.8):
    """Rows for each target and L, with |eps_I^L - eps_I^2| attached."""
    rows = []
    levels = list(levels)
    for eps in epsilons:
        # per-level choices depend only on the level, so one deep plan serves every L
        plan = _pair_plan(kappa, eps, max(levels), alpha, None, None)
        base = None
        for L in levels:
            row = multilevel_row(kappa, eps, L, alpha, plan=plan)
            if base is None:
                base = row["eps_I_complex"]
            row["dI"] = abs(row["eps_I_complex"] - base)
            rows.append(row)
    for r in rows:
        r.pop("eps_I_complex")
    return rows


def fixed_ell_sweep(kappa, ells, quad_eps, n_levels=3, alpha=0.8):
    """Fixed truncation at the transfer level while the quadrature grows."""
    rows = []
    for ell in ells:
        for qe in quad_eps:
            row = multilevel_row(kappa, qe, n_levels, alpha, ell={2: int(ell)}, quad_eps=qe)
            row["quad_eps"] = qe
            # |eps_T - eps_G| as complex numbers, i.e. |eps_I|
            row["dTG"] = abs(row.pop("eps_I_complex"))
            rows.append(row)
    return rows


# --- FMM vs direct ---------------------------------------------------------------

def reference_kappa(n, n_ref=8.2e6, kappa_ref=160 * math.pi):
    """kappa for a unit cube at the reference density (n_ref points in 80 wavelengths)."""
    return kappa_ref * (n / n_ref) ** (1.0 / 3.0)


def random_cloud(n, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 3))
    w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return pts, w


def relative_error(approx, exact):
    """Normwise relative error max|a - e| / max|e|."""
    return float(np.abs(approx - exact).max() / np.abs(exact).max())


def timed_fmm(pts, w, kappa, epsilon, n_levels, alpha=1.0):
    """(seconds excluding plan construction, plan seconds, sigma)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowFrequencyBreakdownWarning)
        res = engine.run_fmm(pts, w, kappa, epsilon, n_levels, alpha, full_result=True)
    t = sum(v for k, v in res.timings.items() if k != "plan")
    return t, res.timings.get("plan", 0.0), res.sigma


def timed_direct(pts, w, kappa):
    t = time.perf_counter()
    s = oracle.direct_sum(pts, w, kappa)
    return time.perf_counter() - t, s
