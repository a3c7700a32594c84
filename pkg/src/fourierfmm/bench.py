"""Timing harness: interpolation micro-bench and the constant-density FMM sweep."""

import math
import time
import warnings

import numpy as np

from . import engine, oracle
from .experiments import loglog_slope, random_cloud, reference_kappa, relative_error
from .quadrature import SphereQuadrature
from .series import LowFrequencyBreakdownWarning
from .spherefft import resample_values


def _best_time(fn, repeats=3, min_time=0.05):
    best = math.inf
    for _ in range(repeats):
        n = 0
        t0 = time.perf_counter()
        while True:
            fn()
            n += 1
            dt = time.perf_counter() - t0
            if dt >= min_time:
                break
        best = min(best, dt / n)
    return best


# --- interpolation ---------------------------------------------------------------

# below ell ~ 48 both routes are dominated by per-call overhead, not their O(.) terms
INTERP_ELLS = (48, 64, 96, 128, 192, 256)

def _round4(n):
    return n + (-n) % 4


def fft_pair(ell):
    """Source quadrature resolving degree ell and a target for degree 2 ell."""
    src = SphereQuadrature.uniform(2 * ell + 2, _round4(2 * ell + 2))
    dst = SphereQuadrature.uniform(4 * ell + 2, _round4(4 * ell + 2))
    return src, dst


def assoc_legendre_normalized(lmax, m, x):
    """Orthonormal associated Legendre functions, rows l = m..lmax, at ``x``.

    Normalized so that 2 pi int_{-1}^{1} P_l^m(x)^2 dx = 1; standard
    three-term recurrence in l from the sectoral seed.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    out = np.zeros((lmax - m + 1, x.size))
    p = np.full(x.size, math.sqrt(1.0 / (4 * math.pi)))
    for k in range(1, m + 1):
        p = -math.sqrt((2 * k + 1) / (2.0 * k)) * s * p
    out[0] = p
    if lmax > m:
        out[1] = math.sqrt(2 * m + 3) * x * p
    for l in range(m + 2, lmax + 1):
        a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
        b = math.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
        out[l - m] = a * (x * out[l - m - 1] - b * out[l - m - 2])
    return out


class SemiNaiveResampler:
    """Spherical-harmonic resampling of degree ``ell`` data from a
    Gauss-Legendre x uniform grid to a finer one for degree ``2 ell``.

    phi is handled by FFT; theta by one dense (n_dst x n_src) matrix per
    order m, so the work is O(ell^3).
    """

    def __init__(self, ell):
        self.ell = ell
        self.n_src = ell + 1
        self.n_dst = 2 * ell + 1
        self.p_src = 2 * ell + 1
        self.p_dst = 4 * ell + 1
        xs, ws = np.polynomial.legendre.leggauss(self.n_src)
        xd, _ = np.polynomial.legendre.leggauss(self.n_dst)
        self.x_src, self.x_dst = xs, xd
        mats = np.zeros((2 * ell + 1, self.n_dst, self.n_src))
        for i, m in enumerate(range(-ell, ell + 1)):
            am = abs(m)
            ps = assoc_legendre_normalized(ell, am, xs)
            pd = assoc_legendre_normalized(ell, am, xd)
            mats[i] = 2 * np.pi * (pd.T @ (ps * ws))
        self.mats = mats

    def __call__(self, values):
        """``values`` is (n_src, p_src) on the source grid; returns (n_dst, p_dst)."""
        ell = self.ell
        c = np.fft.fft(values, axis=1) / self.p_src
        cm = np.concatenate([c[:, -ell:], c[:, : ell + 1]], axis=1).T   # (2ell+1, n_src)
        re = np.matmul(self.mats, cm.real[:, :, None])[:, :, 0]
        im = np.matmul(self.mats, cm.imag[:, :, None])[:, :, 0]
        d = (re + 1j * im).T                                           # (n_dst, 2ell+1)
        out = np.zeros((self.n_dst, self.p_dst), dtype=complex)
        out[:, : ell + 1] = d[:, ell:]
        out[:, -ell:] = d[:, :ell]
        return np.fft.ifft(out, axis=1) * self.p_dst

    def grid_points(self, which="src"):
        x = self.x_src if which == "src" else self.x_dst
        p = self.p_src if which == "src" else self.p_dst
        theta = np.arccos(x)
        phi = 2 * np.pi * np.arange(p) / p
        return theta, phi


def interpolation_bench(ells, repeats=3):
    """Seconds per single-field resample for the FFT route and the semi-naive one."""
    rng = np.random.default_rng(0)
    rows = []
    for ell in ells:
        src, dst = fft_pair(ell)
        v = rng.standard_normal(src.size) + 1j * rng.standard_normal(src.size)
        t_fft = _best_time(lambda: resample_values(v, src, dst), repeats)
        sn = SemiNaiveResampler(ell)
        g = rng.standard_normal((sn.n_src, sn.p_src)) + 0j
        t_sn = _best_time(lambda: sn(g), repeats)
        rows.append(dict(ell=int(ell), fft_seconds=t_fft, seminaive_seconds=t_sn,
                         fft_points=src.size, seminaive_points=sn.n_src * sn.p_src))
    return rows


def interpolation_slopes(rows):
    ell = [r["ell"] for r in rows]
    return (loglog_slope(ell, [r["fft_seconds"] for r in rows]),
            loglog_slope(ell, [r["seminaive_seconds"] for r in rows]))


# --- FMM scaling -------------------------------------------------------------------

MEMORY_BUDGET = 2.5 * 2**30


def level_candidates(n, kappa, epsilon=1e-4, alpha=1.0, min_leaf=4, max_leaf=600,
                     budget=MEMORY_BUDGET):
    """Levels whose mean leaf occupancy is reasonable and whose fields fit in memory."""
    out = []
    for L in range(2, 9):
        per_leaf = n / 8**L
        if per_leaf > max_leaf:
            continue
        if per_leaf < min_leaf:
            break
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowFrequencyBreakdownWarning)
            plan = engine.make_plan(kappa, epsilon, L, 1.0, alpha, transfers=False)
        boxes = min(8**L, n)
        # outgoing at every level plus two local arrays at the leaves
        mem = sum(min(8**l, n) * lp.quadrature.size * 16 for l, lp in plan.levels.items())
        mem += 2 * boxes * plan.levels[L].quadrature.size * 16
        if mem <= budget:
            out.append(L)
    return out


def scaling_sweep(ns, epsilon=1e-4, alpha=1.0, levels=None, seed=0, direct_max=20000,
                  check_max=20000):
    """FMM time at each N (kappa scaled with N^(1/3)) for each candidate level.

    Direct time is measured up to ``direct_max`` and extrapolated as N^2 from
    the largest measured point beyond that; accuracy against the compensated
    oracle is reported up to ``check_max``.
    """
    rows = []
    direct_ref = None
    for n in ns:
        n = int(n)
        kappa = reference_kappa(n)
        pts, w = random_cloud(n, seed)
        cand = levels if levels is not None else level_candidates(n, kappa, epsilon, alpha)
        if n <= direct_max:
            t0 = time.perf_counter()
            exact = oracle.direct_sum(pts, w, kappa, compensated=False)
            t_direct = time.perf_counter() - t0
            direct_ref = (n, t_direct)
            measured = 1
        else:
            exact = None
            t_direct = direct_ref[1] * (n / direct_ref[0]) ** 2 if direct_ref else math.nan
            measured = 0
        if n <= check_max and exact is None:
            exact = oracle.direct_sum(pts, w, kappa)
        for L in cand:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LowFrequencyBreakdownWarning)
                res = engine.run_fmm(pts, w, kappa, epsilon, L, alpha, full_result=True)
            t_run = sum(v for k, v in res.timings.items() if k != "plan")
            err = relative_error(res.sigma, exact) if exact is not None else math.nan
            rows.append(dict(N=n, kappa=kappa, levels=L, fmm_time=t_run,
                             plan_time=res.timings.get("plan", 0.0),
                             direct_time=t_direct, direct_measured=measured,
                             max_rel_err=err))
    return rows


def best_by_n(rows):
    """Row with the smallest FMM time for each N."""
    best = {}
    for r in rows:
        if r["N"] not in best or r["fmm_time"] < best[r["N"]]["fmm_time"]:
            best[r["N"]] = r
    return [best[n] for n in sorted(best)]
