"""PNG figures for the CLI reports (matplotlib, Agg backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _col(rows, key):
    return np.array([r[key] for r in rows], dtype=float)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_toy(rows, spectrum, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    n = np.array([r["n"] for r in spectrum])
    ax1.semilogy(n, np.maximum(_col(spectrum, "abs_coef"), 1e-18), ".")
    ax1.set_xlabel("n")
    ax1.set_ylabel("|coefficient| of cos(64 cos t)")
    N = _col(rows, "N")
    ax2.loglog(N, np.maximum(_col(rows, "filtered_error"), 1e-17), label="filtered |sin|")
    ax2.loglog(N, _col(rows, "trapezoid_error"), label="trapezoid")
    ax2.set_xlabel("N (K = 2N + 1 points)")
    ax2.set_ylabel("|error|")
    ax2.legend()
    return _finish(fig, path)


def plot_single_level(rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for axis in sorted({r["axis"] for r in rows}):
        sub = [r for r in rows if r["axis"] == axis]
        k = _col(sub, "kappa")
        ax1.loglog(k, _col(sub, "eps_T"), "o-", label=f"eps_T ({axis})")
        ax1.loglog(k, _col(sub, "eps_I"), "s--", label=f"eps_I ({axis})")
        if "eps_I_ebf" in sub[0]:
            ax1.loglog(k, _col(sub, "eps_I_ebf"), "^:", label=f"eps_I EBF ({axis})")
        ax2.semilogx(k, _col(sub, "ratio"), "o-", label=axis)
    for eps in sorted({r["epsilon"] for r in rows}):
        ax1.axhline(eps, color="k", lw=0.8)
    ax1.set_xlabel("kappa")
    ax1.set_ylabel("max error over scan")
    ax1.legend(fontsize=7)
    ax2.axhline(2 / np.pi, color="k", lw=0.8, ls="--")
    ax2.set_xlabel("kappa")
    ax2.set_ylabel("points / 2(ell+1)^2")
    ax2.legend()
    return _finish(fig, path)


def plot_multilevel(rows, path, key="dI"):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for L in sorted({r["L"] for r in rows}):
        sub = sorted((r for r in rows if r["L"] == L), key=lambda r: r["quad_size"])
        q = _col(sub, "quad_size")
        if L == min(r["L"] for r in rows):
            ax.loglog(q, _col(sub, "eps_G"), "k-", label="eps_G")
        ax.loglog(q, _col(sub, "eps_T"), "o-", ms=3, label=f"eps_T L={L}")
        if key in sub[0] and L > 2:
            ax.loglog(q, np.maximum(_col(sub, key), 1e-17), "x:", label=f"{key} L={L}")
    ax.set_xlabel("quadrature size at level 2")
    ax.set_ylabel("error")
    ax.legend(fontsize=6, ncol=2)
    return _finish(fig, path)


def plot_fixed_ell(rows, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for ell in sorted({r["ell"] for r in rows}):
        sub = sorted((r for r in rows if r["ell"] == ell), key=lambda r: r["quad_size"])
        q = _col(sub, "quad_size")
        line, = ax.loglog(q, _col(sub, "eps_T"), "o-", ms=3, label=f"eps_T ell={ell}")
        ax.loglog(q, _col(sub, "eps_G"), "-", color=line.get_color(), lw=0.8)
        ax.loglog(q, np.maximum(_col(sub, "dTG"), 1e-17), "x:", color=line.get_color())
    ax.set_xlabel("quadrature size at level 2")
    ax.set_ylabel("error (solid: eps_G, dotted: |eps_T - eps_G|)")
    ax.legend(fontsize=7)
    return _finish(fig, path)


def plot_scaling(rows, best, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for L in sorted({r["levels"] for r in rows}):
        sub = [r for r in rows if r["levels"] == L]
        ax.loglog(_col(sub, "N"), _col(sub, "fmm_time"), "o:", ms=3, label=f"L={L}")
    n = _col(best, "N")
    ax.loglog(n, _col(best, "fmm_time"), "k-", lw=2, label="best L")
    ax.loglog(n, _col(best, "direct_time"), "r--", label="direct")
    ax.loglog(n, _col(best, "fmm_time")[0] * n / n[0], color="gray", lw=0.8, label="O(N)")
    ax.set_xlabel("N")
    ax.set_ylabel("seconds")
    ax.legend(fontsize=7)
    return _finish(fig, path)


def plot_interp(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ell = _col(rows, "ell")
    ax.loglog(ell, _col(rows, "fft_seconds"), "o-", label="FFT resampling")
    ax.loglog(ell, _col(rows, "seminaive_seconds"), "s-", label="semi-naive")
    ax.set_xlabel("ell")
    ax.set_ylabel("seconds per field")
    ax.legend()
    return _finish(fig, path)
