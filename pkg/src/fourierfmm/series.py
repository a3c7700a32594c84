"""Gegenbauer series for the Helmholtz kernel, the diagonal transfer
function, and selection of the truncation order ``ell``."""

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .specfun import sph_hn1_all, sph_jn_all, legendre_p_all


class LowFrequencyBreakdownWarning(UserWarning):
    """Transfer function amplitude large enough that roundoff dominates."""

    def __init__(self, message, kappa=None, box_size=None, amplitude=None,
                 relaxed_epsilon=None):
        super().__init__(message)
        self.kappa = kappa
        self.box_size = box_size
        self.amplitude = amplitude
        self.relaxed_epsilon = relaxed_epsilon


class TruncationSearchError(RuntimeError):
    pass


class TruncationMethod(str, Enum):
    EBF = "EBF"
    REFINED = "ClosedFormRefined"


@dataclass(frozen=True)
class KernelGeometry:
    kappa: float
    r: np.ndarray
    r0: np.ndarray

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "r0", np.asarray(self.r0, dtype=float))

    @property
    def r_abs(self):
        return float(np.linalg.norm(self.r))

    @property
    def r0_abs(self):
        return float(np.linalg.norm(self.r0))

    @property
    def converges(self):
        """Absolute and uniform convergence region of the series."""
        return self.r0_abs >= 2.0 / math.sqrt(3.0) * self.r_abs

    @classmethod
    def worst_case(cls, kappa, box_size, alpha):
        """Aligned one-buffer-box geometry: |r| = alpha a sqrt(3), |r0| = 2a."""
        return cls(kappa, np.array([0.0, 0.0, alpha * box_size * math.sqrt(3.0)]),
                   np.array([0.0, 0.0, 2.0 * box_size]))


@dataclass(frozen=True)
class TruncationChoice:
    ell: int
    predicted_tail: float
    method: TruncationMethod

    def __post_init__(self):
        if self.predicted_tail < 0:
            raise ValueError("predicted_tail must be non-negative")


def helmholtz_kernel(d):
    """exp(i |d|) / |d| scaled by kappa outside: callers pass kappa-free distances."""
    d = np.asarray(d, dtype=float)
    return np.exp(1j * d) / d


def exact_kernel(kappa, r, r0):
    d = np.linalg.norm(np.asarray(r, dtype=float) + np.asarray(r0, dtype=float), axis=-1)
    return np.exp(1j * kappa * d) / d


def gegenbauer_partial_sum(g, ell):
    """i kappa sum_{n<=ell} (-1)^n (2n+1) h_n(kappa|r0|) j_n(kappa|r|) P_n(r.r0)."""
    r0_abs = g.r0_abs
    if r0_abs == 0:
        raise ValueError("transfer vector r0 must be non-zero")
    r_abs = g.r_abs
    if r_abs == 0:
        cos_t = 1.0
    else:
        cos_t = float(np.clip(np.dot(g.r, g.r0) / (r_abs * r0_abs), -1.0, 1.0))
    n = np.arange(ell + 1)
    h = sph_hn1_all(ell, g.kappa * r0_abs)
    j = sph_jn_all(ell, g.kappa * r_abs)
    p = legendre_p_all(ell, cos_t)
    terms = (-1.0) ** n * (2 * n + 1) * h * j * p
    # the diverging Hankel tail meets underflowed j_n: 0 * inf terms vanish
    terms[j == 0] = 0.0
    return complex(1j * g.kappa * terms.sum())


def gegenbauer_partial_sums(kappa, r_abs, r0_abs, cos_t, ell):
    """Partial sums for many angles at fixed |r| and |r0|; the radial factors
    are computed once."""
    if r0_abs <= 0:
        raise ValueError("transfer vector r0 must be non-zero")
    n = np.arange(ell + 1)
    h = sph_hn1_all(ell, kappa * r0_abs)
    j = sph_jn_all(ell, kappa * r_abs)
    coef = 1j * kappa * (-1.0) ** n * (2 * n + 1) * h * j
    coef[j == 0] = 0.0
    return transfer_from_cosines(coef, np.clip(np.asarray(cos_t, dtype=float), -1.0, 1.0))


def transfer_coefficients(ell, kappa, r0_abs):
    """Coefficients c_n of T(s) = sum_n c_n P_n(s . r0_hat)."""
    if r0_abs <= 0:
        raise ValueError("transfer vector r0 must be non-zero")
    n = np.arange(ell + 1)
    h = sph_hn1_all(ell, kappa * r0_abs)
    return 1j * kappa / (4 * np.pi) * (1j ** n) * (2 * n + 1) * h


def transfer_function(ell, kappa, r0, s_hat):
    """(i kappa / 4 pi) sum_{n<=ell} i^n (2n+1) h_n(kappa|r0|) P_n(s.r0_hat).

    ``s_hat`` is a unit vector or an array of unit vectors (last axis 3).
    """
    r0 = np.asarray(r0, dtype=float)
    r0_abs = float(np.linalg.norm(r0))
    if r0_abs == 0:
        raise ValueError("transfer vector r0 must be non-zero")
    s = np.asarray(s_hat, dtype=float)
    if np.any(np.abs(np.linalg.norm(s, axis=-1) - 1.0) > 1e-12):
        raise ValueError("s_hat must be unit vectors")
    return transfer_at_directions(transfer_coefficients(ell, kappa, r0_abs), s, r0 / r0_abs)


def transfer_at_directions(coef, s, axis):
    """sum_n coef[n] P_n(s . axis) for unit vectors ``s`` (last axis 3).

    The argument is passed to the kernel as its distance to the nearer pole,
    |s -+ axis|^2 / 2, which is accurate where the series is most sensitive.
    """
    s = np.asarray(s, dtype=float)
    axis = np.asarray(axis, dtype=float)
    flat = s.reshape(-1, 3)
    tp = 0.5 * np.sum((flat - axis) ** 2, axis=1)
    tm = 0.5 * np.sum((flat + axis) ** 2, axis=1)
    neg = tm < tp
    t = np.minimum(np.where(neg, tm, tp), 1.0)
    out = _kernels.legendre_series_pole(np.ascontiguousarray(coef, dtype=np.complex128),
                                        np.ascontiguousarray(t), neg)
    return out.reshape(s.shape[:-1]) if s.ndim > 1 else complex(out[0])


def transfer_from_cosines(coef, x):
    x = np.asarray(x, dtype=float)
    out = _kernels.legendre_series(np.ascontiguousarray(coef, dtype=np.complex128),
                                   np.ascontiguousarray(x.ravel()))
    return out.reshape(x.shape) if x.ndim else complex(out[0])


def choose_ell_ebf(kr, digits):
    """Excess bandwidth formula: ceil(kr + 1.8 d^(2/3) kr^(1/3)), at least 1."""
    if kr < 0 or digits <= 0:
        raise ValueError("kr must be non-negative and digits positive")
    return max(1, math.ceil(kr + 1.8 * digits ** (2.0 / 3.0) * kr ** (1.0 / 3.0)))


def _tail_bounds(ells, kappa, r_abs, r0_abs, sign):
    top = int(np.max(ells)) + 1
    h = sph_hn1_all(top, kappa * r0_abs)
    j = sph_jn_all(top, kappa * r_abs)
    s = 1.0 if sign == "plus" else -1.0
    ells = np.asarray(ells)
    with np.errstate(invalid="ignore", over="ignore"):
        a = h[ells + 1] * j[ells]
        b = h[ells] * j[ells + 1]
        a = np.where(j[ells] == 0, 0.0, a)
        b = np.where(j[ells + 1] == 0, 0.0, b)
        val = kappa**2 * (r_abs * r0_abs / (r0_abs + s * r_abs)) * np.abs(a + s * b)
    return val


def gegenbauer_tail_bound(ell, kappa, r_abs, r0_abs, sign):
    """Closed-form tail estimate for the aligned cases P_n = (+-1)^n."""
    if not r0_abs > r_abs > 0:
        raise ValueError("need r0_abs > r_abs > 0")
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    return float(_tail_bounds(np.array([ell]), kappa, r_abs, r0_abs, sign)[0])


def choose_ell(g_worst, epsilon, ell_max=None):
    """Smallest ``ell`` whose closed-form tail bound is below ``epsilon``.

    The EBF supplies the initial guess and search window; for kappa|r| <= 1
    the closed form is unreliable and the EBF value is returned as is.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    kappa = g_worst.kappa
    r_abs = g_worst.r_abs
    r0_abs = g_worst.r0_abs
    kr = kappa * r_abs
    digits = max(-math.log10(epsilon), 0.5)
    guess = choose_ell_ebf(kr, digits)
    if kr <= 1.0:
        tail = max(_tail_bounds(np.array([guess]), kappa, max(r_abs, 1e-300),
                                r0_abs, s)[0] for s in ("plus", "minus")) if r_abs > 0 else 0.0
        return TruncationChoice(guess, float(tail), TruncationMethod.EBF)
    if ell_max is None:
        ell_max = 4 * guess + 100
    lo = max(1, int(math.floor(kr)))
    ells = np.arange(lo, ell_max + 1)
    bound = np.maximum(_tail_bounds(ells, kappa, r_abs, r0_abs, "plus"),
                       _tail_bounds(ells, kappa, r_abs, r0_abs, "minus"))
    ok = np.flatnonzero(bound < epsilon)
    if ok.size == 0:
        raise TruncationSearchError(
            f"no ell <= {ell_max} meets epsilon={epsilon} at kappa|r|={kr:.4g}")
    i = ok[0]
    return TruncationChoice(int(ells[i]), float(bound[i]), TruncationMethod.REFINED)


def transfer_amplitude_bound(ell, kappa, r0_abs):
    """Upper bound on |T| over the sphere (|P_n| <= 1)."""
    return float(np.abs(transfer_coefficients(ell, kappa, r0_abs)).sum())


def check_low_frequency(ell, kappa, box_size, epsilon):
    """Quadrature target after the low-frequency breakdown check.

    If the transfer amplitude exceeds 1/epsilon the target is relaxed to the
    roundoff floor kappa |h_ell(kappa |r0|)| * machine epsilon and a
    :class:`LowFrequencyBreakdownWarning` is emitted.
    """
    r0_abs = 2.0 * box_size
    amp = transfer_amplitude_bound(ell, kappa, r0_abs)
    if amp * epsilon <= 1.0:
        return epsilon
    h = sph_hn1_all(ell, kappa * r0_abs)[ell]
    relaxed = max(epsilon, kappa * abs(h) * np.finfo(float).eps)
    warnings.warn(LowFrequencyBreakdownWarning(
        f"low-frequency breakdown at kappa*a={kappa * box_size:.3g}: "
        f"|T| up to {amp:.3g}; quadrature target relaxed to {relaxed:.3g}",
        kappa=kappa, box_size=box_size, amplitude=amp, relaxed_epsilon=relaxed),
        stacklevel=2)
    return relaxed
