"""Uniform quadrature on the doubled sphere.

Directions are parametrized as s(theta, phi) = (sin t cos p, sin t sin p, cos t)
with theta and phi both running over [0, 2 pi). Every physical direction is
hit twice, so integrals over the torus carry the weight |sin theta| / 2.

Only rows 0..n_theta/2 are stored; row n_theta - n holds the same values
shifted by half a period in phi.
"""

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .series import (KernelGeometry, check_low_frequency, transfer_at_directions,
                     transfer_coefficients)
from .specfun import bessel_jn_all


class QuadratureSearchError(RuntimeError):
    pass


def abs_sin_fourier(n):
    """Fourier coefficients of |sin theta|: 2/(pi(1-n^2)) for even n, else 0."""
    n = np.asarray(n)
    nf = n.astype(float)
    even = (n % 2) == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(even, 2.0 / (np.pi * (1.0 - nf * nf)), 0.0)
    return out if out.ndim else float(out)


def directions(theta, phi):
    """Unit vectors for broadcastable theta/phi arrays, last axis 3."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class SphereQuadrature:
    n_theta: int
    n_phi: np.ndarray
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n_phi = np.asarray(self.n_phi, dtype=np.int64)
        if self.n_theta <= 0 or self.n_theta % 2:
            raise ValueError("n_theta must be a positive even integer")
        if n_phi.shape != (self.n_theta // 2 + 1,):
            raise ValueError(f"need {self.n_theta // 2 + 1} phi rows, got {n_phi.shape}")
        if np.any(n_phi <= 0) or np.any(n_phi % 4):
            raise ValueError("every n_phi entry must be a positive multiple of 4")
        n_phi.setflags(write=False)
        object.__setattr__(self, "n_phi", n_phi)
        off = np.concatenate([[0], np.cumsum(n_phi)])
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)

    def __eq__(self, other):
        return (isinstance(other, SphereQuadrature) and self.n_theta == other.n_theta
                and np.array_equal(self.n_phi, other.n_phi))

    def __hash__(self):
        return hash((self.n_theta, self.n_phi.tobytes()))

    @property
    def n_rows(self):
        return self.n_theta // 2 + 1

    @property
    def size(self):
        """Number of stored samples (rows 0..n_theta/2)."""
        return int(self.offsets[-1])

    @property
    def torus_points(self):
        """Points of the full doubled-sphere grid."""
        h = self.n_theta // 2
        return int(2 * self.n_phi[1:h].sum() + self.n_phi[0] + self.n_phi[h])

    @property
    def sphere_points(self):
        """Distinct-direction count, half the torus grid."""
        return int(self.n_phi[: self.n_theta // 2].sum())

    @property
    def max_n_phi(self):
        return int(self.n_phi.max())

    @property
    def theta(self):
        return 2 * np.pi * np.arange(self.n_rows) / self.n_theta

    def row_slice(self, n):
        return slice(int(self.offsets[n]), int(self.offsets[n + 1]))

    def row_index(self):
        return np.repeat(np.arange(self.n_rows), self.n_phi)

    def angles(self):
        """(theta, phi) of every stored sample, row-major."""
        rows = self.row_index()
        m = np.arange(self.size) - self.offsets[rows]
        return (2 * np.pi * rows / self.n_theta,
                2 * np.pi * m / self.n_phi[rows])

    def directions(self):
        return directions(*self.angles())

    def weights(self):
        """Torus weights folded onto stored rows; they sum to 4 pi^2."""
        c = np.full(self.n_rows, 2.0)
        c[0] = 1.0
        c[-1] = 1.0
        w = c * 4 * np.pi**2 / (self.n_theta * self.n_phi)
        return np.repeat(w, self.n_phi)

    def to_text(self):
        return f"{self.n_theta}\n{' '.join(str(int(v)) for v in self.n_phi)}\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if len(lines) != 2:
            raise ValueError("quadrature text needs exactly two lines")
        return cls(int(lines[0]), np.array(lines[1].split(), dtype=np.int64))

    @classmethod
    def uniform(cls, n_theta, n_phi):
        return cls(n_theta, np.full(n_theta // 2 + 1, n_phi))


@dataclass(frozen=True)
class QuadratureSpec:
    kappa: float
    box_size: float
    alpha: float
    epsilon: float
    ell: int

    def __post_init__(self):
        if not (self.kappa > 0 and self.box_size > 0 and self.epsilon > 0):
            raise ValueError("kappa, box_size and epsilon must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.ell < 0:
            raise ValueError("ell must be non-negative")

    @property
    def r_abs(self):
        return self.alpha * self.box_size * math.sqrt(3.0)

    @property
    def r0_abs(self):
        return 2.0 * self.box_size

    def geometry(self):
        return KernelGeometry.worst_case(self.kappa, self.box_size, self.alpha)


def default_n_max(ell):
    return 2 * ell + 1 + max(32, math.ceil(ell / 2))


def _abs_sin_matrix(n_out, ell):
    """S[q, p] = F_{q-p}[|sin|] for |q| <= n_out, |p| <= ell."""
    q = np.arange(-n_out, n_out + 1)[:, None]
    p = np.arange(-ell, ell + 1)[None, :]
    return abs_sin_fourier(q - p)


def half_transfer_theta_coeffs(ell, kappa, r0, phi):
    """theta-Fourier coefficients (index -ell..ell) of T/2 along the columns ``phi``.

    T restricted to a meridian is a trigonometric polynomial of degree ell in
    theta, so 2 ell + 1 samples determine it exactly.
    """
    r0 = np.asarray(r0, dtype=float)
    r0_abs = float(np.linalg.norm(r0))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    k = 2 * ell + 1
    th = 2 * np.pi * np.arange(k) / k
    coef = transfer_coefficients(ell, kappa, r0_abs)
    if r0[0] == 0.0 and r0[1] == 0.0:
        # axial transfer vector: T does not depend on phi
        s = directions(th[:, None], phi[None, :1])
        vals = np.repeat(0.5 * transfer_at_directions(coef, s, r0 / r0_abs), phi.size, axis=1)
    else:
        s = directions(th[:, None], phi[None, :])
        vals = 0.5 * transfer_at_directions(coef, s, r0 / r0_abs)
    spec = np.fft.fft(vals, axis=0) / k
    return np.fft.fftshift(spec, axes=0)


def modified_transfer_theta_coeffs(ell, kappa, r0, phi, n_keep):
    """Exact coefficients |q| <= n_keep of T |sin| / 2 along the columns ``phi``."""
    t = half_transfer_theta_coeffs(ell, kappa, r0, phi)
    return _abs_sin_matrix(n_keep, ell) @ t


def modified_transfer_columns(ell, kappa, r0, n_theta, phi):
    """Bandlimited modified transfer function on theta_n = 2 pi n / n_theta.

    Frequencies |q| <= n_theta/2 - 1 are kept exactly; returns an array of
    shape (n_theta, len(phi)).
    """
    if n_theta % 2:
        raise ValueError("n_theta must be even")
    h = n_theta // 2 - 1
    c = modified_transfer_theta_coeffs(ell, kappa, r0, phi, h)
    spec = np.zeros((n_theta, c.shape[1]), dtype=complex)
    spec[: h + 1] = c[h:]
    if h > 0:
        spec[-h:] = c[:h]
    return np.fft.ifft(spec, axis=0) * n_theta


def _bessel_abs(nmax, x):
    b = np.abs(bessel_jn_all(nmax, x))
    b[b < 1e-300] = 0.0
    return b


def theta_error_bound(spec, n_theta, n_max=None):
    """4 pi^2 sum_n |T~s_n| |J_M(N, n)(kappa |r|)| for the z-axis worst case."""
    n_max = n_max or default_n_max(spec.ell)
    f = max(n_max // 2 - 1, spec.ell + n_theta // 2)
    c = np.abs(modified_transfer_theta_coeffs(spec.ell, spec.kappa,
                                              [0.0, 0.0, spec.r0_abs], [0.0], f)[:, 0])
    bess = _bessel_abs(max(n_theta, f) + 1, spec.kappa * spec.r_abs)
    return 4 * np.pi**2 * _kernels.aliasing_bound(c, bess, n_theta)


def choose_n_theta(spec, n_max=None, retries=2):
    """Smallest even N >= 2 ell whose aliasing bound is below epsilon."""
    n_max = n_max or default_n_max(spec.ell)
    start = max(2, 2 * spec.ell + (2 * spec.ell) % 2)
    thresh = spec.epsilon / (4 * np.pi**2)
    for _ in range(retries + 1):
        f = n_max // 2 - 1
        c = np.abs(modified_transfer_theta_coeffs(
            spec.ell, spec.kappa, [0.0, 0.0, spec.r0_abs], [0.0], f)[:, 0])
        bess = _bessel_abs(n_max + f + 1, spec.kappa * spec.r_abs)
        n = _kernels.aliasing_bound_scan(np.ascontiguousarray(c), bess, start,
                                         n_max + 1, 2, thresh)
        if n > 0:
            return int(n)
        n_max = 2 * spec.ell + 1 + 2 * (n_max - 2 * spec.ell - 1)
    raise QuadratureSearchError(
        f"no n_theta <= {n_max} meets epsilon={spec.epsilon} (ell={spec.ell})")


def _phi_coeffs_x_axis(spec, n_theta, rows):
    k = 2 * spec.ell + 1
    # T is even in phi for an x-axis transfer vector: build m <= ell, mirror the rest
    phi = 2 * np.pi * np.arange(spec.ell + 1) / k
    half = modified_transfer_columns(spec.ell, spec.kappa, [spec.r0_abs, 0.0, 0.0],
                                     n_theta, phi)[rows]
    vals = np.concatenate([half, half[:, :0:-1]], axis=1)
    return np.fft.fftshift(np.fft.fft(vals, axis=1) / k, axes=1)


def choose_n_phi(spec, n_theta, n_max=None, retries=2):
    """Per-row N_phi (multiple of 4) for rows 0..n_theta/2, x-axis worst case.

    Rows past the equator are mirrored from the northern half, so the result
    is exactly symmetric.
    """
    n_max = n_max or default_n_max(spec.ell)
    half = n_theta // 2
    rows = np.arange(half // 2 + 1)
    coef = np.abs(_phi_coeffs_x_axis(spec, n_theta, rows))
    sin_t = np.abs(np.sin(2 * np.pi * rows / n_theta))
    sin_t[0] = 0.0
    thresh = spec.epsilon / (4 * np.pi**2)
    out = np.zeros(half + 1, dtype=np.int64)
    # first attempt for every row in one batched recurrence
    first = _bessel_abs(n_max + spec.ell + 1, spec.kappa * spec.r_abs * sin_t)
    for i, n in enumerate(rows):
        nm = n_max
        for attempt in range(retries + 1):
            if attempt == 0:
                bess = np.ascontiguousarray(first[:, i])
            else:
                bess = _bessel_abs(nm + spec.ell + 1, spec.kappa * spec.r_abs * sin_t[i])
            got = _kernels.aliasing_bound_scan(np.ascontiguousarray(coef[i]), bess,
                                               4, nm + 1, 4, thresh)
            if got > 0:
                out[n] = got
                break
            nm *= 2
        else:
            raise QuadratureSearchError(
                f"no n_phi <= {nm} meets epsilon={spec.epsilon} in row {n}")
    out[half - rows] = out[rows]
    return out


def phi_error_bound(spec, n_theta, n_phi):
    """Per-row 4 pi^2 sum_m |T~_m| |J_M(N_phi, m)(kappa |r| sin theta_n)|."""
    half = n_theta // 2
    rows = np.arange(half + 1)
    coef = np.abs(_phi_coeffs_x_axis(spec, n_theta, rows))
    sin_t = np.abs(np.sin(2 * np.pi * rows / n_theta))
    sin_t[0] = sin_t[-1] = 0.0
    out = np.empty(half + 1)
    allb = _bessel_abs(int(np.max(n_phi)) + spec.ell + 1, spec.kappa * spec.r_abs * sin_t)
    for n in rows:
        bess = np.ascontiguousarray(allb[: int(n_phi[n]) + spec.ell + 2, n])
        out[n] = 4 * np.pi**2 * _kernels.aliasing_bound(
            np.ascontiguousarray(coef[n]), bess, int(n_phi[n]))
    return out


def build_quadrature(spec, n_max=None):
    """N_theta search, then per-row N_phi search.

    When the transfer amplitude is too large for the requested accuracy the
    target is relaxed (with a warning) before searching.
    """
    eps = check_low_frequency(spec.ell, spec.kappa, spec.box_size, spec.epsilon)
    if eps != spec.epsilon:
        spec = QuadratureSpec(spec.kappa, spec.box_size, spec.alpha, eps, spec.ell)
    n_theta = choose_n_theta(spec, n_max)
    return SphereQuadrature(n_theta, choose_n_phi(spec, n_theta, n_max))


@lru_cache(maxsize=32)
def phase_tables(quad):
    """(n_phi, offsets, cos t, sin t, cos p, sin p) used by the compiled
    plane-wave kernels; mirrored rows get exactly mirrored cosines."""
    _, ph = quad.angles()
    t = quad.theta
    ct = np.cos(t)
    st = np.sin(t)
    st[0] = 0.0
    ct[0] = 1.0
    h = quad.n_rows
    for n in range(h // 2, h):
        ct[n] = -ct[h - 1 - n]
        st[n] = st[h - 1 - n]
    return (np.ascontiguousarray(quad.n_phi, dtype=np.int64),
            np.ascontiguousarray(quad.offsets, dtype=np.int64), ct, st, np.cos(ph), np.sin(ph))


def gauss_legendre_count(ell):
    """Point count of the standard spherical-harmonic rule, 2 (ell+1)^2."""
    return 2 * (ell + 1) ** 2
