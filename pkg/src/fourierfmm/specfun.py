"""Special functions: Legendre polynomials, spherical Bessel/Hankel and
integer-order cylindrical Bessel functions of real argument.

Every routine that returns a whole range of orders uses a recurrence run in
the stable direction:

* ``j_n`` and ``J_n`` by downward (Miller) recurrence started above the
  turning point and normalized against a closed form or a sum identity,
* ``y_n`` by upward recurrence from the closed forms at ``n = 0, 1``.

Values whose magnitude drops below :data:`UNDERFLOW` are flushed to zero.
"""

from dataclasses import dataclass

import numpy as np

UNDERFLOW = 1e-300
_RESCALE = 1e200


@dataclass(frozen=True)
class SpecialFunctionAccuracy:
    relative_tolerance: float = 1e-14
    max_order: int = 0

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be positive")
        if self.max_order < 0:
            raise ValueError("max_order must be non-negative")


def _miller_start(nmax, x):
    """Starting order for a downward recurrence that must be accurate up to
    order ``nmax`` at argument ``x``."""
    m = max(nmax, float(np.max(x, initial=0.0)))
    return int(m + 20 + np.sqrt(40.0 * (m + 1.0)))


def legendre_p(n, x):
    """Legendre polynomial ``P_n(x)`` by the three-term recurrence.

    ``x`` may be an array; all entries must lie in ``[-1, 1]``.
    """
    if n < 0:
        raise ValueError(f"Legendre order must be non-negative, got {n}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("Legendre argument outside [-1, 1]")
    p0 = np.ones_like(x)
    if n == 0:
        return p0 if p0.ndim else float(p0)
    p1 = x.copy()
    for k in range(1, n):
        p0, p1 = p1, ((2 * k + 1) * x * p1 - k * p0) / (k + 1)
    return p1 if p1.ndim else float(p1)


def legendre_p_all(nmax, x):
    """``P_0..P_nmax`` evaluated at ``x``; shape ``(nmax + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1)
    return out


def sph_jn_all(nmax, x):
    """Spherical Bessel functions ``j_0..j_nmax`` at ``x >= 0``.

    Returns an array of shape ``(nmax + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("spherical Bessel argument must be non-negative")
    shape = x.shape
    xf = np.atleast_1d(x).ravel()
    nm = max(nmax, 1)
    out = np.zeros((nm + 1, xf.size))
    zero = xf == 0.0
    out[0, zero] = 1.0
    pos = ~zero
    if np.any(pos):
        xp = xf[pos]
        start = _miller_start(nm, xp)
        f_next = np.zeros_like(xp)
        f = np.full_like(xp, 1e-280)
        vals = np.zeros((nm + 1, xp.size))
        for n in range(start, 0, -1):
            # f holds j_n, produce j_{n-1}
            f_prev = (2 * n + 1) / xp * f - f_next
            f_next, f = f, f_prev
            if n - 1 <= nm:
                vals[n - 1] = f
            big = np.abs(f) > _RESCALE
            if np.any(big):
                s = np.where(big, 1.0 / _RESCALE, 1.0)
                f = f * s
                f_next = f_next * s
                vals[n - 1:] *= s
        j0 = np.sin(xp) / xp
        j1 = np.sin(xp) / xp**2 - np.cos(xp) / xp
        use0 = np.abs(j0) >= np.abs(j1)
        scale = np.where(use0, j0 / np.where(use0, vals[0], 1.0),
                         j1 / np.where(use0, 1.0, vals[1]))
        vals *= scale
        vals[np.abs(vals) < UNDERFLOW] = 0.0
        out[:, pos] = vals
    return out[:nmax + 1].reshape((nmax + 1,) + shape)


def sph_yn_all(nmax, x):
    """Spherical Bessel functions of the second kind ``y_0..y_nmax``; ``x > 0``.

    Orders that overflow are returned as ``-inf``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("y_n is singular at x = 0")
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = -np.cos(x) / x
    if nmax >= 1:
        out[1] = -np.cos(x) / x**2 - np.sin(x) / x
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    out[np.isnan(out)] = -np.inf
    return out


def sph_hn1_all(nmax, x):
    """Spherical Hankel functions ``h^(1)_0..h^(1)_nmax`` at ``x > 0``."""
    j = sph_jn_all(nmax, x)
    out = np.empty(j.shape, dtype=complex)
    out.real = j
    out.imag = sph_yn_all(nmax, x)
    return out


def sph_bessel_j(n, x):
    """``j_n(x)`` for a single order; ``x`` scalar or array."""
    if n < 0:
        raise ValueError("order must be non-negative")
    r = sph_jn_all(n, x)[n]
    return r if np.ndim(r) else float(r)


def sph_bessel_y(n, x):
    if n < 0:
        raise ValueError("order must be non-negative")
    r = sph_yn_all(n, x)[n]
    return r if np.ndim(r) else float(r)


def sph_hankel1(n, x):
    """``h^(1)_n(x) = j_n(x) + i y_n(x)``; raises at ``x = 0``."""
    if n < 0:
        raise ValueError("order must be non-negative")
    if np.any(np.asarray(x) <= 0):
        raise ValueError("spherical Hankel function is singular at x = 0")
    r = sph_hn1_all(n, x)[n]
    return r if np.ndim(r) else complex(r)


def bessel_jn_all(nmax, x):
    """Cylindrical Bessel ``J_0..J_nmax`` at ``x >= 0``; shape ``(nmax+1,) + x.shape``.

    Miller recurrence normalized with ``J_0 + 2 sum_k J_2k = 1``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("Bessel argument must be non-negative")
    shape = x.shape
    xf = np.atleast_1d(x).ravel()
    out = np.zeros((nmax + 1, xf.size))
    zero = xf == 0.0
    out[0, zero] = 1.0
    pos = ~zero
    if np.any(pos):
        xp = xf[pos]
        start = _miller_start(nmax, xp)
        start += start % 2
        f_next = np.zeros_like(xp)
        f = np.full_like(xp, 1e-280)
        vals = np.zeros((nmax + 1, xp.size))
        norm = np.zeros_like(xp)
        for n in range(start, 0, -1):
            f_prev = 2.0 * n / xp * f - f_next
            f_next, f = f, f_prev
            m = n - 1
            if m <= nmax:
                vals[m] = f
            if m % 2 == 0:
                norm += f if m == 0 else 2.0 * f
            big = np.abs(f) > _RESCALE
            if np.any(big):
                s = np.where(big, 1.0 / _RESCALE, 1.0)
                f = f * s
                f_next = f_next * s
                norm = norm * s
                vals[m:] *= s
        vals /= norm
        vals[np.abs(vals) < UNDERFLOW] = 0.0
        out[:, pos] = vals
    return out.reshape((nmax + 1,) + shape)


def bessel_J(n, x):
    """Integer-order ``J_n(x)``; negative orders via ``J_{-n} = (-1)^n J_n``."""
    m = abs(int(n))
    r = bessel_jn_all(m, x)[m]
    if n < 0 and m % 2:
        r = -r
    return r if np.ndim(r) else float(r)
