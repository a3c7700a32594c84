"""FFT interpolation and anterpolation of fields sampled on a
:class:`~fourierfmm.quadrature.SphereQuadrature`.

Transforms use numpy's ordering [0..N/2-1, -N/2..-1] with the 1/N factor on
the forward side. Resampling keeps |k| <= (min(K, new) - 1) // 2, so when an
even length is involved the unpaired Nyquist coefficient is dropped; this
keeps interpolation and anterpolation exact adjoints of each other.
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import SphereQuadrature

# boxes per batch in resample_values; bounds the (batch, n_theta, N_phi) scratch
CHUNK_BYTES = 64 * 2**20


def fourier_resample_1d(data, new_len, axis=-1):
    """Trigonometric resampling of ``data`` along ``axis`` to ``new_len`` points."""
    data = np.asarray(data)
    k = data.shape[axis]
    if k < 1 or new_len < 1:
        raise ValueError("lengths must be positive")
    if new_len == k:
        return data.astype(complex, copy=True)
    c = np.fft.fft(data, axis=axis)
    h = (min(k, new_len) - 1) // 2
    c = np.moveaxis(c, axis, -1)
    out = np.zeros(c.shape[:-1] + (new_len,), dtype=complex)
    out[..., : h + 1] = c[..., : h + 1]
    if h > 0:
        out[..., -h:] = c[..., -h:]
    out = np.fft.ifft(out, axis=-1) * (new_len / k)
    return np.moveaxis(out, -1, axis)


def _truncate_spectrum(c, new_len):
    """Spectrum along the last axis cut or padded to ``new_len`` (no transform)."""
    k = c.shape[-1]
    h = (min(k, new_len) - 1) // 2
    out = np.zeros(c.shape[:-1] + (new_len,), dtype=complex)
    out[..., : h + 1] = c[..., : h + 1]
    if h > 0:
        out[..., -h:] = c[..., -h:]
    return out


def _row_groups(n_phi):
    """Row indices grouped by row length."""
    return [(int(L), np.flatnonzero(n_phi == L)) for L in np.unique(n_phi)]


def rows_to_grid(values, quad, width):
    """Per-row phi interpolation of stored samples to a common ``width``.

    ``values`` has shape (B, quad.size); returns (B, quad.n_rows, width).
    """
    b = values.shape[0]
    grid = np.empty((b, quad.n_rows, width), dtype=complex)
    for L, rows in _row_groups(quad.n_phi):
        idx = quad.offsets[rows][:, None] + np.arange(L)
        grid[:, rows] = fourier_resample_1d(values[:, idx], width)
    return grid


def grid_to_rows(grid, quad):
    """Per-row phi anterpolation from a (B, n_rows, width) grid to stored samples."""
    b = grid.shape[0]
    out = np.empty((b, quad.size), dtype=complex)
    for L, rows in _row_groups(quad.n_phi):
        idx = quad.offsets[rows][:, None] + np.arange(L)
        out[:, idx] = fourier_resample_1d(grid[:, rows], L)
    return out


def wrap_to_columns(grid, n_theta):
    """Half-storage rows (n = 0..n_theta/2) to full theta-periodic columns.

    Uses value(theta_n, phi_m) = value(theta_{n_theta - n}, phi_{m + W/2}).
    Returns (B, n_theta, W/2) for columns m < W/2.
    """
    w = grid.shape[-1]
    half = n_theta // 2
    cols = np.empty(grid.shape[:1] + (n_theta, w // 2), dtype=complex)
    cols[:, : half + 1] = grid[:, :, : w // 2]
    if half > 1:
        cols[:, half + 1:] = grid[:, half - 1:0:-1, w // 2:]
    return cols


def wrap_to_rows(cols, n_theta):
    """Inverse of :func:`wrap_to_columns`: rows 0..n_theta/2 with full phi period."""
    half = n_theta // 2
    w2 = cols.shape[-1]
    grid = np.empty(cols.shape[:1] + (half + 1, 2 * w2), dtype=complex)
    grid[:, :, :w2] = cols[:, : half + 1]
    grid[:, 0, w2:] = cols[:, 0]
    if half > 0:
        grid[:, 1:, w2:] = cols[:, n_theta - 1: n_theta - half - 1: -1]
    # theta_{n_theta - n} at n = n_theta/2 is the same row
    grid[:, half, w2:] = cols[:, half]
    return grid


def _resample_values_route(values, src, dst, width):
    grid = rows_to_grid(values, src, width)
    cols = wrap_to_columns(grid, src.n_theta)
    cols = fourier_resample_1d(cols, dst.n_theta, axis=1)
    return grid_to_rows(wrap_to_rows(cols, dst.n_theta), dst)


def _resample_coeff_route(values, src, dst, width):
    b = values.shape[0]
    spec = np.empty((b, src.n_rows, width), dtype=complex)
    for L, rows in _row_groups(src.n_phi):
        idx = src.offsets[rows][:, None] + np.arange(L)
        spec[:, rows] = _truncate_spectrum(np.fft.fft(values[:, idx], axis=-1) / L, width)
    # rows past the pole: c(theta_{N-n}, m) = (-1)^m c(theta_n, m)
    half = src.n_theta // 2
    sign = np.where(np.fft.fftfreq(width, 1.0 / width).astype(int) % 2, -1.0, 1.0)
    full = np.empty((b, src.n_theta, width), dtype=complex)
    full[:, : half + 1] = spec
    if half > 1:
        full[:, half + 1:] = spec[:, half - 1:0:-1] * sign
    full = fourier_resample_1d(full, dst.n_theta, axis=1)[:, : dst.n_rows]
    out = np.empty((b, dst.size), dtype=complex)
    for L, rows in _row_groups(dst.n_phi):
        idx = dst.offsets[rows][:, None] + np.arange(L)
        out[:, idx] = np.fft.ifft(_truncate_spectrum(full[:, rows], L), axis=-1) * L
    return out


def resample_values(values, src, dst, method="coeff"):
    """Resample stored samples from quadrature ``src`` to ``dst``.

    ``values`` is (src.size,) or (B, src.size). ``method`` selects the
    value-domain wrap ("value") or the equivalent coefficient-domain wrap
    ("coeff").
    """
    values = np.asarray(values)
    single = values.ndim == 1
    v2 = values[None] if single else values
    if v2.shape[-1] != src.size:
        raise ValueError(f"expected {src.size} samples per field, got {v2.shape[-1]}")
    if src == dst:
        out = v2.astype(complex, copy=True)
        return out[0] if single else out
    route = {"coeff": _resample_coeff_route, "value": _resample_values_route}[method]
    width = max(src.max_n_phi, dst.max_n_phi)
    per_box = 16 * width * max(src.n_theta, dst.n_theta) * 2
    chunk = max(1, CHUNK_BYTES // per_box)
    out = np.empty((v2.shape[0], dst.size), dtype=complex)
    for s in range(0, v2.shape[0], chunk):
        out[s: s + chunk] = route(v2[s: s + chunk], src, dst, width)
    return out[0] if single else out


@dataclass(frozen=True)
class SphericalField:
    quadrature: SphereQuadrature
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape[-1] != self.quadrature.size:
            raise ValueError(
                f"field has {s.shape[-1]} samples, quadrature needs {self.quadrature.size}")
        object.__setattr__(self, "samples", s)

    def row(self, n):
        return self.samples[..., self.quadrature.row_slice(n)]

    def inner(self, other):
        """Discrete doubled-sphere inner product sum w f conj(g)."""
        if other.quadrature != self.quadrature:
            raise ValueError("fields live on different quadratures")
        return np.sum(self.quadrature.weights() * self.samples * np.conj(other.samples), axis=-1)

    def torus_grid(self):
        """Full n_theta x W grid (W = max row length) after phi interpolation."""
        q = self.quadrature
        s = self.samples[None] if self.samples.ndim == 1 else self.samples
        w = q.max_n_phi
        cols = wrap_to_columns(rows_to_grid(s, q, w), q.n_theta)
        grid = np.empty((s.shape[0], q.n_theta, w), dtype=complex)
        grid[:, :, : w // 2] = cols
        # second half of each full row: phi_{m + W/2} at theta_n is theta_{N-n}, phi_m
        grid[:, :, w // 2:] = cols[:, (-np.arange(q.n_theta)) % q.n_theta]
        return grid[0] if self.samples.ndim == 1 else grid


def resample_field(field, target, method="coeff"):
    return SphericalField(target, resample_values(field.samples, field.quadrature,
                                                  target, method))


def sample_function(quad, func):
    """Samples of ``func(directions)`` on the stored rows of ``quad``."""
    return func(quad.directions())


def pole_spread(values, quad):
    """Largest deviation of the pole rows from their mean (a sphere function
    takes one value per pole)."""
    v = np.atleast_2d(values)
    out = 0.0
    for n in (0, quad.n_rows - 1):
        row = v[:, quad.row_slice(n)]
        out = max(out, float(np.abs(row - row.mean(axis=-1, keepdims=True)).max()))
    return out


def symmetrize_poles(values, quad):
    """Project pole rows onto the half-period-invariant subspace.

    Rows 0 and n_theta/2 are their own images under theta -> -theta,
    phi -> phi + pi, so a consistent field needs row[m] == row[m + L/2] there.
    """
    v = np.array(values, dtype=complex, copy=True)
    for n in (0, quad.n_rows - 1):
        sl = quad.row_slice(n)
        row = v[..., sl]
        h = row.shape[-1] // 2
        avg = 0.5 * (row[..., :h] + row[..., h:])
        v[..., sl] = np.concatenate([avg, avg], axis=-1)
    return v
