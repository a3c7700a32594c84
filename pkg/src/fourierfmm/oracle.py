"""Reference computations: direct summation and single-pair error splits."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .quadrature import SphereQuadrature, phase_tables
from .series import (KernelGeometry, exact_kernel, gegenbauer_partial_sum,
                     gegenbauer_partial_sums)
from .xfer import build_bandlimited_transfer


def direct_sum(points, weights, kappa, compensated=True):
    """sigma_i = sum_{j != i} exp(i kappa r_ij) / r_ij psi_j.

    The default accumulates with error-free transformations; the plain loop
    (``compensated=False``) is the fair timing baseline.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    w = np.ascontiguousarray(weights, dtype=complex)
    if pts.ndim != 2 or pts.shape[1] != 3 or w.shape != (pts.shape[0],):
        raise ValueError("points must be (N, 3) and weights (N,)")
    n = pts.shape[0]
    if compensated:
        out, bad = _kernels.direct_sum_compensated(pts, w, float(kappa))
        bad //= 2
    else:
        out = np.zeros(n, dtype=complex)
        one = np.zeros(1, np.int64)
        bad = _kernels.near_field(out, pts, w, one, np.array([n]), np.array([0, 1]), one,
                                  float(kappa)) // 2
    if bad:
        raise ValueError(f"{bad} coincident particle pairs")
    return out


@dataclass(frozen=True)
class ErrorTriple:
    eps_T: complex
    eps_G: complex
    eps_I: complex

    @classmethod
    def from_values(cls, exact, series_value, quad_value):
        eps_t = exact - quad_value
        eps_g = exact - series_value
        return cls(eps_t, eps_g, eps_t - eps_g)


def quadrature_pair_value(kappa, r, transfer):
    """sum_k w_k exp(i kappa s_k . r) T_k over stored samples (full-torus weights)."""
    q = transfer.quadrature
    r = np.atleast_2d(np.asarray(r, dtype=float))
    n = r.shape[0]
    out = np.zeros(n, dtype=complex)
    # L2P of the transfer samples at "particles" -r around a box centered at 0
    _kernels.l2p(out, np.ascontiguousarray(transfer.values)[None], np.array([0]),
                 np.array([n]), np.zeros((1, 3)), np.ascontiguousarray(-r), q.weights(),
                 float(kappa), *phase_tables(q))
    return out


def single_pair_error(kappa, r, r0, ell, quadrature, transfer=None):
    """(eps_T, eps_G, eps_I) for one displacement ``r`` and transfer vector ``r0``."""
    if transfer is None:
        transfer = build_bandlimited_transfer(ell, kappa, r0, quadrature)
    exact = complex(exact_kernel(kappa, r, r0))
    ser = gegenbauer_partial_sum(KernelGeometry(kappa, r, r0), ell)
    val = complex(quadrature_pair_value(kappa, r, transfer)[0])
    return ErrorTriple.from_values(exact, ser, val)


def scan_errors(kappa, r_abs, r0, ell, quadrature, dirs):
    """Error triples for r = r_abs * d over unit directions ``dirs``.

    Returns arrays (eps_T, eps_G, eps_I).
    """
    transfer = build_bandlimited_transfer(ell, kappa, r0, quadrature)
    rv = r_abs * np.asarray(dirs, dtype=float)
    quad = quadrature_pair_value(kappa, rv, transfer)
    exact = exact_kernel(kappa, rv, np.asarray(r0, float)[None])
    r0 = np.asarray(r0, dtype=float)
    r0_abs = float(np.linalg.norm(r0))
    dirs = np.asarray(dirs, dtype=float)
    cos_t = dirs @ r0 / (np.linalg.norm(dirs, axis=1) * r0_abs)
    ser = np.atleast_1d(gegenbauer_partial_sums(kappa, r_abs, r0_abs, cos_t, ell))
    eps_t = exact - quad
    eps_g = exact - ser
    return eps_t, eps_g, eps_t - eps_g


def ebf_comparison_quadrature(ell):
    """N_theta = 2 ell + 1 rounded up to even, every row 2 ell + 1 rounded up to a multiple of 4."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    k = 2 * ell + 1
    return SphereQuadrature.uniform(k + k % 2, k + (-k) % 4)


@lru_cache(maxsize=None)
def _icosphere(level):
    t = (1 + 5**0.5) / 2
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(p, float) / np.linalg.norm(p) for p in v]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9),
             (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2),
             (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10),
             (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts)


def scan_directions(n_min=642):
    """Icosphere vertices (12, 42, 162, 642, 2562, 10242, ...) with at least
    ``n_min`` points, plus the six axis directions."""
    level = 0
    while 10 * 4**level + 2 < n_min:
        level += 1
    axes = np.vstack([np.eye(3), -np.eye(3)])
    return np.vstack([axes, _icosphere(level)])
