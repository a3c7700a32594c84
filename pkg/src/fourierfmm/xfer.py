"""Bandlimited modified transfer functions and the reflection table that
serves all 316 interaction offsets from 34 stored vectors."""

import hashlib
import itertools
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quadrature import (SphereQuadrature, abs_sin_fourier, directions,
                         modified_transfer_columns)
from .series import transfer_at_directions, transfer_coefficients
from .spherefft import fourier_resample_1d, grid_to_rows, wrap_to_rows


def _grid_width(ell, quad):
    # enough phi samples to hold degree ell exactly, multiple of 4
    w = 2 * ell + 2
    w += (-w) % 4
    return max(w, quad.max_n_phi)


@dataclass(frozen=True)
class TransferSamples:
    quadrature: SphereQuadrature
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.quadrature.size,):
            raise ValueError("transfer samples do not match quadrature size")
        object.__setattr__(self, "values", v)

    def row(self, n):
        return self.values[self.quadrature.row_slice(n)]


def bandlimited_transfer_grid(ell, kappa, r0, n_theta, width):
    """T^{s,L} on rows 0..n_theta/2 and ``width`` uniform phi nodes.

    Only phi_m with m < width/2 is computed; the other half comes from the
    doubled-sphere symmetry.
    """
    phi = 2 * np.pi * np.arange(width // 2) / width
    cols = modified_transfer_columns(ell, kappa, r0, n_theta, phi)
    return wrap_to_rows(cols[None], n_theta)[0]


def build_bandlimited_transfer(ell, kappa, r0, quadrature):
    """Stored-row samples of T^{s,LL}: the theta-bandlimited modified
    transfer function, anterpolated per row to that row's phi count."""
    w = _grid_width(ell, quadrature)
    grid = bandlimited_transfer_grid(ell, kappa, r0, quadrature.n_theta, w)
    return TransferSamples(quadrature, grid_to_rows(grid[None], quadrature)[0])


def build_bandlimited_transfer_realspace(ell, kappa, r0, quadrature):
    """Same samples via real-space products: interpolate T/2 to
    n_theta + 2 ell - 1 points, multiply by a bandlimited |sin|, anterpolate."""
    n_theta = quadrature.n_theta
    w = _grid_width(ell, quadrature)
    k = 2 * ell + 1
    big = n_theta + 2 * ell - 1
    r0 = np.asarray(r0, dtype=float)
    r0_abs = float(np.linalg.norm(r0))
    th = 2 * np.pi * np.arange(k) / k
    phi = 2 * np.pi * np.arange(w) / w
    half_t = 0.5 * transfer_at_directions(transfer_coefficients(ell, kappa, r0_abs),
                                          directions(th[:, None], phi[None, :]), r0 / r0_abs)
    fine = fourier_resample_1d(half_t, big, axis=0)
    h = (big - 1) // 2
    freqs = np.fft.fftfreq(big, 1.0 / big).astype(int)
    s_coef = np.where(np.abs(freqs) <= h, abs_sin_fourier(freqs), 0.0)
    s_vals = np.fft.ifft(s_coef) * big
    prod = fine * s_vals[:, None]
    t_sl = fourier_resample_1d(prod, n_theta, axis=0)[: n_theta // 2 + 1]
    return TransferSamples(quadrature, grid_to_rows(t_sl[None], quadrature)[0])


# --- reflection symmetry ------------------------------------------------------

def interaction_offsets():
    """All 316 one-buffer interaction offsets, sorted."""
    r = range(-3, 4)
    return [v for v in itertools.product(r, r, r) if max(abs(c) for c in v) >= 2]


@dataclass(frozen=True)
class ReflectionRule:
    """v = S P c with P the optional x<->y swap and S = diag(sx, sy, sz)."""
    sx: int = 1
    sy: int = 1
    sz: int = 1
    swap: bool = False

    def apply(self, c):
        x, y, z = c
        if self.swap:
            x, y = y, x
        return (self.sx * x, self.sy * y, self.sz * z)

    @property
    def is_identity(self):
        return self.sx == self.sy == self.sz == 1 and not self.swap


def canonicalize(v):
    """Canonical representative (x >= y >= 0, z >= 0) and the rule mapping it back to v."""
    x, y, z = (int(c) for c in v)
    ax, ay = abs(x), abs(y)
    swap = ay > ax
    c = (max(ax, ay), min(ax, ay), abs(z))
    rule = ReflectionRule(1 if x >= 0 else -1, 1 if y >= 0 else -1, 1 if z >= 0 else -1, swap)
    return c, rule


def canonical_transfer_vectors():
    """(sorted canonical offsets, {offset: (canonical, rule)}) over the 316 offsets."""
    rules = {v: canonicalize(v) for v in interaction_offsets()}
    canon = sorted({c for c, _ in rules.values()})
    return canon, rules


def sample_permutation(quad, rule):
    """Index array p with T_v[k] = T_c[p[k]] on stored samples.

    T_v(s) = T_c(R^T s) and R^T = P S, so each node is mapped by the sign
    flips first and then the swap; every map lands on a node because n_theta
    is even and each n_phi is a multiple of 4.
    """
    half = quad.n_theta // 2
    rows = quad.row_index()
    m = np.arange(quad.size) - quad.offsets[rows]
    L = quad.n_phi[rows]
    if rule.sz < 0:
        rows = half - rows
    if rule.sx < 0:
        m = (L // 2 - m) % L
    if rule.sy < 0:
        m = (-m) % L
    if rule.swap:
        m = (L // 4 - m) % L
    return quad.offsets[rows] + m


def unwrap_transfer(samples, rule):
    """Samples for the reflected transfer vector, by permutation only."""
    q = samples.quadrature
    if q.n_theta % 2 or np.any(q.n_phi % 4):
        raise ValueError("reflections need n_theta even and every n_phi a multiple of 4")
    if rule.is_identity:
        return samples
    return TransferSamples(q, samples.values[sample_permutation(q, rule)])


@dataclass
class CanonicalTransferSet:
    """Per-level transfer samples for the 34 canonical offsets.

    ``table(offset)`` returns samples for any interaction offset (in units
    of the box size, source minus target) by permuting a canonical block.
    """
    level: int
    ell: int
    kappa: float
    box_size: float
    quadrature: SphereQuadrature
    canonical: list
    values: np.ndarray          # (34, quadrature.size)
    _index: dict = field(default_factory=dict, repr=False)
    _perm: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {tuple(c): i for i, c in enumerate(self.canonical)}
        self._rules = canonical_transfer_vectors()[1]

    @classmethod
    def build(cls, level, ell, kappa, box_size, quadrature, realspace=False):
        canon, _ = canonical_transfer_vectors()
        fn = build_bandlimited_transfer_realspace if realspace else build_bandlimited_transfer
        vals = np.empty((len(canon), quadrature.size), dtype=complex)
        for i, c in enumerate(canon):
            vals[i] = fn(ell, kappa, box_size * np.asarray(c, float), quadrature).values
        return cls(level, ell, kappa, box_size, quadrature, canon, vals)

    def rule_for(self, offset):
        return self._rules[tuple(int(c) for c in offset)]

    def table(self, offset):
        c, rule = self.rule_for(offset)
        block = self.values[self._index[c]]
        if rule.is_identity:
            return block
        key = (rule.sx, rule.sy, rule.sz, rule.swap)
        p = self._perm.get(key)
        if p is None:
            p = self._perm[key] = sample_permutation(self.quadrature, rule)
        return block[p]

    def dense_tables(self, offsets):
        """(len(offsets), size) array of samples, one row per offset."""
        out = np.empty((len(offsets), self.quadrature.size), dtype=complex)
        for i, off in enumerate(offsets):
            out[i] = self.table(off)
        return out

    @property
    def nbytes(self):
        return self.values.nbytes


# --- binary cache -------------------------------------------------------------

MAGIC = b"FBFMMXF\x00"
VERSION = 1
_HEAD = struct.Struct("<8sI32sdiiii")


def spec_hash(level, ell, kappa, box_size, alpha, epsilon, quadrature):
    key = dict(level=int(level), ell=int(ell), kappa=float(kappa).hex(),
               box_size=float(box_size).hex(), alpha=float(alpha).hex(),
               epsilon=float(epsilon).hex(), n_theta=int(quadrature.n_theta),
               n_phi=[int(v) for v in quadrature.n_phi], version=VERSION)
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).digest()


class CacheMismatchError(ValueError):
    pass


def save_transfer_set(path, ts, digest):
    q = ts.quadrature
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, digest, float(ts.kappa), int(ts.level),
                            int(ts.ell), int(q.n_theta), int(q.n_rows)))
        fh.write(np.asarray(q.n_phi, dtype="<i4").tobytes())
        fh.write(struct.pack("<d", float(ts.box_size)))
        fh.write(np.ascontiguousarray(ts.values, dtype="<c16").tobytes())


def load_transfer_set(path, digest=None):
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise CacheMismatchError("truncated transfer cache header")
    magic, version, dg, kappa, level, ell, n_theta, n_rows = _HEAD.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise CacheMismatchError("not a transfer cache file of this version")
    if digest is not None and dg != digest:
        raise CacheMismatchError("transfer cache was built for different parameters")
    pos = _HEAD.size
    n_phi = np.frombuffer(data, dtype="<i4", count=n_rows, offset=pos).astype(np.int64)
    pos += 4 * n_rows
    (box_size,) = struct.unpack_from("<d", data, pos)
    pos += 8
    quad = SphereQuadrature(n_theta, n_phi)
    canon, _ = canonical_transfer_vectors()
    count = len(canon) * quad.size
    if len(data) - pos != 16 * count:
        raise CacheMismatchError("transfer cache payload has the wrong length")
    vals = np.frombuffer(data, dtype="<c16", count=count, offset=pos)
    vals = vals.astype(complex).reshape(len(canon), quad.size)
    return CanonicalTransferSet(level, ell, kappa, box_size, quad, canon, vals)


def cache_dir():
    d = os.environ.get("FMM_CACHE_DIR")
    return Path(d) if d else None


def cached_transfer_set(level, ell, kappa, box_size, alpha, epsilon, quadrature):
    """Build the canonical set, reading/writing ``$FMM_CACHE_DIR`` when set."""
    digest = spec_hash(level, ell, kappa, box_size, alpha, epsilon, quadrature)
    d = cache_dir()
    path = d / f"xfer-{digest.hex()[:24]}.bin" if d else None
    if path is not None and path.exists():
        try:
            return load_transfer_set(path, digest)
        except CacheMismatchError:
            pass
    ts = CanonicalTransferSet.build(level, ell, kappa, box_size, quadrature)
    if path is not None:
        d.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        save_transfer_set(tmp, ts, digest)
        os.replace(tmp, path)
    return ts
