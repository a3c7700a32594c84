import itertools

import numpy as np
import pytest

from fourierfmm.quadrature import QuadratureSpec, SphereQuadrature, build_quadrature
from fourierfmm.series import choose_ell, transfer_function
from fourierfmm.xfer import (CacheMismatchError, CanonicalTransferSet, ReflectionRule,
                             TransferSamples, bandlimited_transfer_grid,
                             build_bandlimited_transfer, build_bandlimited_transfer_realspace,
                             canonical_transfer_vectors, canonicalize, cached_transfer_set,
                             interaction_offsets, load_transfer_set, sample_permutation,
                             save_transfer_set, spec_hash, unwrap_transfer)


@pytest.fixture(scope="module")
def level20():
    kappa, eps = 20.0, 1e-4
    ell = choose_ell(QuadratureSpec(kappa, 1.0, 0.8, eps, 0).geometry(), eps).ell
    q = build_quadrature(QuadratureSpec(kappa, 1.0, 0.8, eps, ell))
    return kappa, ell, q, CanonicalTransferSet.build(2, ell, kappa, 1.0, q)


def test_offset_counts():
    offs = interaction_offsets()
    assert len(offs) == 316 == 7**3 - 3**3
    canon, rules = canonical_transfer_vectors()
    assert len(canon) == 34
    assert all(x >= y >= 0 and z >= 0 for x, y, z in canon)
    for v, (c, rule) in rules.items():
        assert rule.apply(c) == v


@pytest.mark.parametrize("v", [(3, -2, 1), (-2, 3, -3), (0, -2, 0), (-1, -1, 2)])
def test_canonicalize_idempotent(v):
    c, rule = canonicalize(v)
    c2, rule2 = canonicalize(c)
    assert c2 == c and rule2.is_identity
    assert rule.apply(c) == v


def test_reflection_permutation_is_exact_on_nodes():
    q = SphereQuadrature(12, np.array([4, 8, 12, 16, 12, 8, 4]))
    s = q.directions()
    for sx, sy, sz, swap in itertools.product((1, -1), (1, -1), (1, -1), (False, True)):
        rule = ReflectionRule(sx, sy, sz, swap)
        p = sample_permutation(q, rule)
        # node k of the reflected table reads the canonical table at R^T s_k
        rt = np.array([rule.apply(tuple(v)) for v in np.eye(3)]).T
        mapped = s @ rt
        assert np.abs(s[p] - mapped).max() < 1e-14


def test_unwrap_requires_reflection_friendly_grid():
    q = SphereQuadrature(6, np.array([4, 8, 8, 4]))
    ts = TransferSamples(q, np.arange(q.size))
    assert unwrap_transfer(ts, ReflectionRule()) is ts
    out = unwrap_transfer(ts, ReflectionRule(-1, 1, 1))
    assert sorted(out.values.real) == list(range(q.size))


def test_unwrapped_tables_match_direct_builds(level20):
    kappa, ell, q, ts = level20
    worst = 0.0
    for off in interaction_offsets():
        d = build_bandlimited_transfer(ell, kappa, np.array(off, float), q).values
        worst = max(worst, np.abs(ts.table(off) - d).max() / np.abs(d).max())
    assert worst < 1e-13


def test_realspace_build_agrees(level20):
    kappa, ell, q, ts = level20
    for i in (0, 17, 33):
        r0 = np.array(ts.canonical[i], float)
        rs = build_bandlimited_transfer_realspace(ell, kappa, r0, q).values
        assert np.abs(rs - ts.values[i]).max() < 1e-13 * np.abs(ts.values[i]).max()


def test_theta_spectrum_support():
    ell, kappa, n_theta, w = 10, 4.0, 30, 24
    grid = bandlimited_transfer_grid(ell, kappa, np.array([2.0, 0.0, 2.0]), n_theta, w)
    # rebuild full columns phi_m, m < w/2, and check the theta Nyquist is empty
    half = n_theta // 2
    cols = np.concatenate([grid[:, : w // 2], grid[half - 1:0:-1, w // 2:]], axis=0)
    spec = np.fft.fft(cols, axis=0) / n_theta
    assert np.abs(spec[half]).max() < 1e-15


def test_bandlimited_transfer_close_to_filtered_product():
    # away from the |sin| kink the bandlimited product tracks T |sin| / 2
    ell, kappa = 8, 2.0
    r0 = np.array([0.0, 2.0, 2.0])
    q = SphereQuadrature.uniform(64, 40)
    v = build_bandlimited_transfer(ell, kappa, r0, q).values
    th, _ = q.angles()
    ref = transfer_function(ell, kappa, r0, q.directions()) * np.abs(np.sin(th)) / 2
    mid = (th > 0.5) & (th < np.pi - 0.5)
    assert np.abs(v - ref)[mid].max() < 2e-3 * np.abs(ref).max()


def test_cache_roundtrip_and_mismatch(level20, tmp_path):
    kappa, ell, q, ts = level20
    dg = spec_hash(2, ell, kappa, 1.0, 0.8, 1e-4, q)
    p = tmp_path / "t.bin"
    save_transfer_set(p, ts, dg)
    back = load_transfer_set(p, dg)
    assert back.quadrature == q and np.array_equal(back.values, ts.values)
    other = spec_hash(2, ell, kappa, 1.0, 0.8, 1e-5, q)
    with pytest.raises(CacheMismatchError):
        load_transfer_set(p, other)
    p.write_bytes(p.read_bytes()[:-16])
    with pytest.raises(CacheMismatchError):
        load_transfer_set(p, dg)
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"abc")
    with pytest.raises(CacheMismatchError):
        load_transfer_set(junk)


def test_cached_transfer_set_uses_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("FMM_CACHE_DIR", str(tmp_path))
    q = SphereQuadrature(10, np.array([4, 8, 12, 12, 8, 4]))
    a = cached_transfer_set(2, 4, 2.0, 1.0, 0.8, 1e-3, q)
    files = list(tmp_path.glob("xfer-*.bin"))
    assert len(files) == 1
    b = cached_transfer_set(2, 4, 2.0, 1.0, 0.8, 1e-3, q)
    assert np.array_equal(a.values, b.values)


def test_dense_tables_rows(level20):
    _, _, q, ts = level20
    offs = [(2, 0, 0), (-3, 1, -2), (0, 0, -2)]
    d = ts.dense_tables(offs)
    assert d.shape == (3, q.size)
    for i, o in enumerate(offs):
        assert np.array_equal(d[i], ts.table(o))
    assert ts.nbytes == 34 * q.size * 16
