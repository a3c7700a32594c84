"""Multilevel FMM on Fourier-basis quadratures.

Conventions used by every pass:

* outgoing fields  M(s) = sum_i psi_i exp(i kappa s.(x_i - c))
* M2L multiplies by the transfer samples for r0 = c_src - c_tgt
* incoming/local fields are integrated at L2P against exp(i kappa s.(c - x_i))
  with the quadrature weights; no other pass applies weights.
"""

import logging
import time
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from . import _kernels
from .octree import INTERACTION_OFFSETS, build_tree
from .quadrature import QuadratureSpec, build_quadrature, phase_tables
from .series import KernelGeometry, TruncationChoice, TruncationMethod, choose_ell
from .spherefft import resample_values
from .xfer import cached_transfer_set

log = logging.getLogger(__name__)

# scratch budget for batched M2M / L2L work
_BATCH_BYTES = 128 * 2**20


class CoincidentPointsError(ValueError):
    pass


@dataclass
class LevelPlan:
    level: int
    box_size: float
    truncation: TruncationChoice
    quadrature: object
    quad_epsilon: float
    transfers: object = None
    _dirs: np.ndarray = field(default=None, repr=False)
    _weights: np.ndarray = field(default=None, repr=False)

    @property
    def ell(self):
        return self.truncation.ell

    @property
    def directions(self):
        if self._dirs is None:
            self._dirs = np.ascontiguousarray(self.quadrature.directions())
        return self._dirs

    @property
    def weights(self):
        if self._weights is None:
            self._weights = self.quadrature.weights()
        return self._weights

    def shift_factor(self, kappa, d):
        return np.exp(1j * kappa * (self.directions @ np.asarray(d, float)))


@dataclass
class FmmPlan:
    kappa: float
    epsilon: float
    alpha: float
    n_levels: int
    root_size: float
    levels: dict
    build_seconds: float = 0.0

    def summary(self):
        rows = []
        for l in sorted(self.levels):
            lp = self.levels[l]
            rows.append(dict(level=l, box_size=lp.box_size, ell=lp.ell,
                             n_theta=lp.quadrature.n_theta, quad_size=lp.quadrature.size,
                             quad_eps=lp.quad_epsilon))
        return rows


def _per_level(value, level):
    if value is None:
        return None
    if isinstance(value, dict):
        return value.get(level)
    return value


def make_plan(kappa, epsilon, n_levels, root_size, alpha=0.8, ell=None, quad_eps=None,
              transfers=True):
    """Per-level truncation, quadrature and transfer tables for levels 2..n_levels.

    ``ell`` and ``quad_eps`` override the automatic choices; each may be a
    scalar or a {level: value} dict. ``transfers`` is a bool or a collection
    of the levels that get M2L tables.
    """
    if not kappa > 0 or not epsilon > 0:
        raise ValueError("kappa and epsilon must be positive")
    if n_levels < 2:
        raise ValueError("need at least 2 levels")
    t0 = time.perf_counter()
    levels = {}
    for lev in range(2, n_levels + 1):
        a = root_size / 2**lev
        g = KernelGeometry.worst_case(kappa, a, alpha)
        forced = _per_level(ell, lev)
        if forced is None:
            trunc = choose_ell(g, epsilon)
        else:
            trunc = TruncationChoice(int(forced), 0.0, TruncationMethod.EBF)
        qe = _per_level(quad_eps, lev) or epsilon
        spec = QuadratureSpec(kappa, a, alpha, qe, trunc.ell)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            quad = build_quadrature(spec)
        for w in caught:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
            qe = getattr(w.message, "relaxed_epsilon", qe) or qe
        lp = LevelPlan(lev, a, trunc, quad, qe)
        if transfers is True or (transfers and lev in transfers):
            lp.transfers = cached_transfer_set(lev, trunc.ell, kappa, a, alpha, qe, quad)
        levels[lev] = lp
        log.debug("level %d: a=%.4g ell=%d quad=%d", lev, a, trunc.ell, quad.size)
    plan = FmmPlan(kappa, epsilon, alpha, n_levels, root_size, levels)
    plan.build_seconds = time.perf_counter() - t0
    return plan


# --- passes ------------------------------------------------------------------

def p2m(tree, weights, plan):
    lv = tree.leaves
    lp = plan.levels[tree.n_levels]
    out = np.empty((lv.n_boxes, lp.quadrature.size), dtype=complex)
    _kernels.p2m(out, lv.start, lv.stop, lv.centers, tree.points,
                 np.ascontiguousarray(weights, dtype=complex), plan.kappa, *phase_tables(lp.quadrature))
    return out


def _octant(child_coords, parent_coords):
    d = child_coords - 2 * parent_coords
    return d[:, 0] * 4 + d[:, 1] * 2 + d[:, 2]


def _octant_shifts(a_child):
    o = np.arange(8)
    bits = np.stack([(o >> 2) & 1, (o >> 1) & 1, o & 1], axis=1)
    return (bits - 0.5) * a_child


def _chunks(n, per_item_bytes):
    step = max(1, _BATCH_BYTES // max(per_item_bytes, 1))
    for s in range(0, n, step):
        yield s, min(n, s + step)


def m2m(tree, child_fields, level, plan, method="coeff"):
    """Aggregate fields from ``level + 1`` into the boxes at ``level``."""
    par = tree.levels[level]
    ch = tree.levels[level + 1]
    lp = plan.levels[level]
    src_q = plan.levels[level + 1].quadrature
    shifts = _octant_shifts(ch.box_size)
    factors = np.stack([lp.shift_factor(plan.kappa, d) for d in shifts])
    octs = _octant(ch.coords, par.coords[ch.parent])
    out = np.zeros((par.n_boxes, lp.quadrature.size), dtype=complex)
    for s, e in _chunks(ch.n_boxes, 16 * 4 * max(lp.quadrature.size, src_q.size)):
        up = resample_values(child_fields[s:e], src_q, lp.quadrature, method)
        up *= factors[octs[s:e]]
        p = ch.parent[s:e]
        # children of one parent are contiguous: segment sums
        first = np.flatnonzero(np.concatenate([[True], p[1:] != p[:-1]]))
        out[p[first]] += np.add.reduceat(up, first, axis=0)
    return out


def m2l(tree, outgoing, level, plan):
    lp = plan.levels[level]
    incoming = np.zeros_like(outgoing)
    ptr, src, tab = tree.interaction_csr(level)
    if src.size == 0:
        return incoming
    if lp.transfers is None:
        raise ValueError(f"plan has no transfer tables at level {level}")
    used = np.unique(tab)
    tables = lp.transfers.dense_tables([tuple(INTERACTION_OFFSETS[i]) for i in used])
    _kernels.m2l_gather(incoming, outgoing, tables, ptr, src, np.searchsorted(used, tab))
    return incoming


def l2l(tree, parent_local, level, plan, incoming, method="coeff",
        order="translate_first"):
    """Disaggregate local fields from ``level - 1`` into ``incoming`` at ``level``.

    The parent field is translated on the parent quadrature and then
    anterpolated; ``order="anterpolate_first"`` swaps the two steps and is
    kept only to demonstrate why that order loses accuracy.
    """
    if order not in ("translate_first", "anterpolate_first"):
        raise ValueError(f"unknown l2l order {order!r}")
    ch = tree.levels[level]
    par = tree.levels[level - 1]
    pq = plan.levels[level - 1]
    cq = plan.levels[level]
    shifts = -_octant_shifts(ch.box_size)
    octs = _octant(ch.coords, par.coords[ch.parent])
    if order == "translate_first":
        factors = np.stack([pq.shift_factor(plan.kappa, d) for d in shifts])
    else:
        factors = np.stack([cq.shift_factor(plan.kappa, d) for d in shifts])
    for s, e in _chunks(ch.n_boxes, 16 * 3 * max(pq.quadrature.size, cq.quadrature.size)):
        f = parent_local[ch.parent[s:e]]
        if order == "translate_first":
            f = f * factors[octs[s:e]]
            incoming[s:e] += resample_values(f, pq.quadrature, cq.quadrature, method)
        else:
            g = resample_values(f, pq.quadrature, cq.quadrature, method)
            incoming[s:e] += g * factors[octs[s:e]]
    return incoming


def l2p(tree, local, plan):
    lv = tree.leaves
    lp = plan.levels[tree.n_levels]
    out = np.zeros(tree.points.shape[0], dtype=complex)
    _kernels.l2p(out, local, lv.start, lv.stop, lv.centers, tree.points,
                 lp.weights, plan.kappa, *phase_tables(lp.quadrature))
    return out


def near_field(tree, weights, kappa):
    lv = tree.leaves
    ptr, idx = tree.neighbors(tree.n_levels)
    out = np.zeros(tree.points.shape[0], dtype=complex)
    bad = _kernels.near_field(out, tree.points, np.ascontiguousarray(weights, dtype=complex),
                              lv.start, lv.stop, ptr, idx, kappa)
    if bad:
        raise CoincidentPointsError(f"{bad // 2} coincident particle pairs")
    return out


@dataclass
class FmmResult:
    sigma: np.ndarray
    plan: FmmPlan
    tree: object
    timings: dict


def run_fmm(points, weights, kappa, epsilon, n_levels, alpha=0.8, domain=None,
            threads=None, plan=None, ell=None, quad_eps=None, method="coeff",
            l2l_order="translate_first", full_result=False):
    """sigma_i = sum_{j != i} exp(i kappa r_ij) / r_ij psi_j via the multilevel FMM.

    Returns sigma in input order, or an :class:`FmmResult` with
    ``full_result=True``.
    """
    if threads:
        numba.set_num_threads(int(threads))
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=complex)
    if pts.ndim != 2 or pts.shape[1] != 3 or w.shape != (pts.shape[0],):
        raise ValueError("points must be (N, 3) and weights (N,)")
    timings = {}
    t = time.perf_counter()
    tree = build_tree(pts, n_levels, domain)
    timings["tree"] = time.perf_counter() - t
    if plan is None:
        plan = make_plan(kappa, epsilon, n_levels, tree.root_size, alpha, ell, quad_eps)
        timings["plan"] = plan.build_seconds
    elif plan.n_levels != n_levels or not np.isclose(plan.root_size, tree.root_size):
        raise ValueError("plan does not match the tree geometry")
    ws = w[tree.perm]
    L = n_levels

    t = time.perf_counter()
    outgoing = {L: p2m(tree, ws, plan)}
    timings["p2m"] = time.perf_counter() - t
    t = time.perf_counter()
    for lev in range(L - 1, 1, -1):
        outgoing[lev] = m2m(tree, outgoing[lev + 1], lev, plan, method)
    timings["m2m"] = time.perf_counter() - t

    local = None
    timings["m2l"] = timings["l2l"] = 0.0
    for lev in range(2, L + 1):
        t = time.perf_counter()
        inc = m2l(tree, outgoing.pop(lev), lev, plan)
        timings["m2l"] += time.perf_counter() - t
        t = time.perf_counter()
        if local is not None:
            l2l(tree, local, lev, plan, inc, method, l2l_order)
        timings["l2l"] += time.perf_counter() - t
        local = inc

    t = time.perf_counter()
    sigma = l2p(tree, local, plan)
    timings["l2p"] = time.perf_counter() - t
    t = time.perf_counter()
    sigma += near_field(tree, ws, kappa)
    timings["near"] = time.perf_counter() - t

    out = np.empty_like(sigma)
    out[tree.perm] = sigma
    if full_result:
        return FmmResult(out, plan, tree, timings)
    return out
