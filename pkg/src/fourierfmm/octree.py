"""Pruned octree with per-level neighbor and interaction lists.

Particles are reordered along the Morton curve of their leaf boxes, so every
box at every level owns a contiguous slice of the sorted particle array.
"""

import itertools
from dataclasses import dataclass

import numpy as np

NEIGHBOR_OFFSETS = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=np.int64)
INTERACTION_OFFSETS = np.array(
    [v for v in itertools.product(range(-3, 4), repeat=3) if max(map(abs, v)) >= 2],
    dtype=np.int64)


def _spread_bits(v):
    v = v.astype(np.uint64)
    out = np.zeros_like(v)
    for b in range(21):
        out |= ((v >> np.uint64(b)) & np.uint64(1)) << np.uint64(3 * b)
    return out


def morton(ijk):
    return (_spread_bits(ijk[:, 0]) << np.uint64(2)) | (_spread_bits(ijk[:, 1]) << np.uint64(1)) \
        | _spread_bits(ijk[:, 2])


@dataclass
class Level:
    level: int
    box_size: float
    coords: np.ndarray      # (nb, 3) integer box coordinates
    centers: np.ndarray     # (nb, 3)
    start: np.ndarray       # particle slice per box (sorted order)
    stop: np.ndarray
    parent: np.ndarray      # index into level - 1 (-1 at the root)
    child_start: np.ndarray  # children are contiguous at level + 1
    child_stop: np.ndarray

    @property
    def n_boxes(self):
        return self.coords.shape[0]

    def _key(self, c):
        n = 1 << self.level
        return (c[:, 0] * n + c[:, 1]) * n + c[:, 2]

    def lookup(self, coords):
        """Box index for each row of ``coords`` or -1 if absent/outside."""
        n = 1 << self.level
        inside = np.all((coords >= 0) & (coords < n), axis=1)
        keys = self._key(np.where(inside[:, None], coords, 0))
        order = getattr(self, "_order", None)
        if order is None:
            order = self._order = np.argsort(self._key(self.coords), kind="stable")
            self._sorted = self._key(self.coords)[order]
        pos = np.searchsorted(self._sorted, keys)
        pos = np.minimum(pos, len(self._sorted) - 1)
        hit = inside & (self._sorted[pos] == keys)
        return np.where(hit, order[pos], -1)


@dataclass
class Octree:
    root_size: float
    root_corner: np.ndarray
    n_levels: int               # leaf level L
    points: np.ndarray          # sorted particle positions
    perm: np.ndarray            # sorted index -> original index
    levels: list                # Level objects 0..L

    @property
    def leaves(self):
        return self.levels[self.n_levels]

    def box_size(self, level):
        return self.root_size / 2**level

    def neighbors(self, level):
        """CSR (ptr, idx) of each box's neighbors at ``level`` (itself included)."""
        lv = self.levels[level]
        nb = lv.n_boxes
        cand = lv.coords[:, None, :] + NEIGHBOR_OFFSETS[None]
        idx = lv.lookup(cand.reshape(-1, 3)).reshape(nb, 27)
        mask = idx >= 0
        ptr = np.concatenate([[0], np.cumsum(mask.sum(1))])
        return ptr.astype(np.int64), idx[mask].astype(np.int64)

    def interactions(self, level):
        """M2L work at ``level`` grouped by offset.

        Returns a list of (offset, targets, sources) with offset = source -
        target coordinates, sorted by offset; targets are distinct within a group.
        """
        lv = self.levels[level]
        out = []
        if level < 2:
            return out
        pc = lv.coords // 2
        for off in INTERACTION_OFFSETS:
            src = lv.lookup(lv.coords + off)
            ok = src >= 0
            if not np.any(ok):
                continue
            dp = np.abs(pc[src[ok]] - pc[ok])
            adj = np.all(dp <= 1, axis=1)
            t = np.flatnonzero(ok)[adj]
            if t.size:
                out.append((tuple(int(v) for v in off), t, src[ok][adj]))
        return out

    def interaction_csr(self, level):
        """Per-target CSR (ptr, src, offset_index) into INTERACTION_OFFSETS, with
        each target's entries in offset order."""
        nb = self.levels[level].n_boxes
        lookup = {tuple(int(c) for c in v): i for i, v in enumerate(INTERACTION_OFFSETS)}
        groups = self.interactions(level)
        if not groups:
            return np.zeros(nb + 1, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
        tgt = np.concatenate([t for _, t, _ in groups])
        src = np.concatenate([s for _, _, s in groups])
        off = np.concatenate([np.full(len(t), lookup[o], np.int64) for o, t, _ in groups])
        order = np.argsort(tgt, kind="stable")
        ptr = np.concatenate([[0], np.cumsum(np.bincount(tgt, minlength=nb))])
        return ptr.astype(np.int64), src[order].astype(np.int64), off[order]

    def interaction_list(self, level, box):
        """Sorted source indices in the interaction list of one box."""
        res = []
        for _, t, s in self.interactions(level):
            res.extend(s[t == box].tolist())
        return sorted(res)

    def leaf_of(self):
        """Leaf index of each sorted particle."""
        lv = self.leaves
        out = np.empty(self.points.shape[0], dtype=np.int64)
        for b in range(lv.n_boxes):
            out[lv.start[b]:lv.stop[b]] = b
        return out


def bounding_cube(points, margin=1e-9):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    size = float((hi - lo).max())
    if size == 0.0:
        size = 1.0
    size *= 1.0 + margin
    center = 0.5 * (lo + hi)
    return center - 0.5 * size, size


def build_tree(points, n_levels, domain=None):
    """Octree of depth ``n_levels`` (>= 2) over ``points``.

    ``domain`` is (corner, size) of the root cube; by default a tight cube
    padded by a relative 1e-9. A particle on an internal box face goes to the
    lower-index box.
    """
    if n_levels < 2:
        raise ValueError("need at least 2 levels")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (N, 3) array")
    if domain is None:
        corner, size = bounding_cube(pts)
    else:
        corner, size = np.asarray(domain[0], float), float(domain[1])
        if np.any(pts < corner) or np.any(pts > corner + size):
            raise ValueError("particles outside the domain cube")
    nside = 1 << n_levels
    u = (pts - corner) / (size / nside)
    ijk = np.clip(np.ceil(u).astype(np.int64) - 1, 0, nside - 1)
    code = morton(ijk)
    perm = np.argsort(code, kind="stable")
    code = code[perm]
    ijk = ijk[perm]

    levels = [None] * (n_levels + 1)
    child_code = None
    for lev in range(n_levels, -1, -1):
        shift = np.uint64(3 * (n_levels - lev))
        c = code >> shift
        first = np.concatenate([[True], c[1:] != c[:-1]])
        start = np.flatnonzero(first)
        stop = np.concatenate([start[1:], [len(c)]])
        coords = ijk[start] >> (n_levels - lev)
        a = size / 2**lev
        centers = corner + (coords + 0.5) * a
        levels[lev] = Level(lev, a, coords, centers, start, stop,
                            np.full(len(start), -1, dtype=np.int64),
                            np.zeros(len(start), np.int64), np.zeros(len(start), np.int64))
        if child_code is not None:
            child = levels[lev + 1]
            # children of a box are contiguous; parent index from their code prefix
            ccodes = child_code >> np.uint64(3)
            pidx = np.searchsorted(c[start], ccodes)
            child.parent = pidx.astype(np.int64)
            cs = np.searchsorted(pidx, np.arange(len(start)))
            levels[lev].child_start = cs
            levels[lev].child_stop = np.concatenate([cs[1:], [len(pidx)]])
        child_code = c[start]
    return Octree(size, np.asarray(corner, float), n_levels, pts[perm], perm, levels)
