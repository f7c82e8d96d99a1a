"""Bounding volume hierarchy over triangle soups.

Binned SAH build (16 bins, 4-triangle leaves) producing a flattened node
layout that the numba traversal kernels walk iteratively. All query
kernels are sequential and deterministic: same input, same output bytes.

Node arrays (one entry per node):
  bounds (n, 6)  [minx, miny, minz, maxx, maxy, maxz]
  left / right   child node indices, -1 for leaves
  start / count  triangle range into the reordered triangle arrays
                 (count == 0 for internal nodes)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LEAF_SIZE = 4
N_BINS = 16
_STACK_DEPTH = 64


@dataclass
class BVH:
    bounds: np.ndarray      # (n, 6) float64
    left: np.ndarray        # (n,) int32
    right: np.ndarray       # (n,) int32
    start: np.ndarray       # (n,) int32
    count: np.ndarray       # (n,) int32
    tri_index: np.ndarray   # (m,) int32, node-order -> original triangle id
    v0: np.ndarray          # (m, 3) float64, reordered
    v1: np.ndarray
    v2: np.ndarray

    @property
    def n_triangles(self) -> int:
        return self.v0.shape[0]


def build_bvh(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray, leaf_size: int = LEAF_SIZE) -> BVH:
    """Build a binned-SAH BVH over triangles given as (M, 3) vertex arrays."""
    v0 = np.ascontiguousarray(v0, dtype=np.float64)
    v1 = np.ascontiguousarray(v1, dtype=np.float64)
    v2 = np.ascontiguousarray(v2, dtype=np.float64)
    m = v0.shape[0]
    if m == 0:
        raise ValueError("cannot build a BVH over zero triangles")

    tri_min = np.minimum(np.minimum(v0, v1), v2)
    tri_max = np.maximum(np.maximum(v0, v1), v2)
    centroids = (tri_min + tri_max) * 0.5

    order = np.arange(m, dtype=np.int64)

    bounds_list: list[np.ndarray] = []
    left_list: list[int] = []
    right_list: list[int] = []
    start_list: list[int] = []
    count_list: list[int] = []

    def node_bounds(idx: np.ndarray) -> np.ndarray:
        lo = tri_min[idx].min(axis=0)
        hi = tri_max[idx].max(axis=0)
        return np.concatenate([lo, hi])

    def surface(lo: np.ndarray, hi: np.ndarray) -> float:
        d = np.maximum(hi - lo, 0.0)
        return 2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0])

    def emit(lo_hi: np.ndarray) -> int:
        bounds_list.append(lo_hi)
        left_list.append(-1)
        right_list.append(-1)
        start_list.append(0)
        count_list.append(0)
        return len(bounds_list) - 1

    # (node_id, lo, hi) ranges into `order`; explicit stack avoids recursion limits
    root = emit(node_bounds(order))
    stack = [(root, 0, m)]
    while stack:
        node, lo, hi = stack.pop()
        idx = order[lo:hi]
        n = hi - lo
        if n <= leaf_size:
            start_list[node] = lo
            count_list[node] = n
            continue

        cmin = centroids[idx].min(axis=0)
        cmax = centroids[idx].max(axis=0)
        extent = cmax - cmin
        axis = int(np.argmax(extent))
        if extent[axis] <= 0.0:
            # All centroids coincide: split in half by index.
            mid = lo + n // 2
        else:
            # Binned SAH along the widest centroid axis.
            c = centroids[idx, axis]
            rel = np.clip(((c - cmin[axis]) / extent[axis] * N_BINS).astype(np.int64), 0, N_BINS - 1)
            bin_count = np.bincount(rel, minlength=N_BINS)
            bin_lo = np.full((N_BINS, 3), np.inf)
            bin_hi = np.full((N_BINS, 3), -np.inf)
            for b in range(N_BINS):
                sel = rel == b
                if bin_count[b]:
                    bin_lo[b] = tri_min[idx[sel]].min(axis=0)
                    bin_hi[b] = tri_max[idx[sel]].max(axis=0)
            # Prefix/suffix sweep for left/right costs of each split plane.
            best_cost = np.inf
            best_split = -1
            acc_lo = np.full(3, np.inf)
            acc_hi = np.full(3, -np.inf)
            left_area = np.zeros(N_BINS)
            left_n = np.zeros(N_BINS, dtype=np.int64)
            total = 0
            for b in range(N_BINS - 1):
                if bin_count[b]:
                    acc_lo = np.minimum(acc_lo, bin_lo[b])
                    acc_hi = np.maximum(acc_hi, bin_hi[b])
                total += bin_count[b]
                left_n[b] = total
                left_area[b] = surface(acc_lo, acc_hi) if total else 0.0
            acc_lo = np.full(3, np.inf)
            acc_hi = np.full(3, -np.inf)
            total = 0
            for b in range(N_BINS - 1, 0, -1):
                if bin_count[b]:
                    acc_lo = np.minimum(acc_lo, bin_lo[b])
                    acc_hi = np.maximum(acc_hi, bin_hi[b])
                total += bin_count[b]
                rn = total
                ra = surface(acc_lo, acc_hi) if total else 0.0
                ln = left_n[b - 1]
                if ln == 0 or rn == 0:
                    continue
                cost = left_area[b - 1] * ln + ra * rn
                if cost < best_cost:
                    best_cost = cost
                    best_split = b - 1
            if best_split < 0:
                mid = lo + n // 2
            else:
                c_all = centroids[order[lo:hi], axis]
                rel_all = np.clip(((c_all - cmin[axis]) / extent[axis] * N_BINS).astype(np.int64), 0, N_BINS - 1)
                go_left = rel_all <= best_split
                part = np.concatenate([order[lo:hi][go_left], order[lo:hi][~go_left]])
                order[lo:hi] = part
                mid = lo + int(go_left.sum())
                if mid == lo or mid == hi:
                    mid = lo + n // 2

        lchild = emit(node_bounds(order[lo:mid]))
        rchild = emit(node_bounds(order[mid:hi]))
        left_list[node] = lchild
        right_list[node] = rchild
        stack.append((lchild, lo, mid))
        stack.append((rchild, mid, hi))

    tri_index = order.astype(np.int32)
    return BVH(
        bounds=np.asarray(bounds_list, dtype=np.float64),
        left=np.asarray(left_list, dtype=np.int32),
        right=np.asarray(right_list, dtype=np.int32),
        start=np.asarray(start_list, dtype=np.int32),
        count=np.asarray(count_list, dtype=np.int32),
        tri_index=tri_index,
        v0=np.ascontiguousarray(v0[order]),
        v1=np.ascontiguousarray(v1[order]),
        v2=np.ascontiguousarray(v2[order]),
    )


@njit(cache=True)
def _ray_tri(ox, oy, oz, dx, dy, dz, a, b, c):
    """Moller-Trumbore. Returns (t, u, v) with t < 0 on miss."""
    e1x, e1y, e1z = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    e2x, e2y, e2z = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -1e-12 < det < 1e-12:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    tx, ty, tz = ox - a[0], oy - a[1], oz - a[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t, u, v


@njit(cache=True, inline="always")
def _slab_hit(bounds, i, ox, oy, oz, idx_, idy, idz, tmax):
    """Ray-AABB slab test against node i; True when [0, tmax] overlaps the box."""
    t0 = (bounds[i, 0] - ox) * idx_
    t1 = (bounds[i, 3] - ox) * idx_
    tn = min(t0, t1)
    tf = max(t0, t1)
    t0 = (bounds[i, 1] - oy) * idy
    t1 = (bounds[i, 4] - oy) * idy
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    t0 = (bounds[i, 2] - oz) * idz
    t1 = (bounds[i, 5] - oz) * idz
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    return tf >= tn and tf >= 0.0 and tn <= tmax


@njit(cache=True)
def closest_hits(bounds, left, right, start, count, v0, v1, v2,
                 origins, dirs, tmin, tmax,
                 out_t, out_tri, out_u, out_v):
    """Nearest hit per ray. out_tri gets the node-order triangle slot or -1."""
    n_rays = origins.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    for r in range(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        idx_ = 1.0 / dx if dx != 0.0 else np.inf
        idy = 1.0 / dy if dy != 0.0 else np.inf
        idz = 1.0 / dz if dz != 0.0 else np.inf
        best_t = tmax[r]
        best_tri = -1
        best_u = 0.0
        best_v = 0.0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if not _slab_hit(bounds, node, ox, oy, oz, idx_, idy, idz, best_t):
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz, v0[k], v1[k], v2[k])
                    if tmin < t < best_t:
                        best_t = t
                        best_tri = k
                        best_u = u
                        best_v = v
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
        out_t[r] = best_t
        out_tri[r] = best_tri
        out_u[r] = best_u
        out_v[r] = best_v


@njit(cache=True)
def any_hits(bounds, left, right, start, count, v0, v1, v2,
             origins, dirs, tmin, tmax, out_hit):
    """True per ray when anything lies in (tmin, tmax). Early-out traversal."""
    n_rays = origins.shape[0]
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    for r in range(n_rays):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        idx_ = 1.0 / dx if dx != 0.0 else np.inf
        idy = 1.0 / dy if dy != 0.0 else np.inf
        idz = 1.0 / dz if dz != 0.0 else np.inf
        hit = False
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0 and not hit:
            sp -= 1
            node = stack[sp]
            if not _slab_hit(bounds, node, ox, oy, oz, idx_, idy, idz, tmax[r]):
                continue
            if count[node] > 0:
                for k in range(start[node], start[node] + count[node]):
                    t, _, _ = _ray_tri(ox, oy, oz, dx, dy, dz, v0[k], v1[k], v2[k])
                    if tmin < t < tmax[r]:
                        hit = True
                        break
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
        out_hit[r] = hit


@njit(cache=True)
def count_crossings(bounds, left, right, start, count, v0, v1, v2,
                    tri_mesh, n_meshes, ox, oy, oz, dx, dy, dz, tmin, tmax):
    """Count ray/triangle crossings per mesh id along one ray (parity tests)."""
    counts = np.zeros(n_meshes, dtype=np.int64)
    idx_ = 1.0 / dx if dx != 0.0 else np.inf
    idy = 1.0 / dy if dy != 0.0 else np.inf
    idz = 1.0 / dz if dz != 0.0 else np.inf
    stack = np.empty(_STACK_DEPTH, dtype=np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _slab_hit(bounds, node, ox, oy, oz, idx_, idy, idz, tmax):
            continue
        if count[node] > 0:
            for k in range(start[node], start[node] + count[node]):
                t, _, _ = _ray_tri(ox, oy, oz, dx, dy, dz, v0[k], v1[k], v2[k])
                if tmin < t < tmax:
                    counts[tri_mesh[k]] += 1
        else:
            stack[sp] = left[node]
            sp += 1
            stack[sp] = right[node]
            sp += 1
    return counts
