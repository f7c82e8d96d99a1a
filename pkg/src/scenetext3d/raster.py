"""Software rasterization kernels (numba) and near-plane clipping.

All kernels are sequential over triangles with strict depth comparisons,
so output is deterministic for a fixed triangle order. Interpolation is
perspective-correct (attributes blended as a/z against 1/z).
"""

from __future__ import annotations

import numpy as np
from numba import njit

Z_NEAR = 1e-3


@njit(cache=True)
def raster_gbuffer(xy, z, normals, gid, W, H, zbuf, nbuf, gbuf):
    """Rasterize triangles into depth / camera-normal / triangle-id buffers.

    xy: (K, 3, 2) pixel coords, z: (K, 3) camera z (> 0), normals:
    (K, 3, 3) camera-space vertex normals, gid: (K,) ids stored per pixel.
    """
    for k in range(xy.shape[0]):
        x0, y0 = xy[k, 0, 0], xy[k, 0, 1]
        x1, y1 = xy[k, 1, 0], xy[k, 1, 1]
        x2, y2 = xy[k, 2, 0], xy[k, 2, 1]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        inv_area = 1.0 / area
        lo_x = min(x0, min(x1, x2))
        hi_x = max(x0, max(x1, x2))
        lo_y = min(y0, min(y1, y2))
        hi_y = max(y0, max(y1, y2))
        ix0 = max(0, int(np.ceil(lo_x - 0.5)))
        ix1 = min(W - 1, int(np.floor(hi_x - 0.5)))
        iy0 = max(0, int(np.ceil(lo_y - 0.5)))
        iy1 = min(H - 1, int(np.floor(hi_y - 0.5)))
        if ix1 < ix0 or iy1 < iy0:
            continue
        iz0, iz1, iz2 = 1.0 / z[k, 0], 1.0 / z[k, 1], 1.0 / z[k, 2]
        for py in range(iy0, iy1 + 1):
            fy = py + 0.5
            for px in range(ix0, ix1 + 1):
                fx = px + 0.5
                w0 = ((x1 - fx) * (y2 - fy) - (x2 - fx) * (y1 - fy)) * inv_area
                w1 = ((x2 - fx) * (y0 - fy) - (x0 - fx) * (y2 - fy)) * inv_area
                w2 = 1.0 - w0 - w1
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                denom = w0 * iz0 + w1 * iz1 + w2 * iz2
                zp = 1.0 / denom
                if zp >= zbuf[py, px]:
                    continue
                zbuf[py, px] = zp
                gbuf[py, px] = gid[k]
                a0 = w0 * iz0 * zp
                a1 = w1 * iz1 * zp
                a2 = w2 * iz2 * zp
                nx = a0 * normals[k, 0, 0] + a1 * normals[k, 1, 0] + a2 * normals[k, 2, 0]
                ny = a0 * normals[k, 0, 1] + a1 * normals[k, 1, 1] + a2 * normals[k, 2, 1]
                nz = a0 * normals[k, 0, 2] + a1 * normals[k, 1, 2] + a2 * normals[k, 2, 2]
                norm = np.sqrt(nx * nx + ny * ny + nz * nz)
                if norm > 0.0:
                    nbuf[py, px, 0] = nx / norm
                    nbuf[py, px, 1] = ny / norm
                    nbuf[py, px, 2] = nz / norm


@njit(cache=True)
def raster_text(xy, z, uv, tex_rgb, tex_a, word_map, normal_cam,
                kd, ks, shin, region_id, word_offset,
                W, H, zbuf, nbuf, albedo, kd_buf, ks_buf, shin_buf,
                region_buf, word_buf):
    """Composite one textured text quad (2 clipped triangles) into the buffers.

    Shading inputs (albedo/material/normal/depth) only change where the
    sampled alpha is > 0, so a fully transparent texture leaves the
    rendered image bit-identical. The region footprint and word-id masks
    record every visible (depth-passing) pixel regardless of alpha.
    """
    th, tw = tex_a.shape
    for k in range(xy.shape[0]):
        x0, y0 = xy[k, 0, 0], xy[k, 0, 1]
        x1, y1 = xy[k, 1, 0], xy[k, 1, 1]
        x2, y2 = xy[k, 2, 0], xy[k, 2, 1]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        inv_area = 1.0 / area
        ix0 = max(0, int(np.ceil(min(x0, min(x1, x2)) - 0.5)))
        ix1 = min(W - 1, int(np.floor(max(x0, max(x1, x2)) - 0.5)))
        iy0 = max(0, int(np.ceil(min(y0, min(y1, y2)) - 0.5)))
        iy1 = min(H - 1, int(np.floor(max(y0, max(y1, y2)) - 0.5)))
        if ix1 < ix0 or iy1 < iy0:
            continue
        iz0, iz1, iz2 = 1.0 / z[k, 0], 1.0 / z[k, 1], 1.0 / z[k, 2]
        for py in range(iy0, iy1 + 1):
            fy = py + 0.5
            for px in range(ix0, ix1 + 1):
                fx = px + 0.5
                w0 = ((x1 - fx) * (y2 - fy) - (x2 - fx) * (y1 - fy)) * inv_area
                w1 = ((x2 - fx) * (y0 - fy) - (x0 - fx) * (y2 - fy)) * inv_area
                w2 = 1.0 - w0 - w1
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                denom = w0 * iz0 + w1 * iz1 + w2 * iz2
                zp = 1.0 / denom
                if zp >= zbuf[py, px]:
                    continue
                a0 = w0 * iz0 * zp
                a1 = w1 * iz1 * zp
                a2 = w2 * iz2 * zp
                u = a0 * uv[k, 0, 0] + a1 * uv[k, 1, 0] + a2 * uv[k, 2, 0]
                v = a0 * uv[k, 0, 1] + a1 * uv[k, 1, 1] + a2 * uv[k, 2, 1]
                tx = int(u * tw)
                ty = int(v * th)
                if tx < 0:
                    tx = 0
                elif tx >= tw:
                    tx = tw - 1
                if ty < 0:
                    ty = 0
                elif ty >= th:
                    ty = th - 1
                region_buf[py, px] = region_id
                wid = word_map[ty, tx]
                if wid > 0:
                    word_buf[py, px] = word_offset + wid
                alpha = tex_a[ty, tx]
                if alpha > 0.0:
                    zbuf[py, px] = zp
                    nbuf[py, px, 0] = normal_cam[0]
                    nbuf[py, px, 1] = normal_cam[1]
                    nbuf[py, px, 2] = normal_cam[2]
                    albedo[py, px, 0] += alpha * (tex_rgb[ty, tx, 0] - albedo[py, px, 0])
                    albedo[py, px, 1] += alpha * (tex_rgb[ty, tx, 1] - albedo[py, px, 1])
                    albedo[py, px, 2] += alpha * (tex_rgb[ty, tx, 2] - albedo[py, px, 2])
                    kd_buf[py, px] += alpha * (kd - kd_buf[py, px])
                    ks_buf[py, px] += alpha * (ks - ks_buf[py, px])
                    shin_buf[py, px] += alpha * (shin - shin_buf[py, px])


def clip_triangles_near(cam_xyz: np.ndarray, attrs: np.ndarray, z_near: float = Z_NEAR):
    """Clip camera-space triangles against z >= z_near.

    cam_xyz: (K, 3, 3) triangle corners, attrs: (K, 3, A) per-vertex
    attributes interpolated linearly in camera space. Returns
    (clipped_xyz (M, 3, 3), clipped_attrs (M, 3, A), src_index (M,)).
    """
    z = cam_xyz[:, :, 2]
    front = z >= z_near
    n_front = front.sum(axis=1)
    keep = n_front == 3
    out_xyz = [cam_xyz[keep]]
    out_attr = [attrs[keep]]
    out_src = [np.nonzero(keep)[0]]

    partial = np.nonzero((n_front > 0) & (n_front < 3))[0]
    extra_xyz, extra_attr, extra_src = [], [], []
    for k in partial:
        poly_p = []
        poly_a = []
        for i in range(3):
            j = (i + 1) % 3
            pi, pj = cam_xyz[k, i], cam_xyz[k, j]
            ai, aj = attrs[k, i], attrs[k, j]
            if pi[2] >= z_near:
                poly_p.append(pi)
                poly_a.append(ai)
            crosses = (pi[2] >= z_near) != (pj[2] >= z_near)
            if crosses:
                t = (z_near - pi[2]) / (pj[2] - pi[2])
                poly_p.append(pi + (pj - pi) * t)
                poly_a.append(ai + (aj - ai) * t)
        for i in range(1, len(poly_p) - 1):  # fan
            extra_xyz.append(np.stack([poly_p[0], poly_p[i], poly_p[i + 1]]))
            extra_attr.append(np.stack([poly_a[0], poly_a[i], poly_a[i + 1]]))
            extra_src.append(k)
    if extra_xyz:
        out_xyz.append(np.stack(extra_xyz))
        out_attr.append(np.stack(extra_attr))
        out_src.append(np.asarray(extra_src, dtype=np.int64))
    return (
        np.concatenate(out_xyz) if len(out_xyz) > 1 else out_xyz[0],
        np.concatenate(out_attr) if len(out_attr) > 1 else out_attr[0],
        np.concatenate(out_src) if len(out_src) > 1 else out_src[0],
    )
