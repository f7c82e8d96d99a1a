"""Text-region proposal and refinement.

Three stages, mirroring the engine pipeline:
  1. `propose_initial` slides fixed-size windows over the rendered
     normal map and keeps windows whose normals are pairwise similar
     (min pairwise cosine above a threshold).
  2. `rectify_in_3d` re-initializes each window as a gravity-aligned
     square on the underlying mesh surface; `expand` grows it until it
     leaves the surface, hits other geometry, or caps out.
  3. `prune_occlusions` discards screen-space overlapping regions in a
     seeded shuffle order until the kept set is pairwise disjoint.

The window smoothness decision is exact: cheap necessary/sufficient
bounds derived from the window's mean direction settle almost every
window, and the rare ambiguous ones fall back to an exact min-pairwise-
cosine computation (convex hull of the unit normals).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.spatial import ConvexHull, QhullError

from .camera import CameraIntrinsics, CameraPose, project_points, unproject_batch, world_to_camera_matrix
from .geometry import normalize
from .polyclip import intersection_area
from .renderer import FrameBuffers
from .scene import Scene, cast_rays, distances_to_surface, interpolated_normals, segments_blocked


@dataclass(frozen=True)
class RegionConfig:
    window: int = 64
    stride: int = 16
    cosine_threshold: float = 0.95
    max_initial: int = 10
    surface_dist_frac: float = 0.005      # threshold = frac * initial side
    max_expansion_ratio: float = 4.0      # per dimension, x initial side
    expansion_step_frac: float = 0.05     # dimension increment, x initial side
    probe_lift_frac: float = 1e-3
    probe_samples: int = 8

    def __post_init__(self):
        if not 0.0 < self.cosine_threshold <= 1.0:
            raise ValueError("cosine threshold must be in (0, 1]")
        if self.window < 8:
            raise ValueError("window must be >= 8 px")


@dataclass(frozen=True)
class InitialProposal:
    x: int              # top-left pixel of the window
    y: int
    size: int
    min_cosine: float


@dataclass
class RefinedProposal:
    center: np.ndarray
    right: np.ndarray       # unit, orthogonal to gravity
    up: np.ndarray          # unit
    normal: np.ndarray      # unit surface normal
    width: float
    height: float
    mesh_id: int
    initial_side: float
    surface_threshold: float
    screen_quad: np.ndarray  # (4, 2) pixels: TL, TR, BR, BL in region frame

    def corners_world(self, width: float | None = None, height: float | None = None) -> np.ndarray:
        """TL, TR, BR, BL corners; +up is the top side, +right the right side."""
        w = self.width if width is None else width
        h = self.height if height is None else height
        r = self.right * (w / 2.0)
        u = self.up * (h / 2.0)
        return np.stack([
            self.center - r + u,
            self.center + r + u,
            self.center + r - u,
            self.center - r - u,
        ])


# --------------------------------------------------------------------------
# window smoothness

@njit(cache=True)
def _scan_windows(normals, covered, win, stride, t):
    """Status per window: 0 reject, 1 accept, 2 needs the exact test."""
    H, W = covered.shape
    ny = (H - win) // stride + 1
    nx = (W - win) // stride + 1
    status = np.zeros((ny, nx), dtype=np.int8)
    k = win * win
    for wy in range(ny):
        for wx in range(nx):
            y0 = wy * stride
            x0 = wx * stride
            ok = True
            sx = 0.0
            sy = 0.0
            sz = 0.0
            for yy in range(y0, y0 + win):
                for xx in range(x0, x0 + win):
                    if not covered[yy, xx]:
                        ok = False
                        break
                    sx += normals[yy, xx, 0]
                    sy += normals[yy, xx, 1]
                    sz += normals[yy, xx, 2]
                if not ok:
                    break
            if not ok:
                continue
            slen = np.sqrt(sx * sx + sy * sy + sz * sz)
            # A passing window forces |sum| > t*k and every n.mean > t.
            if slen <= t * k:
                continue
            mx, my, mz = sx / slen, sy / slen, sz / slen
            dmin = 1.0
            for yy in range(y0, y0 + win):
                for xx in range(x0, x0 + win):
                    d = normals[yy, xx, 0] * mx + normals[yy, xx, 1] * my + normals[yy, xx, 2] * mz
                    if d < dmin:
                        dmin = d
            if dmin <= t:
                continue
            # Max pairwise angle <= 2*acos(dmin): cos(2a) = 2 dmin^2 - 1.
            if 2.0 * dmin * dmin - 1.0 > t:
                status[wy, wx] = 1
            else:
                status[wy, wx] = 2
    return status


def min_pairwise_cosine(vectors: np.ndarray) -> float:
    """Exact minimum pairwise cosine over a set of unit vectors.

    The minimizing pair lies on the convex hull of the point set, so for
    large windows the all-pairs check runs on hull vertices only.
    """
    v = np.unique(np.asarray(vectors, dtype=np.float64).reshape(-1, 3), axis=0)
    if len(v) == 1:
        return 1.0
    if len(v) > 600:
        try:
            hull = ConvexHull(v)
            v = v[hull.vertices]
        except QhullError:
            pass  # coplanar or degenerate: fall through to all-pairs
    return float((v @ v.T).min())


def window_is_smooth(window: np.ndarray, t: float) -> bool:
    """Exact decision: min pairwise cosine over the window > t.

    Tiered: a necessary bound (every normal close to the window mean)
    rejects, a sufficient bound (2*dmin^2 - 1 > t) accepts, everything
    else goes through the exact computation.
    """
    v = np.asarray(window, dtype=np.float64).reshape(-1, 3)
    s = v.sum(axis=0)
    k = len(v)
    slen = np.linalg.norm(s)
    if slen <= t * k:
        return False
    d = v @ (s / slen)
    dmin = float(d.min())
    if dmin <= t:
        return False
    if 2.0 * dmin * dmin - 1.0 > t:
        return True
    return min_pairwise_cosine(v) > t


def propose_initial(normal_map: np.ndarray, cfg: RegionConfig, rng: np.random.Generator) -> list[InitialProposal]:
    """Sample up to cfg.max_initial non-overlapping smooth windows.

    Windows must be fully covered by geometry (non-zero normals). The
    returned windows carry their exact min pairwise cosine.
    """
    normals = np.ascontiguousarray(normal_map, dtype=np.float64)
    H, W = normals.shape[:2]
    win = cfg.window
    if H < win or W < win:
        return []
    covered = np.linalg.norm(normals, axis=2) > 0.5
    t = cfg.cosine_threshold
    status = _scan_windows(normals, covered, win, cfg.stride, t)

    valid: list[tuple[int, int]] = []
    for wy, wx in np.argwhere(status > 0):
        x0 = wx * cfg.stride
        y0 = wy * cfg.stride
        if status[wy, wx] == 2:
            block = normals[y0:y0 + win, x0:x0 + win]
            if min_pairwise_cosine(block) <= t:
                continue
        valid.append((x0, y0))
    if not valid:
        return []

    order = rng.permutation(len(valid))
    chosen: list[tuple[int, int]] = []
    for i in order:
        x0, y0 = valid[i]
        if all(abs(x0 - cx) >= win or abs(y0 - cy) >= win for cx, cy in chosen):
            chosen.append((x0, y0))
            if len(chosen) >= cfg.max_initial:
                break
    return [
        InitialProposal(
            x=x0, y=y0, size=win,
            min_cosine=min_pairwise_cosine(normals[y0:y0 + win, x0:x0 + win]),
        )
        for x0, y0 in chosen
    ]


# --------------------------------------------------------------------------
# 3D refinement

_PARALLEL_LIMIT = np.sin(np.deg2rad(1.0))


def region_axes(normal: np.ndarray, gravity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(right, up) on the tangent plane with right orthogonal to gravity.

    When the normal is parallel to gravity (floors/ceilings) the right
    axis falls back to world +x projected into the plane (+y if both are
    degenerate), keeping the construction deterministic.
    """
    cross = np.cross(normal, gravity)
    norm = np.linalg.norm(cross)
    if norm < _PARALLEL_LIMIT:
        for ref in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
            proj = ref - normal * np.dot(ref, normal)
            if np.linalg.norm(proj) > 1e-6:
                right = proj / np.linalg.norm(proj)
                break
    else:
        right = cross / norm
    up = normalize(np.cross(normal, right))
    # Keep text upright: up should fight gravity where that is meaningful.
    if np.dot(up, gravity) > 1e-9:
        up = -up
        right = -right
    return right, up


def _cast_through_pixels(scene: Scene, pixels: np.ndarray, pose: CameraPose, intr: CameraIntrinsics):
    dirs = unproject_batch(pixels, np.ones(len(pixels)), pose, intr) - pose.pos
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.tile(pose.pos, (len(pixels), 1))
    max_len = np.full(len(pixels), scene.diagonal * 2.0 + 1.0)
    t, tri, u, v = cast_rays(scene, origins, dirs, max_len)
    pts = origins + dirs * t[:, None]
    return t, tri, u, v, pts


def rectify_in_3d(
    proposal: InitialProposal,
    buffers: FrameBuffers,
    pose: CameraPose,
    intr: CameraIntrinsics,
    scene: Scene,
    cfg: RegionConfig,
) -> RefinedProposal | None:
    """Re-initialize the window as a gravity-aligned square on the surface.

    Returns None when the window center does not cover geometry, the
    initial square leaves the surface, or a corner lands behind the
    camera. Side length is the shortest side of the quad obtained by
    casting the four window corners onto the scene.
    """
    cx = proposal.x + proposal.size / 2.0
    cy = proposal.y + proposal.size / 2.0
    ix, iy = int(cx), int(cy)
    if not (0 <= ix < intr.width and 0 <= iy < intr.height) or not np.isfinite(buffers.depth[iy, ix]):
        return None

    s = float(proposal.size)
    pix = np.array([
        [cx, cy],
        [proposal.x, proposal.y],
        [proposal.x + s, proposal.y],
        [proposal.x + s, proposal.y + s],
        [proposal.x, proposal.y + s],
    ])
    t, tri, u, v, pts = _cast_through_pixels(scene, pix, pose, intr)
    if tri[0] < 0:
        return None
    center = pts[0]
    mesh_id = int(scene.tri_mesh[tri[0]])
    normal = interpolated_normals(scene, tri[:1], u[:1], v[:1])[0]
    # Face the camera so the text lift is toward the viewer.
    if np.dot(normal, pose.pos - center) < 0:
        normal = -normal

    corners = pts[1:]
    if (tri[1:] < 0).any():
        # Corner ray missed all geometry: intersect it with the surface plane.
        dirs = corners - pose.pos  # pts already followed the ray to max length
        for i in np.nonzero(tri[1:] < 0)[0]:
            d = dirs[i] / np.linalg.norm(dirs[i])
            denom = np.dot(d, normal)
            if abs(denom) < 1e-9:
                return None
            ray_t = np.dot(center - pose.pos, normal) / denom
            if ray_t <= 0:
                return None
            corners[i] = pose.pos + d * ray_t
    sides = np.linalg.norm(corners - np.roll(corners, -1, axis=0), axis=1)
    side = float(sides.min())
    if not np.isfinite(side) or side <= 0:
        return None

    right, up = region_axes(normal, scene.gravity)
    threshold = cfg.surface_dist_frac * side
    refined = RefinedProposal(
        center=center, right=right, up=up, normal=normal,
        width=side, height=side, mesh_id=mesh_id,
        initial_side=side, surface_threshold=threshold,
        screen_quad=np.zeros((4, 2)),
    )
    if distances_to_surface(scene, refined.corners_world(), mesh_id).max() > threshold:
        return None
    quad = _screen_quad(refined, pose, intr)
    if quad is None:
        return None
    refined.screen_quad = quad
    return refined


def _screen_quad(p: RefinedProposal, pose: CameraPose, intr: CameraIntrinsics) -> np.ndarray | None:
    uv, _, ok = project_points(p.corners_world(), pose, intr)
    if not ok.all():
        return None
    return uv


def expand(
    proposal: RefinedProposal,
    scene: Scene,
    cfg: RegionConfig,
    pose: CameraPose | None = None,
    intr: CameraIntrinsics | None = None,
) -> RefinedProposal:
    """Grow width and height alternately until a stop condition fires.

    A dimension stops when (a) a corner of the tentative extent drifts
    beyond the surface-distance threshold, (b) a probe segment sweeping
    the moved edges hits any mesh, or (c) it reaches the maximum
    expansion ratio. Growth is symmetric about the center and monotone.
    """
    step = cfg.expansion_step_frac * proposal.initial_side
    w_max = cfg.max_expansion_ratio * proposal.initial_side
    h_max = cfg.max_expansion_ratio * proposal.initial_side
    lift = proposal.normal * (cfg.probe_lift_frac * proposal.initial_side)

    w, h = proposal.width, proposal.height
    grow_w, grow_h = w < w_max, h < h_max
    turn_w = True
    while grow_w or grow_h:
        if turn_w and grow_w:
            new_w = min(w + step, w_max)
            if _extent_valid(scene, proposal, new_w, h, w, "w", lift, cfg):
                w = new_w
                if w >= w_max:
                    grow_w = False
            else:
                grow_w = False
        elif not turn_w and grow_h:
            new_h = min(h + step, h_max)
            if _extent_valid(scene, proposal, w, new_h, h, "h", lift, cfg):
                h = new_h
                if h >= h_max:
                    grow_h = False
            else:
                grow_h = False
        turn_w = not turn_w

    out = replace(proposal, width=w, height=h)
    if pose is not None and intr is not None:
        quad = _screen_quad(out, pose, intr)
        if quad is not None:
            out.screen_quad = quad
    return out


def _extent_valid(
    scene: Scene,
    p: RefinedProposal,
    new_w: float,
    new_h: float,
    old_extent: float,
    which: str,
    lift: np.ndarray,
    cfg: RegionConfig,
) -> bool:
    corners = p.corners_world(new_w, new_h)
    if distances_to_surface(scene, corners, p.mesh_id).max() > p.surface_threshold:
        return False
    # Sweep probes: sample points along both moved edges, from the old edge
    # offset to the new one, lifted off the surface.
    if which == "w":
        edge_axis, grow_axis = p.up, p.right
        span, old_off, new_off = new_h, old_extent / 2.0, new_w / 2.0
    else:
        edge_axis, grow_axis = p.right, p.up
        span, old_off, new_off = new_w, old_extent / 2.0, new_h / 2.0
    ts = np.linspace(-span / 2.0, span / 2.0, cfg.probe_samples)
    base = p.center + lift
    starts, ends = [], []
    for sign in (1.0, -1.0):
        a = base + grow_axis * (sign * old_off)
        b = base + grow_axis * (sign * new_off)
        for t in ts:
            off = edge_axis * t
            starts.append(a + off)
            ends.append(b + off)
    return not segments_blocked(scene, np.asarray(starts), np.asarray(ends)).any()


def prune_occlusions(
    proposals: list[RefinedProposal],
    pose: CameraPose,
    intr: CameraIntrinsics,
    rng: np.random.Generator,
) -> list[RefinedProposal]:
    """Greedy keep in seeded shuffle order; kept screen quads are pairwise disjoint."""
    order = rng.permutation(len(proposals))
    kept: list[RefinedProposal] = []
    for i in order:
        quad = proposals[i].screen_quad
        if all(intersection_area(quad, k.screen_quad) <= 0.0 for k in kept):
            kept.append(proposals[i])
    return kept
