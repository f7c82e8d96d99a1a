"""Rasterize scenes into RGB / normal / depth / instance-mask buffers.

Rendering is split in two reusable stages:

  * `render_scene_pass` rasterizes the mesh world once into a G-buffer
    (camera-z, camera-space normals, triangle ids, material buffers).
  * `composite_text` overlays textured text quads onto a COPY of that
    G-buffer and runs the deferred shading (ambient + Lambert + Blinn
    specular, exponential fog, gamma 2.2 encode).

`render` is the one-shot wrapper. Shading happens in linear RGB; the
depth buffer stores Euclidean distance from the camera (+inf for sky).
Everything is deterministic: sequential kernels, fixed triangle order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import raster
from .camera import CameraIntrinsics, CameraPose, pixel_ray_dirs, ray_scale_map, world_to_camera_matrix
from .scene import Scene

GAMMA = 2.2
SKY_COLOR = (0.68, 0.78, 0.90)


@dataclass
class FrameBuffers:
    """Per-frame output buffers, all H x W.

    rgb           uint8, gamma-encoded
    normal        float32 unit camera-space normals (zero where sky)
    depth         float64 Euclidean distance, +inf for sky
    instance_mask int32 word-instance ids (0 = none); every visible
                  (depth-passing) text-mesh pixel that maps to a word box
    region_mask   int32 region footprint ids + 1 (0 = none)
    mesh / tri    int32 scene mesh id / global triangle id (-1 = none)
    """

    rgb: np.ndarray
    normal: np.ndarray
    depth: np.ndarray
    instance_mask: np.ndarray
    region_mask: np.ndarray
    mesh: np.ndarray
    tri: np.ndarray
    word_offsets: list = field(default_factory=list)

    @property
    def covered(self) -> np.ndarray:
        return self.tri >= 0


@dataclass
class ScenePass:
    """Cached scene-only rasterization, reusable across text composites."""

    scene: Scene
    pose: CameraPose
    intr: CameraIntrinsics
    zbuf: np.ndarray       # camera z, +inf empty
    nbuf: np.ndarray       # camera-space normals, float32
    gid: np.ndarray        # global triangle id, -1 empty
    ray_dirs: np.ndarray   # (H, W, 3) world unit rays
    ray_scale: np.ndarray  # z -> distance factor
    albedo: np.ndarray     # linear rgb float32
    kd: np.ndarray
    ks: np.ndarray
    shin: np.ndarray


def render_scene_pass(scene: Scene, pose: CameraPose, intr: CameraIntrinsics) -> ScenePass:
    """Rasterize scene geometry into a fresh G-buffer."""
    W, H = intr.width, intr.height
    R = world_to_camera_matrix(pose)

    verts_cam = (scene.flat_vertices - pose.pos) @ R.T
    norms_cam = scene.flat_normals @ R.T
    tris = scene.flat_triangles
    cam_xyz = verts_cam[tris]            # (K, 3, 3)
    attrs = norms_cam[tris]              # (K, 3, 3) normals only
    clipped_xyz, clipped_attr, src = raster.clip_triangles_near(cam_xyz, attrs)

    zbuf = np.full((H, W), np.inf)
    nbuf = np.zeros((H, W, 3), dtype=np.float32)
    gid = np.full((H, W), -1, dtype=np.int64)
    if len(clipped_xyz):
        f = intr.focal_px
        cx, cy = intr.center
        z = clipped_xyz[:, :, 2]
        xy = np.empty_like(clipped_xyz[:, :, :2])
        xy[:, :, 0] = cx + f * clipped_xyz[:, :, 0] / z
        xy[:, :, 1] = cy + f * clipped_xyz[:, :, 1] / z
        raster.raster_gbuffer(
            np.ascontiguousarray(xy),
            np.ascontiguousarray(z),
            np.ascontiguousarray(clipped_attr),
            np.ascontiguousarray(src),
            W, H, zbuf, nbuf, gid,
        )

    covered = gid >= 0
    albedo = np.zeros((H, W, 3), dtype=np.float32)
    kd = np.ones((H, W), dtype=np.float32)
    ks = np.zeros((H, W), dtype=np.float32)
    shin = np.full((H, W), 24.0, dtype=np.float32)
    if covered.any():
        mat_idx = np.where(covered, scene.tri_material[np.where(covered, gid, 0)], 0)
        diffuse = np.asarray([m.diffuse for m in scene.material_table], dtype=np.float32)
        specular = np.asarray([m.specular for m in scene.material_table], dtype=np.float32)
        shininess = np.asarray([m.shininess for m in scene.material_table], dtype=np.float32)
        albedo[covered] = diffuse[mat_idx][covered]
        ks[covered] = specular[mat_idx][covered]
        shin[covered] = shininess[mat_idx][covered]

    return ScenePass(
        scene=scene, pose=pose, intr=intr,
        zbuf=zbuf, nbuf=nbuf, gid=gid,
        ray_dirs=pixel_ray_dirs(pose, intr),
        ray_scale=ray_scale_map(intr),
        albedo=albedo, kd=kd, ks=ks, shin=shin,
    )


def composite_text(scene_pass: ScenePass, text_meshes: list) -> FrameBuffers:
    """Overlay text meshes on a copy of the scene pass and shade the frame.

    Text meshes are duck-typed: world_vertices (4, 3) quad corners in
    texture order, texture_rgb (h, w, 3) linear float, texture_alpha
    (h, w), word_id_map (h, w) int32 with 1-based local word ids,
    normal_world (3,), kd/ks/shininess floats. Word ids in the instance
    mask are offset so they stay unique across meshes (see word_offsets).
    """
    sp = scene_pass
    scene, pose, intr = sp.scene, sp.pose, sp.intr
    W, H = intr.width, intr.height
    R = world_to_camera_matrix(pose)

    zbuf = sp.zbuf.copy()
    nbuf = sp.nbuf.copy()
    albedo = sp.albedo.copy()
    kd = sp.kd.copy()
    ks = sp.ks.copy()
    shin = sp.shin.copy()
    region_buf = np.zeros((H, W), dtype=np.int32)
    word_buf = np.zeros((H, W), dtype=np.int32)

    word_offsets = []
    offset = 0
    f = intr.focal_px
    cx, cy = intr.center
    for i, tm in enumerate(text_meshes):
        word_offsets.append(offset)
        corners_cam = (np.asarray(tm.world_vertices, dtype=np.float64) - pose.pos) @ R.T
        uv4 = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        tri_idx = np.array([[0, 1, 2], [0, 2, 3]])
        cam_xyz = corners_cam[tri_idx]
        attrs = uv4[tri_idx]
        clipped_xyz, clipped_uv, _ = raster.clip_triangles_near(cam_xyz, attrs)
        if len(clipped_xyz) == 0:
            offset += tm.n_words
            continue
        z = clipped_xyz[:, :, 2]
        xy = np.empty_like(clipped_xyz[:, :, :2])
        xy[:, :, 0] = cx + f * clipped_xyz[:, :, 0] / z
        xy[:, :, 1] = cy + f * clipped_xyz[:, :, 1] / z
        n_cam = np.asarray(tm.normal_world, dtype=np.float64) @ R.T
        raster.raster_text(
            np.ascontiguousarray(xy), np.ascontiguousarray(z), np.ascontiguousarray(clipped_uv),
            np.ascontiguousarray(tm.texture_rgb, dtype=np.float32),
            np.ascontiguousarray(tm.texture_alpha, dtype=np.float32),
            np.ascontiguousarray(tm.word_id_map, dtype=np.int32),
            n_cam.astype(np.float64),
            float(tm.kd), float(tm.ks), float(tm.shininess),
            np.int32(getattr(tm, "region_id", i) + 1), np.int32(offset),
            W, H, zbuf, nbuf, albedo, kd, ks, shin, region_buf, word_buf,
        )
        offset += tm.n_words

    covered = (gidmask := sp.gid >= 0) | (region_buf > 0)
    depth = np.where(zbuf < np.inf, zbuf * sp.ray_scale, np.inf)
    rgb = shade(scene, sp, nbuf, depth, albedo, kd, ks, shin, covered)
    return FrameBuffers(
        rgb=rgb,
        normal=nbuf,
        depth=depth,
        instance_mask=word_buf,
        region_mask=region_buf,
        mesh=np.where(gidmask, scene.tri_mesh[np.where(gidmask, sp.gid, 0)], -1).astype(np.int32),
        tri=sp.gid.astype(np.int32),
        word_offsets=word_offsets,
    )


def shade(scene: Scene, sp: ScenePass, nbuf, depth, albedo, kd, ks, shin, covered) -> np.ndarray:
    """Deferred ambient + Lambertian + Blinn-Phong pass, fog, gamma encode."""
    H, W = depth.shape
    R = world_to_camera_matrix(sp.pose)
    n_world = nbuf.astype(np.float64) @ R
    view = -sp.ray_dirs

    rgb = np.empty((H, W, 3))
    rgb[:] = SKY_COLOR
    lit = albedo.astype(np.float64) * scene.ambient
    spec_total = np.zeros((H, W, 3))

    finite_depth = np.where(np.isfinite(depth), depth, 0.0)
    points = sp.pose.pos + sp.ray_dirs * finite_depth[:, :, None]
    for light in scene.lights:
        color = np.asarray(light.color) * light.intensity
        if light.kind == "directional":
            l_dir = -np.asarray(light.direction)
            ndotl = np.maximum(0.0, n_world @ l_dir)
            att = 1.0
            h = l_dir + view
        else:
            to_light = np.asarray(light.position) - points
            d2 = np.maximum((to_light**2).sum(axis=2), 1e-6)
            l_dir = to_light / np.sqrt(d2)[:, :, None]
            ndotl = np.maximum(0.0, (n_world * l_dir).sum(axis=2))
            att = 1.0 / d2
            h = l_dir + view
        h_norm = np.linalg.norm(h, axis=2, keepdims=True)
        h = np.divide(h, h_norm, out=np.zeros_like(h), where=h_norm > 0)
        ndoth = np.maximum(0.0, (n_world * h).sum(axis=2))
        diff = (ndotl * att)[:, :, None] * color
        lit += albedo * kd[:, :, None] * diff
        spec_total += (np.power(ndoth, shin) * att * (ndotl > 0))[:, :, None] * color

    lit += ks[:, :, None] * spec_total
    rgb[covered] = lit[covered]

    density = scene.fog.density
    if density > 0.0:
        fog_f = np.where(np.isfinite(depth), 1.0 - np.exp(-density * np.where(np.isfinite(depth), depth, 0.0)), 1.0)
        rgb = rgb * (1.0 - fog_f[:, :, None]) + np.asarray(scene.fog.color) * fog_f[:, :, None]

    out = np.clip(rgb, 0.0, 1.0) ** (1.0 / GAMMA)
    return np.rint(out * 255.0).astype(np.uint8)


def render(
    scene: Scene,
    pose: CameraPose,
    intr: CameraIntrinsics,
    text_meshes: list = (),
) -> FrameBuffers:
    """One-shot render: scene pass + text composite + shading."""
    sp = render_scene_pass(scene, pose, intr)
    return composite_text(sp, list(text_meshes))
