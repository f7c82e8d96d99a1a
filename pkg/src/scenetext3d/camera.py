"""Pinhole camera model: poses, intrinsics, projection.

Conventions (documented once, used everywhere):
  * World is right-handed with +z as the zenith axis; yaw rotates about
    +z, pitch is measured from the horizontal plane (positive looks up),
    roll rotates about the forward axis.
  * Camera space is x-right, y-down, z-forward; pixel (0, 0) is the
    top-left corner and pixel centers sit at integer + 0.5.
  * `depth` always means Euclidean distance from the camera center in
    world units (not z-depth), so ray-cast distances compare directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BehindCameraError(ValueError):
    """Raised when projecting a point at or behind the camera plane."""


@dataclass(frozen=True)
class CameraPose:
    """Viewpoint: position plus pitch/yaw/roll in radians."""

    position: tuple[float, float, float]
    pitch: float
    yaw: float
    roll: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64)
        if p.shape != (3,) or not np.isfinite(p).all():
            raise ValueError("pose position must be a finite 3-vector")
        if not (np.isfinite(self.pitch) and np.isfinite(self.yaw) and np.isfinite(self.roll)):
            raise ValueError("pose angles must be finite")
        object.__setattr__(self, "position", tuple(float(x) for x in p))

    @property
    def pos(self) -> np.ndarray:
        return np.asarray(self.position, dtype=np.float64)


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fov: float = np.deg2rad(60.0)   # full vertical field of view, radians

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 < self.fov < np.pi:
            raise ValueError("fov must be in (0, pi)")

    @property
    def focal_px(self) -> float:
        return (self.height / 2.0) / np.tan(self.fov / 2.0)

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)


def camera_axes(pose: CameraPose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(right, up, forward) unit vectors in world space."""
    cp, sp = np.cos(pose.pitch), np.sin(pose.pitch)
    cy, sy = np.cos(pose.yaw), np.sin(pose.yaw)
    forward = np.array([cp * cy, cp * sy, sp])
    right = np.array([sy, -cy, 0.0])    # horizontal for every pitch
    up = np.cross(right, forward)
    if pose.roll != 0.0:
        cr, sr = np.cos(pose.roll), np.sin(pose.roll)
        right, up = right * cr + up * sr, up * cr - right * sr
    return right, up, forward


def world_to_camera_matrix(pose: CameraPose) -> np.ndarray:
    """Rows (right, down, forward): p_cam = R @ (p_world - position)."""
    right, up, forward = camera_axes(pose)
    return np.stack([right, -up, forward])


def project_points(points, pose: CameraPose, intr: CameraIntrinsics):
    """Batch projection.

    Returns (uv (N, 2) pixel coords, depth (N,) Euclidean distance,
    in_front (N,) bool). uv rows for behind-camera points are NaN.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    R = world_to_camera_matrix(pose)
    rel = points - pose.pos
    cam = rel @ R.T
    z = cam[:, 2]
    in_front = z > 1e-9
    f = intr.focal_px
    cx, cy = intr.center
    uv = np.full((len(points), 2), np.nan)
    zz = np.where(in_front, z, 1.0)
    uv[:, 0] = np.where(in_front, cx + f * cam[:, 0] / zz, np.nan)
    uv[:, 1] = np.where(in_front, cy + f * cam[:, 1] / zz, np.nan)
    depth = np.linalg.norm(rel, axis=1)
    return uv, depth, in_front


def project(point, pose: CameraPose, intr: CameraIntrinsics) -> tuple[float, float, float]:
    """Project one world point; returns (u, v, depth). Raises BehindCameraError."""
    uv, depth, ok = project_points(np.asarray(point)[None, :], pose, intr)
    if not ok[0]:
        raise BehindCameraError("point is behind the camera")
    return float(uv[0, 0]), float(uv[0, 1]), float(depth[0])


def unproject(pixel, depth: float, pose: CameraPose, intr: CameraIntrinsics) -> np.ndarray:
    """Inverse of project for depth > 0: world point at Euclidean `depth`."""
    if not depth > 0:
        raise ValueError("depth must be > 0")
    return unproject_batch(np.asarray(pixel, dtype=np.float64)[None, :], np.array([depth]), pose, intr)[0]


def unproject_batch(pixels, depths, pose: CameraPose, intr: CameraIntrinsics) -> np.ndarray:
    pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    depths = np.asarray(depths, dtype=np.float64)
    f = intr.focal_px
    cx, cy = intr.center
    xc = (pixels[:, 0] - cx) / f
    yc = (pixels[:, 1] - cy) / f
    dirs_cam = np.stack([xc, yc, np.ones_like(xc)], axis=1)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    R = world_to_camera_matrix(pose)
    dirs_world = dirs_cam @ R
    return pose.pos + dirs_world * depths[:, None]


def pixel_ray_dirs(pose: CameraPose, intr: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) unit world-space directions through every pixel center."""
    f = intr.focal_px
    cx, cy = intr.center
    xs = (np.arange(intr.width) + 0.5 - cx) / f
    ys = (np.arange(intr.height) + 0.5 - cy) / f
    xc, yc = np.meshgrid(xs, ys)
    dirs_cam = np.stack([xc, yc, np.ones_like(xc)], axis=-1)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=-1, keepdims=True)
    R = world_to_camera_matrix(pose)
    return dirs_cam @ R


def ray_scale_map(intr: CameraIntrinsics) -> np.ndarray:
    """(H, W) factor converting camera z to Euclidean distance per pixel."""
    f = intr.focal_px
    cx, cy = intr.center
    xs = (np.arange(intr.width) + 0.5 - cx) / f
    ys = (np.arange(intr.height) + 0.5 - cy) / f
    xc, yc = np.meshgrid(xs, ys)
    return np.sqrt(1.0 + xc * xc + yc * yc)
