"""Small vector helpers shared across the package.

Everything works on float64 numpy arrays; points and directions are
shape-(3,) unless noted. Batched variants take (N, 3).
"""

from __future__ import annotations

import numpy as np

# Ray t-min used everywhere to avoid self-intersection (world units).
RAY_EPS = 1e-4


def normalize(v: np.ndarray) -> np.ndarray:
    """Return v / |v|. Raises on zero-length input."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero-length vector")
    return v / n


def normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise normalize an (N, 3) array; zero rows stay zero."""
    m = np.asarray(m, dtype=np.float64)
    n = np.linalg.norm(m, axis=-1, keepdims=True)
    out = np.divide(m, n, out=np.zeros_like(m), where=n > 0)
    return out


def unit_or_none(v: np.ndarray) -> np.ndarray | None:
    """Normalize, or None when the vector is numerically zero."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n < 1e-12:
        return None
    return v / n


def rotate_about_axis(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of v about a unit axis."""
    axis = np.asarray(axis, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * np.dot(axis, v) * (1.0 - c)


def sample_direction_in_cone(axis: np.ndarray, half_angle: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction within the cone of the given half-angle around axis."""
    axis = normalize(axis)
    if half_angle <= 0.0:
        return axis
    # Uniform over the spherical cap: cos(theta) uniform in [cos(half), 1].
    cos_t = rng.uniform(np.cos(half_angle), 1.0)
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = rng.uniform(0.0, 2.0 * np.pi)
    # Build an orthonormal frame around the axis.
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = normalize(np.cross(axis, helper))
    e2 = np.cross(axis, e1)
    return axis * cos_t + (e1 * np.cos(phi) + e2 * np.sin(phi)) * sin_t


def triangle_areas(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """Areas of triangles given (N, 3) vertex arrays."""
    return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=-1)
