"""Triangle-mesh scenes and the spatial queries every other module uses.

A Scene is immutable after assembly: meshes are concatenated into flat
triangle arrays, a SAH BVH is built once, and all queries (ray casts,
inside tests, surface distances) are read-only and safe to issue from
many workers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import bvh as _bvh
from .environment import FogParams, Light
from .geometry import RAY_EPS, normalize, normalize_rows, triangle_areas

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12
DEFAULT_GRAVITY = np.array([0.0, 0.0, -1.0])
DEFAULT_BOUNDS_MARGIN_FRAC = 0.02

# Fixed, axis-avoiding directions for the inside/outside parity vote.
_PARITY_DIRS = np.array(
    [
        [0.2479, 0.5347, 0.8093],
        [-0.6247, 0.7169, 0.3089],
        [0.5825, -0.2670, 0.7677],
    ]
)
_PARITY_DIRS /= np.linalg.norm(_PARITY_DIRS, axis=1, keepdims=True)


@dataclass(frozen=True)
class Material:
    name: str = "default"
    diffuse: tuple[float, float, float] = (0.7, 0.7, 0.7)
    specular: float = 0.1
    shininess: float = 24.0


@dataclass
class TriangleMesh:
    """One mesh: vertices (V,3), triangle index triples (T,3), unit vertex normals."""

    name: str
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    material: str = "default"
    closed: bool = False

    def validate(self) -> None:
        v, t, n = self.vertices, self.triangles, self.normals
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError(f"mesh {self.name!r}: triangle index out of range")
        lens = np.linalg.norm(n, axis=1)
        if not np.allclose(lens, 1.0, atol=1e-6):
            raise ValueError(f"mesh {self.name!r}: non-unit vertex normals")
        areas = triangle_areas(v[t[:, 0]], v[t[:, 1]], v[t[:, 2]])
        if (areas <= DEGENERATE_AREA).any():
            raise ValueError(f"mesh {self.name!r}: degenerate triangles present")

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


@dataclass
class Ray:
    """Origin + unit direction + max length. Direction is normalized on init."""

    origin: np.ndarray
    direction: np.ndarray
    max_length: float

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = normalize(self.direction)
        if not self.max_length > 0:
            raise ValueError("ray max_length must be > 0")


@dataclass(frozen=True)
class Hit:
    distance: float
    mesh_id: int
    triangle_id: int          # local to the mesh
    barycentric: np.ndarray   # (w0, w1, w2), nonnegative, sums to 1
    normal: np.ndarray        # interpolated unit surface normal (world space)

    @property
    def point_offset(self) -> np.ndarray:
        return self.barycentric


@dataclass
class Scene:
    """Immutable mesh world plus lights/fog/gravity and the BVH index."""

    meshes: list[TriangleMesh]
    lights: list[Light]
    fog: FogParams
    gravity: np.ndarray
    bounds_lo: np.ndarray
    bounds_hi: np.ndarray
    materials: dict[str, Material]
    ambient: float = 0.15
    anchors: np.ndarray | None = None
    bounds_margin_frac: float = DEFAULT_BOUNDS_MARGIN_FRAC
    name: str = "scene"
    stats: dict = field(default_factory=dict)

    # flat arrays, filled by assemble()
    flat_vertices: np.ndarray = None
    flat_normals: np.ndarray = None
    flat_triangles: np.ndarray = None
    tri_mesh: np.ndarray = None
    tri_local: np.ndarray = None
    tri_material: np.ndarray = None
    material_table: list[Material] = None
    index: _bvh.BVH = None
    _nodeorder_mesh: np.ndarray = None
    _mesh_tri_ranges: list = None

    @property
    def n_triangles(self) -> int:
        return len(self.flat_triangles)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.bounds_hi - self.bounds_lo))

    def margin(self) -> float:
        return self.bounds_margin_frac * self.diagonal

    def mesh_slice(self, mesh_id: int) -> slice:
        lo, hi = self._mesh_tri_ranges[mesh_id]
        return slice(lo, hi)


def assemble_scene(
    meshes: list[TriangleMesh],
    lights: list[Light] | None = None,
    fog: FogParams | None = None,
    gravity=None,
    materials: dict[str, Material] | None = None,
    ambient: float = 0.15,
    anchors=None,
    bounds_margin_frac: float = DEFAULT_BOUNDS_MARGIN_FRAC,
    name: str = "scene",
    stats: dict | None = None,
) -> Scene:
    """Concatenate meshes, build the BVH, and freeze the scene."""
    if not meshes or all(m.n_triangles == 0 for m in meshes):
        raise ValueError("empty scene: no triangles")
    gravity = normalize(DEFAULT_GRAVITY if gravity is None else np.asarray(gravity, dtype=np.float64))
    materials = dict(materials or {})
    materials.setdefault("default", Material())

    mat_names = list(materials)
    mat_index = {n: i for i, n in enumerate(mat_names)}

    verts, norms, tris = [], [], []
    tri_mesh, tri_local, tri_mat = [], [], []
    ranges = []
    offset = 0
    tri_offset = 0
    for mid, mesh in enumerate(meshes):
        verts.append(np.asarray(mesh.vertices, dtype=np.float64))
        norms.append(np.asarray(mesh.normals, dtype=np.float64))
        tris.append(np.asarray(mesh.triangles, dtype=np.int64) + offset)
        nt = mesh.n_triangles
        tri_mesh.append(np.full(nt, mid, dtype=np.int32))
        tri_local.append(np.arange(nt, dtype=np.int32))
        if mesh.material not in mat_index:
            mat_index[mesh.material] = len(mat_names)
            mat_names.append(mesh.material)
            materials[mesh.material] = Material(name=mesh.material)
        tri_mat.append(np.full(nt, mat_index[mesh.material], dtype=np.int32))
        ranges.append((tri_offset, tri_offset + nt))
        offset += len(mesh.vertices)
        tri_offset += nt

    flat_vertices = np.concatenate(verts)
    flat_normals = normalize_rows(np.concatenate(norms))
    flat_triangles = np.concatenate(tris)
    tri_mesh = np.concatenate(tri_mesh)
    tri_local = np.concatenate(tri_local)
    tri_material = np.concatenate(tri_mat)

    v0 = flat_vertices[flat_triangles[:, 0]]
    v1 = flat_vertices[flat_triangles[:, 1]]
    v2 = flat_vertices[flat_triangles[:, 2]]
    index = _bvh.build_bvh(v0, v1, v2)

    scene = Scene(
        meshes=meshes,
        lights=list(lights or []),
        fog=fog or FogParams(),
        gravity=gravity,
        bounds_lo=flat_vertices.min(axis=0),
        bounds_hi=flat_vertices.max(axis=0),
        materials=materials,
        ambient=ambient,
        anchors=None if anchors is None else np.asarray(anchors, dtype=np.float64),
        bounds_margin_frac=bounds_margin_frac,
        name=name,
        stats=dict(stats or {}),
        flat_vertices=flat_vertices,
        flat_normals=flat_normals,
        flat_triangles=flat_triangles,
        tri_mesh=tri_mesh,
        tri_local=tri_local,
        tri_material=tri_material,
        material_table=[materials[n] for n in mat_names],
        index=index,
        _nodeorder_mesh=np.ascontiguousarray(tri_mesh[index.tri_index]),
        _mesh_tri_ranges=ranges,
    )
    return scene


def mesh_closedness(vertices: np.ndarray, triangles: np.ndarray) -> tuple[bool, int]:
    """(closed, n_nonmanifold_edges): closed means every edge is used exactly twice.

    Vertices are welded by exact position first, so meshes that duplicate
    corner vertices for flat shading still count as closed solids.
    """
    if len(triangles) == 0:
        return False, 0
    _, weld = np.unique(vertices.round(decimals=9), axis=0, return_inverse=True)
    t = weld[triangles]
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return bool((counts == 2).all()), int((counts > 2).sum())


def cast_ray(scene: Scene, ray: Ray) -> Hit | None:
    """Nearest intersection within ray.max_length, or None."""
    t, tri, u, v = cast_rays(
        scene,
        ray.origin[None, :],
        ray.direction[None, :],
        np.array([ray.max_length]),
    )
    if tri[0] < 0:
        return None
    return _make_hit(scene, float(t[0]), int(tri[0]), float(u[0]), float(v[0]))


def cast_rays(scene: Scene, origins, dirs, max_lengths, tmin: float = RAY_EPS):
    """Batch nearest-hit query.

    Returns (t, tri_global, u, v); tri_global is -1 on miss and t is then
    the corresponding max length (unchanged).
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    max_lengths = np.ascontiguousarray(max_lengths, dtype=np.float64)
    n = len(origins)
    out_t = np.empty(n)
    out_tri = np.empty(n, dtype=np.int64)
    out_u = np.empty(n)
    out_v = np.empty(n)
    b = scene.index
    _bvh.closest_hits(
        b.bounds, b.left, b.right, b.start, b.count, b.v0, b.v1, b.v2,
        origins, dirs, tmin, max_lengths, out_t, out_tri, out_u, out_v,
    )
    hit = out_tri >= 0
    out_tri[hit] = b.tri_index[out_tri[hit]]
    return out_t, out_tri, out_u, out_v


def _make_hit(scene: Scene, t: float, tri_global: int, u: float, v: float) -> Hit:
    bary = np.array([1.0 - u - v, u, v])
    n = interpolated_normals(scene, np.array([tri_global]), np.array([u]), np.array([v]))[0]
    return Hit(
        distance=t,
        mesh_id=int(scene.tri_mesh[tri_global]),
        triangle_id=int(scene.tri_local[tri_global]),
        barycentric=bary,
        normal=n,
    )


def interpolated_normals(scene: Scene, tri_global, u, v) -> np.ndarray:
    """Barycentric-interpolated unit normals for global triangle ids."""
    tri = scene.flat_triangles[tri_global]
    n0 = scene.flat_normals[tri[:, 0]]
    n1 = scene.flat_normals[tri[:, 1]]
    n2 = scene.flat_normals[tri[:, 2]]
    w0 = (1.0 - u - v)[:, None]
    n = n0 * w0 + n1 * u[:, None] + n2 * v[:, None]
    return normalize_rows(n)


def segments_blocked(scene: Scene, starts, ends, shrink: float = RAY_EPS) -> np.ndarray:
    """True per segment when any geometry lies strictly between its endpoints."""
    starts = np.atleast_2d(np.asarray(starts, dtype=np.float64))
    ends = np.atleast_2d(np.asarray(ends, dtype=np.float64))
    d = ends - starts
    lengths = np.linalg.norm(d, axis=1)
    ok = lengths > 2 * shrink
    out = np.zeros(len(starts), dtype=bool)
    if ok.any():
        dirs = d[ok] / lengths[ok][:, None]
        b = scene.index
        hits = np.empty(int(ok.sum()), dtype=np.bool_)
        _bvh.any_hits(
            b.bounds, b.left, b.right, b.start, b.count, b.v0, b.v1, b.v2,
            np.ascontiguousarray(starts[ok]), np.ascontiguousarray(dirs),
            shrink, np.ascontiguousarray(lengths[ok] - shrink), hits,
        )
        out[ok] = hits
    return out


def is_inside_mesh(scene: Scene, point) -> bool:
    """True iff the point is interior to any closed mesh (ray-parity vote).

    Crossing parity is voted over three fixed directions so that grazing
    hits on shared edges cannot flip the answer; open meshes are never
    "inside".
    """
    point = np.asarray(point, dtype=np.float64)
    if not np.isfinite(point).all():
        raise ValueError("point must be finite")
    closed_ids = [i for i, m in enumerate(scene.meshes) if m.closed]
    if not closed_ids:
        return False
    b = scene.index
    tmax = scene.diagonal * 2.0 + 1.0
    votes = np.zeros(len(scene.meshes), dtype=np.int64)
    for d in _PARITY_DIRS:
        counts = _bvh.count_crossings(
            b.bounds, b.left, b.right, b.start, b.count, b.v0, b.v1, b.v2,
            scene._nodeorder_mesh, len(scene.meshes),
            point[0], point[1], point[2], d[0], d[1], d[2], 0.0, tmax,
        )
        votes += counts % 2
    for mid in closed_ids:
        if votes[mid] >= 2:
            return True
    return False


def points_inside(scene: Scene, points) -> np.ndarray:
    """Vectorized is_inside_mesh over (N, 3) points."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return np.array([is_inside_mesh(scene, p) for p in points], dtype=bool)


def closest_points_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Closest point to p on each triangle (a, b, c): (N, 3) arrays in, (N, 3) out.

    Region-based algorithm; handles all vertex/edge/face cases without
    divisions by zero (degenerate triangles are excluded at load time).
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    def safe_div(num, den):
        return num / np.where(np.abs(den) < 1e-300, 1.0, den)

    out = np.empty_like(a)
    done = np.zeros(len(a), dtype=bool)

    m = (d1 <= 0) & (d2 <= 0)
    out[m] = a[m]
    done |= m

    m = ~done & (d3 >= 0) & (d4 <= d3)
    out[m] = b[m]
    done |= m

    m = ~done & (d6 >= 0) & (d5 <= d6)
    out[m] = c[m]
    done |= m

    m = ~done & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    t = safe_div(d1, d1 - d3)
    out[m] = a[m] + ab[m] * t[m][:, None]
    done |= m

    m = ~done & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    t = safe_div(d2, d2 - d6)
    out[m] = a[m] + ac[m] * t[m][:, None]
    done |= m

    m = ~done & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    t = safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    out[m] = b[m] + (c[m] - b[m]) * t[m][:, None]
    done |= m

    m = ~done
    denom = safe_div(np.ones_like(va), va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[m] = a[m] + ab[m] * v[m][:, None] + ac[m] * w[m][:, None]
    return out


def distance_to_surface(scene: Scene, point, mesh_id: int) -> float:
    """Exact nearest distance from point to any triangle of the named mesh."""
    return float(distances_to_surface(scene, np.asarray(point, dtype=np.float64)[None, :], mesh_id)[0])


def distances_to_surface(scene: Scene, points, mesh_id: int) -> np.ndarray:
    """Batch nearest point-to-mesh distances for one mesh id."""
    if not 0 <= mesh_id < len(scene.meshes):
        raise ValueError(f"invalid mesh id {mesh_id}")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    mesh = scene.meshes[mesh_id]
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    out = np.empty(len(points))
    for i, p in enumerate(points):
        pp = np.broadcast_to(p, a.shape)
        q = closest_points_on_triangles(pp, a, b, c)
        out[i] = np.sqrt(((q - p) ** 2).sum(axis=1).min())
    return out
