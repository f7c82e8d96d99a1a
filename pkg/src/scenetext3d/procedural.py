"""Bundled procedural test scenes.

Each builder returns (Scene, counts) where counts documents the exact
vertex/triangle totals the construction produces; loaders and tests use
these as the oracle for file round trips. `write_bundled_scenes` saves
the full set in the scene file format.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .environment import FogParams, Light
from .geometry import normalize_rows
from .scene import Material, Scene, TriangleMesh, assemble_scene, mesh_closedness
from .sceneio import save_scene

_FACES = (  # (axis, sign) for the 6 box faces
    (0, -1.0), (0, 1.0), (1, -1.0), (1, 1.0), (2, -1.0), (2, 1.0),
)


def box_mesh(name: str, lo, hi, material: str = "default", subdiv: int = 1, flip: bool = False) -> TriangleMesh:
    """Axis-aligned box, faces unwelded so interpolated normals stay flat.

    Each face is a subdiv x subdiv grid; `flip` turns the normals inward.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    verts, norms, tris = [], [], []
    for axis, sign in _FACES:
        u_axis, v_axis = (axis + 1) % 3, (axis + 2) % 3
        n = np.zeros(3)
        n[axis] = sign if not flip else -sign
        base = len(verts)
        coords = np.linspace(0.0, 1.0, subdiv + 1)
        for fu in coords:
            for fv in coords:
                p = np.empty(3)
                p[axis] = hi[axis] if sign > 0 else lo[axis]
                p[u_axis] = lo[u_axis] + fu * (hi[u_axis] - lo[u_axis])
                p[v_axis] = lo[v_axis] + fv * (hi[v_axis] - lo[v_axis])
                verts.append(p)
                norms.append(n.copy())
        row = subdiv + 1
        for i in range(subdiv):
            for j in range(subdiv):
                a = base + i * row + j
                b = a + row
                c = a + 1
                d = b + 1
                # Wind so the geometric normal matches `n`:
                # [a, b, c] has normal +axis by the cyclic (u, v) layout.
                if n[axis] > 0:
                    tris.extend([[a, b, c], [c, b, d]])
                else:
                    tris.extend([[a, c, b], [c, d, b]])
    verts = np.asarray(verts)
    tris = np.asarray(tris, dtype=np.int64)
    closed, _ = mesh_closedness(verts, tris)
    return TriangleMesh(
        name=name,
        vertices=verts,
        triangles=tris,
        normals=np.asarray(norms),
        material=material,
        closed=closed,
    )


def quad_mesh(name: str, origin, edge_u, edge_v, material: str = "default", subdiv: int = 1) -> TriangleMesh:
    """Open planar rectangle spanned by two edge vectors, as a subdiv grid."""
    origin = np.asarray(origin, dtype=np.float64)
    edge_u = np.asarray(edge_u, dtype=np.float64)
    edge_v = np.asarray(edge_v, dtype=np.float64)
    n = np.cross(edge_u, edge_v)
    n = n / np.linalg.norm(n)
    verts, tris = [], []
    row = subdiv + 1
    for i in range(row):
        for j in range(row):
            verts.append(origin + edge_u * (i / subdiv) + edge_v * (j / subdiv))
    for i in range(subdiv):
        for j in range(subdiv):
            a = i * row + j
            b = a + row
            tris.extend([[a, b, a + 1], [a + 1, b, b + 1]])
    verts = np.asarray(verts)
    return TriangleMesh(
        name=name,
        vertices=verts,
        triangles=np.asarray(tris, dtype=np.int64),
        normals=np.tile(n, (len(verts), 1)),
        material=material,
        closed=False,
    )


def _default_materials() -> dict[str, Material]:
    return {
        "default": Material("default", (0.7, 0.7, 0.7), 0.1, 24.0),
        "floor": Material("floor", (0.55, 0.5, 0.45), 0.05, 16.0),
        "wall": Material("wall", (0.75, 0.73, 0.68), 0.08, 24.0),
        "wood": Material("wood", (0.45, 0.3, 0.18), 0.2, 32.0),
        "stone": Material("stone", (0.5, 0.52, 0.55), 0.15, 48.0),
    }


def unit_cube_scene() -> tuple[Scene, dict]:
    """Canonical closed cube spanning [0, 1]^3: 12 triangles."""
    cube = box_mesh("cube", (0, 0, 0), (1, 1, 1))
    light = Light(kind="directional", direction=(-0.3, -0.2, -0.92), intensity=1.0)
    scene = assemble_scene([cube], lights=[light], name="unit_cube")
    counts = {"vertices": len(cube.vertices), "triangles": 12}
    return scene, counts


def flat_floor_scene(size: float = 20.0, subdiv: int = 8) -> tuple[Scene, dict]:
    """A single large floor plane at z=0 centered on the origin, plus sun light."""
    half = size / 2.0
    floor = quad_mesh("floor", (-half, -half, 0.0), (size, 0, 0), (0, size, 0), "floor", subdiv)
    lights = [Light(kind="directional", direction=(-0.35, -0.25, -0.9), intensity=1.1)]
    anchors = [(0.0, 0.0, 2.0), (3.0, -3.0, 2.5), (-4.0, 2.0, 1.8)]
    scene = assemble_scene(
        [floor], lights=lights, materials=_default_materials(),
        anchors=anchors, name="flat_floor",
    )
    counts = {"vertices": (subdiv + 1) ** 2, "triangles": 2 * subdiv**2}
    return scene, counts


def wall_scene(width: float = 16.0, height: float = 6.0, depth: float = 14.0) -> tuple[Scene, dict]:
    """A floor plus one large wall facing +y; good for guaranteed text placement."""
    floor = quad_mesh("floor", (-width / 2, 0.0, 0.0), (width, 0, 0), (0, depth, 0), "floor", 6)
    # Wall occupies z in [0, height] at y=0, normal +y (into the scene).
    wall = quad_mesh("wall", (-width / 2, 0.0, 0.0), (0, 0, height), (width, 0, 0), "wall", 6)
    lights = [
        Light(kind="directional", direction=(-0.2, 0.5, -0.84), intensity=1.0),
        Light(kind="point", position=(0.0, depth * 0.6, height * 0.8), color=(1.0, 0.95, 0.85), intensity=18.0),
    ]
    anchors = [(0.0, depth * 0.55, 1.7), (-3.0, depth * 0.45, 1.6), (3.0, depth * 0.5, 2.0)]
    scene = assemble_scene(
        [floor, wall], lights=lights, materials=_default_materials(),
        anchors=anchors, name="wall_scene",
    )
    counts = {"vertices": 2 * 49, "triangles": 2 * 72}
    return scene, counts


def test_room_scene() -> tuple[Scene, dict]:
    """Closed room with wall thickness, a table, and a pillar.

    The shell is a hollow solid (outer box + inner box), so the room
    interior is OUTSIDE the shell mesh by ray parity; furniture boxes are
    solid. Interior: x in [-6, 6], y in [-5, 5], z in [0, 4].
    """
    t = 0.3  # wall thickness
    outer = box_mesh("shell_outer", (-6 - t, -5 - t, -t), (6 + t, 5 + t, 4 + t), "wall", subdiv=1)
    inner = box_mesh("shell_inner", (-6, -5, 0), (6, 5, 4), "wall", subdiv=4, flip=True)
    shell = TriangleMesh(
        name="shell",
        vertices=np.concatenate([outer.vertices, inner.vertices]),
        triangles=np.concatenate([outer.triangles, inner.triangles + len(outer.vertices)]),
        normals=np.concatenate([outer.normals, inner.normals]),
        material="wall",
        closed=True,
    )
    table_top = box_mesh("top", (1.0, -2.4, 0.70), (2.6, -0.8, 0.80), "wood")
    legs = [
        box_mesh("leg", (x0, y0, 0.0), (x0 + 0.12, y0 + 0.12, 0.70), "wood")
        for x0, y0 in [(1.05, -2.35), (2.43, -2.35), (1.05, -0.97), (2.43, -0.97)]
    ]
    tv, tt, tn = [table_top.vertices], [table_top.triangles], [table_top.normals]
    off = len(table_top.vertices)
    for leg in legs:
        tv.append(leg.vertices)
        tt.append(leg.triangles + off)
        tn.append(leg.normals)
        off += len(leg.vertices)
    table = TriangleMesh(
        name="table",
        vertices=np.concatenate(tv),
        triangles=np.concatenate(tt),
        normals=np.concatenate(tn),
        material="wood",
        closed=True,
    )
    pillar = box_mesh("pillar", (-3.5, 1.5, 0.0), (-2.7, 2.3, 4.0), "stone")

    lights = [
        Light(kind="directional", direction=(-0.3, 0.4, -0.87), color=(1.0, 0.98, 0.9), intensity=0.9),
        Light(kind="point", position=(0.0, 0.0, 3.6), color=(1.0, 0.9, 0.75), intensity=14.0),
        Light(kind="point", position=(-4.0, -3.0, 3.2), color=(0.8, 0.85, 1.0), intensity=8.0),
    ]
    anchors = [
        (-4.5, -3.5, 1.6), (-4.5, 3.5, 1.6), (4.5, -3.5, 1.6), (4.5, 3.5, 1.8),
        (0.0, 0.0, 2.0), (-2.0, -3.0, 1.4), (3.5, 2.0, 2.2), (0.0, 3.5, 1.5),
    ]
    scene = assemble_scene(
        [shell, table, pillar],
        lights=lights,
        fog=FogParams(density=0.0),
        materials=_default_materials(),
        anchors=anchors,
        name="test_room",
    )
    n_shell_tris = 12 + 2 * 6 * 16        # outer 12, inner 6 faces of 4x4 grids
    n_table_tris = 5 * 12
    counts = {
        "triangles": n_shell_tris + n_table_tris + 12,
        "vertices": len(shell.vertices) + len(table.vertices) + len(pillar.vertices),
        "meshes": 3,
    }
    return scene, counts


def pillar_scene(pillar_offset: float = 2.0) -> tuple[Scene, dict]:
    """Flat floor with a solid pillar whose near face is `pillar_offset` along +x.

    Useful for expansion-obstacle tests around the origin.
    """
    floor = quad_mesh("floor", (-10, -10, 0.0), (20, 0, 0), (0, 20, 0), "floor", 8)
    pillar = box_mesh("pillar", (pillar_offset, -1.0, 0.0), (pillar_offset + 0.6, 1.0, 2.5), "stone")
    lights = [Light(kind="directional", direction=(-0.3, -0.3, -0.9), intensity=1.0)]
    anchors = [(0.0, -4.0, 2.0)]
    scene = assemble_scene(
        [floor, pillar], lights=lights, materials=_default_materials(),
        anchors=anchors, name="pillar_scene",
    )
    counts = {"triangles": 2 * 64 + 12, "vertices": 81 + 24}
    return scene, counts


def cylinder_scene(radius: float = 3.0, height: float = 4.0, segments: int = 64) -> tuple[Scene, dict]:
    """Open vertical cylinder (axis +z through origin) with smooth radial normals."""
    zs = np.array([0.0, height])
    ang = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    verts = []
    norms = []
    for z in zs:
        for cx, cy in ring:
            verts.append([radius * cx, radius * cy, z])
            norms.append([cx, cy, 0.0])
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        a, b = i, j
        c, d = i + segments, j + segments
        tris.extend([[a, b, c], [b, d, c]])
    mesh = TriangleMesh(
        name="cylinder",
        vertices=np.asarray(verts, dtype=np.float64),
        triangles=np.asarray(tris, dtype=np.int64),
        normals=normalize_rows(np.asarray(norms)),
        material="stone",
        closed=False,
    )
    lights = [Light(kind="directional", direction=(-0.5, -0.2, -0.84), intensity=1.0)]
    anchors = [(radius + 4.0, 0.0, height / 2)]
    scene = assemble_scene(
        [mesh], lights=lights, materials=_default_materials(),
        anchors=anchors, name="cylinder_scene",
    )
    counts = {"triangles": 2 * segments, "vertices": 2 * segments}
    return scene, counts


def random_triangle_scene(n: int = 500, seed: int = 0, extent: float = 10.0) -> tuple[Scene, dict]:
    """Soup of n random triangles inside a cube; BVH/linear-scan oracle fodder."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-extent / 2, extent / 2, (n, 3))
    offsets = rng.normal(0.0, 0.6, (n, 3, 3))
    verts = (centers[:, None, :] + offsets).reshape(-1, 3)
    tris = np.arange(3 * n, dtype=np.int64).reshape(n, 3)
    fn = np.cross(
        verts[tris[:, 1]] - verts[tris[:, 0]],
        verts[tris[:, 2]] - verts[tris[:, 0]],
    )
    keep = np.linalg.norm(fn, axis=1) > 1e-9
    tris = tris[keep]
    fn = normalize_rows(fn[keep])
    norms = np.zeros_like(verts)
    for k in range(3):
        norms[tris[:, k]] = fn
    # Unreferenced vertices keep zero normals; give them +z to stay unit-valid.
    unref = np.linalg.norm(norms, axis=1) == 0
    norms[unref] = (0.0, 0.0, 1.0)
    mesh = TriangleMesh(
        name="soup",
        vertices=verts,
        triangles=tris,
        normals=norms,
        material="default",
        closed=False,
    )
    lights = [Light(kind="directional", direction=(0.0, 0.0, -1.0), intensity=1.0)]
    scene = assemble_scene([mesh], lights=lights, name=f"random_{n}_{seed}")
    return scene, {"triangles": int(keep.sum()), "vertices": len(verts)}


BUILDERS = {
    "unit_cube": unit_cube_scene,
    "flat_floor": flat_floor_scene,
    "wall_scene": wall_scene,
    "test_room": test_room_scene,
    "pillar_scene": pillar_scene,
    "cylinder_scene": cylinder_scene,
}


def write_scene(scene: Scene, directory) -> Path:
    """Save a Scene in the OBJ + sidecar format; returns the .obj path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return save_scene(
        directory / f"{scene.name}.obj",
        scene.meshes,
        lights=scene.lights,
        fog=scene.fog,
        gravity=scene.gravity,
        materials=scene.materials,
        ambient=scene.ambient,
        anchors=scene.anchors,
        bounds_margin_frac=scene.bounds_margin_frac,
    )


def write_bundled_scenes(directory) -> dict[str, Path]:
    """Write every bundled scene into `directory`; returns name -> obj path."""
    out = {}
    for name, builder in BUILDERS.items():
        scene, _ = builder()
        out[name] = write_scene(scene, directory)
    return out
