"""Scene file ingestion: Wavefront-OBJ subset plus a JSON metadata sidecar.

The grammar is documented in docs/scene_format.md. Geometry lives in the
.obj file (v / vn / f / o / usemtl); lights, fog, gravity, materials,
camera anchors, and the boundary margin live in `<stem>.scene.json`.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .environment import FogParams, Light
from .geometry import normalize_rows, triangle_areas
from .scene import (
    DEFAULT_BOUNDS_MARGIN_FRAC,
    DEGENERATE_AREA,
    Material,
    Scene,
    TriangleMesh,
    assemble_scene,
    mesh_closedness,
)

log = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".scene.json"


class SceneFormatError(ValueError):
    """Raised when a scene file or its sidecar does not parse."""


def load_scene(path, format: str = "obj") -> Scene:
    """Load and index a scene file.

    Degenerate (zero-area) triangles are dropped and counted in
    ``scene.stats['dropped_degenerate']``; non-manifold meshes are logged
    as a warning and treated as open for inside tests.
    """
    if format != "obj":
        raise SceneFormatError(f"unknown scene format tag {format!r}")
    path = Path(path)
    if not path.exists():
        raise SceneFormatError(f"scene file not found: {path}")
    raw_meshes, mesh_materials = _parse_obj(path)
    meta = _load_sidecar(path)

    materials = {
        name: Material(
            name=name,
            diffuse=tuple(m.get("diffuse", (0.7, 0.7, 0.7))),
            specular=float(m.get("specular", 0.1)),
            shininess=float(m.get("shininess", 24.0)),
        )
        for name, m in meta.get("materials", {}).items()
    }

    meshes = []
    dropped = 0
    for (name, verts, norms, faces) in raw_meshes:
        verts = np.asarray(verts, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        areas = triangle_areas(verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]])
        keep = areas > DEGENERATE_AREA
        dropped += int((~keep).sum())
        faces = faces[keep]
        if len(faces) == 0:
            continue
        if norms is None:
            norms = _vertex_normals(verts, faces)
        else:
            norms = normalize_rows(np.asarray(norms, dtype=np.float64))
        closed, nonmanifold = mesh_closedness(verts, faces)
        if nonmanifold:
            log.warning("mesh %r: %d non-manifold edges (treated as open)", name, nonmanifold)
        meshes.append(
            TriangleMesh(
                name=name,
                vertices=verts,
                triangles=faces,
                normals=norms,
                material=mesh_materials.get(name, "default"),
                closed=closed,
            )
        )
    if not meshes:
        raise SceneFormatError(f"{path}: empty scene (no non-degenerate triangles)")
    if dropped:
        log.info("%s: dropped %d degenerate triangles", path.name, dropped)

    lights = [_light_from_dict(d) for d in meta.get("lights", [])]
    fog_meta = meta.get("fog", {})
    fog = FogParams(density=float(fog_meta.get("density", 0.0)), color=tuple(fog_meta.get("color", (0.7, 0.75, 0.8))))
    return assemble_scene(
        meshes,
        lights=lights,
        fog=fog,
        gravity=meta.get("gravity"),
        materials=materials,
        ambient=float(meta.get("ambient", 0.15)),
        anchors=meta.get("anchors"),
        bounds_margin_frac=float(meta.get("bounds_margin_frac", DEFAULT_BOUNDS_MARGIN_FRAC)),
        name=path.stem,
        stats={"dropped_degenerate": dropped},
    )


def _light_from_dict(d: dict) -> Light:
    return Light(
        kind=d.get("kind", "directional"),
        direction=tuple(d["direction"]) if d.get("direction") is not None else None,
        position=tuple(d["position"]) if d.get("position") is not None else None,
        color=tuple(d.get("color", (1.0, 1.0, 1.0))),
        intensity=float(d.get("intensity", 1.0)),
    )


def _load_sidecar(obj_path: Path) -> dict:
    sidecar = obj_path.parent / (obj_path.stem + SIDECAR_SUFFIX)
    if not sidecar.exists():
        log.info("no sidecar %s; using defaults", sidecar.name)
        return {}
    try:
        return json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{sidecar}: bad sidecar JSON: {e}") from e


def _parse_obj(path: Path):
    """Returns ([(name, verts, norms_or_None, flat_face_triples)], {name: material})."""
    global_v: list[list[float]] = []
    global_vn: list[list[float]] = []
    meshes: list[tuple] = []
    mesh_materials: dict[str, str] = {}

    cur_name = "mesh0"
    cur_faces: list[tuple[int, int]] = []  # (vertex idx, normal idx or -1)
    cur_material = "default"
    auto_id = 0

    def flush():
        nonlocal cur_faces
        if cur_faces:
            meshes.append((cur_name, list(cur_faces)))
            mesh_materials[cur_name] = cur_material
        cur_faces = []

    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "v":
                global_v.append([float(x) for x in parts[1:4]])
            elif tag == "vn":
                global_vn.append([float(x) for x in parts[1:4]])
            elif tag in ("o", "g"):
                flush()
                auto_id += 1
                cur_name = parts[1] if len(parts) > 1 else f"mesh{auto_id}"
            elif tag == "usemtl":
                cur_material = parts[1]
            elif tag == "f":
                refs = []
                for tok in parts[1:]:
                    fields = tok.split("/")
                    vi = int(fields[0])
                    ni = int(fields[2]) if len(fields) >= 3 and fields[2] else 0
                    if vi <= 0 or ni < 0:
                        raise SceneFormatError(f"{path}:{lineno}: only positive indices supported")
                    refs.append((vi - 1, ni - 1))
                if len(refs) < 3:
                    raise SceneFormatError(f"{path}:{lineno}: face with fewer than 3 vertices")
                for k in range(1, len(refs) - 1):  # fan triangulation
                    cur_faces.extend([refs[0], refs[k], refs[k + 1]])
            elif tag in ("vt", "s", "mtllib"):
                continue
            else:
                raise SceneFormatError(f"{path}:{lineno}: unsupported directive {tag!r}")
        except (ValueError, IndexError) as e:
            if isinstance(e, SceneFormatError):
                raise
            raise SceneFormatError(f"{path}:{lineno}: {e}") from e
    flush()
    if not meshes:
        raise SceneFormatError(f"{path}: no faces found")

    gv = np.asarray(global_v, dtype=np.float64)
    gn = np.asarray(global_vn, dtype=np.float64) if global_vn else None

    out = []
    for name, faces in meshes:
        vidx = np.array([f[0] for f in faces], dtype=np.int64)
        nidx = np.array([f[1] for f in faces], dtype=np.int64)
        if vidx.max() >= len(gv):
            raise SceneFormatError(f"{path}: face references vertex {vidx.max() + 1} of {len(gv)}")
        uniq, local = np.unique(vidx, return_inverse=True)
        verts = gv[uniq]
        norms = None
        if gn is not None and (nidx >= 0).all():
            if nidx.max() >= len(gn):
                raise SceneFormatError(f"{path}: face references normal {nidx.max() + 1} of {len(gn)}")
            # Per-vertex normal: take the normal of the first face corner using it.
            norms = np.zeros((len(uniq), 3))
            seen = np.zeros(len(uniq), dtype=bool)
            for li, ni in zip(local, nidx):
                if not seen[li]:
                    norms[li] = gn[ni]
                    seen[li] = True
        out.append((name, verts, norms, local))
    return out, mesh_materials


def _vertex_normals(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals."""
    fn = np.cross(verts[faces[:, 1]] - verts[faces[:, 0]], verts[faces[:, 2]] - verts[faces[:, 0]])
    out = np.zeros_like(verts)
    for k in range(3):
        np.add.at(out, faces[:, k], fn)
    return normalize_rows(out)


def save_scene(
    path,
    meshes: list[TriangleMesh],
    lights: list[Light] = (),
    fog: FogParams | None = None,
    gravity=(0.0, 0.0, -1.0),
    materials: dict[str, Material] | None = None,
    ambient: float = 0.15,
    anchors=None,
    bounds_margin_frac: float = DEFAULT_BOUNDS_MARGIN_FRAC,
) -> Path:
    """Write an .obj plus sidecar; returns the .obj path."""
    path = Path(path)
    if path.suffix != ".obj":
        path = path.with_suffix(".obj")
    lines = ["# scenetext3d scene"]
    offset = 1
    noffset = 1
    for mesh in meshes:
        lines.append(f"o {mesh.name}")
        lines.append(f"usemtl {mesh.material}")
        for v in mesh.vertices:
            lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
        for n in mesh.normals:
            lines.append(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        for t in mesh.triangles:
            a, b, c = (int(x) for x in t)
            lines.append(
                f"f {a + offset}//{a + noffset} {b + offset}//{b + noffset} {c + offset}//{c + noffset}"
            )
        offset += len(mesh.vertices)
        noffset += len(mesh.normals)
    path.write_text("\n".join(lines) + "\n")

    def light_dict(l: Light) -> dict:
        d = {"kind": l.kind, "color": list(l.color), "intensity": l.intensity}
        if l.kind == "directional":
            d["direction"] = list(l.direction)
        else:
            d["position"] = list(l.position)
        return d

    meta = {
        "version": 1,
        "gravity": list(np.asarray(gravity, dtype=float)),
        "ambient": ambient,
        "materials": {
            name: {"diffuse": list(m.diffuse), "specular": m.specular, "shininess": m.shininess}
            for name, m in (materials or {}).items()
        },
        "lights": [light_dict(l) for l in lights],
        "fog": {"density": (fog.density if fog else 0.0), "color": list((fog or FogParams()).color)},
        "anchors": [list(map(float, a)) for a in (anchors if anchors is not None else [])],
        "bounds_margin_frac": bounds_margin_frac,
    }
    sidecar = path.parent / (path.stem + SIDECAR_SUFFIX)
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return path
