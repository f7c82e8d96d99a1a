"""Corpus sampling, multi-line text layout, and textured text meshes.

`layout_text` turns a region extent (world units) into an RGBA text
image with per-character boxes; `build_text_mesh` lifts that image onto
the region's plane as a textured quad the renderer can composite. Text
images have alpha exactly 0 off-stroke; RGB channels carry the linear
fill color.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atlas import GlyphAtlas
from .regions import RefinedProposal


class RegionRejected(Exception):
    """Region cannot host text (too small for one glyph at minimum size)."""


@dataclass(frozen=True)
class TextConfig:
    line_frac_range: tuple[float, float] = (0.18, 0.42)  # line height as fraction of region height
    min_glyph_world: float = 0.02     # minimum line height in world units
    max_texture_px: int = 1024
    padding_px: int = 2
    mesh_lift_frac: float = 1e-3      # lift = frac * min proposal side
    min_contrast: float = 30.0        # 8-bit luma delta vs. background
    specular_strength: float = 0.5
    shininess: float = 32.0

    def __post_init__(self):
        lo, hi = self.line_frac_range
        if not 0 < lo <= hi <= 1:
            raise ValueError("line_frac_range must be within (0, 1]")


@dataclass(frozen=True)
class TextStyle:
    color: tuple[float, float, float]   # linear RGB
    diffuse_ratio: float                # in [0, 1]


@dataclass
class Corpus:
    """Word sequences for one language, filtered to renderable characters."""

    language: str
    lines: list[list[str]]
    inventory: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.lines = [line for line in self.lines if line]
        if not self.lines:
            raise ValueError(f"corpus {self.language!r} is empty")
        if not self.inventory:
            self.inventory = {ch for line in self.lines for w in line for ch in w}
        self._flat = [w for line in self.lines for w in line]

    def word_stream(self, rng: np.random.Generator, atlas: GlyphAtlas | None = None, limit: int = 4096):
        """Consecutive words starting from a seeded random offset, cycling.

        Words the atlas cannot render are skipped (bounded by `limit`).
        """
        n = len(self._flat)
        start = int(rng.integers(0, n))
        for i in range(limit):
            w = self._flat[(start + i) % n]
            if atlas is not None and not atlas.can_render(w):
                continue
            yield w


def load_corpus(paths, language: str, atlases: list[GlyphAtlas] | None = None) -> Corpus:
    """Read UTF-8 text files (one document per file) into a Corpus.

    When atlases are given, words containing characters no atlas can
    render are dropped, so every corpus character stays renderable.
    """
    lines: list[list[str]] = []
    union: set[str] | None = None
    if atlases:
        union = set()
        for a in atlases:
            union |= a.inventory
    if isinstance(paths, (str, Path)):
        paths = [paths]
    for p in paths:
        for raw in Path(p).read_text(encoding="utf-8").splitlines():
            words = [w for w in raw.split() if w]
            if union is not None:
                words = [w for w in words if all(ch in union for ch in w)]
            if words:
                lines.append(words)
    return Corpus(language=language, lines=lines)


@dataclass
class CharBox:
    char: str
    quad: np.ndarray       # (4, 2) texture px: TL, TR, BR, BL


@dataclass
class WordBox:
    text: str
    quad: np.ndarray       # (4, 2) texture px
    chars: list[CharBox]


@dataclass
class TextAsset:
    """Rasterized multi-line text with per-character geometry.

    image: (H, W, 4) uint8, RGB = linear fill color, alpha = coverage
    (exactly 0 off-stroke). Quads are in text-image pixel coordinates.
    """

    image: np.ndarray
    content: str
    words: list[WordBox]
    font_id: str
    fill_color: tuple[float, float, float]
    line_count: int
    style: TextStyle

    @property
    def char_quads(self) -> list[CharBox]:
        return [c for w in self.words for c in w.chars]


def luma8(color) -> float:
    """8-bit luma of a linear RGB color after gamma encode."""
    srgb = np.clip(np.asarray(color, dtype=np.float64), 0, 1) ** (1 / 2.2) * 255.0
    return float(0.299 * srgb[0] + 0.587 * srgb[1] + 0.114 * srgb[2])


def sample_style(cfg: TextConfig, rng: np.random.Generator, background=None) -> TextStyle:
    """Uniform RGB fill with a minimum luma contrast against the background."""
    ratio = float(rng.uniform(0.0, 1.0))
    color = None
    for _ in range(32):
        cand = tuple(rng.uniform(0.0, 1.0, 3))
        if background is None or abs(luma8(cand) - luma8(background)) >= cfg.min_contrast:
            color = cand
            break
    if color is None:
        color = (0.0, 0.0, 0.0) if luma8(background) >= 128 else (1.0, 1.0, 1.0)
    return TextStyle(color=tuple(float(c) for c in color), diffuse_ratio=ratio)


def _blit(dest_alpha: np.ndarray, bmp: np.ndarray, x: float, y: float, scale: float) -> None:
    """Nearest-neighbor scaled blit of a coverage bitmap (max blend)."""
    h, w = bmp.shape
    if h == 0 or w == 0:
        return
    ow = max(1, int(round(w * scale)))
    oh = max(1, int(round(h * scale)))
    xi = np.minimum((np.arange(ow) / scale).astype(np.int64), w - 1)
    yi = np.minimum((np.arange(oh) / scale).astype(np.int64), h - 1)
    patch = bmp[np.ix_(yi, xi)]
    x0, y0 = int(round(x)), int(round(y))
    H, W = dest_alpha.shape
    sx0, sy0 = max(0, -x0), max(0, -y0)
    dx0, dy0 = max(0, x0), max(0, y0)
    dx1, dy1 = min(W, x0 + ow), min(H, y0 + oh)
    if dx1 <= dx0 or dy1 <= dy0:
        return
    sub = patch[sy0:sy0 + (dy1 - dy0), sx0:sx0 + (dx1 - dx0)]
    region = dest_alpha[dy0:dy1, dx0:dx1]
    np.maximum(region, sub, out=region)


def layout_text(
    extent: tuple[float, float],
    font: GlyphAtlas,
    corpus: Corpus,
    cfg: TextConfig,
    rng: np.random.Generator,
    style: TextStyle | None = None,
) -> TextAsset:
    """Fill a world-extent region with corpus words.

    Line count is floor(region height / line height) for a line height
    sampled within cfg.line_frac_range (clamped to the legibility
    minimum); words fill each line left to right without overflowing the
    actual advance widths. Raises RegionRejected when not even one glyph
    fits at the minimum size.
    """
    w_world, h_world = float(extent[0]), float(extent[1])
    if w_world <= 0 or h_world <= 0:
        raise RegionRejected("empty region extent")
    if h_world < cfg.min_glyph_world:
        raise RegionRejected("region shorter than the minimum glyph size")

    frac = rng.uniform(*cfg.line_frac_range)
    line_world = max(frac * h_world, cfg.min_glyph_world)
    line_world = min(line_world, h_world)

    px_per_world = font.line_height / line_world
    img_w = int(round(w_world * px_per_world))
    img_h = int(round(h_world * px_per_world))
    biggest = max(img_w, img_h)
    if biggest > cfg.max_texture_px:
        shrink = cfg.max_texture_px / biggest
        px_per_world *= shrink
        img_w = int(round(w_world * px_per_world))
        img_h = int(round(h_world * px_per_world))
    if img_w < 4 or img_h < 4:
        raise RegionRejected("region too small to rasterize")

    scale = px_per_world * line_world / font.line_height  # glyph px scale (1 unless capped)
    line_px = font.line_height * scale
    n_lines = int(img_h // line_px)
    if n_lines < 1:
        raise RegionRejected("no room for a single line")

    pad = cfg.padding_px
    usable_w = img_w - 2 * pad
    if usable_w < font.avg_advance * scale:
        raise RegionRejected("region narrower than one average glyph")

    if style is None:
        style = sample_style(cfg, rng)

    alpha = np.zeros((img_h, img_w), dtype=np.uint8)
    words_out: list[WordBox] = []
    lines_text: list[str] = []
    stream = corpus.word_stream(rng, font)
    space_px = font.space_advance * scale

    placed_any = False
    carried: str | None = None
    for li in range(n_lines):
        line_top = li * line_px
        pen = float(pad)
        line_words: list[str] = []
        skips = 0
        while True:
            if carried is not None:
                word, carried = carried, None
            else:
                word = next(stream, None)
                if word is None:
                    break
            word_px = sum(font.glyphs[ch].advance for ch in word) * scale
            lead = space_px if line_words else 0.0
            if pen + lead + word_px > img_w - pad:
                if not line_words and skips < 8:
                    skips += 1     # word alone does not fit: try a shorter one
                    continue
                carried = word     # starts the next line instead of vanishing
                break
            pen += lead
            boxes: list[CharBox] = []
            for ch in word:
                g = font.glyphs[ch]
                adv = g.advance * scale
                if g.w and g.h:
                    _blit(alpha, np.asarray(font.bitmap(ch)), pen + g.offset_x * scale,
                          line_top + g.offset_y * scale, scale)
                quad = np.array([
                    [pen, line_top],
                    [pen + adv, line_top],
                    [pen + adv, line_top + line_px],
                    [pen, line_top + line_px],
                ])
                boxes.append(CharBox(char=ch, quad=quad))
                pen += adv
            word_quad = np.array([
                boxes[0].quad[0], boxes[-1].quad[1], boxes[-1].quad[2], boxes[0].quad[3],
            ])
            words_out.append(WordBox(text=word, quad=word_quad, chars=boxes))
            line_words.append(word)
            placed_any = True
        if line_words:
            lines_text.append(" ".join(line_words))
    if not placed_any:
        raise RegionRejected("no corpus word fits the region")

    image = np.zeros((img_h, img_w, 4), dtype=np.uint8)
    image[:, :, 0] = int(round(style.color[0] * 255))
    image[:, :, 1] = int(round(style.color[1] * 255))
    image[:, :, 2] = int(round(style.color[2] * 255))
    image[:, :, 3] = alpha
    return TextAsset(
        image=image,
        content="\n".join(lines_text),
        words=words_out,
        font_id=font.font_id,
        fill_color=style.color,
        line_count=len(lines_text),
        style=style,
    )


@dataclass
class TextMesh:
    """Planar textured quad, ready for the renderer compositor."""

    world_vertices: np.ndarray     # (4, 3) TL, TR, BR, BL (texture corner order)
    texture_rgb: np.ndarray        # (h, w, 3) float32 linear
    texture_alpha: np.ndarray      # (h, w) float32 in [0, 1]
    word_id_map: np.ndarray        # (h, w) int32, 1-based word boxes, 0 elsewhere
    normal_world: np.ndarray
    kd: float
    ks: float
    shininess: float
    n_words: int
    word_world_quads: np.ndarray   # (n_words, 4, 3)
    char_world_quads: list         # per word: list[(char, (4, 3) world quad)]
    asset: TextAsset
    region_id: int = 0
    triangle_count: int = 2

    @property
    def area(self) -> float:
        a, b, c, d = self.world_vertices
        return 0.5 * float(np.linalg.norm(np.cross(b - a, d - a))) * 2.0


def texture_to_world(asset_shape, corners: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Map text-image pixel coords to world points on the mesh quad (affine)."""
    h, w = asset_shape[0], asset_shape[1]
    tl, tr, br, bl = corners
    u = (pts[:, 0] / w)[:, None]
    v = (pts[:, 1] / h)[:, None]
    return tl + u * (tr - tl) + v * (bl - tl)


def build_text_mesh(asset: TextAsset, proposal: RefinedProposal, cfg: TextConfig | None = None) -> TextMesh:
    """Position the asset on the proposal plane, lifted off the surface.

    The quad is triangulated as two triangles by the compositor; texture
    coordinates cover the full image; character and word quads map to
    world space through the same affine parameterization.
    """
    cfg = cfg or TextConfig()
    lift = cfg.mesh_lift_frac * min(proposal.width, proposal.height)
    corners = proposal.corners_world() + proposal.normal * lift

    h, w = asset.image.shape[:2]
    word_map = np.zeros((h, w), dtype=np.int32)
    word_quads = []
    char_quads = []
    for wi, word in enumerate(asset.words, start=1):
        q = word.quad
        x0, y0 = int(np.floor(q[0, 0])), int(np.floor(q[0, 1]))
        x1, y1 = int(np.ceil(q[2, 0])), int(np.ceil(q[2, 1]))
        word_map[max(0, y0):min(h, y1), max(0, x0):min(w, x1)] = wi
        word_quads.append(texture_to_world(asset.image.shape, corners, q))
        char_quads.append([
            (c.char, texture_to_world(asset.image.shape, corners, c.quad)) for c in word.chars
        ])

    rgb_lin = asset.image[:, :, :3].astype(np.float32) / 255.0
    return TextMesh(
        world_vertices=corners,
        texture_rgb=rgb_lin,
        texture_alpha=asset.image[:, :, 3].astype(np.float32) / 255.0,
        word_id_map=word_map,
        normal_world=proposal.normal.copy(),
        kd=float(asset.style.diffuse_ratio),
        ks=float((1.0 - asset.style.diffuse_ratio) * cfg.specular_strength),
        shininess=cfg.shininess,
        n_words=len(asset.words),
        word_world_quads=np.asarray(word_quads) if word_quads else np.zeros((0, 4, 3)),
        char_world_quads=char_quads,
        asset=asset,
    )
