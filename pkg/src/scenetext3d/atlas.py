"""Glyph atlases: a pre-baked bitmap font format plus its baking helper.

The engine itself never parses font files; it consumes atlases:

  <name>.atlas.json   metrics (versioned, see docs/glyph_atlas.md)
  <name>.atlas.png    one grayscale coverage page, glyphs packed on shelves

`bake_atlas` builds atlases from a TrueType/OpenType file via Pillow and
is the only font-file-aware code in the package. Metrics are measured
from the line top (ascender): a glyph blits at
(pen_x + offset_x, line_top + offset_y) and the pen advances by
`advance`; `line_height = ascent + descent` at the reference size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ATLAS_VERSION = 1


@dataclass(frozen=True)
class Glyph:
    advance: float
    offset_x: float    # pen -> bitmap left
    offset_y: float    # line top -> bitmap top
    x: int             # atlas page placement
    y: int
    w: int
    h: int


class GlyphAtlas:
    """Loaded atlas: per-glyph coverage bitmaps and metrics at a reference size."""

    def __init__(self, font_id: str, reference_px: float, ascent: float, descent: float,
                 glyphs: dict[str, Glyph], page: np.ndarray):
        self.font_id = font_id
        self.reference_px = reference_px
        self.ascent = ascent
        self.descent = descent
        self.glyphs = glyphs
        self.page = page
        advances = [g.advance for ch, g in glyphs.items() if ch != " "]
        if not advances:
            raise ValueError(f"atlas {font_id!r} has no glyphs")
        self.avg_advance = float(np.mean(advances))
        self.space_advance = glyphs[" "].advance if " " in glyphs else self.avg_advance * 0.5

    @property
    def line_height(self) -> float:
        return self.ascent + self.descent

    @property
    def inventory(self) -> set[str]:
        return set(self.glyphs)

    def can_render(self, text: str) -> bool:
        return all(ch in self.glyphs for ch in text)

    def bitmap(self, ch: str) -> np.ndarray:
        g = self.glyphs[ch]
        return self.page[g.y:g.y + g.h, g.x:g.x + g.w]

    def save(self, prefix) -> tuple[Path, Path]:
        from PIL import Image

        prefix = Path(prefix)
        meta = {
            "version": ATLAS_VERSION,
            "font_id": self.font_id,
            "reference_px": self.reference_px,
            "ascent": self.ascent,
            "descent": self.descent,
            "glyphs": {
                ch: {
                    "advance": g.advance, "offset_x": g.offset_x, "offset_y": g.offset_y,
                    "x": g.x, "y": g.y, "w": g.w, "h": g.h,
                }
                for ch, g in sorted(self.glyphs.items())
            },
        }
        jpath = prefix.with_suffix(".atlas.json")
        ppath = prefix.with_suffix(".atlas.png")
        jpath.write_text(json.dumps(meta, ensure_ascii=False, indent=1))
        Image.fromarray(self.page, mode="L").save(ppath)
        return jpath, ppath

    @classmethod
    def load(cls, prefix) -> "GlyphAtlas":
        from PIL import Image

        prefix = Path(prefix)
        jpath = prefix if prefix.suffix == ".json" else prefix.with_suffix(".atlas.json")
        ppath = jpath.with_suffix("").with_suffix(".png")
        meta = json.loads(jpath.read_text())
        if meta.get("version") != ATLAS_VERSION:
            raise ValueError(f"unsupported atlas version {meta.get('version')!r}")
        page = np.asarray(Image.open(ppath).convert("L"))
        glyphs = {ch: Glyph(**g) for ch, g in meta["glyphs"].items()}
        return cls(meta["font_id"], meta["reference_px"], meta["ascent"], meta["descent"], glyphs, page)


def bake_atlas(font_path, chars, size: int = 48, font_id: str | None = None,
               page_width: int = 1024) -> GlyphAtlas:
    """Rasterize a character set from a font file into an atlas.

    Characters the font cannot shape (empty ink AND zero advance) are
    skipped; callers should check `inventory` afterwards.
    """
    from PIL import Image, ImageDraw, ImageFont

    font_path = Path(font_path)
    font = ImageFont.truetype(str(font_path), size)
    ascent, descent = font.getmetrics()
    if font_id is None:
        font_id = font_path.stem

    rendered = []
    for ch in sorted(set(chars)):
        if ch in ("\n", "\t", "\r"):
            continue
        advance = float(font.getlength(ch))
        bbox = font.getbbox(ch)
        has_ink = bbox is not None and bbox[2] > bbox[0] and bbox[3] > bbox[1]
        if not has_ink:
            if advance > 0:
                rendered.append((ch, advance, 0.0, 0.0, None))
            continue
        x0, y0, x1, y1 = bbox
        img = Image.new("L", (x1 - x0, y1 - y0), 0)
        ImageDraw.Draw(img).text((-x0, -y0), ch, font=font, fill=255)
        rendered.append((ch, advance, float(x0), float(y0), np.asarray(img)))

    # Shelf packing, tallest-first for density.
    rendered.sort(key=lambda r: (-(r[4].shape[0] if r[4] is not None else 0), r[0]))
    pad = 1
    pen_x, pen_y, shelf_h = pad, pad, 0
    placements = {}
    for ch, advance, ox, oy, bmp in rendered:
        if bmp is None:
            placements[ch] = (0, 0, 0, 0)
            continue
        h, w = bmp.shape
        if pen_x + w + pad > page_width:
            pen_x = pad
            pen_y += shelf_h + pad
            shelf_h = 0
        placements[ch] = (pen_x, pen_y, w, h)
        pen_x += w + pad
        shelf_h = max(shelf_h, h)
    page_height = pen_y + shelf_h + pad
    page = np.zeros((page_height, page_width), dtype=np.uint8)
    glyphs = {}
    for ch, advance, ox, oy, bmp in rendered:
        x, y, w, h = placements[ch]
        if bmp is not None:
            page[y:y + h, x:x + w] = bmp
        glyphs[ch] = Glyph(advance=advance, offset_x=ox, offset_y=oy, x=x, y=y, w=w, h=h)
    return GlyphAtlas(font_id, float(size), float(ascent), float(descent), glyphs, page)


def find_builtin_fonts() -> dict[str, Path]:
    """Locate usable .ttf files without a hard font dependency.

    Checks matplotlib's bundled fonts (DejaVu family) and common system
    font directories; returns {font_id: path}.
    """
    found: dict[str, Path] = {}
    try:
        import matplotlib

        ttf_dir = Path(matplotlib.get_data_path()) / "fonts" / "ttf"
        for p in sorted(ttf_dir.glob("DejaVu*.ttf")):
            found[p.stem] = p
    except ImportError:
        pass
    for d in (Path("/usr/share/fonts"), Path("/usr/local/share/fonts")):
        if d.is_dir():
            for p in sorted(d.rglob("*.ttf")):
                found.setdefault(p.stem, p)
    return found
