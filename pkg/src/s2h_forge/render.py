"""Deterministic PNG rendering for tables, grids, and analogy puzzles.

All drawing uses Pillow with a package-pinned TrueType font (the DejaVu Sans
file bundled with matplotlib), so identical inputs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, asdict
from pathlib import Path

import matplotlib
from PIL import Image, ImageDraw, ImageFont

from .analogy import AnalogyPuzzle, Panel, position_index
from .gridgen import GridInstance, OBJECT_GLYPHS, OBSTACLE_GLYPHS
from .tablegen import NUMBER_WORDS, TableInstance

FONT_PATH = Path(matplotlib.get_data_path()) / "fonts" / "ttf" / "DejaVuSans.ttf"

CACHE_ENV = "S2H_FORGE_CACHE"


class RenderError(ValueError):
    """Rendering failed (for example, text does not fit its cell)."""


@dataclass(frozen=True)
class RenderStyle:
    cell_px: int = 64
    panel_px: int = 160
    font_px: int = 14
    glyph_px: int = 28
    line_px: int = 2
    margin_px: int = 8
    highlight_rgb: tuple[int, int, int] = (255, 235, 59)
    grid_rgb: tuple[int, int, int] = (0, 0, 0)
    background_rgb: tuple[int, int, int] = (255, 255, 255)
    start_rgb: tuple[int, int, int] = (200, 230, 201)
    end_rgb: tuple[int, int, int] = (255, 205, 210)

    def to_json(self) -> str:
        obj = asdict(self)
        for key in ("highlight_rgb", "grid_rgb", "background_rgb", "start_rgb", "end_rgb"):
            obj[key] = list(obj[key])
        return json.dumps(obj, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "RenderStyle":
        obj = json.loads(text)
        for key in ("highlight_rgb", "grid_rgb", "background_rgb", "start_rgb", "end_rgb"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return RenderStyle(**obj)


def load_style(path: str | Path | None) -> RenderStyle:
    if path is None:
        return RenderStyle()
    return RenderStyle.from_json(Path(path).read_text("utf-8"))


def _font(px: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(str(FONT_PATH), px)


def _center_text(draw: ImageDraw.ImageDraw, cx: float, cy: float, text: str,
                 font: ImageFont.FreeTypeFont, fill, max_w: float | None = None,
                 lower_half: bool = False) -> None:
    left, top, right, bottom = draw.textbbox((0, 0), text, font=font)
    w, h = right - left, bottom - top
    if max_w is not None and w > max_w:
        raise RenderError(f"text {text!r} overflows its cell ({w}px > {max_w}px)")
    x = cx - w / 2 - left
    # lower_half keeps the geometric center pixel clear of glyph ink so fill
    # colors can be probed at cell centers
    y = (cy + 2 - top) if lower_half else (cy - h / 2 - top)
    draw.text((x, y), text, font=font, fill=fill)


def _png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def render_table(inst: TableInstance, style: RenderStyle = RenderStyle()) -> bytes:
    cp = style.cell_px
    width = (inst.n_cols + 1) * cp
    height = (inst.n_rows + 1) * cp
    img = Image.new("RGB", (width, height), style.background_rgb)
    draw = ImageDraw.Draw(img)
    font = _font(style.font_px)
    on_path = set(inst.path)
    for r, c in on_path:
        x0, y0 = c * cp, r * cp
        draw.rectangle([x0, y0, x0 + cp - 1, y0 + cp - 1], fill=style.highlight_rgb)
    for i in range(inst.n_rows + 2):
        draw.line([(0, i * cp), (width, i * cp)], fill=style.grid_rgb, width=1)
    for j in range(inst.n_cols + 2):
        draw.line([(j * cp, 0), (j * cp, height)], fill=style.grid_rgb, width=1)
    for c, name in enumerate(inst.col_names, start=1):
        _center_text(draw, c * cp + cp / 2, cp / 2, name, font, style.grid_rgb, max_w=cp - 4)
    for r, name in enumerate(inst.row_names, start=1):
        _center_text(draw, cp / 2, r * cp + cp / 2, name, font, style.grid_rgb, max_w=cp - 4)
    for r in range(1, inst.n_rows + 1):
        for c in range(1, inst.n_cols + 1):
            word = NUMBER_WORDS[inst.values[r - 1][c - 1]]
            _center_text(
                draw, c * cp + cp / 2, r * cp + cp / 2, word, font, style.grid_rgb,
                max_w=cp - 4, lower_half=True,
            )
    return _png_bytes(img)


def table_cell_center(inst: TableInstance, cell: tuple[int, int],
                      style: RenderStyle = RenderStyle()) -> tuple[int, int]:
    """Pixel coordinates of a (row, col) cell center in the rendered table."""
    r, c = cell
    return (c * style.cell_px + style.cell_px // 2, r * style.cell_px + style.cell_px // 2)


def render_grid(inst: GridInstance, style: RenderStyle = RenderStyle()) -> bytes:
    cp = style.cell_px
    width, height = inst.n_cols * cp, inst.n_rows * cp
    img = Image.new("RGB", (width, height), style.background_rgb)
    draw = ImageDraw.Draw(img)
    glyph_font = _font(style.glyph_px)
    label_font = _font(style.glyph_px)
    for cell, color in ((inst.start, style.start_rgb), (inst.end, style.end_rgb)):
        r, c = cell
        x0, y0 = (c - 1) * cp, (r - 1) * cp
        draw.rectangle([x0, y0, x0 + cp - 1, y0 + cp - 1], fill=color)
    for i in range(inst.n_rows + 1):
        draw.line([(0, i * cp), (width, i * cp)], fill=style.grid_rgb, width=1)
    for j in range(inst.n_cols + 1):
        draw.line([(j * cp, 0), (j * cp, height)], fill=style.grid_rgb, width=1)

    def cell_center(cell):
        r, c = cell
        return ((c - 1) * cp + cp / 2, (r - 1) * cp + cp / 2)

    _center_text(draw, *cell_center(inst.start), "S", label_font, style.grid_rgb)
    _center_text(draw, *cell_center(inst.end), "E", label_font, style.grid_rgb)
    for name, pos in inst.objects:
        _center_text(draw, *cell_center(pos), OBJECT_GLYPHS[name], glyph_font, style.grid_rgb)
    for kind, pos in inst.obstacles:
        _center_text(draw, *cell_center(pos), OBSTACLE_GLYPHS[kind], glyph_font, style.grid_rgb)
    return _png_bytes(img)


# ---------------------------------------------------------------------------
# analogy rendering


def analogy_panel_boxes(style: RenderStyle = RenderStyle()) -> list[tuple[int, int, int, int]]:
    """Pixel boxes of the 12 drawn panels: two example rows of three, the
    two query panels, and the four option panels."""
    pp, m = style.panel_px, style.margin_px
    boxes = []
    for row in range(2):  # examples
        for col in range(3):
            x0 = m + col * (pp + m)
            y0 = m + row * (pp + m)
            boxes.append((x0, y0, x0 + pp, y0 + pp))
    y0 = m + 2 * (pp + m)
    for col in range(2):  # query (third slot stays blank)
        x0 = m + col * (pp + m)
        boxes.append((x0, y0, x0 + pp, y0 + pp))
    y0 = m + 3 * (pp + m)
    for col in range(4):  # options
        x0 = m + col * (pp + m)
        boxes.append((x0, y0, x0 + pp, y0 + pp))
    return boxes


def _gray(v: int) -> tuple[int, int, int]:
    return (v, v, v)


def _polygon_points(cx: float, cy: float, radius: float, sides: int, rotation: float) -> list:
    return [
        (cx + radius * math.cos(rotation + 2 * math.pi * i / sides),
         cy + radius * math.sin(rotation + 2 * math.pi * i / sides))
        for i in range(sides)
    ]


def _draw_shape(draw, box, shape, style: RenderStyle) -> None:
    x0, y0, x1, y1 = box
    cell = (x1 - x0) / 3
    r, c = shape.position
    cx = x0 + c * cell + cell / 2
    cy = y0 + r * cell + cell / 2
    s = shape.size
    fill = _gray(shape.color)
    outline = style.grid_rgb
    if shape.type == "circle":
        draw.ellipse([cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2], fill=fill, outline=outline)
    elif shape.type == "rectangle":
        draw.rectangle([cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2], fill=fill, outline=outline)
    elif shape.type == "triangle":
        draw.polygon(_polygon_points(cx, cy, s / 2, 3, -math.pi / 2), fill=fill, outline=outline)
    elif shape.type == "pentagon":
        draw.polygon(_polygon_points(cx, cy, s / 2, 5, -math.pi / 2), fill=fill, outline=outline)
    elif shape.type == "hexagon":
        draw.polygon(_polygon_points(cx, cy, s / 2, 6, 0.0), fill=fill, outline=outline)
    else:
        raise RenderError(f"unknown shape type {shape.type!r}")


def _draw_line(draw, box, line, style: RenderStyle) -> None:
    x0, y0, x1, y1 = box
    m = 6
    left, top, right, bottom = x0 + m, y0 + m, x1 - m, y1 - m
    cx, cy = (left + right) / 2, (top + bottom) / 2
    color = _gray(line.color)
    w = style.line_px
    t = line.type
    if t == "falling diagonal line":
        draw.line([left, top, right, bottom], fill=color, width=w)
    elif t == "rising diagonal line":
        draw.line([left, bottom, right, top], fill=color, width=w)
    elif t == "horizontal line":
        draw.line([left, cy, right, cy], fill=color, width=w)
    elif t == "vertical line":
        draw.line([cx, top, cx, bottom], fill=color, width=w)
    elif t == "diamond lines":
        pts = [(cx, top), (right, cy), (cx, bottom), (left, cy), (cx, top)]
        draw.line(pts, fill=color, width=w)
    elif t == "circular line":
        draw.ellipse([left, top, right, bottom], outline=color, width=w)
    elif t == "V-shape facing up":
        draw.line([(left, top), (cx, bottom), (right, top)], fill=color, width=w)
    elif t == "V-shape facing down":
        draw.line([(left, bottom), (cx, top), (right, bottom)], fill=color, width=w)
    elif t == "V-shape facing left":
        draw.line([(right, top), (left, cy), (right, bottom)], fill=color, width=w)
    elif t == "V-shape facing right":
        draw.line([(left, top), (right, cy), (left, bottom)], fill=color, width=w)
    else:
        raise RenderError(f"unknown line type {t!r}")


def _draw_panel(draw, box, panel: Panel, style: RenderStyle) -> None:
    draw.rectangle(box, outline=style.grid_rgb, width=1)
    for line in panel.lines:
        _draw_line(draw, box, line, style)
    for shape in panel.shapes:
        _draw_shape(draw, box, shape, style)


def render_analogy(p: AnalogyPuzzle, style: RenderStyle = RenderStyle()) -> bytes:
    pp, m = style.panel_px, style.margin_px
    width = m + 4 * (pp + m)
    height = m + 4 * (pp + m)
    img = Image.new("RGB", (width, height), style.background_rgb)
    draw = ImageDraw.Draw(img)
    boxes = analogy_panel_boxes(style)
    panels = list(p.example1) + list(p.example2) + list(p.query) + list(p.options)
    for box, panel in zip(boxes, panels):
        _draw_panel(draw, box, panel, style)
    # blank query slot: dashed outline plus a question mark
    x0 = m + 2 * (pp + m)
    y0 = m + 2 * (pp + m)
    blank = (x0, y0, x0 + pp, y0 + pp)
    step = 8
    for x in range(blank[0], blank[2], step * 2):
        draw.line([x, blank[1], min(x + step, blank[2]), blank[1]], fill=style.grid_rgb, width=1)
        draw.line([x, blank[3], min(x + step, blank[2]), blank[3]], fill=style.grid_rgb, width=1)
    for y in range(blank[1], blank[3], step * 2):
        draw.line([blank[0], y, blank[0], min(y + step, blank[3])], fill=style.grid_rgb, width=1)
        draw.line([blank[2], y, blank[2], min(y + step, blank[3])], fill=style.grid_rgb, width=1)
    _center_text(draw, x0 + pp / 2, y0 + pp / 2, "?", _font(style.glyph_px), style.grid_rgb)
    return _png_bytes(img)


# ---------------------------------------------------------------------------
# cache


def cached_render(key_obj: str, renderer, style: RenderStyle) -> bytes:
    """Render through the optional on-disk cache (S2H_FORGE_CACHE)."""
    cache_dir = os.environ.get(CACHE_ENV)
    if not cache_dir:
        return renderer()
    digest = hashlib.blake2b(
        (key_obj + "\x1f" + style.to_json()).encode(), digest_size=16
    ).hexdigest()
    path = Path(cache_dir) / f"{digest}.png"
    if path.exists():
        return path.read_bytes()
    data = renderer()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return data
