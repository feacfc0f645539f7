"""Deterministic polygon rasterization and grid composition.

Pure numpy scanline fill with nonzero winding and a fixed 4x4 supersample
per pixel. No adaptive anti-aliasing, no external font machinery: digits
for labeled grids come from a built-in 5x7 bitmap. Identical inputs always
produce identical pixels.
"""

from __future__ import annotations

import math

import numpy as np

Polygon = list[tuple[float, float]]

SUPERSAMPLE = 4
WHITE = (255, 255, 255)

# 5x7 digit bitmaps, seven 5-wide rows each ('#' = on).
_DIGITS = {
    "0": ".###." "#...#" "#..##" "#.#.#" "##..#" "#...#" ".###.",
    "1": "..#.." ".##.." "..#.." "..#.." "..#.." "..#.." ".###.",
    "2": ".###." "#...#" "....#" "...#." "..#.." ".#..." "#####",
    "3": ".###." "#...#" "....#" "..##." "....#" "#...#" ".###.",
    "4": "...#." "..##." ".#.#." "#..#." "#####" "...#." "...#.",
    "5": "#####" "#...." "####." "....#" "....#" "#...#" ".###.",
    "6": "..##." ".#..." "#...." "####." "#...#" "#...#" ".###.",
    "7": "#####" "....#" "...#." "..#.." ".#..." ".#..." ".#...",
    "8": ".###." "#...#" "#...#" ".###." "#...#" "#...#" ".###.",
    "9": ".###." "#...#" "#...#" ".####" "....#" "...#." ".##..",
}


def _digit_bitmap(ch: str) -> np.ndarray:
    raw = _DIGITS[ch]
    return np.array([c == "#" for c in raw], dtype=bool).reshape(7, 5)


def polygon_edges(polys: list[Polygon]) -> np.ndarray:
    """Stack closed-polygon edges into an (E, 4) array of x1,y1,x2,y2."""
    rows = []
    for poly in polys:
        n = len(poly)
        if n < 3:
            continue
        for i in range(n):
            x1, y1 = poly[i]
            x2, y2 = poly[(i + 1) % n]
            if y1 != y2:  # horizontal edges never cross a scanline
                rows.append((x1, y1, x2, y2))
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def coverage_mask(edges: np.ndarray, height: int, width: int, ss: int = SUPERSAMPLE) -> np.ndarray:
    """Per-pixel fill coverage in [0,1] under the nonzero winding rule."""
    if edges.shape[0] == 0:
        return np.zeros((height, width), dtype=np.float64)
    hs, ws = height * ss, width * ss
    ys = (np.arange(hs, dtype=np.float64) + 0.5) / ss

    x1 = edges[:, 0][:, None]
    y1 = edges[:, 1][:, None]
    x2 = edges[:, 2][:, None]
    y2 = edges[:, 3][:, None]
    yr = ys[None, :]

    up = (y1 <= yr) & (yr < y2)
    down = (y2 <= yr) & (yr < y1)
    crossing = up | down
    e_idx, r_idx = np.nonzero(crossing)
    if e_idx.size == 0:
        return np.zeros((height, width), dtype=np.float64)

    ex1 = edges[e_idx, 0]
    ey1 = edges[e_idx, 1]
    ex2 = edges[e_idx, 2]
    ey2 = edges[e_idx, 3]
    y_at = ys[r_idx]
    x_int = ex1 + (y_at - ey1) * (ex2 - ex1) / (ey2 - ey1)
    direction = np.where(up[e_idx, r_idx], 1, -1).astype(np.int32)

    # A crossing at x affects samples with x_k >= x; bucket it at the first
    # such sample column and integrate with a cumulative sum.
    k = np.ceil(x_int * ss - 0.5).astype(np.int64)
    k = np.clip(k, 0, ws)
    delta = np.zeros((hs, ws + 1), dtype=np.int32)
    np.add.at(delta, (r_idx, k), direction)
    wn = np.cumsum(delta[:, :ws], axis=1)
    inside = wn != 0
    return inside.reshape(height, ss, width, ss).mean(axis=(1, 3))


def composite(canvas: np.ndarray, cov: np.ndarray, fill_rgb: tuple[int, int, int]) -> None:
    """Blend fill into canvas in place, weighted by coverage."""
    fill = np.asarray(fill_rgb, dtype=np.float64)
    base = canvas.astype(np.float64)
    out = base * (1.0 - cov[..., None]) + fill[None, None, :] * cov[..., None]
    np.copyto(canvas, np.rint(out).astype(np.uint8))


def transform_polygons(
    polys: list[Polygon],
    block_px: int,
    fill_ratio: float,
    scale: float,
    angle_deg: float,
    dx_frac: float,
    dy_frac: float,
) -> list[Polygon]:
    """Map unit-square glyph polygons into tile pixel coordinates.

    Scale and rotation act about the glyph's own center; the positional
    offset is applied afterwards, so it is not rotated. Positive angles
    turn clockwise on screen (y grows downward).
    """
    c = block_px / 2.0
    s = fill_ratio * block_px * scale
    th = math.radians(angle_deg)
    ca, sa = math.cos(th), math.sin(th)
    ox = dx_frac * block_px
    oy = dy_frac * block_px
    out = []
    for poly in polys:
        pts = []
        for x, y in poly:
            u = (x - 0.5) * s
            v = (y - 0.5) * s
            pts.append((c + ca * u - sa * v + ox, c + sa * u + ca * v + oy))
        out.append(pts)
    return out


def render_tile(
    polys: list[Polygon],
    block_px: int,
    fill_rgb: tuple[int, int, int],
    fill_ratio: float = 0.8,
    scale: float = 1.0,
    angle_deg: float = 0.0,
    dx_frac: float = 0.0,
    dy_frac: float = 0.0,
    background: tuple[int, int, int] = WHITE,
) -> np.ndarray:
    """Rasterize one cell. Geometry escaping the tile is clipped at its edge."""
    tile = np.empty((block_px, block_px, 3), dtype=np.uint8)
    tile[:] = background
    placed = transform_polygons(
        polys, block_px, fill_ratio, scale, angle_deg, dx_frac, dy_frac
    )
    cov = coverage_mask(polygon_edges(placed), block_px, block_px)
    composite(tile, cov, fill_rgb)
    return tile


def compose_grid(
    base_tile: np.ndarray,
    odd_tile: np.ndarray,
    rows: int,
    cols: int,
    odd_row: int,
    odd_col: int,
    margin_px: int,
    background: tuple[int, int, int] = WHITE,
) -> np.ndarray:
    block = base_tile.shape[0]
    h = rows * block + 2 * margin_px
    w = cols * block + 2 * margin_px
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = background
    for r in range(rows):
        for c in range(cols):
            tile = odd_tile if (r + 1, c + 1) == (odd_row, odd_col) else base_tile
            y0 = margin_px + r * block
            x0 = margin_px + c * block
            img[y0 : y0 + block, x0 : x0 + block] = tile
    return img


def draw_number(
    img: np.ndarray, x: int, y: int, value: int, scale: int = 2,
    color: tuple[int, int, int] = (0, 0, 0),
) -> None:
    """Stamp an integer at (x, y) top-left using the 5x7 bitmap font."""
    cx = x
    for ch in str(value):
        bm = _digit_bitmap(ch)
        glyph = np.kron(bm, np.ones((scale, scale), dtype=bool))
        gh, gw = glyph.shape
        y1, x1 = min(img.shape[0], y + gh), min(img.shape[1], cx + gw)
        if y < 0 or cx < 0 or y1 <= y or x1 <= cx:
            cx += gw + scale
            continue
        region = img[y:y1, cx:x1]
        region[glyph[: y1 - y, : x1 - cx]] = color
        cx += gw + scale


def digit_glyph(ch: str, scale: int = 2) -> np.ndarray:
    """Boolean bitmap of one digit at the given scale (for template tests)."""
    return np.kron(_digit_bitmap(ch), np.ones((scale, scale), dtype=bool))


def add_index_gutters(
    img: np.ndarray,
    rows: int,
    cols: int,
    block_px: int,
    margin_px: int,
    gutter_px: int = 20,
    background: tuple[int, int, int] = WHITE,
) -> np.ndarray:
    """Return a copy with row indices on the left and column indices on top.

    Cell pixels are untouched: the original image sits at offset
    (gutter, gutter) of the returned canvas.
    """
    h, w = img.shape[:2]
    out = np.empty((h + gutter_px, w + gutter_px, 3), dtype=np.uint8)
    out[:] = background
    out[gutter_px:, gutter_px:] = img
    scale = 2
    gw, gh = 5 * scale, 7 * scale
    for c in range(1, cols + 1):
        cx = gutter_px + margin_px + int((c - 0.5) * block_px) - gw // 2
        cy = (gutter_px - gh) // 2
        draw_number(out, cx, cy, c, scale=scale)
    for r in range(1, rows + 1):
        cx = (gutter_px - gw) // 2
        cy = gutter_px + margin_px + int((r - 0.5) * block_px) - gh // 2
        draw_number(out, cx, cy, r, scale=scale)
    return out
