"""Minimal SVG geometry reader and canonical writer.

Parses path data and basic shapes into flattened polygons (curves are
subdivided with a fixed segment count so the geometry is deterministic),
applies group/element transforms, and re-serializes glyphs as a single
silhouette path in a unit-square viewbox.

Supported elements: path, rect, circle, ellipse, polygon, polyline, g.
Supported transforms: matrix, translate, scale, rotate.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET

Polygon = list[tuple[float, float]]

# Subdivision counts are fixed, not adaptive: identical input bytes must
# always flatten to identical geometry.
CURVE_SEGMENTS = 24
ARC_SEGMENTS_PER_QUARTER = 8
CIRCLE_SEGMENTS = 64

NORMALIZED_MARK = "data-oddgrid-normalized"
PAD_FRAC = 0.05


class SvgParseError(ValueError):
    pass


_NUM_RE = re.compile(r"[-+]?(?:\d*\.\d+|\d+\.?)(?:[eE][-+]?\d+)?")
_CMD_RE = re.compile(r"([MmLlHhVvCcSsQqTtAaZz])([^MmLlHhVvCcSsQqTtAaZz]*)")
_TRANSFORM_RE = re.compile(r"(matrix|translate|scale|rotate)\s*\(([^)]*)\)")


def _floats(text: str) -> list[float]:
    return [float(m.group(0)) for m in _NUM_RE.finditer(text)]


# --- affine transforms, stored as (a, b, c, d, e, f) for
#     x' = a*x + c*y + e ; y' = b*x + d*y + f  (SVG matrix order)

IDENTITY = (1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


def _mat_mul(m1, m2):
    a1, b1, c1, d1, e1, f1 = m1
    a2, b2, c2, d2, e2, f2 = m2
    return (
        a1 * a2 + c1 * b2,
        b1 * a2 + d1 * b2,
        a1 * c2 + c1 * d2,
        b1 * c2 + d1 * d2,
        a1 * e2 + c1 * f2 + e1,
        b1 * e2 + d1 * f2 + f1,
    )


def _mat_apply(m, x: float, y: float) -> tuple[float, float]:
    a, b, c, d, e, f = m
    return (a * x + c * y + e, b * x + d * y + f)


def _parse_transform(text: str):
    m = IDENTITY
    for kind, args in _TRANSFORM_RE.findall(text or ""):
        v = _floats(args)
        if kind == "matrix" and len(v) == 6:
            t = tuple(v)
        elif kind == "translate":
            tx = v[0] if v else 0.0
            ty = v[1] if len(v) > 1 else 0.0
            t = (1.0, 0.0, 0.0, 1.0, tx, ty)
        elif kind == "scale":
            sx = v[0] if v else 1.0
            sy = v[1] if len(v) > 1 else sx
            t = (sx, 0.0, 0.0, sy, 0.0, 0.0)
        elif kind == "rotate":
            ang = math.radians(v[0]) if v else 0.0
            ca, sa = math.cos(ang), math.sin(ang)
            t = (ca, sa, -sa, ca, 0.0, 0.0)
            if len(v) >= 3:
                cx, cy = v[1], v[2]
                t = _mat_mul(
                    _mat_mul((1, 0, 0, 1, cx, cy), t), (1, 0, 0, 1, -cx, -cy)
                )
        else:
            continue
        m = _mat_mul(m, t)
    return m


# --- path data


def _cubic(p0, p1, p2, p3) -> Polygon:
    pts = []
    for i in range(1, CURVE_SEGMENTS + 1):
        t = i / CURVE_SEGMENTS
        u = 1.0 - t
        x = u * u * u * p0[0] + 3 * u * u * t * p1[0] + 3 * u * t * t * p2[0] + t * t * t * p3[0]
        y = u * u * u * p0[1] + 3 * u * u * t * p1[1] + 3 * u * t * t * p2[1] + t * t * t * p3[1]
        pts.append((x, y))
    return pts


def _quadratic(p0, p1, p2) -> Polygon:
    pts = []
    for i in range(1, CURVE_SEGMENTS + 1):
        t = i / CURVE_SEGMENTS
        u = 1.0 - t
        x = u * u * p0[0] + 2 * u * t * p1[0] + t * t * p2[0]
        y = u * u * p0[1] + 2 * u * t * p1[1] + t * t * p2[1]
        pts.append((x, y))
    return pts


def _arc(p0, rx, ry, rot_deg, large, sweep, p1) -> Polygon:
    if rx == 0 or ry == 0 or p0 == p1:
        return [p1]
    rx, ry = abs(rx), abs(ry)
    phi = math.radians(rot_deg)
    cp, sp = math.cos(phi), math.sin(phi)
    dx, dy = (p0[0] - p1[0]) / 2.0, (p0[1] - p1[1]) / 2.0
    x1p = cp * dx + sp * dy
    y1p = -sp * dx + cp * dy
    lam = (x1p / rx) ** 2 + (y1p / ry) ** 2
    if lam > 1.0:
        s = math.sqrt(lam)
        rx *= s
        ry *= s
    num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p
    den = rx * rx * y1p * y1p + ry * ry * x1p * x1p
    factor = math.sqrt(max(0.0, num / den)) if den else 0.0
    if large == sweep:
        factor = -factor
    cxp = factor * rx * y1p / ry
    cyp = -factor * ry * x1p / rx
    cx = cp * cxp - sp * cyp + (p0[0] + p1[0]) / 2.0
    cy = sp * cxp + cp * cyp + (p0[1] + p1[1]) / 2.0
    th1 = math.atan2((y1p - cyp) / ry, (x1p - cxp) / rx)
    th2 = math.atan2((-y1p - cyp) / ry, (-x1p - cxp) / rx)
    dth = th2 - th1
    if sweep and dth < 0:
        dth += 2 * math.pi
    elif not sweep and dth > 0:
        dth -= 2 * math.pi
    n = max(2, int(math.ceil(abs(dth) / (math.pi / 2))) * ARC_SEGMENTS_PER_QUARTER)
    pts = []
    for i in range(1, n + 1):
        th = th1 + dth * i / n
        x = cx + rx * math.cos(th) * cp - ry * math.sin(th) * sp
        y = cy + rx * math.cos(th) * sp + ry * math.sin(th) * cp
        pts.append((x, y))
    return pts


def parse_path_data(d: str) -> list[Polygon]:
    """Flatten an SVG path `d` string into closed polygons."""
    polys: list[Polygon] = []
    cur: Polygon = []
    pos = (0.0, 0.0)
    start = (0.0, 0.0)
    prev_cubic_cp = None
    prev_quad_cp = None

    def flush():
        nonlocal cur
        if len(cur) >= 3:
            polys.append(cur)
        cur = []

    for cmd, args in _CMD_RE.findall(d):
        v = _floats(args)
        rel = cmd.islower()
        op = cmd.upper()
        if op == "M":
            flush()
            for i in range(0, len(v) - 1, 2):
                x, y = v[i], v[i + 1]
                if rel:
                    x, y = pos[0] + x, pos[1] + y
                pos = (x, y)
                if i == 0:
                    start = pos
                    cur = [pos]
                else:
                    cur.append(pos)  # extra pairs are implicit linetos
            prev_cubic_cp = prev_quad_cp = None
        elif op == "L":
            for i in range(0, len(v) - 1, 2):
                x, y = v[i], v[i + 1]
                if rel:
                    x, y = pos[0] + x, pos[1] + y
                pos = (x, y)
                cur.append(pos)
            prev_cubic_cp = prev_quad_cp = None
        elif op == "H":
            for x in v:
                pos = (pos[0] + x if rel else x, pos[1])
                cur.append(pos)
            prev_cubic_cp = prev_quad_cp = None
        elif op == "V":
            for y in v:
                pos = (pos[0], pos[1] + y if rel else y)
                cur.append(pos)
            prev_cubic_cp = prev_quad_cp = None
        elif op == "C":
            for i in range(0, len(v) - 5, 6):
                c1 = (v[i], v[i + 1])
                c2 = (v[i + 2], v[i + 3])
                end = (v[i + 4], v[i + 5])
                if rel:
                    c1 = (pos[0] + c1[0], pos[1] + c1[1])
                    c2 = (pos[0] + c2[0], pos[1] + c2[1])
                    end = (pos[0] + end[0], pos[1] + end[1])
                cur.extend(_cubic(pos, c1, c2, end))
                prev_cubic_cp = c2
                pos = end
            prev_quad_cp = None
        elif op == "S":
            for i in range(0, len(v) - 3, 4):
                c2 = (v[i], v[i + 1])
                end = (v[i + 2], v[i + 3])
                if rel:
                    c2 = (pos[0] + c2[0], pos[1] + c2[1])
                    end = (pos[0] + end[0], pos[1] + end[1])
                c1 = (
                    (2 * pos[0] - prev_cubic_cp[0], 2 * pos[1] - prev_cubic_cp[1])
                    if prev_cubic_cp
                    else pos
                )
                cur.extend(_cubic(pos, c1, c2, end))
                prev_cubic_cp = c2
                pos = end
            prev_quad_cp = None
        elif op == "Q":
            for i in range(0, len(v) - 3, 4):
                c1 = (v[i], v[i + 1])
                end = (v[i + 2], v[i + 3])
                if rel:
                    c1 = (pos[0] + c1[0], pos[1] + c1[1])
                    end = (pos[0] + end[0], pos[1] + end[1])
                cur.extend(_quadratic(pos, c1, end))
                prev_quad_cp = c1
                pos = end
            prev_cubic_cp = None
        elif op == "T":
            for i in range(0, len(v) - 1, 2):
                end = (v[i], v[i + 1])
                if rel:
                    end = (pos[0] + end[0], pos[1] + end[1])
                c1 = (
                    (2 * pos[0] - prev_quad_cp[0], 2 * pos[1] - prev_quad_cp[1])
                    if prev_quad_cp
                    else pos
                )
                cur.extend(_quadratic(pos, c1, end))
                prev_quad_cp = c1
                pos = end
            prev_cubic_cp = None
        elif op == "A":
            for i in range(0, len(v) - 6, 7):
                rx, ry, rot, large, sweep = v[i], v[i + 1], v[i + 2], v[i + 3], v[i + 4]
                end = (v[i + 5], v[i + 6])
                if rel:
                    end = (pos[0] + end[0], pos[1] + end[1])
                cur.extend(_arc(pos, rx, ry, rot, bool(large), bool(sweep), end))
                pos = end
            prev_cubic_cp = prev_quad_cp = None
        elif op == "Z":
            if cur:
                pos = start
                flush()
            prev_cubic_cp = prev_quad_cp = None
    flush()
    return polys


def _shape_polygons(el, tag: str) -> list[Polygon]:
    get = lambda k, dflt=0.0: float(el.get(k, dflt))
    if tag == "path":
        return parse_path_data(el.get("d", ""))
    if tag == "rect":
        x, y, w, h = get("x"), get("y"), get("width"), get("height")
        if w <= 0 or h <= 0:
            return []
        return [[(x, y), (x + w, y), (x + w, y + h), (x, y + h)]]
    if tag in ("circle", "ellipse"):
        cx, cy = get("cx"), get("cy")
        if tag == "circle":
            rx = ry = get("r")
        else:
            rx, ry = get("rx"), get("ry")
        if rx <= 0 or ry <= 0:
            return []
        pts = []
        for i in range(CIRCLE_SEGMENTS):
            th = 2 * math.pi * i / CIRCLE_SEGMENTS
            pts.append((cx + rx * math.cos(th), cy + ry * math.sin(th)))
        return [pts]
    if tag in ("polygon", "polyline"):
        v = _floats(el.get("points", ""))
        pts = [(v[i], v[i + 1]) for i in range(0, len(v) - 1, 2)]
        return [pts] if len(pts) >= 3 else []
    return []


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def parse_svg(data: bytes) -> list[Polygon]:
    """Extract flattened fill polygons from an SVG document."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise SvgParseError(f"not well-formed XML: {exc}") from exc
    if _local(root.tag) != "svg":
        raise SvgParseError(f"root element is <{_local(root.tag)}>, not <svg>")

    polys: list[Polygon] = []

    def walk(el, m):
        m = _mat_mul(m, _parse_transform(el.get("transform", "")))
        tag = _local(el.tag)
        if tag in ("defs", "clipPath", "mask", "symbol", "style", "metadata"):
            return
        for poly in _shape_polygons(el, tag):
            polys.append([_mat_apply(m, x, y) for x, y in poly])
        for child in el:
            walk(child, m)

    walk(root, IDENTITY)
    if not polys:
        raise SvgParseError("no fillable geometry found")
    return polys


def is_normalized(data: bytes) -> bool:
    try:
        root = ET.fromstring(data)
    except ET.ParseError:
        return False
    return root.get(NORMALIZED_MARK) == "1"


def normalize(data: bytes) -> bytes:
    """Recenter glyph geometry into the unit square with a 5% pad.

    Output is a single silhouette path on a '0 0 1 1' viewbox. The
    operation is idempotent: documents carrying the normalization marker
    are returned unchanged, byte for byte.
    """
    if is_normalized(data):
        return data
    polys = parse_svg(data)
    xs = [x for p in polys for x, _ in p]
    ys = [y for p in polys for _, y in p]
    min_x, max_x = min(xs), max(xs)
    min_y, max_y = min(ys), max(ys)
    span = max(max_x - min_x, max_y - min_y)
    if span <= 0:
        raise SvgParseError("degenerate glyph: zero extent")
    scale = (1.0 - 2 * PAD_FRAC) / span
    # center of content maps to (0.5, 0.5)
    cx, cy = (min_x + max_x) / 2.0, (min_y + max_y) / 2.0
    parts = []
    for poly in polys:
        coords = [
            (0.5 + (x - cx) * scale, 0.5 + (y - cy) * scale) for x, y in poly
        ]
        seg = "M" + "L".join(f"{x:.6f},{y:.6f}" for x, y in coords) + "Z"
        parts.append(seg)
    d = "".join(parts)
    doc = (
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1 1" '
        f'{NORMALIZED_MARK}="1"><path d="{d}" fill="#000000"/></svg>'
    )
    return doc.encode("ascii")
