"""sRGB <-> CIE-Lab conversion and color difference (D65 reference white).

All Lab math uses the 2-degree observer / D65 illuminant constants and the
CIE76 Euclidean color difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# sRGB linear -> XYZ (D65), rows sum to the D65 white point. The inverse
# and the white point are derived from this matrix so that the white
# round-trip is exact to float precision.
_M_RGB2XYZ = (
    (0.4124564, 0.3575761, 0.1804375),
    (0.2126729, 0.7151522, 0.0721750),
    (0.0193339, 0.1191920, 0.9503041),
)
_M_XYZ2RGB = tuple(tuple(row) for row in np.linalg.inv(np.asarray(_M_RGB2XYZ)))
_WHITE = tuple(sum(row) for row in _M_RGB2XYZ)

_EPS = (6.0 / 29.0) ** 3

_GAMUT_TOL = 1e-9


@dataclass(frozen=True)
class LabColor:
    L: float
    a: float
    b: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.L, self.a, self.b)


def _srgb_decode(c: float) -> float:
    if c <= 0.04045:
        return c / 12.92
    return ((c + 0.055) / 1.055) ** 2.4


def _srgb_encode(c: float) -> float:
    if c <= 0.0031308:
        return 12.92 * c
    return 1.055 * c ** (1.0 / 2.4) - 0.055


def _f(t: float) -> float:
    if t > _EPS:
        return t ** (1.0 / 3.0)
    return t * ((29.0 / 6.0) ** 2) / 3.0 + 4.0 / 29.0


def _f_inv(t: float) -> float:
    t3 = t * t * t
    if t3 > _EPS:
        return t3
    return (t - 4.0 / 29.0) * 3.0 / ((29.0 / 6.0) ** 2)


def srgb_to_lab(rgb: tuple[int, int, int]) -> LabColor:
    """Convert 8-bit sRGB channels to CIE-Lab under D65."""
    r = _srgb_decode(rgb[0] / 255.0)
    g = _srgb_decode(rgb[1] / 255.0)
    b = _srgb_decode(rgb[2] / 255.0)
    x = _M_RGB2XYZ[0][0] * r + _M_RGB2XYZ[0][1] * g + _M_RGB2XYZ[0][2] * b
    y = _M_RGB2XYZ[1][0] * r + _M_RGB2XYZ[1][1] * g + _M_RGB2XYZ[1][2] * b
    z = _M_RGB2XYZ[2][0] * r + _M_RGB2XYZ[2][1] * g + _M_RGB2XYZ[2][2] * b
    fx = _f(x / _WHITE[0])
    fy = _f(y / _WHITE[1])
    fz = _f(z / _WHITE[2])
    return LabColor(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))


def _lab_to_linear_rgb(lab: LabColor) -> tuple[float, float, float]:
    fy = (lab.L + 16.0) / 116.0
    fx = fy + lab.a / 500.0
    fz = fy - lab.b / 200.0
    x = _f_inv(fx) * _WHITE[0]
    y = _f_inv(fy) * _WHITE[1]
    z = _f_inv(fz) * _WHITE[2]
    r = _M_XYZ2RGB[0][0] * x + _M_XYZ2RGB[0][1] * y + _M_XYZ2RGB[0][2] * z
    g = _M_XYZ2RGB[1][0] * x + _M_XYZ2RGB[1][1] * y + _M_XYZ2RGB[1][2] * z
    b = _M_XYZ2RGB[2][0] * x + _M_XYZ2RGB[2][1] * y + _M_XYZ2RGB[2][2] * z
    return (r, g, b)


def lab_to_srgb(lab: LabColor) -> tuple[tuple[int, int, int], bool]:
    """Convert Lab to 8-bit sRGB.

    Returns (rgb, out_of_gamut). Channels are clamped to the display cube
    only when the color is out of gamut, and the flag reports that.
    """
    lin = _lab_to_linear_rgb(lab)
    out = any(c < -_GAMUT_TOL or c > 1.0 + _GAMUT_TOL for c in lin)
    rgb = tuple(
        int(round(_srgb_encode(min(1.0, max(0.0, c))) * 255.0)) for c in lin
    )
    return rgb, out


def in_gamut(lab: LabColor) -> bool:
    """True when the color maps inside the 8-bit sRGB display cube."""
    lin = _lab_to_linear_rgb(lab)
    return all(-_GAMUT_TOL <= c <= 1.0 + _GAMUT_TOL for c in lin)


def delta_e(x: LabColor, y: LabColor) -> float:
    """CIE76 color difference: Euclidean distance in Lab."""
    return math.sqrt((x.L - y.L) ** 2 + (x.a - y.a) ** 2 + (x.b - y.b) ** 2)


def snap_to_display(lab: LabColor) -> LabColor:
    """Round-trip through 8-bit sRGB so the value is exactly displayable."""
    rgb, _ = lab_to_srgb(lab)
    return srgb_to_lab(rgb)


def srgb_cube_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Vectorized 8-bit sRGB -> Lab for (N, 3) uint8/int arrays."""
    c = rgb.astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    m = np.asarray(_M_RGB2XYZ)
    xyz = lin @ m.T
    xyz /= np.asarray(_WHITE)
    f = np.where(
        xyz > _EPS, np.cbrt(xyz), xyz * ((29.0 / 6.0) ** 2) / 3.0 + 4.0 / 29.0
    )
    lab = np.empty_like(f)
    lab[:, 0] = 116.0 * f[:, 1] - 16.0
    lab[:, 1] = 500.0 * (f[:, 0] - f[:, 1])
    lab[:, 2] = 200.0 * (f[:, 1] - f[:, 2])
    return lab
