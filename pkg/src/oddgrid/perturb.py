"""Sampling of the four perceptual perturbations within fixed bands.

Bands (closed ranges):
  color     delta E in [5, 20] (CIE76, Lab)
  size      scale in [0.85, 0.95] or [1.05, 1.15], branch picked 50/50
  rotation  |angle| in [5, 25] degrees, sign picked 50/50
  position  |dx|, |dy| each in [0.05, 0.12] of the block size

The rng draw order inside sample_perturbation is part of the generator
contract: subset, then color (delta, base, direction), size, rotation,
position, always in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .colors import LabColor, delta_e, in_gamut, snap_to_display

DELTA_E_RANGE = (5.0, 20.0)
SCALE_SHRINK = (0.85, 0.95)
SCALE_ENLARGE = (1.05, 1.15)
ANGLE_RANGE = (5.0, 25.0)
OFFSET_RANGE = (0.05, 0.12)

BASE_L_RANGE = (25.0, 75.0)
BASE_AB_RANGE = (-60.0, 60.0)

# After 8-bit display quantization the rendered pair must still sit within
# this distance of the requested delta E.
DISPLAY_DELTA_E_TOL = 0.5

_DIRECTION_BUDGET = 1000


class Attribute(str, Enum):
    COLOR = "color"
    SIZE = "size"
    ROTATION = "rotation"
    POSITION = "position"


ATTR_ORDER = (Attribute.COLOR, Attribute.SIZE, Attribute.ROTATION, Attribute.POSITION)


class GamutExhaustion(RuntimeError):
    """No in-gamut odd color found for the drawn base within budget."""


@dataclass(frozen=True)
class PerturbationSpec:
    attributes: tuple[Attribute, ...]
    delta_e: float | None = None
    base_lab: LabColor | None = None
    odd_lab: LabColor | None = None
    scale: float | None = None
    angle_deg: float | None = None
    dx_frac: float | None = None
    dy_frac: float | None = None

    @property
    def k(self) -> int:
        return len(self.attributes)

    def has(self, attr: Attribute) -> bool:
        return attr in self.attributes


def validate_spec(spec: PerturbationSpec) -> None:
    """Raise AssertionError when a field violates its band or presence rule."""
    assert 1 <= spec.k <= 4 and len(set(spec.attributes)) == spec.k
    if spec.has(Attribute.COLOR):
        assert spec.delta_e is not None and spec.base_lab and spec.odd_lab
        assert DELTA_E_RANGE[0] <= spec.delta_e <= DELTA_E_RANGE[1]
        assert abs(delta_e(spec.base_lab, spec.odd_lab) - spec.delta_e) < 1e-6
    else:
        assert spec.delta_e is None and spec.base_lab is None and spec.odd_lab is None
    if spec.has(Attribute.SIZE):
        assert spec.scale is not None
        assert (
            SCALE_SHRINK[0] <= spec.scale <= SCALE_SHRINK[1]
            or SCALE_ENLARGE[0] <= spec.scale <= SCALE_ENLARGE[1]
        )
    else:
        assert spec.scale is None
    if spec.has(Attribute.ROTATION):
        assert spec.angle_deg is not None
        assert ANGLE_RANGE[0] <= abs(spec.angle_deg) <= ANGLE_RANGE[1]
    else:
        assert spec.angle_deg is None
    if spec.has(Attribute.POSITION):
        assert spec.dx_frac is not None and spec.dy_frac is not None
        assert OFFSET_RANGE[0] <= abs(spec.dx_frac) <= OFFSET_RANGE[1]
        assert OFFSET_RANGE[0] <= abs(spec.dy_frac) <= OFFSET_RANGE[1]
    else:
        assert spec.dx_frac is None and spec.dy_frac is None


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi))


def _sample_base_color(rng: np.random.Generator, radius: float) -> LabColor:
    """Mid-gamut base with rough headroom for a radius-sized excursion."""
    while True:
        cand = LabColor(
            _uniform(rng, *BASE_L_RANGE),
            _uniform(rng, *BASE_AB_RANGE),
            _uniform(rng, *BASE_AB_RANGE),
        )
        if not in_gamut(cand):
            continue
        # headroom heuristic: the six axis extremes must stay displayable
        ok = all(
            in_gamut(LabColor(cand.L + dl, cand.a + da, cand.b + db))
            for dl, da, db in (
                (radius, 0, 0), (-radius, 0, 0),
                (0, radius, 0), (0, -radius, 0),
                (0, 0, radius), (0, 0, -radius),
            )
        )
        if ok:
            # snap so the base itself suffers zero display quantization
            return snap_to_display(cand)


def _sample_color_pair(rng: np.random.Generator) -> tuple[float, LabColor, LabColor]:
    dist = _uniform(rng, *DELTA_E_RANGE)
    base = _sample_base_color(rng, dist)
    for _ in range(_DIRECTION_BUDGET):
        vec = rng.normal(size=3)
        norm = math.sqrt(float(vec @ vec))
        if norm == 0.0:
            continue
        odd = LabColor(
            base.L + dist * float(vec[0]) / norm,
            base.a + dist * float(vec[1]) / norm,
            base.b + dist * float(vec[2]) / norm,
        )
        if not in_gamut(odd):
            continue
        # keep only directions that survive 8-bit quantization faithfully
        if abs(delta_e(base, snap_to_display(odd)) - dist) <= DISPLAY_DELTA_E_TOL:
            return dist, base, odd
    raise GamutExhaustion(f"no displayable direction at delta E {dist:.2f} from {base}")


def sample_perturbation(
    rng: np.random.Generator,
    k: int,
    forced: tuple[Attribute, ...] | None = None,
) -> PerturbationSpec:
    """Draw a k-attribute perturbation with magnitudes in the fixed bands."""
    if not 1 <= k <= 4:
        raise ValueError(f"k must be in 1..4, got {k}")
    if forced is not None:
        if len(set(forced)) != k:
            raise ValueError("forced attribute set size must equal k")
        attrs = tuple(a for a in ATTR_ORDER if a in forced)
    else:
        idx = sorted(rng.choice(4, size=k, replace=False).tolist())
        attrs = tuple(ATTR_ORDER[i] for i in idx)

    fields: dict = {}
    if Attribute.COLOR in attrs:
        dist, base, odd = _sample_color_pair(rng)
        fields.update(delta_e=dist, base_lab=base, odd_lab=odd)
    if Attribute.SIZE in attrs:
        branch = SCALE_ENLARGE if int(rng.integers(0, 2)) else SCALE_SHRINK
        fields["scale"] = _uniform(rng, *branch)
    if Attribute.ROTATION in attrs:
        sign = 1.0 if int(rng.integers(0, 2)) else -1.0
        fields["angle_deg"] = sign * _uniform(rng, *ANGLE_RANGE)
    if Attribute.POSITION in attrs:
        sx = 1.0 if int(rng.integers(0, 2)) else -1.0
        dx = sx * _uniform(rng, *OFFSET_RANGE)
        sy = 1.0 if int(rng.integers(0, 2)) else -1.0
        dy = sy * _uniform(rng, *OFFSET_RANGE)
        fields.update(dx_frac=dx, dy_frac=dy)

    return PerturbationSpec(attributes=attrs, **fields)


def type_label(attrs: tuple[Attribute, ...]) -> str:
    """Report bucket for a stimulus: attribute name for k=1, else 'k-Type'."""
    if len(attrs) == 1:
        return attrs[0].value.capitalize()
    return f"{len(attrs)}-Type"


TYPE_LABELS = ("Color", "Size", "Rotation", "Position", "2-Type", "3-Type", "4-Type")
