import numpy as np
import pytest

from oddgrid import perturb
from oddgrid.colors import delta_e, in_gamut, lab_to_srgb, snap_to_display, srgb_to_lab
from oddgrid.perturb import (
    ANGLE_RANGE,
    Attribute,
    DELTA_E_RANGE,
    GamutExhaustion,
    OFFSET_RANGE,
    SCALE_ENLARGE,
    SCALE_SHRINK,
    sample_perturbation,
    type_label,
    validate_spec,
)


def test_forced_color_only_color_fields():
    rng = np.random.default_rng(11)
    spec = sample_perturbation(rng, 1, forced=(Attribute.COLOR,))
    assert spec.attributes == (Attribute.COLOR,)
    assert DELTA_E_RANGE[0] <= spec.delta_e <= DELTA_E_RANGE[1]
    assert spec.scale is None and spec.angle_deg is None
    assert spec.dx_frac is None and spec.dy_frac is None
    validate_spec(spec)


def test_k4_all_fields_populated():
    rng = np.random.default_rng(12)
    spec = sample_perturbation(rng, 4)
    assert spec.attributes == perturb.ATTR_ORDER
    assert None not in (
        spec.delta_e, spec.scale, spec.angle_deg, spec.dx_frac, spec.dy_frac
    )
    validate_spec(spec)


def test_forced_size_mismatch_rejected():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_perturbation(rng, 2, forced=(Attribute.SIZE,))
    with pytest.raises(ValueError):
        sample_perturbation(rng, 0)


def test_size_branch_frequencies():
    rng = np.random.default_rng(202)
    shrink = enlarge = 0
    for _ in range(10000):
        spec = sample_perturbation(rng, 1, forced=(Attribute.SIZE,))
        if spec.scale < 1.0:
            assert SCALE_SHRINK[0] <= spec.scale <= SCALE_SHRINK[1]
            shrink += 1
        else:
            assert SCALE_ENLARGE[0] <= spec.scale <= SCALE_ENLARGE[1]
            enlarge += 1
    assert abs(shrink / 10000 - 0.5) <= 0.02
    assert abs(enlarge / 10000 - 0.5) <= 0.02


def test_color_distance_exact_before_quantization():
    rng = np.random.default_rng(303)
    for _ in range(300):
        spec = sample_perturbation(rng, 1, forced=(Attribute.COLOR,))
        assert abs(delta_e(spec.base_lab, spec.odd_lab) - spec.delta_e) < 1e-6
        assert in_gamut(spec.odd_lab)


def test_color_pair_survives_display_quantization():
    """Both colors through 8-bit display: measured delta E within 0.5 of the
    request. The base is snapped on draw; the direction guard protects the
    odd side."""
    rng = np.random.default_rng(404)
    for _ in range(300):
        spec = sample_perturbation(rng, 1, forced=(Attribute.COLOR,))
        assert snap_to_display(spec.base_lab) == spec.base_lab
        base_q = srgb_to_lab(lab_to_srgb(spec.base_lab)[0])
        odd_q = srgb_to_lab(lab_to_srgb(spec.odd_lab)[0])
        assert abs(delta_e(base_q, odd_q) - spec.delta_e) <= 0.5


def test_magnitudes_in_closed_bands_100k():
    rng = np.random.default_rng(505)
    for _ in range(100_000):
        k = int(rng.integers(1, 5))
        spec = sample_perturbation(rng, k)
        if spec.has(Attribute.COLOR):
            assert DELTA_E_RANGE[0] <= spec.delta_e <= DELTA_E_RANGE[1]
        if spec.has(Attribute.SIZE):
            assert (
                SCALE_SHRINK[0] <= spec.scale <= SCALE_SHRINK[1]
                or SCALE_ENLARGE[0] <= spec.scale <= SCALE_ENLARGE[1]
            )
        if spec.has(Attribute.ROTATION):
            assert ANGLE_RANGE[0] <= abs(spec.angle_deg) <= ANGLE_RANGE[1]
        if spec.has(Attribute.POSITION):
            assert OFFSET_RANGE[0] <= abs(spec.dx_frac) <= OFFSET_RANGE[1]
            assert OFFSET_RANGE[0] <= abs(spec.dy_frac) <= OFFSET_RANGE[1]
        assert spec.k == k


def test_bit_reproducible():
    a = sample_perturbation(np.random.default_rng([9, 9]), 3)
    b = sample_perturbation(np.random.default_rng([9, 9]), 3)
    assert a == b


def test_uniform_subset_choice_covers_all_pairs():
    rng = np.random.default_rng(606)
    seen = set()
    for _ in range(600):
        seen.add(sample_perturbation(rng, 2).attributes)
    assert len(seen) == 6  # all C(4,2) pairs occur


def test_gamut_exhaustion_when_no_direction_acceptable(monkeypatch):
    monkeypatch.setattr(perturb, "DISPLAY_DELTA_E_TOL", -1.0)
    with pytest.raises(GamutExhaustion):
        sample_perturbation(np.random.default_rng(1), 1, forced=(Attribute.COLOR,))


def test_type_labels():
    assert type_label((Attribute.COLOR,)) == "Color"
    assert type_label((Attribute.ROTATION,)) == "Rotation"
    assert type_label((Attribute.COLOR, Attribute.SIZE)) == "2-Type"
    assert type_label(perturb.ATTR_ORDER) == "4-Type"
