import numpy as np
import pytest

from oddgrid import curriculum
from oddgrid.colors import LabColor
from oddgrid.curriculum import (
    CurriculumPlan,
    IncompleteMetadata,
    InvalidStep,
    WrongCardinality,
    partition,
    score,
    stage_stream,
    stream_rng,
)
from oddgrid.gridsynth import GridSpec, StimulusRecord
from oddgrid.perturb import Attribute, PerturbationSpec


def make_record(rows=7, cols=7, attrs=("color",), rec_id="r0", **fields) -> StimulusRecord:
    spec = PerturbationSpec(attributes=tuple(Attribute(a) for a in attrs), **fields)
    return StimulusRecord(
        id=rec_id, split="train", grid=GridSpec(rows, cols, 60),
        icon_id="i", category="uncategorized", odd_row=1, odd_col=1,
        spec=spec, seed_index=0, labeled=False, image_path="x.png",
    )


def color_fields(de: float) -> dict:
    return dict(delta_e=de, base_lab=LabColor(50, 0, 0), odd_lab=LabColor(50 + de, 0, 0))


def test_hardest_corner():
    s = score(make_record(9, 9, ("color",), **color_fields(5.0)))
    assert (s.grid_term, s.attr_term, s.magnitude_term) == (1.0, 1.0, 1.0)
    assert s.value == 1.0


def test_easiest_corner():
    rec = make_record(
        5, 5, ("color", "size", "rotation", "position"),
        **color_fields(20.0), scale=1.15, angle_deg=25.0,
        dx_frac=0.12, dy_frac=0.12,
    )
    s = score(rec)
    assert (s.grid_term, s.attr_term, s.magnitude_term) == (0.0, 0.0, 0.0)
    assert s.value == 0.0


def test_worked_example_hand_evaluated():
    # 7x7, k=2, delta E 12.5 and angle 15: grid (49-25)/56, attr 2/3,
    # magnitude 1 - mean(0.5, 0.5); value cross-checked by hand
    rec = make_record(7, 7, ("color", "rotation"), **color_fields(12.5), angle_deg=15.0)
    s = score(rec)
    assert s.grid_term == pytest.approx(0.42857142857142855)
    assert s.attr_term == pytest.approx(2 / 3)
    assert s.magnitude_term == pytest.approx(0.5)
    assert s.value == pytest.approx(0.5317460317460317, abs=1e-12)


def test_monotonicity_in_each_component():
    base = make_record(7, 7, ("color",), **color_fields(12.0))
    # larger grid -> harder
    assert score(make_record(8, 7, ("color",), **color_fields(12.0))).value > score(base).value
    # more attributes -> easier
    multi = make_record(7, 7, ("color", "rotation"), **color_fields(12.0), angle_deg=15.0)
    assert score(multi).value < score(base).value
    # smaller magnitude -> harder
    subtle = make_record(7, 7, ("color",), **color_fields(6.0))
    assert score(subtle).value > score(base).value


def test_position_magnitude_uses_diagonal():
    a = make_record(7, 7, ("position",), dx_frac=0.05, dy_frac=0.05)
    b = make_record(7, 7, ("position",), dx_frac=0.12, dy_frac=0.12)
    assert score(a).magnitude_term == pytest.approx(1.0)
    assert score(b).magnitude_term == pytest.approx(0.0)
    mid = make_record(7, 7, ("position",), dx_frac=0.085, dy_frac=0.085)
    assert score(mid).magnitude_term == pytest.approx(0.5)


def test_incomplete_metadata():
    rec = make_record(7, 7, ("color",))  # color listed, no delta_e
    object.__setattr__(rec.spec, "delta_e", None)
    with pytest.raises(IncompleteMetadata):
        score(rec)


def _scores(n=30000, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(0, 1, n)
    return {
        f"train-{i:06d}": curriculum.DifficultyScore(float(v), 0, 0, 0)
        for i, v in enumerate(vals)
    }


def test_partition_sizes_and_order():
    scores = _scores()
    plan = partition(scores)
    assert (len(plan.easy), len(plan.medium), len(plan.hard)) == (15000, 10000, 5000)
    ids = set(plan.easy) | set(plan.medium) | set(plan.hard)
    assert len(ids) == 30000
    max_easy = max(scores[i].value for i in plan.easy)
    min_medium = min(scores[i].value for i in plan.medium)
    max_medium = max(scores[i].value for i in plan.medium)
    min_hard = min(scores[i].value for i in plan.hard)
    assert max_easy <= min_medium and max_medium <= min_hard


def test_partition_tie_break_by_id():
    scores = {
        f"train-{i:06d}": curriculum.DifficultyScore(0.5, 0, 0, 0) for i in range(30000)
    }
    plan = partition(scores)
    assert (len(plan.easy), len(plan.medium), len(plan.hard)) == (15000, 10000, 5000)
    assert plan.easy == sorted(scores)[:15000]


def test_partition_permutation_invariant():
    scores = _scores()
    items = list(scores.items())
    rng = np.random.default_rng(5)
    shuffled = {k: scores[k] for k in (items[int(i)][0] for i in rng.permutation(len(items)))}
    assert partition(scores) == partition(shuffled)


def test_partition_wrong_cardinality():
    with pytest.raises(WrongCardinality):
        partition(_scores(n=29999))


@pytest.fixture(scope="module")
def plan():
    return partition(_scores())


def test_stage1_all_easy(plan):
    ids = stage_stream(plan, 1, stream_rng(plan, 1, 0))
    assert len(ids) == 15000
    assert set(ids) == set(plan.easy)


def test_stage2_composition(plan):
    ids = stage_stream(plan, 2, stream_rng(plan, 2, 0))
    assert len(ids) == 15000
    easy, medium = set(plan.easy), set(plan.medium)
    n_easy = sum(1 for i in ids if i in easy)
    n_medium = sum(1 for i in ids if i in medium)
    assert n_easy == 5000 and n_medium == 10000
    assert set(ids) >= medium  # all medium present


def test_stage3_composition(plan):
    ids = stage_stream(plan, 3, stream_rng(plan, 3, 0))
    assert len(ids) == 10000
    counts = {
        "hard": sum(1 for i in ids if i in set(plan.hard)),
        "easy": sum(1 for i in ids if i in set(plan.easy)),
        "medium": sum(1 for i in ids if i in set(plan.medium)),
    }
    assert counts == {"hard": 5000, "easy": 2500, "medium": 2500}
    assert set(plan.hard) <= set(ids)
    assert len(set(ids)) == 10000  # every hard id exactly once, no dupes


def test_stream_reproducible_and_shuffled(plan):
    a = stage_stream(plan, 2, stream_rng(plan, 2, 7))
    b = stage_stream(plan, 2, stream_rng(plan, 2, 7))
    c = stage_stream(plan, 2, stream_rng(plan, 2, 8))
    assert a == b and a != c
    assert a != sorted(a)


def test_invalid_step(plan):
    with pytest.raises(InvalidStep):
        stage_stream(plan, 4, stream_rng(plan, 1, 0))


def test_plan_file_roundtrip(tmp_path, plan):
    scores = _scores()
    path = tmp_path / "plan.jsonl"
    curriculum.write_plan(plan, scores, path)
    loaded = curriculum.load_plan(path)
    assert loaded == plan
    assert loaded.checksum() == plan.checksum()
