"""Difficulty scoring and the three-stage easy-to-hard training schedule.

A record's difficulty is the mean of three normalized terms: grid density,
attribute sparsity (fewer differing attributes is harder) and perturbation
subtlety (smaller magnitudes are harder). Each term lives in [0, 1] and is
strictly monotone in its input.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gridsynth import StimulusRecord
from .perturb import (
    ANGLE_RANGE,
    Attribute,
    DELTA_E_RANGE,
    OFFSET_RANGE,
    SCALE_SHRINK,
    SCALE_ENLARGE,
)

EASY_SIZE = 15000
MEDIUM_SIZE = 10000
HARD_SIZE = 5000
TRAIN_TOTAL = EASY_SIZE + MEDIUM_SIZE + HARD_SIZE

STAGE_RECIPES = {
    1: {"easy": EASY_SIZE},
    2: {"easy": 5000, "medium": MEDIUM_SIZE},
    3: {"hard": HARD_SIZE, "easy": 2500, "medium": 2500},
}


class IncompleteMetadata(ValueError):
    pass


class WrongCardinality(ValueError):
    pass


class InvalidStep(ValueError):
    pass


@dataclass(frozen=True)
class DifficultyScore:
    value: float
    grid_term: float
    attr_term: float
    magnitude_term: float


@dataclass
class CurriculumPlan:
    easy: list[str]
    medium: list[str]
    hard: list[str]

    def checksum(self) -> str:
        h = hashlib.sha256()
        for bucket in (self.easy, self.medium, self.hard):
            h.update("\n".join(bucket).encode())
            h.update(b"\x00")
        return h.hexdigest()


def _magnitude_fractions(rec: StimulusRecord) -> list[float]:
    s = rec.spec
    fracs = []
    if s.has(Attribute.COLOR):
        if s.delta_e is None:
            raise IncompleteMetadata(f"{rec.id}: color listed but delta_e missing")
        fracs.append((s.delta_e - DELTA_E_RANGE[0]) / (DELTA_E_RANGE[1] - DELTA_E_RANGE[0]))
    if s.has(Attribute.SIZE):
        if s.scale is None:
            raise IncompleteMetadata(f"{rec.id}: size listed but scale missing")
        # |scale-1| spans [0.05, 0.15] across both branches
        lo = SCALE_ENLARGE[0] - 1.0
        hi = SCALE_ENLARGE[1] - 1.0
        fracs.append((abs(s.scale - 1.0) - lo) / (hi - lo))
    if s.has(Attribute.ROTATION):
        if s.angle_deg is None:
            raise IncompleteMetadata(f"{rec.id}: rotation listed but angle missing")
        fracs.append((abs(s.angle_deg) - ANGLE_RANGE[0]) / (ANGLE_RANGE[1] - ANGLE_RANGE[0]))
    if s.has(Attribute.POSITION):
        if s.dx_frac is None or s.dy_frac is None:
            raise IncompleteMetadata(f"{rec.id}: position listed but offsets missing")
        # diagonal magnitude, rescaled by sqrt(2) back onto the per-axis band
        diag = math.sqrt(s.dx_frac**2 + s.dy_frac**2) / math.sqrt(2.0)
        frac = (diag - OFFSET_RANGE[0]) / (OFFSET_RANGE[1] - OFFSET_RANGE[0])
        fracs.append(min(1.0, max(0.0, frac)))
    if not fracs:
        raise IncompleteMetadata(f"{rec.id}: no attributes present")
    return fracs


def score(rec: StimulusRecord) -> DifficultyScore:
    """Difficulty in [0, 1]; larger grids, fewer attributes and smaller
    magnitudes all push the value up."""
    cells = rec.grid.rows * rec.grid.cols
    grid_term = (cells - 25) / 56.0
    attr_term = (4 - rec.spec.k) / 3.0
    magnitude_term = 1.0 - sum(_magnitude_fractions(rec)) / len(_magnitude_fractions(rec))
    value = (grid_term + attr_term + magnitude_term) / 3.0
    return DifficultyScore(
        value=value, grid_term=grid_term, attr_term=attr_term, magnitude_term=magnitude_term
    )


def partition(scores: dict[str, DifficultyScore]) -> CurriculumPlan:
    """Sort ascending by (value, id) and cut 15K easy / 10K medium / 5K hard."""
    if len(scores) != TRAIN_TOTAL:
        raise WrongCardinality(f"need exactly {TRAIN_TOTAL} scored records, got {len(scores)}")
    ordered = sorted(scores, key=lambda i: (scores[i].value, i))
    return CurriculumPlan(
        easy=ordered[:EASY_SIZE],
        medium=ordered[EASY_SIZE : EASY_SIZE + MEDIUM_SIZE],
        hard=ordered[EASY_SIZE + MEDIUM_SIZE :],
    )


def stage_stream(plan: CurriculumPlan, step: int, rng: np.random.Generator) -> list[str]:
    """Shuffled id stream for one of the three training steps.

    Step 1: all easy. Step 2: a uniform 5K easy subsample plus all medium.
    Step 3: all hard plus a 2.5K easy and 2.5K medium replay.
    """
    if step not in STAGE_RECIPES:
        raise InvalidStep(f"step must be 1, 2 or 3, got {step}")
    buckets = {"easy": plan.easy, "medium": plan.medium, "hard": plan.hard}
    ids: list[str] = []
    for bucket, take in STAGE_RECIPES[step].items():
        pool = buckets[bucket]
        if take == len(pool):
            ids.extend(pool)
        else:
            picks = rng.choice(len(pool), size=take, replace=False)
            ids.extend(pool[int(i)] for i in sorted(picks.tolist()))
    order = rng.permutation(len(ids))
    return [ids[int(i)] for i in order]


def stream_rng(plan: CurriculumPlan, step: int, seed: int) -> np.random.Generator:
    """Rng bound to (plan checksum, step, seed) so streams are reproducible."""
    return np.random.default_rng([int(plan.checksum()[:16], 16), step, seed])


def write_plan(
    plan: CurriculumPlan, scores: dict[str, DifficultyScore], path: str | Path
) -> None:
    buckets = [("easy", plan.easy), ("medium", plan.medium), ("hard", plan.hard)]
    lines = [json.dumps({"schema": "oddgrid-curriculum-v1", "checksum": plan.checksum()})]
    for name, ids in buckets:
        for i in ids:
            lines.append(
                json.dumps({"id": i, "value": scores[i].value, "bucket": name})
            )
    Path(path).write_text("\n".join(lines) + "\n")


def load_plan(path: str | Path) -> CurriculumPlan:
    lines = Path(path).read_text().splitlines()
    head = json.loads(lines[0])
    if head.get("schema") != "oddgrid-curriculum-v1":
        raise ValueError(f"not a curriculum plan: {path}")
    buckets: dict[str, list[str]] = {"easy": [], "medium": [], "hard": []}
    for line in lines[1:]:
        obj = json.loads(line)
        buckets[obj["bucket"]].append(obj["id"])
    plan = CurriculumPlan(easy=buckets["easy"], medium=buckets["medium"], hard=buckets["hard"])
    if plan.checksum() != head.get("checksum"):
        raise ValueError(f"curriculum plan checksum mismatch in {path}")
    return plan
