"""Distance-aware reward for predicted grid cells.

An exact hit earns 1. Any other prediction earns a Gaussian of its
Euclidean cell distance, minus a bias, clamped at zero:

    r_d = max(exp(-d^2 / (2 sigma^2)) - beta, 0),   sigma = lambda * diag

where diag is sqrt(rows^2 + cols^2). The overall reward blends in a strict
format term: r = (1 - omega) * r_d + omega * r_f.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .gridsynth import GridSpec

DEFAULT_LAMBDA = 0.25
DEFAULT_BETA = 0.3
DEFAULT_OMEGA = 0.2

Cell = tuple[int, int]

# Strict answer shape: integers, exact capitalization, one space after the
# comma optional. Used for the format reward only; lenient extraction for
# accuracy lives in evalkit.
_STRICT_BOXED = re.compile(r"\\boxed\{Row (\d+), Column (\d+)\}")


@dataclass(frozen=True)
class RewardParams:
    lam: float = DEFAULT_LAMBDA
    beta: float = DEFAULT_BETA
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must be in [0, 1)")
        if not 0 <= self.omega <= 1:
            raise ValueError("omega must be in [0, 1]")


@dataclass(frozen=True)
class RewardBreakdown:
    d: float
    sigma: float
    r_d: float
    r_f: int
    r_overall: float


def grid_distance(pred: Cell, gt: Cell) -> float:
    return math.sqrt((pred[0] - gt[0]) ** 2 + (pred[1] - gt[1]) ** 2)


def sigma_for(grid: GridSpec, params: RewardParams) -> float:
    return params.lam * math.sqrt(grid.rows**2 + grid.cols**2)


def distance_reward(
    pred: Cell, gt: Cell, grid: GridSpec, params: RewardParams = RewardParams()
) -> float:
    """Gaussian-decay reward of the cell distance; exact match is 1."""
    d = grid_distance(pred, gt)
    if d == 0.0:
        return 1.0
    sigma = sigma_for(grid, params)
    return max(math.exp(-(d * d) / (2.0 * sigma * sigma)) - params.beta, 0.0)


def format_reward(raw: str) -> int:
    """1 iff the text holds exactly one strict boxed cell answer and nothing
    but whitespace after it."""
    matches = list(_STRICT_BOXED.finditer(raw or ""))
    if len(matches) != 1:
        return 0
    return 1 if raw[matches[0].end() :].strip() == "" else 0


def overall_reward(r_d: float, r_f: int, params: RewardParams = RewardParams()) -> float:
    return (1.0 - params.omega) * r_d + params.omega * r_f


def binary_reward(pred: Cell | None, gt: Cell) -> int:
    """Plain exact-match signal: 1 on equality, 0 on anything else."""
    return 1 if pred == gt else 0


def score_answer(
    raw: str,
    gt: Cell,
    grid: GridSpec,
    params: RewardParams = RewardParams(),
) -> RewardBreakdown:
    """Full breakdown for one raw answer string.

    Distance uses any extractable cell (lenient); unparseable text scores
    r_d = 0 via an infinite sentinel distance. The no-odd sentinel (0, 0)
    matches only a no-odd ground truth.
    """
    from .evalkit import parse_answer  # local import: evalkit depends on us

    pred = parse_answer(raw)
    r_f = format_reward(raw)
    sigma = sigma_for(grid, params)
    if pred.kind == "cell":
        cell = (pred.row, pred.col)
        d = grid_distance(cell, gt)
        r_d = distance_reward(cell, gt, grid, params)
    elif pred.kind == "noodd" and gt == (0, 0):
        d, r_d = 0.0, 1.0
    else:
        d, r_d = math.inf, 0.0
    return RewardBreakdown(
        d=d, sigma=sigma, r_d=r_d, r_f=r_f,
        r_overall=overall_reward(r_d, r_f, params),
    )


def score_file(
    in_path: str | Path, out_path: str | Path, params: RewardParams = RewardParams()
) -> int:
    """Batch mode: jsonl of (id, raw_text, gt_row, gt_col, rows, cols) in,
    jsonl with the full breakdown out. Returns the record count."""
    n = 0
    out_lines = []
    for line in Path(in_path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        grid = GridSpec(rows=obj["rows"], cols=obj["cols"], block_px=60)
        br = score_answer(obj["raw_text"], (obj["gt_row"], obj["gt_col"]), grid, params)
        out_lines.append(
            json.dumps(
                {
                    "id": obj["id"],
                    "d": br.d if math.isfinite(br.d) else None,
                    "sigma": br.sigma,
                    "r_d": br.r_d,
                    "r_f": br.r_f,
                    "r_overall": br.r_overall,
                },
                separators=(", ", ": "),
            )
        )
        n += 1
    Path(out_path).write_text("\n".join(out_lines) + "\n")
    return n
