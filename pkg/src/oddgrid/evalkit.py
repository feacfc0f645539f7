"""Answer parsing and the full metric suite.

Parsing is deliberately two-faced: accuracy metrics accept any extractable
boxed cell (case-insensitive, trailing prose tolerated), while format_ok
mirrors the strict format reward. Metrics beyond plain accuracy: tolerance
accuracy (off-by-one window), labeled-grid accuracy, per-type table,
five-bin magnitude curves, grid-density breakdown, near/far error split,
and exact-match/F1 for sequence label sets.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .gridsynth import StimulusRecord, record_type_label
from .perturb import (
    ANGLE_RANGE,
    Attribute,
    DELTA_E_RANGE,
    OFFSET_RANGE,
    SCALE_ENLARGE,
    TYPE_LABELS,
)
from .reward import format_reward

DENSITY_BINS = (("small", 0, 44), ("medium", 45, 64), ("large", 65, 81))
MAGNITUDE_BIN_COUNT = 5

_ROW_COL = re.compile(r"row\s*(-?\d+)\s*[,;]?\s*column\s*(-?\d+)", re.IGNORECASE)
_IMAGE_LABEL = re.compile(r"image\s*(\d+)", re.IGNORECASE)


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    kind: str  # "cell" | "noodd" | "labelset" | "unparseable"
    raw: str
    row: int | None = None
    col: int | None = None
    labels: frozenset[int] = frozenset()
    out_of_range: frozenset[int] = frozenset()
    format_ok: bool = False

    def cell(self) -> tuple[int, int] | None:
        return (self.row, self.col) if self.kind == "cell" else None


def _boxed_contents(text: str) -> list[str]:
    """All \\boxed{...} payloads, brace-matched so nested groups survive."""
    out = []
    i = 0
    needle = "\\boxed{"
    text = text or ""
    while True:
        j = text.find(needle, i)
        if j < 0:
            break
        depth = 1
        k = j + len(needle)
        while k < len(text) and depth:
            if text[k] == "{":
                depth += 1
            elif text[k] == "}":
                depth -= 1
            k += 1
        if depth:
            break
        out.append(text[j + len(needle) : k - 1])
        i = k
    return out


def parse_answer(text: str) -> Prediction:
    """Parse a grid-mode answer. The last boxed expression wins; a cell is
    recovered even with trailing prose, but format_ok stays strict."""
    boxes = _boxed_contents(text)
    ok = format_reward(text) == 1
    if not boxes:
        return Prediction(kind="unparseable", raw=text or "", format_ok=ok)
    m = _ROW_COL.search(boxes[-1])
    if not m:
        return Prediction(kind="unparseable", raw=text, format_ok=ok)
    row, col = int(m.group(1)), int(m.group(2))
    if (row, col) == (0, 0):
        return Prediction(kind="noodd", raw=text, format_ok=ok)
    if row < 1 or col < 1:
        return Prediction(kind="unparseable", raw=text, format_ok=ok)
    return Prediction(kind="cell", raw=text, row=row, col=col, format_ok=ok)


def parse_sequence_answer(text: str, n: int) -> Prediction:
    """Parse a sequence-mode answer into a label set.

    The box may be empty (no anomalies). Labels outside [1, n] are kept for
    exact-match scoring but reported in out_of_range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    boxes = _boxed_contents(text)
    if not boxes:
        return Prediction(kind="unparseable", raw=text or "")
    labels = frozenset(int(m.group(1)) for m in _IMAGE_LABEL.finditer(boxes[-1]))
    bad = frozenset(l for l in labels if not 1 <= l <= n)
    return Prediction(kind="labelset", raw=text, labels=labels, out_of_range=bad)


def _check_aligned(preds, gts) -> None:
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")


def strict_accuracy(preds: list[Prediction], gts: list[tuple[int, int]]) -> float:
    """Fraction of exact (row, col) matches. No-odd and unparseable answers
    count as wrong whenever the ground truth is a cell."""
    _check_aligned(preds, gts)
    if not gts:
        return 0.0
    hits = sum(1 for p, gt in zip(preds, gts) if p.cell() == gt)
    return hits / len(gts)


def _within_tolerance(pred: Prediction, gt: tuple[int, int]) -> bool:
    cell = pred.cell()
    if cell is None:
        return False
    return abs(cell[0] - gt[0]) <= 1 and abs(cell[1] - gt[1]) <= 1


def tol_accuracy(preds: list[Prediction], gts: list[tuple[int, int]]) -> float:
    """Fraction within one row and one column of the ground-truth cell."""
    _check_aligned(preds, gts)
    if not gts:
        return 0.0
    hits = sum(1 for p, gt in zip(preds, gts) if _within_tolerance(p, gt))
    return hits / len(gts)


def magnitude_of(rec: StimulusRecord, attribute: Attribute) -> float:
    s = rec.spec
    if attribute is Attribute.COLOR:
        return s.delta_e
    if attribute is Attribute.SIZE:
        return abs(s.scale - 1.0)
    if attribute is Attribute.ROTATION:
        return abs(s.angle_deg)
    return math.sqrt(s.dx_frac**2 + s.dy_frac**2)


def magnitude_range(attribute: Attribute) -> tuple[float, float]:
    if attribute is Attribute.COLOR:
        return DELTA_E_RANGE
    if attribute is Attribute.SIZE:
        return (SCALE_ENLARGE[0] - 1.0, SCALE_ENLARGE[1] - 1.0)
    if attribute is Attribute.ROTATION:
        return ANGLE_RANGE
    root2 = math.sqrt(2.0)
    return (OFFSET_RANGE[0] * root2, OFFSET_RANGE[1] * root2)


def magnitude_bin(value: float, attribute: Attribute) -> int:
    """Index in 0..4; bins are closed-open except the last, which is closed.
    A relative epsilon keeps float noise from pushing edge values down a bin
    (e.g. |0.95 - 1| lands exactly on the size bin edge 0.05)."""
    lo, hi = magnitude_range(attribute)
    width = (hi - lo) / MAGNITUDE_BIN_COUNT
    if value >= hi:
        return MAGNITUDE_BIN_COUNT - 1
    idx = int(math.floor((value - lo) / width + 1e-9))
    return min(MAGNITUDE_BIN_COUNT - 1, max(0, idx))


def magnitude_curve(
    records: list[StimulusRecord],
    preds: list[Prediction],
    attribute: Attribute,
) -> list[float | None]:
    """Accuracy per magnitude quintile for single-type records of one
    attribute. Empty bins report None, never a silent skip."""
    _check_aligned(preds, records)
    hits = [0] * MAGNITUDE_BIN_COUNT
    totals = [0] * MAGNITUDE_BIN_COUNT
    for rec, pred in zip(records, preds):
        if rec.spec.attributes != (attribute,):
            raise ValueError(f"{rec.id} is not a single-type {attribute.value} record")
        b = magnitude_bin(magnitude_of(rec, attribute), attribute)
        totals[b] += 1
        if pred.cell() == (rec.odd_row, rec.odd_col):
            hits[b] += 1
    return [h / t if t else None for h, t in zip(hits, totals)]


def density_bucket(rec: StimulusRecord) -> str:
    cells = rec.grid.rows * rec.grid.cols
    for name, lo, hi in DENSITY_BINS:
        if lo <= cells <= hi:
            return name
    return DENSITY_BINS[-1][0]


def density_breakdown(
    records: list[StimulusRecord], preds: list[Prediction]
) -> dict[str, float | None]:
    """Accuracy for small (<=44 cells), medium (45-64) and large (65-81) grids."""
    _check_aligned(preds, records)
    hits = {name: 0 for name, _, _ in DENSITY_BINS}
    totals = {name: 0 for name, _, _ in DENSITY_BINS}
    for rec, pred in zip(records, preds):
        b = density_bucket(rec)
        totals[b] += 1
        if pred.cell() == (rec.odd_row, rec.odd_col):
            hits[b] += 1
    return {n: (hits[n] / totals[n] if totals[n] else None) for n in hits}


def near_far_split(
    records: list[StimulusRecord], preds: list[Prediction]
) -> tuple[float, float]:
    """Fractions of wrong-but-parseable cell predictions that land inside
    the tolerance window (near) versus outside it (far)."""
    _check_aligned(preds, records)
    near = far = 0
    for rec, pred in zip(records, preds):
        cell = pred.cell()
        gt = (rec.odd_row, rec.odd_col)
        if cell is None or cell == gt:
            continue
        if _within_tolerance(pred, gt):
            near += 1
        else:
            far += 1
    total = near + far
    if total == 0:
        return (0.0, 0.0)
    return (near / total, far / total)


def em_f1(
    pred_sets: list[set[int] | frozenset[int]],
    gt_sets: list[set[int] | frozenset[int]],
) -> tuple[float, float]:
    """Exact-match rate and mean per-sample F1 over label sets.

    Two empty sets agree perfectly: EM and F1 both score 1 for that sample.
    """
    _check_aligned(pred_sets, gt_sets)
    if not gt_sets:
        return (0.0, 0.0)
    em = 0
    f1_sum = 0.0
    for p, g in zip(pred_sets, gt_sets):
        p, g = set(p), set(g)
        if p == g:
            em += 1
            f1_sum += 1.0
            continue
        inter = len(p & g)
        if inter == 0 or not p or not g:
            continue
        prec = inter / len(p)
        rec = inter / len(g)
        f1_sum += 2 * prec * rec / (prec + rec)
    return (em / len(gt_sets), f1_sum / len(gt_sets))


# --- report assembly


@dataclass
class EvalReport:
    n: int
    per_type: dict[str, float | None]
    counts: dict[str, int]
    total: float
    tol_total: float
    labeled_total: float | None
    magnitude_curves: dict[str, list[float | None]]
    density: dict[str, float | None]
    near_frac: float
    far_frac: float
    parse_note: str = "lenient cell extraction, case-insensitive; format scored strictly"

    def to_obj(self) -> dict:
        return {
            "n": self.n,
            "per_type": self.per_type,
            "counts": self.counts,
            "total": self.total,
            "tol_total": self.tol_total,
            "labeled_total": self.labeled_total,
            "magnitude_curves": self.magnitude_curves,
            "density": self.density,
            "near_frac": self.near_frac,
            "far_frac": self.far_frac,
            "parse_note": self.parse_note,
        }


def load_predictions(path: str | Path) -> dict[str, str]:
    """Read a jsonl predictions file of (id, raw_text) into a map."""
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out[obj["id"]] = obj["raw_text"]
    return out


def evaluate(
    records: list[StimulusRecord],
    raw_by_id: dict[str, str],
    labeled_raw_by_id: dict[str, str] | None = None,
) -> EvalReport:
    """Join predictions to records by id and compute the whole suite.

    Records with no prediction are scored as unparseable answers rather
    than dropped, so totals always cover the full record list.
    """
    preds = [parse_answer(raw_by_id.get(r.id, "")) for r in records]
    gts = [(r.odd_row, r.odd_col) for r in records]

    by_type: dict[str, list[int]] = {t: [] for t in TYPE_LABELS}
    for i, rec in enumerate(records):
        by_type[record_type_label(rec)].append(i)

    per_type: dict[str, float | None] = {}
    counts: dict[str, int] = {}
    for t, idxs in by_type.items():
        counts[t] = len(idxs)
        if not idxs:
            per_type[t] = None
            continue
        per_type[t] = strict_accuracy([preds[i] for i in idxs], [gts[i] for i in idxs])

    curves: dict[str, list[float | None]] = {}
    for attr in Attribute:
        idxs = [i for i, r in enumerate(records) if r.spec.attributes == (attr,)]
        if idxs:
            curves[attr.value] = magnitude_curve(
                [records[i] for i in idxs], [preds[i] for i in idxs], attr
            )

    labeled_total = None
    if labeled_raw_by_id is not None:
        labeled_preds = [parse_answer(labeled_raw_by_id.get(r.id, "")) for r in records]
        labeled_total = strict_accuracy(labeled_preds, gts)

    near, far = near_far_split(records, preds)
    return EvalReport(
        n=len(records),
        per_type=per_type,
        counts=counts,
        total=strict_accuracy(preds, gts),
        tol_total=tol_accuracy(preds, gts),
        labeled_total=labeled_total,
        magnitude_curves=curves,
        density=density_breakdown(records, preds),
        near_frac=near,
        far_frac=far,
    )


def _pct(v: float | None) -> str:
    return "  --- " if v is None else f"{100.0 * v:6.2f}"


def format_report(report: EvalReport, name: str = "run") -> str:
    """Human-readable table in the canonical column order."""
    cols = list(TYPE_LABELS) + ["Total"]
    head = f"{'Method':<12}" + "".join(f"{c:>10}" for c in cols)
    row = f"{name:<12}" + "".join(
        f"{_pct(report.per_type[t]):>10}" for t in TYPE_LABELS
    ) + f"{_pct(report.total):>10}"
    lines = [head, row, ""]
    lines.append(f"TolAcc   {_pct(report.tol_total)}")
    if report.labeled_total is not None:
        lines.append(f"LabeledAcc {_pct(report.labeled_total)}")
    d = report.density
    lines.append(
        "Density   small " + _pct(d["small"]) + "  medium " + _pct(d["medium"])
        + "  large " + _pct(d["large"])
    )
    lines.append(
        f"Errors    near {report.near_frac:.3f}  far {report.far_frac:.3f}"
    )
    for attr, curve in sorted(report.magnitude_curves.items()):
        lines.append(
            f"Curve {attr:<9} " + " ".join(_pct(v) for v in curve)
        )
    return "\n".join(lines)
