"""Grid stimulus synthesis: one odd cell per image, full metadata, PNG output.

A stimulus is composed from two rasterized tiles: the base tile, blitted
into every cell, and the odd tile carrying the perturbation. Non-odd cells
are therefore pixel-identical by construction. Every sampled value lands in
the record metadata so any image can be re-rendered from its record alone.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import GENERATOR_VERSION, raster
from .colors import LabColor, lab_to_srgb
from .icons import IconAsset, IconManifest, sample_icon
from .perturb import (
    ATTR_ORDER,
    Attribute,
    GamutExhaustion,
    PerturbationSpec,
    sample_perturbation,
    type_label,
)

GRID_RANGE = (5, 9)
BLOCK_RANGE = (60, 80)
RESOLUTION_OVERRIDES = (50, 100, 150)
MIN_BLOCK = 32
DEFAULT_MARGIN = 8
ICON_FILL_RATIO = 0.8
DEFAULT_FILL_RGB = (0, 0, 0)
BACKGROUND = (255, 255, 255)

TEST_SIZE_PER_TYPE = 200
VAL_SIZE = 400
TRAIN_SIZE = 30000

# Disjoint per-record seed-index bases keep streams stable regardless of
# how many records another split holds.
SPLIT_BASES = {"test": 0, "val": 1_000_000, "train": 2_000_000}

_BASE_RESAMPLE_BUDGET = 100

TYPE_KEYS = ("Color", "Size", "Rotation", "Position", "2-Type", "3-Type", "4-Type")
_SINGLE_ATTR = {
    "Color": Attribute.COLOR,
    "Size": Attribute.SIZE,
    "Rotation": Attribute.ROTATION,
    "Position": Attribute.POSITION,
}


class RenderFailure(RuntimeError):
    pass


class PlanInconsistency(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    block_px: int
    margin_px: int = DEFAULT_MARGIN
    background: tuple[int, int, int] = BACKGROUND

    def cell_count(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class StimulusRecord:
    id: str
    split: str
    grid: GridSpec
    icon_id: str
    category: str
    odd_row: int
    odd_col: int
    spec: PerturbationSpec
    seed_index: int
    labeled: bool
    image_path: str
    created_by: str = GENERATOR_VERSION


@dataclass
class SequenceStimulus:
    n: int
    block_px: int
    images: list[np.ndarray]
    odd_indices: tuple[int, ...]
    specs: dict[int, PerturbationSpec]


def sample_grid(rng: np.random.Generator, block_override: int | None = None) -> GridSpec:
    rows = int(rng.integers(GRID_RANGE[0], GRID_RANGE[1] + 1))
    cols = int(rng.integers(GRID_RANGE[0], GRID_RANGE[1] + 1))
    if block_override is not None:
        if block_override < MIN_BLOCK:
            raise ValueError(f"block override below {MIN_BLOCK}px")
        block = block_override
    else:
        block = int(rng.integers(BLOCK_RANGE[0], BLOCK_RANGE[1] + 1))
    return GridSpec(rows=rows, cols=cols, block_px=block)


def _fill_colors(spec: PerturbationSpec) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    if spec.base_lab is not None:
        base_rgb, _ = lab_to_srgb(spec.base_lab)
        odd_rgb, _ = lab_to_srgb(spec.odd_lab)
        return base_rgb, odd_rgb
    return DEFAULT_FILL_RGB, DEFAULT_FILL_RGB


def render_stimulus(record: StimulusRecord, icon: IconAsset) -> np.ndarray:
    """Rasterize the unlabeled grid image for a record, metadata only."""
    if icon.id != record.icon_id:
        raise RenderFailure(f"record wants icon {record.icon_id}, got {icon.id}")
    grid = record.grid
    spec = record.spec
    try:
        polys = icon.polygons()
    except Exception as exc:
        raise RenderFailure(f"icon {icon.id} unreadable: {exc}") from exc
    base_rgb, odd_rgb = _fill_colors(spec)
    base_tile = raster.render_tile(
        polys, grid.block_px, base_rgb, fill_ratio=ICON_FILL_RATIO,
        background=grid.background,
    )
    odd_tile = raster.render_tile(
        polys,
        grid.block_px,
        odd_rgb,
        fill_ratio=ICON_FILL_RATIO,
        scale=spec.scale if spec.scale is not None else 1.0,
        angle_deg=spec.angle_deg if spec.angle_deg is not None else 0.0,
        dx_frac=spec.dx_frac if spec.dx_frac is not None else 0.0,
        dy_frac=spec.dy_frac if spec.dy_frac is not None else 0.0,
        background=grid.background,
    )
    return raster.compose_grid(
        base_tile, odd_tile, grid.rows, grid.cols,
        record.odd_row, record.odd_col, grid.margin_px, grid.background,
    )


def render_labeled(record: StimulusRecord, icon: IconAsset) -> np.ndarray:
    """Grid image with row indices in a left gutter and column indices on top."""
    img = render_stimulus(record, icon)
    return raster.add_index_gutters(
        img, record.grid.rows, record.grid.cols,
        record.grid.block_px, record.grid.margin_px,
        background=record.grid.background,
    )


def _sample_spec(rng: np.random.Generator, k: int, forced) -> PerturbationSpec:
    for _ in range(_BASE_RESAMPLE_BUDGET):
        try:
            return sample_perturbation(rng, k, forced=forced)
        except GamutExhaustion:
            continue
    raise GamutExhaustion(f"base color budget of {_BASE_RESAMPLE_BUDGET} exhausted")


def synthesize(
    rng: np.random.Generator,
    icon: IconAsset,
    k: int,
    grid_override: GridSpec | None = None,
    *,
    rec_id: str = "adhoc-000000",
    split: str = "test",
    seed_index: int = 0,
    labeled: bool = False,
    forced: tuple[Attribute, ...] | None = None,
    out_dir: str | Path | None = None,
) -> StimulusRecord:
    """Sample one stimulus, render it, optionally write the PNG.

    Draw order (pinned): grid rows, cols, block; odd row, odd col; then the
    perturbation sampler.
    """
    grid = grid_override if grid_override is not None else sample_grid(rng)
    odd_row = int(rng.integers(1, grid.rows + 1))
    odd_col = int(rng.integers(1, grid.cols + 1))
    spec = _sample_spec(rng, k, forced)
    record = StimulusRecord(
        id=rec_id,
        split=split,
        grid=grid,
        icon_id=icon.id,
        category=icon.category.value,
        odd_row=odd_row,
        odd_col=odd_col,
        spec=spec,
        seed_index=seed_index,
        labeled=labeled,
        image_path=f"images/{split}/{rec_id}.png",
    )
    if out_dir is not None:
        write_image(record, icon, out_dir)
    return record


def write_image(record: StimulusRecord, icon: IconAsset, out_dir: str | Path) -> Path:
    img = render_labeled(record, icon) if record.labeled else render_stimulus(record, icon)
    path = Path(out_dir) / record.image_path
    path.parent.mkdir(parents=True, exist_ok=True)
    save_png(img, path)
    return path


def save_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(img).save(path, format="PNG")


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def render_sequence(
    rng: np.random.Generator,
    icon: IconAsset,
    k: int,
    n: int,
    anomaly_count: int,
) -> SequenceStimulus:
    """n standalone cell images with `anomaly_count` perturbed positions.

    anomaly_count may be 0 (the all-normal case) and each anomalous image
    draws its own perturbation.
    """
    if not 8 <= n <= 15:
        raise ValueError(f"n must be in 8..15, got {n}")
    if anomaly_count < 0 or anomaly_count > min(2, n):
        raise ValueError(f"anomaly_count must be in 0..2 and <= n, got {anomaly_count}")
    block = int(rng.integers(BLOCK_RANGE[0], BLOCK_RANGE[1] + 1))
    odd = tuple(sorted(int(i) + 1 for i in rng.choice(n, size=anomaly_count, replace=False)))
    polys = icon.polygons()
    specs: dict[int, PerturbationSpec] = {}
    base_rgb = DEFAULT_FILL_RGB
    odd_tile = None
    if anomaly_count > 0:
        # one shared perturbation: every anomalous image carries it, so the
        # normal images stay mutually pixel-identical under any base color
        spec = _sample_spec(rng, k, None)
        base_rgb, odd_rgb = _fill_colors(spec)
        odd_tile = raster.render_tile(
            polys, block, odd_rgb,
            fill_ratio=ICON_FILL_RATIO,
            scale=spec.scale if spec.scale is not None else 1.0,
            angle_deg=spec.angle_deg if spec.angle_deg is not None else 0.0,
            dx_frac=spec.dx_frac if spec.dx_frac is not None else 0.0,
            dy_frac=spec.dy_frac if spec.dy_frac is not None else 0.0,
        )
        specs = {idx: spec for idx in odd}
    base_tile = raster.render_tile(polys, block, base_rgb, fill_ratio=ICON_FILL_RATIO)
    images = [odd_tile if i in odd else base_tile for i in range(1, n + 1)]
    return SequenceStimulus(n=n, block_px=block, images=images, odd_indices=odd, specs=specs)


# --- dataset plans and manifests


def _apportion(total: int, buckets: int) -> list[int]:
    """Largest-remainder split of `total` into `buckets` near-equal counts."""
    base = total // buckets
    rem = total - base * buckets
    return [base + (1 if i < rem else 0) for i in range(buckets)]


def default_plan() -> dict[str, list[tuple[str, int]]]:
    plan: dict[str, list[tuple[str, int]]] = {
        "test": [(t, TEST_SIZE_PER_TYPE) for t in TYPE_KEYS],
        "val": list(zip(TYPE_KEYS, _apportion(VAL_SIZE, len(TYPE_KEYS)))),
        "train": list(zip(TYPE_KEYS, _apportion(TRAIN_SIZE, len(TYPE_KEYS)))),
    }
    return plan


def validate_plan(plan: dict[str, list[tuple[str, int]]]) -> None:
    for split, entries in plan.items():
        if split not in SPLIT_BASES:
            raise PlanInconsistency(f"unknown split {split!r}")
        seen = set()
        for type_key, count in entries:
            if type_key not in TYPE_KEYS:
                raise PlanInconsistency(f"unknown type {type_key!r}")
            if type_key in seen:
                raise PlanInconsistency(f"duplicate type {type_key!r} in {split}")
            if count < 0:
                raise PlanInconsistency(f"negative count for {type_key} in {split}")
            seen.add(type_key)
        total = sum(c for _, c in entries)
        if total >= 1_000_000:  # would collide with the next split's seed base
            raise PlanInconsistency(f"{split} plan too large: {total}")


def _type_params(type_key: str):
    if type_key in _SINGLE_ATTR:
        return 1, (_SINGLE_ATTR[type_key],)
    return int(type_key[0]), None


def build_dataset(
    master_seed: int,
    manifests: dict[str, IconManifest],
    plan: dict[str, list[tuple[str, int]]] | None = None,
    splits: tuple[str, ...] | None = None,
    block_override: int | None = None,
    labeled: bool = False,
) -> list[StimulusRecord]:
    """Plan every record of the requested splits (metadata only, no pixels).

    Each record's rng stream derives from (master_seed, split base + index),
    so records regenerate independently. `manifests` maps split name to the
    icon manifest it draws from.
    """
    if plan is None:
        plan = default_plan()
    validate_plan(plan)
    wanted = splits if splits is not None else tuple(plan.keys())
    records: list[StimulusRecord] = []
    for split in wanted:
        if split not in plan:
            raise PlanInconsistency(f"split {split!r} not in plan")
        manifest = manifests[split]
        base = SPLIT_BASES[split]
        i = 0
        for type_key, count in plan[split]:
            k, forced = _type_params(type_key)
            for _ in range(count):
                seed_index = base + i
                rng = np.random.default_rng([master_seed, seed_index])
                icon = sample_icon(manifest, rng)
                grid_override = (
                    None
                    if block_override is None
                    else sample_grid(rng, block_override=block_override)
                )
                # without an override sample_grid runs inside synthesize
                rec = synthesize(
                    rng,
                    icon,
                    k,
                    grid_override=grid_override,
                    rec_id=f"{split}-{i:06d}",
                    split=split,
                    seed_index=seed_index,
                    labeled=labeled,
                    forced=forced,
                )
                records.append(rec)
                i += 1
    return records


# --- serialization (line-delimited json, fixed field set)

_FIELDS = (
    "id", "split", "rows", "cols", "block_px", "icon_id", "category",
    "odd_row", "odd_col", "types", "delta_e", "base_lab", "odd_lab",
    "scale", "angle_deg", "dx_frac", "dy_frac", "seed_index", "labeled",
    "generator_version", "image_path",
)


def record_to_obj(rec: StimulusRecord) -> dict:
    s = rec.spec
    return {
        "id": rec.id,
        "split": rec.split,
        "rows": rec.grid.rows,
        "cols": rec.grid.cols,
        "block_px": rec.grid.block_px,
        "icon_id": rec.icon_id,
        "category": rec.category,
        "odd_row": rec.odd_row,
        "odd_col": rec.odd_col,
        "types": [a.value for a in s.attributes],
        "delta_e": s.delta_e,
        "base_lab": list(s.base_lab.as_tuple()) if s.base_lab else None,
        "odd_lab": list(s.odd_lab.as_tuple()) if s.odd_lab else None,
        "scale": s.scale,
        "angle_deg": s.angle_deg,
        "dx_frac": s.dx_frac,
        "dy_frac": s.dy_frac,
        "seed_index": rec.seed_index,
        "labeled": rec.labeled,
        "generator_version": rec.created_by,
        "image_path": rec.image_path,
    }


def record_from_obj(obj: dict) -> StimulusRecord:
    attrs = tuple(Attribute(a) for a in obj["types"])
    spec = PerturbationSpec(
        attributes=attrs,
        delta_e=obj["delta_e"],
        base_lab=LabColor(*obj["base_lab"]) if obj["base_lab"] else None,
        odd_lab=LabColor(*obj["odd_lab"]) if obj["odd_lab"] else None,
        scale=obj["scale"],
        angle_deg=obj["angle_deg"],
        dx_frac=obj["dx_frac"],
        dy_frac=obj["dy_frac"],
    )
    grid = GridSpec(rows=obj["rows"], cols=obj["cols"], block_px=obj["block_px"])
    return StimulusRecord(
        id=obj["id"],
        split=obj["split"],
        grid=grid,
        icon_id=obj["icon_id"],
        category=obj["category"],
        odd_row=obj["odd_row"],
        odd_col=obj["odd_col"],
        spec=spec,
        seed_index=obj["seed_index"],
        labeled=obj["labeled"],
        image_path=obj["image_path"],
        created_by=obj["generator_version"],
    )


def record_type_label(rec: StimulusRecord) -> str:
    return type_label(rec.spec.attributes)


def write_dataset_manifest(
    records: list[StimulusRecord], path: str | Path, master_seed: int
) -> None:
    header = {
        "schema": "oddgrid-dataset-v1",
        "master_seed": master_seed,
        "generator_version": GENERATOR_VERSION,
        "count": len(records),
    }
    lines = [json.dumps(header, separators=(", ", ": "))]
    for rec in records:
        lines.append(json.dumps(record_to_obj(rec), separators=(", ", ": ")))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset_manifest(path: str | Path) -> tuple[dict, list[StimulusRecord]]:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    if header.get("schema") != "oddgrid-dataset-v1":
        raise ValueError(f"not a dataset manifest: {path}")
    records = [record_from_obj(json.loads(l)) for l in lines[1:] if l.strip()]
    return header, records


def manifest_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
