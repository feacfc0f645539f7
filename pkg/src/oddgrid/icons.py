"""Icon ingestion, normalization, categorization and deterministic sampling."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import svgio

CURATED_PER_CATEGORY = 100
CURATED_TOTAL = 300


class Source(str, Enum):
    TEST_VAL = "testval"
    TRAIN = "train"


class Category(str, Enum):
    ARTIFICIAL = "artificial"
    NATURAL = "natural"
    SYMBOLIC = "symbolic"
    UNCATEGORIZED = "uncategorized"


class EmptyDirectoryError(ValueError):
    pass


class EmptyManifestError(ValueError):
    pass


class CategoryCountViolation(ValueError):
    def __init__(self, counts: dict[str, int]):
        self.counts = counts
        super().__init__(f"curated collection needs 100 per category, got {counts}")


@dataclass(frozen=True)
class IconAsset:
    """One normalized vector glyph. `document` is the normalized SVG bytes."""

    id: str
    source: Source
    category: Category
    document: bytes

    def polygons(self) -> list[svgio.Polygon]:
        return svgio.parse_svg(self.document)


@dataclass(frozen=True)
class ParseFailure:
    file: str
    reason: str


@dataclass
class IconManifest:
    source: Source
    assets: list[IconAsset] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.assets)

    def by_id(self, icon_id: str) -> IconAsset:
        for a in self.assets:
            if a.id == icon_id:
                return a
        raise KeyError(icon_id)

    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for a in self.assets:
            counts[a.category.value] = counts.get(a.category.value, 0) + 1
        return counts

    def checksum(self) -> str:
        # Covers ids, order and categories only: editing a glyph's bytes
        # without renaming it does not change the manifest identity.
        h = hashlib.sha256()
        for a in self.assets:
            h.update(f"{a.id}\t{a.source.value}\t{a.category.value}\n".encode())
        return h.hexdigest()


@dataclass
class IngestResult:
    manifest: IconManifest
    failures: list[ParseFailure]


def load_category_map(path: str | Path) -> dict[str, Category]:
    """Read a two-column (id, category) delimited text file."""
    table: dict[str, Category] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split(",")
        if len(parts) != 2:
            raise ValueError(f"bad category map line: {line!r}")
        table[parts[0].strip()] = Category(parts[1].strip().lower())
    return table


def ingest_dir(
    path: str | Path,
    source: Source,
    category_map: dict[str, Category] | None = None,
) -> IngestResult:
    """Normalize every SVG under `path` into a sorted manifest.

    Unparsable files are collected into the failure report instead of being
    dropped silently. Raises EmptyDirectoryError when no SVG files exist and
    CategoryCountViolation when a curated collection does not hold exactly
    100 assets per category.
    """
    root = Path(path)
    if not root.is_dir():
        raise EmptyDirectoryError(f"not a directory: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".svg")
    if not files:
        raise EmptyDirectoryError(f"no .svg files under {root}")

    assets: list[IconAsset] = []
    failures: list[ParseFailure] = []
    for f in files:
        icon_id = f.stem
        try:
            doc = svgio.normalize(f.read_bytes())
        except (svgio.SvgParseError, OSError) as exc:
            failures.append(ParseFailure(file=f.name, reason=str(exc)))
            continue
        if category_map is not None:
            category = category_map.get(icon_id, Category.UNCATEGORIZED)
        else:
            category = Category.UNCATEGORIZED
        assets.append(IconAsset(id=icon_id, source=source, category=category, document=doc))

    assets.sort(key=lambda a: a.id)
    manifest = IconManifest(source=source, assets=assets)

    if source is Source.TEST_VAL:
        counts = manifest.category_counts()
        expected = {
            Category.ARTIFICIAL.value: CURATED_PER_CATEGORY,
            Category.NATURAL.value: CURATED_PER_CATEGORY,
            Category.SYMBOLIC.value: CURATED_PER_CATEGORY,
        }
        if counts != expected:
            raise CategoryCountViolation(counts)
    return IngestResult(manifest=manifest, failures=failures)


def sample_icon(manifest: IconManifest, rng: np.random.Generator) -> IconAsset:
    """Uniform draw over the manifest, fully determined by the rng state."""
    if len(manifest) == 0:
        raise EmptyManifestError("cannot sample from an empty manifest")
    return manifest.assets[int(rng.integers(0, len(manifest)))]


# --- on-disk format: icons/<id>.svg plus a line-oriented index with a
#     checksum footer.

MANIFEST_NAME = "icons.manifest"


def write_manifest(manifest: IconManifest, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    icon_dir = out / "icons"
    icon_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for a in manifest.assets:
        (icon_dir / f"{a.id}.svg").write_bytes(a.document)
        lines.append(f"{a.id}\t{a.source.value}\t{a.category.value}")
    body = "\n".join(lines) + "\n"
    path = out / MANIFEST_NAME
    path.write_text(body + f"# checksum: {manifest.checksum()}\n")
    return path


def load_manifest(dir_path: str | Path) -> IconManifest:
    root = Path(dir_path)
    lines = (root / MANIFEST_NAME).read_text().splitlines()
    assets = []
    source = Source.TRAIN
    for line in lines:
        if line.startswith("# checksum:"):
            continue
        icon_id, src, cat = line.split("\t")
        source = Source(src)
        doc = (root / "icons" / f"{icon_id}.svg").read_bytes()
        assets.append(
            IconAsset(id=icon_id, source=source, category=Category(cat), document=doc)
        )
    manifest = IconManifest(source=source, assets=assets)
    stated = next(
        (l.split(":", 1)[1].strip() for l in lines if l.startswith("# checksum:")), None
    )
    if stated is not None and stated != manifest.checksum():
        raise ValueError(f"manifest checksum mismatch in {root}")
    return manifest
