import numpy as np
import pytest

from oddgrid import icons, svgio


def blob_svg(seed: int) -> bytes:
    """Asymmetric radial polygon with a bar, in a 24x24 viewbox."""
    rng = np.random.default_rng([424242, seed])
    n = int(rng.integers(5, 9))
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = rng.uniform(0.45, 1.0, n)
    pts = [
        (12 + 8.5 * r * np.cos(a), 12 + 8.5 * r * np.sin(a))
        for a, r in zip(angles, radii)
    ]
    d = "M" + "L".join(f"{x:.3f},{y:.3f}" for x, y in pts) + "Z"
    bx = 12 + float(rng.uniform(-4, 2))
    bar = f"M{bx:.3f},4 L{bx + 2.5:.3f},4 L{bx + 2.5:.3f},12 L{bx:.3f},12 Z"
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 24 24">'
        f'<path d="{d}{bar}"/></svg>'
    ).encode()


def regular_svg(sides: int = 6) -> bytes:
    """Regular polygon: centroid sits at the cell center after normalization."""
    pts = [
        (12 + 9 * np.cos(2 * np.pi * i / sides), 12 + 9 * np.sin(2 * np.pi * i / sides))
        for i in range(sides)
    ]
    d = "M" + "L".join(f"{x:.4f},{y:.4f}" for x, y in pts) + "Z"
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 24 24">'
        f'<path d="{d}"/></svg>'
    ).encode()


def disk_svg() -> bytes:
    """Disk: the minimum-reach glyph (radius 0.45 after normalization), used
    where clipping headroom is tightest."""
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 24 24">'
        '<circle cx="12" cy="12" r="9"/></svg>'
    ).encode()


def asset_from_svg(svg: bytes, icon_id: str = "probe",
                   source: icons.Source = icons.Source.TRAIN) -> icons.IconAsset:
    return icons.IconAsset(
        id=icon_id,
        source=source,
        category=icons.Category.UNCATEGORIZED,
        document=svgio.normalize(svg),
    )


@pytest.fixture(scope="session")
def curated_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("curated")
    lines = []
    cats = [icons.Category.ARTIFICIAL, icons.Category.NATURAL, icons.Category.SYMBOLIC]
    for i in range(300):
        name = f"icon_{i:03d}"
        (root / f"{name}.svg").write_bytes(blob_svg(i))
        lines.append(f"{name}\t{cats[i // 100].value}")
    (root / "categories.tsv").write_text("\n".join(lines) + "\n")
    return root


@pytest.fixture(scope="session")
def curated_manifest(curated_dir):
    cat_map = icons.load_category_map(curated_dir / "categories.tsv")
    result = icons.ingest_dir(curated_dir, icons.Source.TEST_VAL, category_map=cat_map)
    assert not result.failures
    return result.manifest


@pytest.fixture(scope="session")
def train_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("train_icons")
    for i in range(60):
        (root / f"t_{i:03d}.svg").write_bytes(blob_svg(1000 + i))
    return icons.ingest_dir(root, icons.Source.TRAIN).manifest


@pytest.fixture(scope="session")
def probe_icon():
    return asset_from_svg(blob_svg(7))


@pytest.fixture(scope="session")
def symmetric_icon():
    return asset_from_svg(regular_svg(), icon_id="hexagon")


@pytest.fixture(scope="session")
def disk_icon():
    return asset_from_svg(disk_svg(), icon_id="disk")
