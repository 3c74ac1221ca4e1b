"""Dataset ingestion, image preprocessing and benchmark-score parsing.

Datasets follow the class-folder convention: one subdirectory per
class, image files inside.  Ingestion is deterministic (classes sorted
by name, images sorted by filename) so downstream artifacts never
depend on filesystem iteration order.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from texgram.errors import DataError
from texgram.stats import BRAINSCORE_METRICS, BrainScoreRecord

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass
class DatasetIndex:
    items: list[tuple[str, int]]  # (image path, class id), deterministic order
    class_names: list[str]
    counts: list[int]

    @property
    def labels(self) -> np.ndarray:
        return np.array([cid for _, cid in self.items], dtype=np.int64)

    @property
    def item_ids(self) -> list[str]:
        return [
            f"{self.class_names[cid]}/{Path(path).name}" for path, cid in self.items
        ]


def ingest_dataset(root) -> DatasetIndex:
    """Index a class-folder dataset deterministically."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"dataset root {root} contains no class directories")
    items: list[tuple[str, int]] = []
    class_names = []
    counts = []
    for cid, cdir in enumerate(class_dirs):
        class_names.append(cdir.name)
        files = sorted(
            p for p in cdir.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
        )
        if not files:
            raise DataError(f"class directory {cdir.name!r} contains no images")
        stems = [p.stem for p in files]
        if len(set(stems)) != len(stems):
            dupes = sorted({s for s in stems if stems.count(s) > 1})
            raise DataError(f"duplicate filenames in class {cdir.name!r}: {dupes}")
        for p in files:
            if not os.access(p, os.R_OK):
                raise DataError(f"unreadable image {p}")
            items.append((str(p), cid))
        counts.append(len(files))
    return DatasetIndex(items=items, class_names=class_names, counts=counts)


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Classic bilinear resampling with half-pixel alignment, clamped edges.

    ``img`` is H x W or H x W x C float; the output grid point (i, j)
    samples source coordinate ((i + 0.5) * H / out_h - 0.5, ...).
    """
    img = np.asarray(img, dtype=np.float64)
    H, W = img.shape[0], img.shape[1]
    ys = (np.arange(out_h) + 0.5) * (H / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (W / out_w) - 0.5
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    ty = ys - y0
    tx = xs - x0
    y0c = np.clip(y0, 0, H - 1).astype(np.intp)
    y1c = np.clip(y0 + 1, 0, H - 1).astype(np.intp)
    x0c = np.clip(x0, 0, W - 1).astype(np.intp)
    x1c = np.clip(x0 + 1, 0, W - 1).astype(np.intp)
    if img.ndim == 2:
        wy = ty[:, None]
        wx = tx[None, :]
        rows = img[y0c] * (1 - wy) + img[y1c] * wy
        return rows[:, x0c] * (1 - wx) + rows[:, x1c] * wx
    wy = ty[:, None, None]
    wx = tx[None, :, None]
    rows = img[y0c] * (1 - wy) + img[y1c] * wy
    return rows[:, x0c] * (1 - wx) + rows[:, x1c] * wx


def preprocess_image(path, input_spec) -> np.ndarray:
    """Decode, resize and normalize an image for a given network input spec.

    Decoding drops alpha and replicates grayscale to three channels;
    resizing is a whole-image (anisotropic) bilinear scale with no
    crop; values go to [0, 1] and are then normalized per channel with
    the bundle's mean and std.  Returns float32 C x H x W.
    """
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            raw = np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    c, h, w = input_spec.shape
    if c != 3:
        raise DataError(f"input spec expects {c} channels; only 3-channel specs are supported")
    scaled = bilinear_resize(raw / 255.0, h, w)
    chw = scaled.transpose(2, 0, 1)
    mean = np.asarray(input_spec.mean, dtype=np.float64)[:, None, None]
    std = np.asarray(input_spec.std, dtype=np.float64)[:, None, None]
    return ((chw - mean) / std).astype(np.float32)


def export_image(path, tensor, input_spec) -> None:
    """Write a normalized-space C x H x W tensor as an 8-bit PNG.

    Denormalizes with the input spec and clamps to [0, 1]; synthesis
    itself runs unconstrained, clamping happens only here.
    """
    mean = np.asarray(input_spec.mean, dtype=np.float64)[:, None, None]
    std = np.asarray(input_spec.std, dtype=np.float64)[:, None, None]
    img = np.asarray(tensor, dtype=np.float64) * std + mean
    img = np.clip(img, 0.0, 1.0)
    arr = np.round(img.transpose(1, 2, 0) * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(path)


def ingest_brainscore_csv(path) -> list[BrainScoreRecord]:
    """Parse a benchmark-score CSV with the fixed seven-metric header."""
    expected = ["model", *BRAINSCORE_METRICS]
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: missing header")
            if list(reader.fieldnames) != expected:
                raise DataError(
                    f"{path}: header must be exactly {','.join(expected)}, "
                    f"got {','.join(reader.fieldnames)}"
                )
            records = []
            seen = set()
            for row_no, row in enumerate(reader, start=2):
                model = (row["model"] or "").strip()
                if not model:
                    raise DataError(f"{path}:{row_no}: empty model name")
                if model in seen:
                    raise DataError(f"{path}:{row_no}: duplicate model {model!r}")
                seen.add(model)
                values = {}
                for metric in BRAINSCORE_METRICS:
                    cell = row[metric]
                    try:
                        value = float(cell)
                    except (TypeError, ValueError):
                        raise DataError(
                            f"{path}:{row_no}: non-numeric {metric} value {cell!r}"
                        ) from None
                    if not np.isfinite(value) or not 0.0 <= value <= 1.0:
                        raise DataError(
                            f"{path}:{row_no}: {metric} value {value} outside [0, 1]"
                        )
                    values[metric] = value
                records.append(BrainScoreRecord(model=model, **values))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not records:
        raise DataError(f"{path}: no data rows")
    return records


def packaged_brainscore_csv() -> Path:
    """Path of the benchmark-score fixture shipped with the package."""
    return Path(__file__).parent / "data" / "brainscore.csv"
