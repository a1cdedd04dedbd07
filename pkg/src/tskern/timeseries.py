"""Variable-length multivariate series: containers, file formats, synthetic data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """A dataset file, record, or container failed validation."""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """An ordered sequence of d-dimensional points, stored as an (n, d) float array.

    The array is copied on construction and frozen (read-only) afterwards.
    One-dimensional input is promoted to a single-column array.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise DatasetError(f"series must be a 2-d array of points, got ndim={arr.ndim}")
        if arr.shape[0] < 1:
            raise DatasetError("empty sequence: a series needs at least one point")
        if arr.shape[1] < 1:
            raise DatasetError("points need at least one coordinate")
        if not np.all(np.isfinite(arr)):
            raise DatasetError("non-finite coordinate in series")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class LabeledItem:
    id: str
    label: str
    series: TimeSeries

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DatasetError(f"item id must be a non-empty string, got {self.id!r}")
        if not isinstance(self.label, str) or not self.label:
            raise DatasetError(f"item label must be a non-empty string, got {self.label!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledItem):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and self.series == other.series
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """An ordered collection of labeled series with unique ids and one shared dim."""

    items: tuple[LabeledItem, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise DatasetError("dataset must contain at least one item")
        seen = set()
        for it in items:
            if it.id in seen:
                raise DatasetError(f"duplicate id {it.id!r}")
            seen.add(it.id)
        d = items[0].series.dim
        for it in items:
            if it.series.dim != d:
                raise DatasetError(
                    f"dimension mismatch for id {it.id!r}: expected d={d}, got d={it.series.dim}"
                )
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return self.items == other.items

    @property
    def dim(self) -> int:
        return self.items[0].series.dim

    def ids(self) -> tuple[str, ...]:
        return tuple(it.id for it in self.items)

    def labels(self) -> tuple[str, ...]:
        """Distinct labels in first-appearance order."""
        out: list[str] = []
        for it in self.items:
            if it.label not in out:
                out.append(it.label)
        return tuple(out)

    def get(self, item_id: str) -> LabeledItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise DatasetError(f"no item with id {item_id!r}")


# ---------------------------------------------------------------------------
# File formats


def _detect_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("jsonl", "csv"):
            raise DatasetError(f"unknown dataset format {fmt!r} (expected 'jsonl' or 'csv')")
        return fmt
    suffix = path.suffix.lower()
    if suffix == ".jsonl":
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise DatasetError(
        f"cannot infer format from {path.name!r}; pass format='jsonl' or format='csv'"
    )


def load_dataset(path, format: str | None = None) -> LabeledDataset:
    """Read a dataset from a .jsonl or .csv file (format inferred from the extension)."""
    path = Path(path)
    fmt = _detect_format(path, format)
    if fmt == "jsonl":
        return _load_jsonl(path)
    return _load_csv(path)


def write_dataset(ds: LabeledDataset, path, format: str | None = None) -> Path:
    path = Path(path)
    fmt = _detect_format(path, format)
    if fmt == "jsonl":
        _write_jsonl(ds, path)
    else:
        _write_csv(ds, path)
    return path


def _load_jsonl(path: Path) -> LabeledDataset:
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path.name} line {lineno}: invalid JSON ({e.msg})") from None
            if not isinstance(rec, dict):
                raise DatasetError(f"{path.name} line {lineno}: record must be an object")
            missing = {"id", "label", "values"} - rec.keys()
            if missing:
                raise DatasetError(
                    f"{path.name} line {lineno}: missing keys {sorted(missing)}"
                )
            try:
                series = TimeSeries(_ragged_check(rec["values"]))
                items.append(LabeledItem(rec["id"], rec["label"], series))
            except DatasetError as e:
                raise DatasetError(f"{path.name} line {lineno}: {e}") from None
    if not items:
        raise DatasetError(f"{path.name}: no records")
    return LabeledDataset(tuple(items))


def _ragged_check(values) -> np.ndarray:
    if not isinstance(values, list) or not values:
        raise DatasetError("'values' must be a non-empty list of points")
    widths = set()
    for pt in values:
        if not isinstance(pt, list):
            raise DatasetError("each point must be a list of coordinates")
        widths.add(len(pt))
    if len(widths) != 1:
        raise DatasetError(f"ragged points: widths {sorted(widths)}")
    return np.asarray(values, dtype=float)


def _write_jsonl(ds: LabeledDataset, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for it in ds.items:
            rec = {"id": it.id, "label": it.label, "values": it.series.values.tolist()}
            fh.write(json.dumps(rec) + "\n")


def _csv_header(dim: int) -> list[str]:
    return ["id", "label", "t"] + [f"f{k}" for k in range(1, dim + 1)]


def _load_csv(path: Path) -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path.name}: empty file") from None
        if len(header) < 4 or header[:3] != ["id", "label", "t"]:
            raise DatasetError(f"{path.name}: header must start with id,label,t,f1,...")
        dim = len(header) - 3
        if header != _csv_header(dim):
            raise DatasetError(f"{path.name}: feature columns must be f1..f{dim} in order")

        items = []
        closed: set[str] = set()
        cur_id: str | None = None
        cur_label = ""
        cur_rows: list[list[float]] = []

        def close_current():
            try:
                items.append(LabeledItem(cur_id, cur_label, TimeSeries(np.asarray(cur_rows))))
            except DatasetError as e:
                raise DatasetError(f"{path.name} id {cur_id!r}: {e}") from None
            closed.add(cur_id)

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 + dim:
                raise DatasetError(f"{path.name} line {lineno}: expected {3 + dim} fields, got {len(row)}")
            rid, label, t_str, *coords = row
            if rid != cur_id:
                if cur_id is not None:
                    close_current()
                if rid in closed:
                    raise DatasetError(f"{path.name} line {lineno}: rows for id {rid!r} are not contiguous")
                cur_id, cur_label, cur_rows = rid, label, []
            if label != cur_label:
                raise DatasetError(f"{path.name} line {lineno}: label changed within id {rid!r}")
            try:
                t = int(t_str)
            except ValueError:
                raise DatasetError(f"{path.name} line {lineno}: t must be an integer, got {t_str!r}") from None
            if t != len(cur_rows):
                raise DatasetError(
                    f"{path.name} line {lineno}: t out of order for id {rid!r} (expected {len(cur_rows)}, got {t})"
                )
            try:
                cur_rows.append([float(v) for v in coords])
            except ValueError:
                raise DatasetError(f"{path.name} line {lineno}: non-numeric coordinate") from None
        if cur_id is None:
            raise DatasetError(f"{path.name}: no data rows")
        close_current()
    return LabeledDataset(tuple(items))


def _write_csv(ds: LabeledDataset, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_csv_header(ds.dim))
        for it in ds.items:
            for t, pt in enumerate(it.series.values):
                writer.writerow([it.id, it.label, t] + [repr(float(v)) for v in pt])


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a seeded synthetic classification dataset.

    Each class c has a fixed waveform prototype; series are sampled on a
    (optionally warped) time grid over [0, 1], with per-point Gaussian noise
    and per-series length jitter around base_length.
    """

    num_classes: int
    per_class: int
    dim: int = 1
    base_length: int = 50
    length_jitter: float = 0.0
    noise_sigma: float = 0.0
    warp_strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.base_length < 1:
            raise ValueError("base_length must be >= 1")
        if not 0.0 <= self.length_jitter < 1.0:
            raise ValueError("length_jitter must lie in [0, 1)")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.warp_strength < 1.0:
            raise ValueError("warp_strength must lie in [0, 1)")


# Benchmark-sized default; also the CLI's synth defaults.
DEFAULT_SYNTH = SynthSpec(
    num_classes=3,
    per_class=40,
    dim=2,
    base_length=50,
    length_jitter=0.1,
    noise_sigma=0.1,
    warp_strength=0.2,
    seed=7,
)


def _warped_grid(rng: np.random.Generator, n: int, strength: float) -> np.ndarray:
    # Strictly increasing sample times covering [0, 1]; identity grid at strength 0.
    u = rng.uniform(-1.0, 1.0, size=max(n - 1, 0))
    if n == 1:
        return np.zeros(1)
    inc = 1.0 + strength * u
    t = np.concatenate(([0.0], np.cumsum(inc)))
    return t / t[-1]


def _prototype(freq: float, class_phase: float, t: np.ndarray, dim: int) -> np.ndarray:
    cols = []
    for j in range(dim):
        ph = math.pi * j / dim
        cols.append(
            np.sin(2.0 * np.pi * freq * t + ph)
            + 0.5 * np.sin(4.0 * np.pi * freq * t + class_phase + ph)
        )
    return np.stack(cols, axis=1)


def generate_synthetic(spec: SynthSpec) -> LabeledDataset:
    """Generate the dataset described by spec. Same spec, same bytes."""
    rng = np.random.default_rng(spec.seed)
    lo = max(1, int(round(spec.base_length * (1.0 - spec.length_jitter))))
    hi = int(round(spec.base_length * (1.0 + spec.length_jitter)))
    items = []
    for c in range(spec.num_classes):
        freq = 1.0 + 0.5 * c
        for s in range(spec.per_class):
            n = int(rng.integers(lo, hi + 1))
            t = _warped_grid(rng, n, spec.warp_strength)
            pts = _prototype(freq, float(c), t, spec.dim)
            pts = pts + rng.normal(0.0, spec.noise_sigma, size=pts.shape)
            items.append(LabeledItem(f"c{c}_s{s:03d}", f"c{c}", TimeSeries(pts)))
    return LabeledDataset(tuple(items))


def split_train_test(
    ds: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified split; every label lands on both sides at least once."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    test_pos: set[int] = set()
    for lab in ds.labels():
        idx = [i for i, it in enumerate(ds.items) if it.label == lab]
        if len(idx) < 2:
            raise DatasetError(f"label {lab!r} has fewer than 2 items; cannot split")
        n_test = int(round(test_fraction * len(idx)))
        n_test = min(max(n_test, 1), len(idx) - 1)
        order = rng.permutation(len(idx))
        test_pos.update(idx[k] for k in order[:n_test])
    train = tuple(it for i, it in enumerate(ds.items) if i not in test_pos)
    test = tuple(it for i, it in enumerate(ds.items) if i in test_pos)
    return LabeledDataset(train), LabeledDataset(test)
