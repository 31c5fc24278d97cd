"""CSV ingestion, unit-interval scaling and stratified splitting.

The split shuffle is fully specified so any implementation can reproduce it
bit-exactly: per class ``c`` a SplitMix64 stream is seeded with
``mix64(seed) + c * GOLDEN`` (all arithmetic mod 2^64) and drives a
Fisher-Yates shuffle of that class's row indices, high index down, drawing
``j = next() mod (i + 1)``.  The first ``round_half_up(fraction * m_c)``
shuffled indices go to the training side.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataWarning, InvalidInput, ParseError, SplitError
from .trainer import Dataset

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class RawTable:
    """A parsed CSV: numeric features plus a label column mapped to ids 1..C."""

    header: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray
    label_dictionary: dict[str, int]

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.label_dictionary)

    def to_dataset(self) -> Dataset:
        return Dataset(self.features, self.labels)

    def with_features(self, features: np.ndarray) -> "RawTable":
        return RawTable(self.header, features, self.labels, self.label_dictionary)


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature minima and maxima observed on the fitted block."""

    lo: np.ndarray
    hi: np.ndarray

    def transform(self, X: np.ndarray, clamp: bool = False) -> np.ndarray:
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.lo) / safe
        out[:, span == 0] = 0.0
        if clamp:
            out = np.clip(out, 0.0, 1.0)
        return out


@dataclass(frozen=True)
class SplitPlan:
    """Seeded, stratified train/test partition."""

    seed: int
    fraction: float
    train_by_class: dict[int, np.ndarray]

    @property
    def train_indices(self) -> np.ndarray:
        parts = [self.train_by_class[c] for c in sorted(self.train_by_class)]
        return np.sort(np.concatenate(parts))

    def test_indices(self, m: int) -> np.ndarray:
        mask = np.ones(m, dtype=bool)
        mask[self.train_indices] = False
        return np.flatnonzero(mask)


def load_csv(path, label_column: str) -> RawTable:
    """Parse a comma-separated file with one header row.

    Every non-label column must be numeric ('.' decimal separator).  The
    label dictionary maps label strings to ids 1..C in order of first
    appearance.

    Raises
    ------
    ParseError
        On a non-numeric feature cell or a missing label; carries the 1-based
        file line and column.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ParseError(f"{path}: missing header row", row=1)
        if label_column not in header:
            raise InvalidInput(f"{path}: no column named {label_column!r}")
        label_pos = header.index(label_column)
        feat_pos = [j for j in range(len(header)) if j != label_pos]

        rows: list[list[float]] = []
        labels: list[int] = []
        label_dict: dict[str, int] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{line_no}: expected {len(header)} cells, "
                                 f"got {len(row)}", row=line_no)
            raw_label = row[label_pos].strip()
            if not raw_label:
                raise ParseError(f"{path}:{line_no}: missing label",
                                 row=line_no, col=label_pos + 1)
            if raw_label not in label_dict:
                label_dict[raw_label] = len(label_dict) + 1
            labels.append(label_dict[raw_label])
            vals = []
            for j in feat_pos:
                try:
                    vals.append(float(row[j]))
                except ValueError:
                    raise ParseError(f"{path}:{line_no}: column {j + 1} is not numeric: "
                                     f"{row[j]!r}", row=line_no, col=j + 1) from None
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows", row=1)
    features = np.asarray(rows, dtype=float)
    header_out = tuple(header[j] for j in feat_pos)
    return RawTable(header_out, features, np.asarray(labels, dtype=int), label_dict)


def scale_unit_interval(table: RawTable, mode: str = "whole-dataset",
                        train_indices: np.ndarray | None = None
                        ) -> tuple[RawTable, ScalingParams]:
    """Map each feature linearly onto [0, 1].

    ``whole-dataset`` (default) fits the minima/maxima on every row;
    ``fit-on-train`` fits on ``train_indices`` only and clamps the remaining
    rows into [0, 1].  Constant features map to 0 with a warning.
    """
    X = table.features
    if mode == "whole-dataset":
        block = X
    elif mode == "fit-on-train":
        if train_indices is None:
            raise InvalidInput("fit-on-train scaling needs train_indices")
        block = X[train_indices]
    else:
        raise InvalidInput(f"unknown scaling mode {mode!r}")
    lo = block.min(axis=0)
    hi = block.max(axis=0)
    if np.any(hi == lo):
        flat = [table.header[j] for j in np.flatnonzero(hi == lo)]
        warnings.warn(f"constant feature(s) mapped to 0: {', '.join(flat)}",
                      DataWarning, stacklevel=2)
    params = ScalingParams(lo, hi)
    scaled = params.transform(X, clamp=(mode == "fit-on-train"))
    return table.with_features(scaled), params


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _mix64(z: int) -> int:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class _SplitMix64:
    """Counter-based 64-bit generator; output i is a mix of state + i*GOLDEN."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


def _shuffled(indices: np.ndarray, stream: _SplitMix64) -> np.ndarray:
    out = indices.copy()
    for i in range(out.size - 1, 0, -1):
        j = stream.next() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def stratified_split(table: RawTable | Dataset, fraction: float = 0.75,
                     seed: int = 0) -> SplitPlan:
    """Proportional random train/test split.

    Each class keeps ``round_half_up(fraction * m_c)`` samples in the
    training side, so class proportions match the full table to within one
    sample per class.  Identical (table, fraction, seed) give bit-identical
    plans on every platform.

    Raises
    ------
    SplitError
        If any class has fewer than 2 samples.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidInput(f"fraction must be in (0, 1), got {fraction}")
    labels = table.labels if isinstance(table, (RawTable, Dataset)) else np.asarray(table)
    classes = np.unique(labels)
    train_by_class: dict[int, np.ndarray] = {}
    root = _mix64(int(seed))
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise SplitError(f"class {int(c)} has {idx.size} sample(s); need at least 2")
        stream = _SplitMix64(root + int(c) * _GOLDEN)
        shuffled = _shuffled(idx, stream)
        k = round_half_up(fraction * idx.size)
        train_by_class[int(c)] = np.sort(shuffled[:k])
    return SplitPlan(int(seed), float(fraction), train_by_class)
