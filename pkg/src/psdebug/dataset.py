"""Labeled datasets: generation, CSV persistence, splitting and label noise."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySelection, InvalidArgument, ParseError

LABELS = (-1, 1)


class LabeledPoint(NamedTuple):
    features: np.ndarray
    label: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered, immutable collection of labeled feature vectors.

    ``X`` has shape ``(N, dim)`` and ``y`` holds labels in {-1, +1}. Row ``i``
    keeps index ``i`` under :meth:`with_labels`, so noise records and PS
    estimates can refer to training points by position.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise InvalidArgument(f"features must be a 2-D array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(f"{X.shape[0]} feature rows but {y.shape} labels")
        if X.shape[1] < 1:
            raise InvalidArgument("feature dimension must be positive")
        if not np.all(np.isfinite(X)):
            raise InvalidArgument("features must be finite")
        if y.size and not np.all((y == 1) | (y == -1)):
            raise InvalidArgument("labels must be -1 or +1")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y.astype(np.int64)))

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.int64))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i: int) -> LabeledPoint:
        return LabeledPoint(self.X[i], int(self.y[i]))

    def __iter__(self) -> Iterator[LabeledPoint]:
        for i in range(len(self)):
            yield self[i]

    @property
    def points(self) -> list[LabeledPoint]:
        return list(self)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    def allclose(self, other: "Dataset", atol: float = 1e-12) -> bool:
        return (
            self.X.shape == other.X.shape
            and np.allclose(self.X, other.X, rtol=0.0, atol=atol)
            and np.array_equal(self.y, other.y)
        )

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.X, np.asarray(y))

    def with_flipped(self, indices: Sequence[int]) -> "Dataset":
        """Copy with the labels at ``indices`` negated."""
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self)):
            raise InvalidArgument("flip index out of range")
        y = self.y.copy()
        y[idx] = -y[idx]
        return self.with_labels(y)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx])


# ---------------------------------------------------------------- generators


def _interleave(X, y, rng) -> Dataset:
    order = rng.permutation(len(y))
    return Dataset(X[order], y[order])


def gen_2gauss(n_points: int, separation: float = 6.0, seed: int = 0) -> Dataset:
    """Two unit-variance isotropic Gaussians centred at (-sep/2, 0) and (+sep/2, 0).

    The first ``n_points // 2`` draws get label -1, the rest +1; rows are then
    shuffled.
    """
    if n_points < 2:
        raise InvalidArgument("n_points must be at least 2")
    if not separation > 0:
        raise InvalidArgument("separation must be positive")
    rng = np.random.default_rng(seed)
    n_neg = n_points // 2
    centers = np.zeros((n_points, 2))
    centers[:n_neg, 0] = -separation / 2
    centers[n_neg:, 0] = separation / 2
    X = centers + rng.standard_normal((n_points, 2))
    y = np.where(np.arange(n_points) < n_neg, -1, 1)
    return _interleave(X, y, rng)


def gen_concentric(
    n_points: int,
    inner_radius: float = 1.0,
    outer_radius: float = 3.0,
    seed: int = 0,
    radial_sd: float = 0.35,
) -> Dataset:
    """Two rings: label -1 near ``inner_radius``, +1 near ``outer_radius``."""
    if n_points < 1:
        raise InvalidArgument("n_points must be positive")
    if not 0 < inner_radius < outer_radius:
        raise InvalidArgument("need 0 < inner_radius < outer_radius")
    rng = np.random.default_rng(seed)
    n_neg = n_points // 2
    y = np.where(np.arange(n_points) < n_neg, -1, 1)
    radius = np.where(y < 0, inner_radius, outer_radius) + radial_sd * rng.standard_normal(n_points)
    angle = rng.uniform(0.0, 2 * math.pi, n_points)
    X = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return _interleave(X, y, rng)


GENERATORS = {"2gauss": gen_2gauss, "concentric": gen_concentric}


# ---------------------------------------------------------------------- CSV


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j + 1}" for j in range(ds.dim)] + ["label"])
        for x, label in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in x] + [str(int(label))])


def load_csv(path) -> Dataset:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=path) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file, expected header", path=path, line=1)
        header = [h.strip() for h in header]
        dim = len(header) - 1
        if dim < 1 or header[-1] != "label" or header[:-1] != [f"f{j + 1}" for j in range(dim)]:
            raise ParseError("malformed header, expected f1,...,fn,label", path=path, line=1)
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != dim + 1:
                raise ParseError(f"expected {dim + 1} fields, got {len(row)}", path=path, line=line)
            try:
                feats = [float(v) for v in row[:-1]]
            except ValueError:
                raise ParseError("non-numeric feature", path=path, line=line) from None
            if not all(math.isfinite(v) for v in feats):
                raise ParseError("non-finite feature", path=path, line=line)
            lab = row[-1].strip()
            if lab not in ("-1", "1", "+1"):
                raise ParseError(f"label must be -1 or 1, got {lab!r}", path=path, line=line)
            rows.append(feats)
            labels.append(int(lab))
    if not rows:
        return Dataset.empty(dim)
    return Dataset(np.array(rows), np.array(labels))


# -------------------------------------------------------------------- split


def split(ds: Dataset, train_frac: float, test_frac: float, seed: int = 0):
    """Shuffle and partition into (train, test, validation).

    Sizes are ``round(train_frac * N)``, ``round(test_frac * N)`` and the
    remainder.
    """
    if not (0 < train_frac < 1 and 0 < test_frac < 1 and train_frac + test_frac < 1):
        raise InvalidArgument("fractions must be positive and sum to less than 1")
    n = len(ds)
    n_train = int(round(train_frac * n))
    n_test = int(round(test_frac * n))
    order = np.random.default_rng(seed).permutation(n)
    return (
        ds.subset(order[:n_train]),
        ds.subset(order[n_train : n_train + n_test]),
        ds.subset(order[n_train + n_test :]),
    )


# -------------------------------------------------------------------- noise

_OPS = {
    ">": np.greater,
    ">=": np.greater_equal,
    "<": np.less,
    "<=": np.less_equal,
    "==": np.equal,
}


@dataclass(frozen=True)
class Selector:
    """Predicate ``x[feature] <op> value`` over a single feature."""

    feature: int
    op: str
    value: float

    def __post_init__(self):
        if self.op not in _OPS:
            raise InvalidArgument(f"unknown selector op {self.op!r}")

    def matches(self, X: np.ndarray) -> np.ndarray:
        if not 0 <= self.feature < X.shape[1]:
            raise InvalidArgument(f"selector feature {self.feature} out of range")
        return _OPS[self.op](X[:, self.feature], self.value)

    def describe(self) -> str:
        return f"f{self.feature + 1} {self.op} {self.value!r}"


@dataclass(frozen=True)
class NoiseSpec:
    mode: str = "random"
    rate: float = 0.1
    selector: Selector | None = None
    forced_label: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "systematic"):
            raise InvalidArgument(f"unknown noise mode {self.mode!r}")
        if not 0 <= self.rate <= 0.5:
            raise InvalidArgument("noise rate must be in [0, 0.5]")
        if self.mode == "systematic":
            if self.selector is None or self.forced_label not in LABELS:
                raise InvalidArgument("systematic noise needs a selector and forced_label in {-1, 1}")


@dataclass(frozen=True)
class NoiseRecord:
    flipped_indices: tuple[int, ...]
    original_labels: dict[int, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.flipped_indices)

    def restore(self, ds: Dataset) -> Dataset:
        y = ds.y.copy()
        for i, label in self.original_labels.items():
            y[i] = label
        return ds.with_labels(y)


def inject_noise(ds: Dataset, spec: NoiseSpec) -> tuple[Dataset, NoiseRecord]:
    n = len(ds)
    y = ds.y.copy()
    if spec.mode == "random":
        k = int(round(spec.rate * n))
        if k < 1:
            raise InvalidArgument(f"rate {spec.rate} flips no labels on {n} points")
        idx = np.sort(np.random.default_rng(spec.seed).choice(n, size=k, replace=False))
        y[idx] = -y[idx]
    else:
        selected = spec.selector.matches(ds.X)
        if not selected.any():
            raise EmptySelection(f"selector {spec.selector.describe()} matches no points")
        y[selected] = spec.forced_label
        idx = np.flatnonzero(y != ds.y)
    record = NoiseRecord(
        tuple(int(i) for i in idx), {int(i): int(ds.y[i]) for i in idx}
    )
    return ds.with_labels(y), record
