"""Affine label-space surrogates of a retrained classifier's decision.

For one test point a surrogate is ``margin(Y) = bias + sum_i w_i Y_i`` over
training-label vectors ``Y``; the predicted label is +1 iff the margin is
nonnegative. Both builders are exact at the observed labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidArgument
from .gbdt import DENOM_EPS, GBDTProfile
from .logreg import LRProfile


@dataclass(frozen=True, eq=False)
class LinearSurrogate:
    test_index: int
    bias: float
    coeffs: np.ndarray
    expected_label: int

    def __post_init__(self):
        if self.expected_label not in (-1, 1):
            raise InvalidArgument("expected_label must be -1 or +1")
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def support(self) -> np.ndarray:
        """Training indices with a nonzero coefficient."""
        return np.flatnonzero(self.coeffs)

    def to_dict(self) -> dict:
        return {
            "test_index": int(self.test_index),
            "bias": float(self.bias),
            "coeffs": [float(v) for v in self.coeffs],
            "expected_label": int(self.expected_label),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSurrogate":
        return cls(int(d["test_index"]), float(d["bias"]), np.array(d["coeffs"], float), int(d["expected_label"]))


def build_lr_surrogate(profile: LRProfile, x, test_index: int = 0, expected_label: int = 1) -> LinearSurrogate:
    """bias = theta_prev . x, w_i = alpha * g_i * (x_i . x)."""
    x = np.asarray(x, dtype=float)
    if profile.features is None:
        raise InvalidArgument("LR profile has no training features attached")
    if x.shape != profile.theta_prev.shape:
        raise DimensionMismatch(f"profile dimension {profile.theta_prev.shape[0]}, point shape {x.shape}")
    shrink = 1.0 - profile.alpha_last * profile.l2_penalty
    bias = shrink * float(profile.theta_prev @ x)
    coeffs = profile.alpha_last * profile.g * (profile.features @ x)
    return LinearSurrogate(test_index, bias, coeffs, expected_label)


def gbdt_coefficients(profile: GBDTProfile, x) -> np.ndarray:
    """Per-label sensitivity: sum over trees of sigma / D for the leaf shared with ``x``."""
    w = np.zeros(profile.labels.shape[0])
    for n, k in enumerate(profile.leaf_path(x)):
        d = profile.denominators[n][k]
        if d < DENOM_EPS:
            continue
        w[profile.members[n][k]] += profile.sigma / d
    return w


def build_gbdt_surrogate(profile: GBDTProfile, x, test_index: int = 0, expected_label: int = 1) -> LinearSurrogate:
    """Margin ``s(x) + sum_i (Y_i - y_i) w_i`` with trees held fixed."""
    x = np.asarray(x, dtype=float)
    if x.shape != (profile.dim,):
        raise DimensionMismatch(f"profile dimension {profile.dim}, point shape {x.shape}")
    w = gbdt_coefficients(profile, x)
    path = profile.leaf_path(x)
    score = 0.0
    for n, k in enumerate(path):
        score += profile.trees[n].leaves()[k].score
    bias = score - float(profile.labels @ w)
    return LinearSurrogate(test_index, bias, w, expected_label)


def build_surrogate(profile, x, test_index: int = 0, expected_label: int = 1) -> LinearSurrogate:
    if isinstance(profile, LRProfile):
        return build_lr_surrogate(profile, x, test_index, expected_label)
    if isinstance(profile, GBDTProfile):
        return build_gbdt_surrogate(profile, x, test_index, expected_label)
    raise InvalidArgument(f"unsupported profile type {type(profile).__name__}")


def _check_world(s: LinearSurrogate, world) -> np.ndarray:
    world = np.asarray(world)
    if world.shape != (s.n,):
        raise DimensionMismatch(f"world has shape {world.shape}, surrogate expects ({s.n},)")
    return world


def margin(s: LinearSurrogate, world) -> float:
    world = _check_world(s, world)
    return s.bias + float(s.coeffs @ world)


def sign_label(m) -> int:
    return 1 if m >= 0 else -1


def decision(s: LinearSurrogate, world) -> int:
    return sign_label(margin(s, world))


def flip_delta(s: LinearSurrogate, m: float, i: int, world) -> float:
    """Margin after negating label ``i`` of ``world``, given its current margin ``m``."""
    if not 0 <= i < s.n:
        raise IndexError(f"label index {i} out of range for {s.n} labels")
    return m - 2.0 * float(world[i]) * float(s.coeffs[i])


def misclassified(s: LinearSurrogate, world) -> bool:
    return decision(s, world) != s.expected_label


def predicate_holds(surrogates: Sequence[LinearSurrogate], world) -> bool:
    """True iff every surrogate's test point is misclassified in ``world``."""
    if not surrogates:
        raise InvalidArgument("need at least one surrogate")
    return all(misclassified(s, world) for s in surrogates)
