"""Probability-of-sufficiency estimation over counterfactual label worlds.

A world is a full training-label vector drawn from a prior that flips each
observed label independently with probability ``flip_prob``. The error
predicate is "every surrogate's test point is misclassified". For label ``i``

    PS_i = P(error after restoring Y_i := y_i | Y_i != y_i, no error)

:func:`estimate_ps` draws worlds once, rejects those already showing the
error, and scores the restore intervention for every flipped label of each
accepted world. :func:`naive_ps` runs the per-label program literally and
:func:`exact_ps` sums over all 2^N worlds; both exist to check the first.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .surrogate import LinearSurrogate

BLOCK_SIZE = 1024
MIN_TRIALS = 30
MAX_EXACT_N = 20


@dataclass(frozen=True)
class PriorConfig:
    flip_prob: float = 0.1
    seed: int = 0
    num_samples: int = 100_000

    def __post_init__(self):
        if not 0 < self.flip_prob < 0.5:
            raise InvalidArgument("flip_prob must lie in (0, 0.5)")
        if self.num_samples < 1:
            raise InvalidArgument("num_samples must be positive")
        if self.seed < 0:
            raise InvalidArgument("seed must be nonnegative")


@dataclass(frozen=True)
class PSEstimate:
    index: int
    trials: int
    successes: int
    ps: float
    defined: bool
    low_confidence: bool

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "ps": self.ps,
            "trials": self.trials,
            "successes": self.successes,
            "defined": self.defined,
            "low_confidence": self.low_confidence,
        }

    @classmethod
    def from_dict(cls, d) -> "PSEstimate":
        return cls(int(d["index"]), int(d["trials"]), int(d["successes"]), float(d["ps"]),
                   bool(d["defined"]), bool(d.get("low_confidence", False)))


@dataclass
class PSReport:
    estimates: list[PSEstimate]
    threshold: float = 0.0
    accepted_worlds: int = 0
    rejected_worlds: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.estimates = sorted(self.estimates, key=lambda e: (-e.ps, e.index))

    def __len__(self):
        return len(self.estimates)

    def ps_vector(self) -> np.ndarray:
        """PS values in training-index order."""
        out = np.zeros(len(self.estimates))
        for e in self.estimates:
            out[e.index] = e.ps
        return out

    def estimate(self, index: int) -> PSEstimate:
        for e in self.estimates:
            if e.index == index:
                return e
        raise KeyError(index)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "accepted_worlds": self.accepted_worlds,
            "rejected_worlds": self.rejected_worlds,
            "metadata": self.metadata,
            "estimates": [e.to_dict() for e in self.estimates],
        }

    @classmethod
    def from_dict(cls, d) -> "PSReport":
        return cls(
            [PSEstimate.from_dict(e) for e in d["estimates"]],
            float(d.get("threshold", 0.0)),
            int(d.get("accepted_worlds", 0)),
            int(d.get("rejected_worlds", 0)),
            dict(d.get("metadata", {})),
        )


def _make_estimates(trials, successes, ps=None) -> list[PSEstimate]:
    out = []
    for i, (t, s) in enumerate(zip(trials, successes)):
        t, s = int(t), int(s)
        defined = t > 0
        value = (s / t if defined else 0.0) if ps is None else float(ps[i])
        out.append(PSEstimate(i, t, s, value, defined, t < MIN_TRIALS))
    return out


def _stack(surrogates: Sequence[LinearSurrogate], observed):
    if len(surrogates) == 0:
        raise InvalidArgument("need at least one surrogate")
    y = np.asarray(observed, dtype=np.int64)
    n = y.shape[0]
    if n == 0:
        raise InvalidArgument("no training labels")
    for s in surrogates:
        if s.n != n:
            raise InvalidArgument(f"surrogate for test {s.test_index} has {s.n} coefficients, expected {n}")
    W = np.stack([s.coeffs for s in surrogates])
    # margin at the observed labels; worlds are expressed as flips from it
    b = np.array([s.bias for s in surrogates]) + W @ y
    e = np.array([s.expected_label for s in surrogates])
    return W, b, e, y


def _error(M: np.ndarray, expected: np.ndarray) -> np.ndarray:
    """Conjunction over the last axis of "decision differs from expected label"."""
    return np.all(np.where(M >= 0, 1, -1) != expected, axis=-1)


def _flip_block(seed: int, stream: int, size: int, n: int, flip_prob: float) -> np.ndarray:
    rng = np.random.default_rng([seed, stream])
    return rng.random((size, n)) < flip_prob


def sample_world(prior: PriorConfig, observed_labels, stream: int = 0) -> np.ndarray:
    """One world from the prior. Stream ``s`` reproduces the first world of sampler block ``s``."""
    y = np.asarray(observed_labels, dtype=np.int64)
    flips = _flip_block(prior.seed, stream, 1, y.shape[0], prior.flip_prob)[0]
    return np.where(flips, -y, y)


def world_probability(world, observed_labels, flip_prob: float) -> float:
    k = int(np.sum(np.asarray(world) != np.asarray(observed_labels)))
    n = len(world)
    return flip_prob**k * (1.0 - flip_prob) ** (n - k)


def _score_block(W, b, e, y, flips):
    """Accepted count, per-label trials and successes for one block of worlds."""
    delta = -2.0 * y * W  # margin change from flipping each label, per test point
    M = b + flips @ delta.T  # (B, k)
    accepted = ~_error(M, e)
    F = flips[accepted]
    Ma = M[accepted]
    success = F.copy()
    for k in range(W.shape[0]):
        # restoring flipped label i takes delta[k, i] back out of the margin
        restored = Ma[:, k, None] - delta[k][None, :]
        success &= np.where(restored >= 0, 1, -1) != e[k]
    return int(accepted.sum()), F.sum(axis=0), success.sum(axis=0)


def estimate_ps(
    surrogates: Sequence[LinearSurrogate],
    observed_labels,
    prior: PriorConfig = PriorConfig(),
    threads: int = 1,
    aggregator: str = "conjunction",
) -> PSReport:
    """Rejection-sampled PS for every training label, sharing worlds across labels.

    Worlds are generated in fixed blocks of :data:`BLOCK_SIZE` whose random
    streams depend only on ``(prior.seed, block index)``, so the report does
    not depend on ``threads``.

    ``aggregator="mean"`` instead estimates each test point separately and
    averages the PS values.
    """
    if aggregator == "mean":
        return _mean_aggregate(surrogates, observed_labels, prior, threads)
    if aggregator != "conjunction":
        raise InvalidArgument(f"unknown aggregator {aggregator!r}")
    W, b, e, y = _stack(surrogates, observed_labels)
    n = y.shape[0]
    n_blocks = math.ceil(prior.num_samples / BLOCK_SIZE)

    def run(block):
        size = min(BLOCK_SIZE, prior.num_samples - block * BLOCK_SIZE)
        return _score_block(W, b, e, y, _flip_block(prior.seed, block, size, n, prior.flip_prob))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(k) for k in range(n_blocks)]

    accepted = sum(p[0] for p in parts)
    trials = np.sum([p[1] for p in parts], axis=0).astype(np.int64)
    successes = np.sum([p[2] for p in parts], axis=0).astype(np.int64)
    meta = _metadata(prior, surrogates, "sample-reuse")
    if accepted == 0:
        meta["diagnostic"] = "no sampled world avoided the error; all PS values undefined"
    return PSReport(
        _make_estimates(trials, successes),
        accepted_worlds=accepted,
        rejected_worlds=prior.num_samples - accepted,
        metadata=meta,
    )


def _metadata(prior: PriorConfig, surrogates, method: str) -> dict:
    return {
        "method": method,
        "seed": prior.seed,
        "num_samples": prior.num_samples,
        "flip_prob": prior.flip_prob,
        "predicate": "misclassified(" + ", ".join(f"test[{s.test_index}]" for s in surrogates) + ")",
    }


def _mean_aggregate(surrogates, observed_labels, prior, threads) -> PSReport:
    reports = [estimate_ps([s], observed_labels, prior, threads) for s in surrogates]
    n = len(reports[0])
    trials = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    total = np.zeros(n)
    count = np.zeros(n)
    for r in reports:
        for est in r.estimates:
            trials[est.index] += est.trials
            successes[est.index] += est.successes
            if est.defined:
                total[est.index] += est.ps
                count[est.index] += 1
    ps = np.divide(total, count, out=np.zeros(n), where=count > 0)
    meta = _metadata(prior, surrogates, "sample-reuse/mean")
    return PSReport(
        _make_estimates(trials, successes, ps),
        accepted_worlds=sum(r.accepted_worlds for r in reports),
        rejected_worlds=sum(r.rejected_worlds for r in reports),
        metadata=meta,
    )


def naive_ps(
    surrogates: Sequence[LinearSurrogate],
    observed_labels,
    prior: PriorConfig = PriorConfig(),
) -> PSReport:
    """Per-label program run literally: sample, require Y_i != y_i, require no
    error, restore Y_i, return the error indicator. ``prior.num_samples``
    worlds are drawn for each label."""
    W, b, e, y = _stack(surrogates, observed_labels)
    n = y.shape[0]
    delta = -2.0 * y * W
    trials = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    accepted_total = 0
    for i in range(n):
        rng = np.random.default_rng([prior.seed, 1, i])
        flips = rng.random((prior.num_samples, n)) < prior.flip_prob
        flips = flips[flips[:, i]]  # observe(Y_i != y_i)
        M = b + flips @ delta.T
        keep = ~_error(M, e)  # observe(not error)
        M = M[keep] - delta[:, i]  # Y_i := y_i
        trials[i] = int(keep.sum())
        successes[i] = int(_error(M, e).sum())
        accepted_total += trials[i]
    return PSReport(
        _make_estimates(trials, successes),
        accepted_worlds=int(accepted_total),
        rejected_worlds=int(n * prior.num_samples - accepted_total),
        metadata=_metadata(prior, surrogates, "naive-per-label"),
    )


def exact_ps(surrogates: Sequence[LinearSurrogate], observed_labels, flip_prob: float) -> PSReport:
    """PS by summing the prior mass of all 2^N worlds.

    ``trials``/``successes`` hold world counts; ``ps`` is the
    probability-weighted ratio.
    """
    W, b, e, y = _stack(surrogates, observed_labels)
    n = y.shape[0]
    if n > MAX_EXACT_N:
        raise InvalidArgument(f"exact enumeration refused for N={n} > {MAX_EXACT_N}")
    if not 0 < flip_prob < 1:
        raise InvalidArgument("flip_prob must lie in (0, 1)")
    codes = np.arange(2**n, dtype=np.int64)
    flips = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    k = flips.sum(axis=1)
    p = np.exp(k * math.log(flip_prob) + (n - k) * math.log1p(-flip_prob))
    delta = -2.0 * y * W
    M = b + flips @ delta.T
    no_error = ~_error(M, e)
    trials = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    ps = np.zeros(n)
    for i in range(n):
        cond = flips[:, i] & no_error
        hit = cond & _error(M - delta[:, i], e)
        trials[i] = int(cond.sum())
        successes[i] = int(hit.sum())
        mass = p[cond].sum()
        ps[i] = p[hit].sum() / mass if mass > 0 else 0.0
    return PSReport(
        _make_estimates(trials, successes, ps),
        accepted_worlds=int(no_error.sum()),
        rejected_worlds=int((~no_error).sum()),
        metadata={"method": "exact", "flip_prob": flip_prob,
                  "predicate": _metadata(PriorConfig(), surrogates, "")["predicate"]},
    )


def rank_and_threshold(report: PSReport, tau: float = 0.0, top_k: int | None = None) -> list[int]:
    """Indices of defined estimates with ``ps >= tau``, highest PS first."""
    if not 0 <= tau <= 1:
        raise InvalidArgument("tau must be in [0, 1]")
    chosen = [e.index for e in report.estimates if e.defined and e.ps >= tau]
    if top_k is not None:
        chosen = chosen[:top_k]
    return chosen
