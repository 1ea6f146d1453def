"""Noise-injection experiments: corrupt, debug, fix, and measure.

The workflow trains a clean and a noisy model, takes test points that only
the noisy model gets wrong, ranks training labels by PS for those points,
then scores the ranking against the injected noise and against validation
error after flipping the suggested labels.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from .dataset import (
    Dataset,
    NoiseRecord,
    NoiseSpec,
    Selector,
    gen_2gauss,
    gen_concentric,
    inject_noise,
    load_csv,
    split,
)
from .errors import InvalidArgument
from .gbdt import GBDTHyper, train_gbdt
from .logreg import LRHyper, train_lr
from .ps import PriorConfig, PSReport, estimate_ps, rank_and_threshold
from .surrogate import build_surrogate

log = logging.getLogger(__name__)

ALGORITHMS = ("lr", "gbdt")


@dataclass
class WorkflowConfig:
    dataset: str = "2gauss"
    n_points: int = 2000
    data_seed: int = 42
    dataset_params: dict = field(default_factory=dict)
    csv_path: str | None = None
    train_frac: float = 0.5
    test_frac: float = 0.25
    split_seed: int = 0
    algorithm: str = "lr"
    lr: LRHyper = field(default_factory=LRHyper)
    gbdt: GBDTHyper = field(default_factory=GBDTHyper)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    prior: PriorConfig = field(default_factory=PriorConfig)
    k: int = 1
    tau: float = 0.0
    top_k: int | None = None
    aggregator: str = "conjunction"
    threads: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidArgument(f"algorithm must be one of {ALGORITHMS}")
        if self.k < 1:
            raise InvalidArgument("k must be at least 1")
        if self.dataset not in ("2gauss", "concentric", "csv"):
            raise InvalidArgument(f"unknown dataset {self.dataset!r}")
        if self.dataset == "csv" and not self.csv_path:
            raise InvalidArgument("dataset 'csv' needs csv_path")

    @property
    def hyper(self):
        return self.lr if self.algorithm == "lr" else self.gbdt

    def to_dict(self) -> dict:
        d = asdict(self)
        sel = self.noise.selector
        d["noise"]["selector"] = None if sel is None else asdict(sel)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WorkflowConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        if "lr" in d:
            d["lr"] = LRHyper(**d["lr"])
        if "gbdt" in d:
            d["gbdt"] = GBDTHyper(**d["gbdt"])
        if "noise" in d:
            noise = dict(d["noise"])
            if noise.get("selector") is not None:
                noise["selector"] = Selector(**noise["selector"])
            d["noise"] = NoiseSpec(**noise)
        if "prior" in d:
            d["prior"] = PriorConfig(**d["prior"])
        return cls(**d)


@dataclass
class EvalReport:
    precision: float | None
    recall: float | None
    validation_errors: tuple[float, float, float]
    new_misclassifications: list[int]
    debugged_tests: list[int]
    suggested_causes: list[int]
    injected: list[int]
    runtime_seconds: float = 0.0
    sweep_curve: list[tuple[float, int, float]] | None = None
    multi_test_curve: list[tuple[int, float | None]] | None = None
    diagnostic: str | None = None

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = asdict(self)
        d["validation_errors"] = dict(zip(("clean", "noisy", "fixed"), self.validation_errors))
        if not include_runtime:
            del d["runtime_seconds"]
        return d


# ------------------------------------------------------------------ helpers


def make_dataset(cfg: WorkflowConfig) -> Dataset:
    if cfg.dataset == "csv":
        return load_csv(cfg.csv_path)
    if cfg.dataset == "2gauss":
        return gen_2gauss(cfg.n_points, seed=cfg.data_seed, **cfg.dataset_params)
    return gen_concentric(cfg.n_points, seed=cfg.data_seed, **cfg.dataset_params)


def train(algorithm: str, ds: Dataset, hyper):
    if algorithm == "lr":
        return train_lr(ds, hyper)
    if algorithm == "gbdt":
        return train_gbdt(ds, hyper)
    raise InvalidArgument(f"unknown algorithm {algorithm!r}")


def error_rate(model, ds: Dataset) -> float:
    if len(ds) == 0:
        return 0.0
    return float(np.mean(model.predict(ds.X) != ds.y))


def find_new_misclassifications(clean_model, noisy_model, test: Dataset) -> list[int]:
    """Test indices the noisy model gets wrong and the clean model gets right."""
    if len(test) == 0:
        return []
    clean_ok = clean_model.predict(test.X) == test.y
    noisy_bad = noisy_model.predict(test.X) != test.y
    return [int(i) for i in np.flatnonzero(clean_ok & noisy_bad)]


def fix_and_retrain(train_noisy: Dataset, suggestions: Sequence[int], algorithm: str, hyper):
    """Flip every suggested label and retrain the real model."""
    model, _ = train(algorithm, train_noisy.with_flipped(suggestions), hyper)
    return model


def precision_recall(suggested: Sequence[int], record: NoiseRecord):
    truth = set(record.flipped_indices)
    hits = len(truth.intersection(suggested))
    precision = hits / len(suggested) if suggested else None
    recall = hits / len(truth) if truth else None
    return precision, recall


def select_suggestions(report: PSReport, tau: float, top_k: int | None) -> list[int]:
    """Ranked labels with ``ps >= tau`` and strictly positive PS, capped at ``top_k``."""
    ranked = [i for i in rank_and_threshold(report, tau) if report.estimate(i).ps > 0]
    return ranked if top_k is None else ranked[:top_k]


# ----------------------------------------------------------------- workflow


@dataclass
class Task:
    """Intermediate state shared by the workflow, the sweep and the multi-test curve."""

    cfg: WorkflowConfig
    train_clean: Dataset
    train_noisy: Dataset
    test: Dataset
    validation: Dataset
    record: NoiseRecord
    clean_model: object
    noisy_model: object
    profile: object
    new_misclassifications: list[int]

    def surrogates(self, tests: Sequence[int]):
        return [
            build_surrogate(self.profile, self.test.X[t], t, int(self.test.y[t]))
            for t in tests
        ]

    def ps_report(self, tests: Sequence[int]) -> PSReport:
        report = estimate_ps(
            self.surrogates(tests),
            self.train_noisy.y,
            self.cfg.prior,
            threads=self.cfg.threads,
            aggregator=self.cfg.aggregator,
        )
        report.threshold = self.cfg.tau
        return report

    def suggestions(self, report: PSReport) -> list[int]:
        top_k = self.cfg.top_k if self.cfg.top_k is not None else len(self.record)
        return select_suggestions(report, self.cfg.tau, top_k)

    def validation_error(self, model) -> float:
        return error_rate(model, self.validation)


def prepare(cfg: WorkflowConfig) -> Task:
    ds = make_dataset(cfg)
    train_clean, test, validation = split(ds, cfg.train_frac, cfg.test_frac, cfg.split_seed)
    clean_model, _ = train(cfg.algorithm, train_clean, cfg.hyper)
    train_noisy, record = inject_noise(train_clean, cfg.noise)
    noisy_model, profile = train(cfg.algorithm, train_noisy, cfg.hyper)
    new = find_new_misclassifications(clean_model, noisy_model, test)
    return Task(cfg, train_clean, train_noisy, test, validation, record,
                clean_model, noisy_model, profile, new)


def run_workflow(cfg: WorkflowConfig, task: Task | None = None) -> EvalReport:
    started = time.perf_counter()
    task = task or prepare(cfg)
    clean_err = task.validation_error(task.clean_model)
    noisy_err = task.validation_error(task.noisy_model)
    base = dict(
        new_misclassifications=task.new_misclassifications,
        injected=list(task.record.flipped_indices),
    )
    if not task.new_misclassifications:
        return EvalReport(
            precision=None, recall=None,
            validation_errors=(clean_err, noisy_err, noisy_err),
            debugged_tests=[], suggested_causes=[],
            runtime_seconds=time.perf_counter() - started,
            diagnostic="noise introduced no new test misclassifications",
            **base,
        )
    tests = task.new_misclassifications[: cfg.k]
    if len(tests) < cfg.k:
        log.warning("only %d new misclassifications, wanted k=%d", len(tests), cfg.k)
    report = task.ps_report(tests)
    suggested = task.suggestions(report)
    precision, recall = precision_recall(suggested, task.record)
    fixed = fix_and_retrain(task.train_noisy, suggested, cfg.algorithm, cfg.hyper)
    diagnostic = report.metadata.get("diagnostic")
    if not suggested and diagnostic is None:
        diagnostic = "no training label has positive PS"
    return EvalReport(
        precision=precision, recall=recall,
        validation_errors=(clean_err, noisy_err, task.validation_error(fixed)),
        debugged_tests=list(tests), suggested_causes=suggested,
        runtime_seconds=time.perf_counter() - started,
        diagnostic=diagnostic,
        **base,
    )


def threshold_sweep(
    cfg: WorkflowConfig,
    task: Task | None = None,
    report: PSReport | None = None,
    max_points: int | None = 40,
) -> list[tuple[float, int, float]]:
    """Validation error after flipping the top-ranked labels, per PS level.

    Returns ``(tau, flips, validation_error)`` rows: the first row flips
    nothing, each later one flips every label with ``ps >= tau``. With
    ``max_points`` the distinct levels are thinned evenly (first and last
    always kept).
    """
    task = task or prepare(cfg)
    if report is None:
        if not task.new_misclassifications:
            return []
        report = task.ps_report(task.new_misclassifications[: cfg.k])
    ranked = [e for e in report.estimates if e.defined] + [e for e in report.estimates if not e.defined]
    ps = np.array([e.ps for e in ranked])
    order = [e.index for e in ranked]
    # prefix ends at the last label of each distinct PS level
    cuts = [j + 1 for j in range(len(ps)) if j + 1 == len(ps) or ps[j + 1] != ps[j]]
    if max_points is not None and len(cuts) > max_points:
        pick = np.unique(np.round(np.linspace(0, len(cuts) - 1, max_points)).astype(int))
        cuts = [cuts[j] for j in pick]
    curve = [(1.0, 0, task.validation_error(task.noisy_model))]
    for c in cuts:
        model = fix_and_retrain(task.train_noisy, order[:c], cfg.algorithm, cfg.hyper)
        curve.append((float(ps[c - 1]), c, task.validation_error(model)))
    return curve


def sweep_minimum(curve) -> tuple[float, int, float]:
    """Row with the lowest validation error (fewest flips on ties)."""
    return min(curve, key=lambda row: (row[2], row[1]))


def multi_test_curve(
    cfg: WorkflowConfig, k_values: Sequence[int], task: Task | None = None
) -> list[tuple[int, float | None]]:
    """Precision when the error predicate conjoins the first ``k`` new misclassifications."""
    task = task or prepare(cfg)
    available = len(task.new_misclassifications)
    ks = [k for k in k_values if k <= available]
    if len(ks) < len(k_values):
        log.warning("only %d new misclassifications; dropping k values %s",
                    available, [k for k in k_values if k > available])
    curve = []
    for k in ks:
        report = task.ps_report(task.new_misclassifications[:k])
        precision, _ = precision_recall(task.suggestions(report), task.record)
        curve.append((k, precision))
    return curve


def trend(curve) -> float:
    """Spearman correlation of (k, precision) over the defined points."""
    pts = [(k, p) for k, p in curve if p is not None]
    if len(pts) < 2:
        return 0.0
    rho = spearmanr([k for k, _ in pts], [p for _, p in pts]).statistic
    return 0.0 if np.isnan(rho) else float(rho)
