"""Command-line entry point: ``psdebug {gen,noise,train,debug,eval,sweep}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import docs
from .dataset import (
    GENERATORS,
    NoiseSpec,
    Selector,
    inject_noise,
    load_csv,
    save_csv,
    split,
)
from .errors import InvalidArgument, ParseError, PSDebugError
from .evaluate import (
    WorkflowConfig,
    find_new_misclassifications,
    select_suggestions,
    multi_test_curve,
    prepare,
    run_workflow,
    threshold_sweep,
    train,
)
from .gbdt import GBDTHyper
from .logreg import LRHyper
from .ps import PriorConfig, estimate_ps
from .surrogate import build_surrogate

log = logging.getLogger("psdebug")


def _effective(args) -> dict:
    """Parsed arguments minus the dispatch function, for embedding in outputs."""
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _lr_hyper(args) -> LRHyper:
    return LRHyper(args.iterations, args.step_size, args.l2)


def _gbdt_hyper(args) -> GBDTHyper:
    return GBDTHyper(args.trees, args.max_depth, args.learning_rate, args.min_leaf)


def _hyper(args):
    return _lr_hyper(args) if args.algo == "lr" else _gbdt_hyper(args)


def _load_profile(args, train_ds):
    kind = "lr-profile" if args.algo == "lr" else "gbdt-profile"
    doc = docs.read(args.profile, kind)
    if args.algo == "lr":
        return docs.lr_profile_from(doc, train_ds.X)
    profile = docs.gbdt_profile_from(doc)
    if profile.labels.shape[0] != len(train_ds):
        raise ParseError(f"profile has {profile.labels.shape[0]} labels, training data has {len(train_ds)} rows",
                         path=args.profile)
    return profile


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    params = {}
    if args.dataset == "2gauss":
        params["separation"] = args.separation
    else:
        params.update(inner_radius=args.inner_radius, outer_radius=args.outer_radius,
                      radial_sd=args.radial_sd)
    ds = GENERATORS[args.dataset](args.n, seed=args.seed, **params)
    out = Path(args.out)
    if args.split:
        parts = split(ds, args.split[0], args.split[1], args.seed)
        for name, part in zip(("train", "test", "validation"), parts):
            save_csv(part, out.with_suffix(f".{name}.csv"))
        print(f"{args.dataset}: {len(ds)} points -> train {len(parts[0])}, test {len(parts[1])}, "
              f"validation {len(parts[2])} ({out.with_suffix('')}.*.csv)")
    else:
        save_csv(ds, out)
        print(f"{args.dataset}: {len(ds)} points, dim {ds.dim} -> {out}")
    return 0


def cmd_noise(args) -> int:
    ds = load_csv(args.data)
    selector = None
    if args.mode == "systematic":
        if args.feature is None or args.value is None or args.forced_label is None:
            raise InvalidArgument("systematic noise needs --feature, --value and --forced-label")
        selector = Selector(args.feature - 1, args.op, args.value)
    spec = NoiseSpec(args.mode, args.rate, selector, args.forced_label, args.seed)
    noisy, record = inject_noise(ds, spec)
    save_csv(noisy, args.out)
    docs.write(args.record, "noise-record", docs.noise_record_body(record), _effective(args))
    print(f"flipped {len(record)} of {len(ds)} labels -> {args.out}, record {args.record}")
    return 0


def cmd_train(args) -> int:
    ds = load_csv(args.data)
    model, profile = train(args.algo, ds, _hyper(args))
    config = _effective(args)
    if args.algo == "lr":
        docs.write(args.out, "lr-model", docs.lr_model_body(model), config)
        docs.write(args.profile, "lr-profile", docs.lr_profile_body(profile), config)
    else:
        docs.write(args.out, "gbdt-model", docs.gbdt_model_body(model), config)
        docs.write(args.profile, "gbdt-profile", docs.gbdt_profile_body(profile), config)
    err = float(np.mean(model.predict(ds.X) != ds.y))
    print(f"{args.algo}: trained on {len(ds)} points, training error {err:.4f}")
    return 0


def cmd_debug(args) -> int:
    train_ds = load_csv(args.train)
    test_ds = load_csv(args.test)
    profile = _load_profile(args, train_ds)
    if args.tests == "auto":
        if not args.clean:
            raise InvalidArgument("--tests auto needs --clean (the clean training set)")
        clean_model, _ = train(args.algo, load_csv(args.clean), _hyper(args))
        tests = find_new_misclassifications(clean_model, docs.model_from_profile(profile), test_ds)
        if not tests:
            raise PSDebugError("no new misclassifications between the clean and noisy models")
        tests = tests[: args.k]
    else:
        tests = _parse_ints(args.tests)
        bad = [t for t in tests if not 0 <= t < len(test_ds)]
        if bad:
            raise InvalidArgument(f"test indices out of range: {bad}")
    surrogates = [build_surrogate(profile, test_ds.X[t], t, int(test_ds.y[t])) for t in tests]
    prior = PriorConfig(args.epsilon, args.seed, args.samples)
    report = estimate_ps(surrogates, train_ds.y, prior, threads=args.threads, aggregator=args.aggregator)
    report.threshold = args.tau
    if report.accepted_worlds == 0:
        raise PSDebugError(report.metadata["diagnostic"])
    causes = select_suggestions(report, args.tau, args.top_k)
    body = report.to_dict()
    body["tests"] = tests
    body["suggested_causes"] = causes
    config = _effective(args)
    config.pop("threads")
    docs.write(args.out, "ps-report", body, config)
    print(f"debugged tests {tests}: {report.accepted_worlds}/{args.samples} worlds accepted, "
          f"{len(causes)} causes with positive ps >= {args.tau} -> {args.out}")
    return 0


def _load_config(args) -> WorkflowConfig:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=args.config) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=args.config, line=exc.lineno) from None
    raw.pop("format_version", None)
    raw.pop("kind", None)
    raw = raw.get("workflow", raw)
    if args.seed is not None:
        raw["prior"] = dict(raw.get("prior", {}), seed=args.seed)
    raw["threads"] = args.threads
    return WorkflowConfig.from_dict(raw)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


def _config_doc(cfg: WorkflowConfig) -> dict:
    d = cfg.to_dict()
    d.pop("threads")  # does not affect results
    return d


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    task = prepare(cfg)
    report = run_workflow(cfg, task)
    if args.sweep:
        report.sweep_curve = threshold_sweep(cfg, task, max_points=args.max_points)
    if args.multi_k:
        report.multi_test_curve = multi_test_curve(cfg, args.multi_k, task)
    docs.write(args.out, "eval-report", report.to_dict(include_runtime=args.record_time), _config_doc(cfg))
    if args.sweep and args.sweep_csv:
        _write_csv(args.sweep_csv, ["tau", "flips", "validation_error"], report.sweep_curve)
    if args.multi_k and args.multi_csv:
        _write_csv(args.multi_csv, ["k", "precision"], report.multi_test_curve)
    c, n, f = report.validation_errors
    prec = "undefined" if report.precision is None else f"{report.precision:.3f}"
    print(f"precision {prec}; validation error {c:.4f} -> {n:.4f} -> {f:.4f}"
          + (f"; {report.diagnostic}" if report.diagnostic else ""))
    if report.diagnostic and report.precision is None:
        return 1
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    curve = threshold_sweep(cfg, max_points=args.max_points)
    if not curve:
        raise PSDebugError("noise introduced no new test misclassifications; nothing to sweep")
    _write_csv(args.out, ["tau", "flips", "validation_error"], curve)
    best = min(curve, key=lambda r: (r[2], r[1]))
    print(f"{len(curve)} sweep points; minimum validation error {best[2]:.4f} at tau {best[0]:.4f} "
          f"({best[1]} flips) -> {args.out}")
    return 0


# ------------------------------------------------------------------ parser


def _shared(p, seed_default=0):
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--threads", type=int, default=1)


def _algo_flags(p):
    p.add_argument("--algo", choices=("lr", "gbdt"), required=True)
    g = p.add_argument_group("logistic regression")
    g.add_argument("--iterations", type=int, default=LRHyper.iterations)
    g.add_argument("--step-size", type=float, default=LRHyper.step_size)
    g.add_argument("--l2", type=float, default=LRHyper.l2_penalty)
    g = p.add_argument_group("boosted trees")
    g.add_argument("--trees", type=int, default=GBDTHyper.num_trees)
    g.add_argument("--max-depth", type=int, default=GBDTHyper.max_depth)
    g.add_argument("--learning-rate", type=float, default=GBDTHyper.learning_rate)
    g.add_argument("--min-leaf", type=int, default=GBDTHyper.min_leaf_size)


def _fraction_pair(text):
    try:
        a, b = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected TRAIN,TEST fractions, e.g. 0.5,0.25") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psdebug", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    p.add_argument("--dataset", choices=sorted(GENERATORS), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--inner-radius", type=float, default=1.0)
    p.add_argument("--outer-radius", type=float, default=3.0)
    p.add_argument("--radial-sd", type=float, default=0.35)
    p.add_argument("--split", type=_fraction_pair, metavar="TRAIN,TEST",
                   help="also split; writes OUT.train.csv, OUT.test.csv, OUT.validation.csv")
    p.add_argument("--out", required=True)
    _shared(p, 42)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("noise", help="inject label noise into a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("random", "systematic"), default="random")
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--feature", type=int, help="1-based feature index for systematic noise")
    p.add_argument("--op", choices=(">", ">=", "<", "<=", "=="), default=">")
    p.add_argument("--value", type=float)
    p.add_argument("--forced-label", type=int, choices=(-1, 1))
    p.add_argument("--record", required=True, help="noise record output path")
    p.add_argument("--out", required=True)
    _shared(p)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("train", help="train a model and record its profile")
    p.add_argument("--data", required=True)
    p.add_argument("--profile", required=True, help="profile output path")
    p.add_argument("--out", required=True, help="model output path")
    _algo_flags(p)
    _shared(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("debug", help="rank training labels by PS for misclassified test points")
    _algo_flags(p)
    p.add_argument("--train", required=True, help="training CSV the profile was recorded on")
    p.add_argument("--profile", required=True)
    p.add_argument("--test", required=True, help="test CSV")
    p.add_argument("--tests", required=True, help="comma-separated test indices, or 'auto'")
    p.add_argument("--clean", help="clean training CSV (for --tests auto)")
    p.add_argument("--k", type=int, default=1, help="with --tests auto, how many new misclassifications to combine")
    p.add_argument("--samples", type=int, default=PriorConfig.num_samples)
    p.add_argument("--epsilon", type=float, default=PriorConfig.flip_prob)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--top-k", type=int)
    p.add_argument("--aggregator", choices=("conjunction", "mean"), default="conjunction")
    p.add_argument("--out", required=True)
    _shared(p)
    p.set_defaults(func=cmd_debug)

    p = sub.add_parser("eval", help="run the noise-injection workflow from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--sweep", action="store_true", help="also compute the threshold sweep")
    p.add_argument("--sweep-csv")
    p.add_argument("--multi-k", type=_parse_ints, help="k values for the multi-test curve, e.g. 1,2,4,8")
    p.add_argument("--multi-csv")
    p.add_argument("--max-points", type=int, default=40)
    p.add_argument("--record-time", action="store_true", help="include runtime_seconds in the report")
    p.add_argument("--out", required=True)
    _shared(p, None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="validation error versus PS threshold, as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--max-points", type=int, default=40)
    p.add_argument("--out", required=True)
    _shared(p, None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (PSDebugError, ValueError, OSError) as exc:
        print(f"psdebug {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
