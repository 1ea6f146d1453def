"""Versioned JSON documents for models, profiles, reports and noise records.

Every document is an object with ``format_version``, ``kind`` and ``config``
(the effective settings that produced it) plus kind-specific fields.
Output is canonical (sorted keys, fixed indentation) so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import NoiseRecord
from .errors import ParseError
from .gbdt import GBDTModel, GBDTProfile, Node, Tree
from .logreg import LRModel, LRProfile
from .ps import PSReport

FORMAT_VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(kind: str, body: dict, config: dict | None = None) -> str:
    doc = {"format_version": FORMAT_VERSION, "kind": kind, "config": config or {}}
    doc.update(body)
    return json.dumps(_plain(doc), sort_keys=True, indent=1) + "\n"


def write(path, kind: str, body: dict, config: dict | None = None) -> None:
    Path(path).write_text(dumps(kind, body, config), encoding="utf-8")


def read(path, kind: str | None = None) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path=path) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ParseError("not a psdebug document (no format_version)", path=path)
    if doc["format_version"] != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {doc['format_version']}", path=path)
    if kind is not None and doc.get("kind") != kind:
        raise ParseError(f"expected a {kind!r} document, got {doc.get('kind')!r}", path=path)
    return doc


# ---------------------------------------------------------------- LR


def lr_model_body(model: LRModel) -> dict:
    return {"theta": model.theta}


def lr_model_from(doc: dict) -> LRModel:
    return LRModel(np.array(doc["theta"], dtype=float))


def lr_profile_body(profile: LRProfile) -> dict:
    return {
        "theta_prev": profile.theta_prev,
        "alpha_last": profile.alpha_last,
        "g": profile.g,
        "labels": profile.labels,
        "l2_penalty": profile.l2_penalty,
    }


def lr_profile_from(doc: dict, features=None) -> LRProfile:
    labels = np.array(doc["labels"], dtype=np.int64)
    if features is not None and np.asarray(features).shape[0] != labels.shape[0]:
        raise ParseError(f"profile has {labels.shape[0]} labels, training data has {np.asarray(features).shape[0]} rows")
    return LRProfile(
        theta_prev=np.array(doc["theta_prev"], dtype=float),
        alpha_last=float(doc["alpha_last"]),
        g=np.array(doc["g"], dtype=float),
        labels=labels,
        features=None if features is None else np.asarray(features, dtype=float),
        l2_penalty=float(doc.get("l2_penalty", 0.0)),
    )


# -------------------------------------------------------------- GBDT


def _node_to(node: Node) -> dict:
    if node.is_leaf:
        return {"leaf_id": node.leaf_id, "score": node.score}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to(node.left),
        "right": _node_to(node.right),
    }


def _node_from(d: dict) -> Node:
    if "leaf_id" in d:
        return Node(score=float(d["score"]), leaf_id=int(d["leaf_id"]))
    return Node(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        left=_node_from(d["left"]),
        right=_node_from(d["right"]),
    )


def tree_to(tree: Tree) -> dict:
    return {"n_leaves": tree.n_leaves, "root": _node_to(tree.root)}


def tree_from(d: dict) -> Tree:
    return Tree(_node_from(d["root"]), int(d["n_leaves"]))


def gbdt_model_body(model: GBDTModel) -> dict:
    return {"dim": model.dim, "base_score": model.base_score, "trees": [tree_to(t) for t in model.trees]}


def gbdt_model_from(doc: dict) -> GBDTModel:
    return GBDTModel([tree_from(t) for t in doc["trees"]], int(doc["dim"]), float(doc.get("base_score", 0.0)))


def gbdt_profile_body(profile: GBDTProfile) -> dict:
    return {
        "dim": profile.dim,
        "sigma": profile.sigma,
        "labels": profile.labels,
        "trees": [tree_to(t) for t in profile.trees],
        "members": [[m for m in tree_members] for tree_members in profile.members],
        "denominators": profile.denominators,
        "residuals": profile.residuals,
    }


def gbdt_profile_from(doc: dict) -> GBDTProfile:
    labels = np.array(doc["labels"], dtype=np.int64)
    trees = [tree_from(t) for t in doc["trees"]]
    return GBDTProfile(
        trees=trees,
        members=[[np.array(m, dtype=np.int64) for m in tm] for tm in doc["members"]],
        residuals=np.array(doc["residuals"], dtype=float).reshape(len(trees), labels.shape[0]),
        denominators=[np.array(d, dtype=float) for d in doc["denominators"]],
        sigma=float(doc["sigma"]),
        labels=labels,
        dim=int(doc["dim"]),
    )


def model_from_profile(profile):
    """The trained model a profile was recorded from."""
    if isinstance(profile, LRProfile):
        return LRModel(profile.reconstruct())
    return GBDTModel(list(profile.trees), profile.dim)


# ----------------------------------------------------- reports, records


def noise_record_body(record: NoiseRecord) -> dict:
    return {
        "flipped_indices": list(record.flipped_indices),
        "original_labels": {str(i): v for i, v in sorted(record.original_labels.items())},
    }


def noise_record_from(doc: dict) -> NoiseRecord:
    return NoiseRecord(
        tuple(int(i) for i in doc["flipped_indices"]),
        {int(k): int(v) for k, v in doc["original_labels"].items()},
    )


def ps_report_from(doc: dict) -> PSReport:
    return PSReport.from_dict(doc)
