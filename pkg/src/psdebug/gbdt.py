"""Gradient-boosted regression trees for binary labels, with profiling.

Loss is ``log(1 + exp(-2 y sigma F))``. Each tree is grown on the residuals
(negative loss gradients) by greedy squared-error splitting; leaf values use
the one-step Newton score rather than the target mean. The profile keeps
per-leaf memberships and Newton denominators so label flips can be scored
without refitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, InvalidArgument

DENOM_EPS = 1e-12


@dataclass(frozen=True)
class GBDTHyper:
    num_trees: int = 30
    max_depth: int = 3
    learning_rate: float = 0.1
    min_leaf_size: int = 5

    def __post_init__(self):
        if self.num_trees < 0:
            raise InvalidArgument("num_trees must be nonnegative")
        if self.max_depth < 0:
            raise InvalidArgument("max_depth must be nonnegative")
        if not self.learning_rate > 0:
            raise InvalidArgument("learning_rate must be positive")
        if self.min_leaf_size < 1:
            raise InvalidArgument("min_leaf_size must be at least 1")


def loss(labels, scores, sigma: float) -> np.ndarray:
    return np.logaddexp(0.0, -2.0 * sigma * np.asarray(labels) * np.asarray(scores))


def residuals(labels, scores, sigma: float) -> np.ndarray:
    """Negative loss gradient: ``2 y sigma / (1 + exp(2 y sigma F))``."""
    y = np.asarray(labels, dtype=float)
    F = np.asarray(scores, dtype=float)
    if y.shape != F.shape:
        raise DimensionMismatch("labels and scores differ in length")
    # 1 / (1 + e^t) == expit(-t), evaluated without overflow
    t = 2.0 * y * sigma * F
    return 2.0 * y * sigma * np.exp(-np.logaddexp(0.0, t))


def newton_denominator(member_residuals, sigma: float) -> float:
    r = np.abs(np.asarray(member_residuals, dtype=float))
    return float(np.sum(r * (2.0 * sigma - r)))


def leaf_score(member_residuals, sigma: float) -> float:
    """Newton step ``sum r / sum |r| (2 sigma - |r|)``; 0 for a degenerate leaf."""
    r = np.asarray(member_residuals, dtype=float)
    if r.size == 0:
        raise InvalidArgument("leaf has no members")
    denom = newton_denominator(r, sigma)
    if denom < DENOM_EPS:
        return 0.0
    return float(np.sum(r) / denom)


# --------------------------------------------------------------------- trees


@dataclass
class Node:
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None
    score: float = 0.0
    leaf_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class Tree:
    """Binary tree; ``x[feature] <= threshold`` routes left."""

    root: Node
    n_leaves: int

    def leaves(self) -> list[Node]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend((node.right, node.left))
        return sorted(out, key=lambda n: n.leaf_id)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id of every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0], dtype=np.int64)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if node.is_leaf:
                out[rows] = node.leaf_id
                continue
            go_left = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def leaf_scores(self) -> np.ndarray:
        return np.array([leaf.score for leaf in self.leaves()])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_scores()[self.apply(X)]


def _best_split(X, targets, min_leaf):
    """Lowest-SSE split as ``(sse, feature, threshold)`` or None.

    Thresholds are midpoints between consecutive distinct values; ties go to
    the lowest feature index, then the lowest threshold.
    """
    n = len(targets)
    if n < 2 * min_leaf:
        return None
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ts = X[order, f], targets[order]
        csum = np.cumsum(ts)
        csq = np.cumsum(ts * ts)
        total, total_sq = csum[-1], csq[-1]
        n_left = np.arange(1, n)
        # candidate cut after position n_left - 1
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        sl = csum[:-1]
        sse = (total_sq - sl**2 / n_left) - (total - sl) ** 2 / (n - n_left)
        sse = np.where(valid, sse, np.inf)
        j = int(np.argmin(sse))  # first minimum == lowest threshold
        cand = (float(sse[j]), f, float((xs[j] + xs[j + 1]) / 2.0))
        if best is None or cand[0] < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = cand
    return best


def fit_regression_tree(X, targets, hyper: GBDTHyper) -> Tree:
    """Greedy variance-reduction tree on ``targets`` with Newton leaf scores."""
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if len(targets) < 1:
        raise InvalidArgument("cannot fit a tree on no points")
    sigma = hyper.learning_rate
    counter = [0]

    def grow(rows, depth):
        t = targets[rows]
        split = None
        if depth < hyper.max_depth:
            split = _best_split(X[rows], t, hyper.min_leaf_size)
        if split is not None:
            parent_sse = float(np.sum((t - t.mean()) ** 2))
            if parent_sse - split[0] <= 1e-12 * max(1.0, parent_sse):
                split = None
        if split is None:
            leaf = Node(score=leaf_score(t, sigma), leaf_id=counter[0])
            counter[0] += 1
            return leaf
        _, f, thr = split
        go_left = X[rows, f] <= thr
        node = Node(feature=f, threshold=thr)
        node.left = grow(rows[go_left], depth + 1)
        node.right = grow(rows[~go_left], depth + 1)
        return node

    root = grow(np.arange(len(targets)), 0)
    return Tree(root, counter[0])


# ------------------------------------------------------------------ ensemble


@dataclass(eq=False)
class GBDTModel:
    trees: list[Tree]
    dim: int
    base_score: float = 0.0

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"model has dimension {self.dim}, got {X.shape[1]}")
        out = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            out += tree.predict(X)
        return out

    def predict(self, X) -> np.ndarray:
        return np.where(self.scores(X) >= 0, 1, -1)


@dataclass(eq=False)
class GBDTProfile:
    """Per-tree leaf memberships, residuals and Newton denominators.

    ``members[n][k]`` are the training indices in leaf ``k`` of tree ``n``,
    ``residuals[n]`` the targets tree ``n`` was fit to, ``denominators[n][k]``
    the leaf's ``sum |r| (2 sigma - |r|)``.
    """

    trees: list[Tree]
    members: list[list[np.ndarray]]
    residuals: np.ndarray
    denominators: list[np.ndarray]
    sigma: float
    labels: np.ndarray
    dim: int
    _paths: dict = field(default_factory=dict, repr=False)

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    def leaf_path(self, x) -> tuple[int, ...]:
        """Leaf id of ``x`` in every tree (memoized per point)."""
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key not in self._paths:
            self._paths[key] = tuple(int(t.apply(x[None, :])[0]) for t in self.trees)
        return self._paths[key]

    def leaf_scores(self, n: int) -> np.ndarray:
        return np.array(
            [leaf_score(self.residuals[n][m], self.sigma) for m in self.members[n]]
        )


def train_gbdt(train: Dataset, hyper: GBDTHyper = GBDTHyper()) -> tuple[GBDTModel, GBDTProfile]:
    if len(train) == 0:
        raise InvalidArgument("cannot train on an empty dataset")
    X, y = train.X, train.y.astype(float)
    sigma = hyper.learning_rate
    F = np.zeros(len(y))
    trees, members, denoms, resid = [], [], [], []
    for _ in range(hyper.num_trees):
        r = residuals(y, F, sigma)
        tree = fit_regression_tree(X, r, hyper)
        leaf_of = tree.apply(X)
        mem = [np.flatnonzero(leaf_of == k) for k in range(tree.n_leaves)]
        trees.append(tree)
        members.append(mem)
        denoms.append(np.array([newton_denominator(r[m], sigma) for m in mem]))
        resid.append(r)
        F = F + tree.leaf_scores()[leaf_of]
    resid = np.array(resid).reshape(hyper.num_trees, len(y))
    model = GBDTModel(trees, train.dim)
    profile = GBDTProfile(trees, members, resid, denoms, sigma, train.y.copy(), train.dim)
    return model, profile


def gbdt_score(model: GBDTModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise DimensionMismatch(f"model has dimension {model.dim}, point has shape {x.shape}")
    return float(model.scores(x[None, :])[0])


def gbdt_classify(model: GBDTModel, x) -> int:
    return 1 if gbdt_score(model, x) >= 0 else -1
