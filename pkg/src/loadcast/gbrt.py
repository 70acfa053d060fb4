"""Gradient boosted regression trees, from scratch on numpy.

Squared and quantile (pinball) objectives share one booster: exhaustive
greedy splits on midpoints between distinct sorted feature values, scored
by variance reduction of the pseudo-residuals, with shrinkage applied to
every tree's contribution.

Determinism contract: refitting on identical inputs yields bit-identical
models.  Float score ties (common with quantile gradients, which take only
three distinct values) are re-scored in exact rational arithmetic and broken
by lowest feature index, then smallest threshold.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError

FORMAT_VERSION = 1

# Candidates whose float score sits within this relative band of the best are
# re-scored exactly; the band is far wider than accumulated cumsum rounding
# (roughly n*eps) and far narrower than any genuine score gap.
_TIE_RTOL = 1e-9

# Up to this many distinct residual values the exact re-score uses per-value
# counts (cheap); above it, rational prefix sums.
_COUNT_PATH_MAX_DISTINCT = 16


def percentile(values, q) -> float:
    """q-th percentile (0..100), linear interpolation between order statistics.

    Single definition shared by the booster and the evaluation metrics.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InvalidInputError("percentile of an empty vector")
    return float(np.percentile(arr, q))


def lower_quantile(values, alpha: int) -> float:
    """Smallest order statistic covering an alpha/100 fraction of the data.

    This is the exact minimizer of the summed pinball loss at level alpha,
    which is what makes every quantile boosting step loss-non-increasing.
    The rank is computed in integer arithmetic so no float rounding can
    shift it off the minimizer.
    """
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise InvalidInputError("quantile of an empty vector")
    rank = -((-alpha * arr.size) // 100)  # ceil(alpha*n/100), exact
    return float(arr[rank - 1])


class SquaredLoss:
    """Least squares: the negative gradient is the plain residual."""

    name = "squared"

    def initial_prediction(self, targets: np.ndarray) -> float:
        return float(np.mean(targets))

    def negative_gradient(self, targets: np.ndarray, predictions: np.ndarray) -> np.ndarray:
        return targets - predictions

    def leaf_value(self, residuals: np.ndarray, targets: np.ndarray, predictions: np.ndarray) -> float:
        return float(np.mean(residuals))


class QuantileLoss:
    """Pinball objective for the alpha-th percentile, alpha an integer in 1..99."""

    name = "quantile"

    def __init__(self, alpha: int):
        if not isinstance(alpha, int) or isinstance(alpha, bool) or not 1 <= alpha <= 99:
            raise InvalidInputError(f"quantile level must be an integer in 1..99, got {alpha!r}")
        self.alpha = alpha

    def initial_prediction(self, targets: np.ndarray) -> float:
        return percentile(targets, self.alpha)

    def negative_gradient(self, targets: np.ndarray, predictions: np.ndarray) -> np.ndarray:
        a = self.alpha / 100.0
        return np.where(targets > predictions, a,
                        np.where(targets < predictions, a - 1.0, 0.0))

    def leaf_value(self, residuals: np.ndarray, targets: np.ndarray, predictions: np.ndarray) -> float:
        # The leaf must carry a pinball minimizer of what remains to be
        # predicted, otherwise a shrinkage step can increase training loss.
        return lower_quantile(targets - predictions, self.alpha)


_LOSS_PATTERN = re.compile(r"quantile\((\d{1,2})\)")


def parse_loss(tag: str):
    """Map a loss tag ("squared" or "quantile(<a>)") to a loss object."""
    if tag == "squared":
        return SquaredLoss()
    m = _LOSS_PATTERN.fullmatch(tag) if isinstance(tag, str) else None
    if m:
        return QuantileLoss(int(m.group(1)))
    raise InvalidInputError(f"unknown loss {tag!r}")


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int = 50
    learning_rate: float = 0.1
    max_depth: int = 5
    min_samples_leaf: int = 1
    loss: str = "squared"

    def validate(self) -> None:
        if not isinstance(self.n_trees, int) or self.n_trees < 0:
            raise InvalidInputError(f"n_trees must be a non-negative integer, got {self.n_trees!r}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidInputError(f"learning_rate must be in (0, 1], got {self.learning_rate!r}")
        if not isinstance(self.max_depth, int) or self.max_depth < 1:
            raise InvalidInputError(f"max_depth must be a positive integer, got {self.max_depth!r}")
        if not isinstance(self.min_samples_leaf, int) or self.min_samples_leaf < 1:
            raise InvalidInputError(f"min_samples_leaf must be a positive integer, got {self.min_samples_leaf!r}")
        parse_loss(self.loss)

    def loss_fn(self):
        return parse_loss(self.loss)


@dataclass
class SampleSet:
    """Feature matrix plus aligned targets; every value must be finite."""

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.ndim != 2:
            raise InvalidInputError("features must be a 2-D matrix")
        if self.targets.ndim != 1:
            raise InvalidInputError("targets must be a 1-D vector")
        if self.features.shape[0] != self.targets.shape[0]:
            raise InvalidInputError(
                f"row mismatch: {self.features.shape[0]} feature rows vs "
                f"{self.targets.shape[0]} targets")
        if self.feature_names is None:
            self.feature_names = tuple(f"x{j}" for j in range(self.features.shape[1]))
        else:
            self.feature_names = tuple(self.feature_names)
            if len(self.feature_names) != self.features.shape[1]:
                raise InvalidInputError("feature_names arity does not match the feature matrix")
        if self.features.size and not np.all(np.isfinite(self.features)):
            raise InvalidInputError("features contain non-finite values")
        if self.targets.size and not np.all(np.isfinite(self.targets)):
            raise InvalidInputError("targets contain non-finite values")

    @property
    def n_samples(self) -> int:
        return int(self.targets.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])


@dataclass
class TreeNode:
    """Regression tree node: internal when split_feature is set, else a leaf."""

    value: float | None = None
    split_feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def is_leaf(self) -> bool:
        return self.split_feature is None

    def depth(self) -> int:
        if self.is_leaf():
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf():
            return {"value": self.value}
        return {
            "feature": self.split_feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeNode":
        if "value" in doc:
            return cls(value=float(doc["value"]))
        return cls(
            split_feature=int(doc["feature"]),
            threshold=float(doc["threshold"]),
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )


def _route(node: TreeNode, row) -> float:
    while node.split_feature is not None:
        node = node.left if row[node.split_feature] <= node.threshold else node.right
    return node.value


def _threshold_between(sv: np.ndarray, k: int) -> float:
    lo = float(sv[k - 1])
    hi = float(sv[k])
    t = (lo + hi) / 2.0
    if t >= hi:
        # lo and hi are adjacent floats; a rounded-up midpoint would leak the
        # right-hand value into the left partition under "x <= t" routing.
        t = lo
    return t


def _exact_prefix(sr: np.ndarray):
    """Exact rational prefix sums of a residual vector, as k -> sum(sr[:k])."""
    uniq, inv = np.unique(sr, return_inverse=True)
    if uniq.size <= _COUNT_PATH_MAX_DISTINCT:
        one_hot = np.zeros((sr.size, uniq.size), dtype=np.int64)
        one_hot[np.arange(sr.size), inv] = 1
        counts = np.cumsum(one_hot, axis=0)
        vals = [Fraction(v) for v in uniq.tolist()]

        def prefix(k: int) -> Fraction:
            row = counts[k - 1]
            return sum((int(c) * v for c, v in zip(row.tolist(), vals) if c),
                       Fraction(0))

        return prefix

    sums = list(itertools.accumulate((Fraction(x) for x in sr.tolist()),
                                     initial=Fraction(0)))

    def prefix(k: int) -> Fraction:
        return sums[k]

    return prefix


def _exact_gain(sr: np.ndarray, k: int, cache: dict, key: int) -> Fraction:
    prefix = cache.get(key)
    if prefix is None:
        prefix = _exact_prefix(sr)
        cache[key] = prefix
    n = sr.shape[0]
    s_left = prefix(k)
    s_total = prefix(n)
    s_right = s_total - s_left
    return (s_left * s_left / k
            + s_right * s_right / (n - k)
            - s_total * s_total / n)


def _find_best_split(X: np.ndarray, residuals: np.ndarray, idx: np.ndarray,
                     min_samples_leaf: int):
    """Best (feature, threshold) by variance reduction, or None.

    Fast float scan first; everything within the tie band of the best float
    score is re-scored exactly before the tie-break (lowest feature index,
    then smallest threshold) is applied.
    """
    n = int(idx.size)
    rr = residuals[idx]
    scale = max(1.0, float(np.dot(rr, rr)))
    tol = _TIE_RTOL * scale

    per_feature = []
    best_gain = -np.inf
    for j in range(X.shape[1]):
        col = X[idx, j]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        if sv[0] == sv[-1]:
            continue
        sr = rr[order]
        csum = np.cumsum(sr)
        total = csum[-1]
        ks = np.arange(1, n)
        ok = sv[:-1] < sv[1:]
        if min_samples_leaf > 1:
            ok &= (ks >= min_samples_leaf) & (ks <= n - min_samples_leaf)
        ks = ks[ok]
        if ks.size == 0:
            continue
        s_left = csum[ks - 1]
        s_right = total - s_left
        gains = (s_left * s_left / ks
                 + s_right * s_right / (n - ks)
                 - total * total / n)
        per_feature.append((j, ks, gains, sv, sr))
        best_gain = max(best_gain, float(gains.max()))

    if not per_feature:
        return None

    banded = []
    for j, ks, gains, sv, sr in per_feature:
        for i in np.nonzero(gains >= best_gain - tol)[0]:
            banded.append((j, int(ks[i]), sv, sr))

    if len(banded) == 1 and best_gain > tol:
        j, k, sv, _ = banded[0]
        return j, _threshold_between(sv, k)

    banded.sort(key=lambda c: (c[0], c[1]))
    chosen = None
    best_exact = None
    cache: dict = {}
    for j, k, sv, sr in banded:
        gain = _exact_gain(sr, k, cache, j)
        if gain <= 0:
            continue
        if best_exact is None or gain > best_exact:
            best_exact = gain
            chosen = (j, _threshold_between(sv, k))
    return chosen


def _grow_tree(X: np.ndarray, residuals: np.ndarray, max_depth: int,
               min_samples_leaf: int, leaf_fn):
    """Grow one tree; returns (root, [(sample index array, leaf value), ...])."""
    assignments = []

    def leaf(idx: np.ndarray) -> TreeNode:
        value = float(leaf_fn(idx))
        assignments.append((idx, value))
        return TreeNode(value=value)

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        if depth >= max_depth or idx.size < 2 * min_samples_leaf:
            return leaf(idx)
        found = _find_best_split(X, residuals, idx, min_samples_leaf)
        if found is None:
            return leaf(idx)
        j, t = found
        mask = X[idx, j] <= t
        node = TreeNode(split_feature=j, threshold=t)
        node.left = build(idx[mask], depth + 1)
        node.right = build(idx[~mask], depth + 1)
        return node

    root = build(np.arange(X.shape[0], dtype=np.intp), 0)
    return root, assignments


def initial_prediction(targets, loss) -> float:
    arr = np.asarray(targets, dtype=float)
    if arr.size == 0:
        raise InvalidInputError("initial prediction of an empty target vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("targets contain non-finite values")
    return loss.initial_prediction(arr)


def negative_gradient(loss, targets, current_predictions) -> np.ndarray:
    y = np.asarray(targets, dtype=float)
    f = np.asarray(current_predictions, dtype=float)
    if y.shape != f.shape:
        raise InvalidInputError(
            f"length mismatch: {y.shape[0]} targets vs {f.shape[0]} predictions")
    return loss.negative_gradient(y, f)


def leaf_value(loss, residuals, targets, predictions) -> float:
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise InvalidInputError("leaf value of an empty leaf")
    return loss.leaf_value(r,
                           np.asarray(targets, dtype=float),
                           np.asarray(predictions, dtype=float))


def fit_tree(samples: SampleSet, max_depth: int, min_samples_leaf: int = 1) -> TreeNode:
    """Single variance-reduction tree with mean leaves (no shrinkage)."""
    if samples.n_samples < 1:
        raise InvalidInputError("fit_tree needs at least one sample")
    if max_depth < 1 or min_samples_leaf < 1:
        raise InvalidInputError("max_depth and min_samples_leaf must be >= 1")
    targets = samples.targets
    root, _ = _grow_tree(samples.features, targets, max_depth, min_samples_leaf,
                         lambda idx: np.mean(targets[idx]))
    return root


@dataclass
class BoostedModel:
    """Shrinkage ensemble: prediction = f0 + learning_rate * sum of tree outputs."""

    f0: float
    trees: list[TreeNode] = field(default_factory=list)
    config: BoostConfig = field(default_factory=BoostConfig)
    n_features: int = 0

    def predict(self, feature_row) -> float:
        row = np.asarray(feature_row, dtype=float)
        if row.ndim != 1 or row.shape[0] != self.n_features:
            raise InvalidInputError(
                f"expected a feature row of arity {self.n_features}, got shape {row.shape}")
        if row.size and not np.all(np.isfinite(row)):
            raise InvalidInputError("feature row contains non-finite values")
        value = self.f0
        lr = self.config.learning_rate
        for tree in self.trees:
            value = value + lr * _route(tree, row)
        return float(value)

    def predict_batch(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise InvalidInputError(
                f"expected shape (n, {self.n_features}), got {X.shape}")
        if X.size and not np.all(np.isfinite(X)):
            raise InvalidInputError("feature matrix contains non-finite values")
        out = np.full(X.shape[0], self.f0, dtype=float)
        lr = self.config.learning_rate
        for tree in self.trees:
            leaf_vals = np.fromiter((_route(tree, row) for row in X),
                                    dtype=float, count=X.shape[0])
            out = out + lr * leaf_vals
        return out

    def leaf_path_values(self, feature_row) -> list[float]:
        """Raw leaf value reached in each tree, in boosting order."""
        row = np.asarray(feature_row, dtype=float)
        return [_route(tree, row) for tree in self.trees]


def fit(samples: SampleSet, config: BoostConfig) -> BoostedModel:
    """Train a boosted ensemble; deterministic for identical inputs."""
    config.validate()
    if samples.n_samples == 0:
        raise InvalidInputError("cannot fit on an empty sample set")
    loss = config.loss_fn()
    X = samples.features
    y = samples.targets
    f0 = loss.initial_prediction(y)
    predictions = np.full(samples.n_samples, f0, dtype=float)
    trees: list[TreeNode] = []
    for _ in range(config.n_trees):
        grad = loss.negative_gradient(y, predictions)

        def leaf_fn(idx, grad=grad, predictions=predictions):
            return loss.leaf_value(grad[idx], y[idx], predictions[idx])

        root, assigned = _grow_tree(X, grad, config.max_depth,
                                    config.min_samples_leaf, leaf_fn)
        tree_pred = np.empty_like(predictions)
        for idx, value in assigned:
            tree_pred[idx] = value
        predictions = predictions + config.learning_rate * tree_pred
        trees.append(root)
    return BoostedModel(f0=f0, trees=trees, config=config,
                        n_features=samples.n_features)


def model_to_doc(model: BoostedModel) -> dict:
    """Self-describing document for a trained model; see model_from_doc."""
    cfg = model.config
    return {
        "format_version": FORMAT_VERSION,
        "f0": model.f0,
        "n_features": model.n_features,
        "config": {
            "n_trees": cfg.n_trees,
            "learning_rate": cfg.learning_rate,
            "max_depth": cfg.max_depth,
            "min_samples_leaf": cfg.min_samples_leaf,
            "loss": cfg.loss,
        },
        "trees": [tree.to_dict() for tree in model.trees],
    }


def model_from_doc(doc: dict) -> BoostedModel:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidInputError(f"unsupported model format version {version!r}")
    cfg = BoostConfig(**doc["config"])
    cfg.validate()
    trees = [TreeNode.from_dict(d) for d in doc["trees"]]
    if len(trees) != cfg.n_trees:
        raise InvalidInputError(
            f"document carries {len(trees)} trees but the config says {cfg.n_trees}")
    return BoostedModel(f0=float(doc["f0"]), trees=trees, config=cfg,
                        n_features=int(doc["n_features"]))
