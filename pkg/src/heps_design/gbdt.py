"""
Gradient-boosted regression trees for the loss and ZVS surrogates.

Squared-error boosting with exact greedy split search over all midpoints of
sorted unique feature values and L2-regularized leaf weights Σr/(n + λ).
Trees are stored as flat arrays so prediction is vectorized over rows and,
for a whole ensemble, over trees.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from heps_design.errors import DomainError
from heps_design.io import read_text, write_text_atomic

logger = logging.getLogger(__name__)

MODEL_FORMAT = "heps-gbdt/1"
FEATURE_NAMES = ("P_W", "V2_V", "S", "Din")
PREDICT_CHUNK_ROWS = 2048

# splits whose gain is below this fraction of the target energy are rejected
_GAIN_RTOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``X`` (rows x features) and targets ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def take(self, index: np.ndarray) -> "Dataset":
        return Dataset(self.X[index], self.y[index])


def as_dataset(X, y) -> Dataset:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
        raise DomainError(f"features {X.shape} and targets {y.shape} do not line up", field="samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("features and targets must be finite", field="samples")
    return Dataset(X, y)


@dataclass(frozen=True)
class TrainConfig:
    max_depth: int = 9
    reg_lambda: float = 0.1
    learning_rate: float = 0.08
    max_trees: int = 2000
    min_samples_leaf: int = 1
    early_stopping_rounds: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise DomainError(f"max_depth must be >= 0, got {self.max_depth}", field="max_depth")
        if self.reg_lambda < 0:
            raise DomainError(f"reg_lambda must be >= 0, got {self.reg_lambda}", field="reg_lambda")
        if not 0 < self.learning_rate <= 1:
            raise DomainError(f"learning_rate must lie in (0, 1], got {self.learning_rate}", field="learning_rate")
        if self.max_trees < 0:
            raise DomainError(f"max_trees must be >= 0, got {self.max_trees}", field="max_trees")
        if self.min_samples_leaf < 1:
            raise DomainError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}", field="min_samples_leaf")
        if self.early_stopping_rounds < 1:
            raise DomainError(
                f"early_stopping_rounds must be >= 1, got {self.early_stopping_rounds}", field="early_stopping_rounds"
            )


LOSS_TRAIN_CONFIG = TrainConfig(max_depth=9, reg_lambda=0.1)
ZVS_TRAIN_CONFIG = TrainConfig(max_depth=6, reg_lambda=1.0)


@dataclass(frozen=True)
class RegressionTree:
    """
    Binary tree in array form. Node 0 is the root; ``feature == -1`` marks a
    leaf. Rows with ``x[feature] < threshold`` go to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.nonzero(feat >= 0)[0]
            if len(active) == 0:
                return node
            cur = node[active]
            go_left = X[active, feat[active]] < self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> Dict[str, list]:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, list]) -> "RegressionTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float),
        )


@dataclass
class BoostedEnsemble:
    base_score: float
    learning_rate: float
    n_features: int
    trees: List[RegressionTree] = field(default_factory=list)
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    best_validation_rmse: Optional[float] = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _packed(self):
        cache = self.__dict__.get("_packed_cache")
        if cache is not None and cache[0] == len(self.trees):
            return cache[1]
        width = max(t.n_nodes for t in self.trees)
        shape = (len(self.trees), width)
        packed = {
            "feature": np.full(shape, -1, dtype=np.int64),
            "threshold": np.zeros(shape),
            "left": np.zeros(shape, dtype=np.int64),
            "right": np.zeros(shape, dtype=np.int64),
            "value": np.zeros(shape),
        }
        for i, tree in enumerate(self.trees):
            for key in packed:
                packed[key][i, : tree.n_nodes] = getattr(tree, key)
        self.__dict__["_packed_cache"] = (len(self.trees), packed)
        return packed

    def predict_batch(self, X) -> np.ndarray:
        """
        Predict many rows at once.

        Args:
            X (array-like): Rows x n_features.

        Returns:
            np.ndarray: base_score + learning_rate * sum of tree outputs per row.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DomainError(f"expected {self.n_features} features, got {X.shape[1]}", field="features")
        out = np.full(len(X), self.base_score)
        if not self.trees:
            return out
        packed = self._packed()
        tree_idx = np.arange(len(self.trees))[:, None]
        for start in range(0, len(X), PREDICT_CHUNK_ROWS):
            chunk = X[start:start + PREDICT_CHUNK_ROWS]
            rows = np.arange(len(chunk))[None, :]
            node = np.zeros((len(self.trees), len(chunk)), dtype=np.int64)
            while True:
                feat = packed["feature"][tree_idx, node]
                internal = feat >= 0
                if not internal.any():
                    break
                x = chunk[rows, np.maximum(feat, 0)]
                go_left = x < packed["threshold"][tree_idx, node]
                nxt = np.where(go_left, packed["left"][tree_idx, node], packed["right"][tree_idx, node])
                node = np.where(internal, nxt, node)
            # rows contiguous so every row sums its trees in the same order
            leaves = np.ascontiguousarray(packed["value"][tree_idx, node].T)
            out[start:start + len(chunk)] = self.base_score + self.learning_rate * leaves.sum(axis=1)
        return out

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "n_features": int(self.n_features),
            "feature_names": list(self.feature_names),
            "best_validation_rmse": self.best_validation_rmse,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoostedEnsemble":
        if data.get("format") != MODEL_FORMAT:
            raise DomainError(f"unsupported model format {data.get('format')!r}", field="format")
        return cls(
            base_score=float(data["base_score"]),
            learning_rate=float(data["learning_rate"]),
            n_features=int(data["n_features"]),
            trees=[RegressionTree.from_dict(t) for t in data["trees"]],
            feature_names=tuple(data.get("feature_names", FEATURE_NAMES)),
            best_validation_rmse=data.get("best_validation_rmse"),
        )


def split_dataset(samples: Dataset, seed: int) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Random 70/15/15 partition.

    Args:
        samples (Dataset): Full dataset.
        seed (int): Seed of the permutation.

    Returns:
        Tuple[Dataset, Dataset, Dataset]: Train, validation and test parts
        of sizes floor(0.70N), floor(0.15N) and the remainder.

    Raises:
        DomainError: If fewer than 10 samples are given.
    """
    N = len(samples)
    if N < 10:
        raise DomainError(f"at least 10 samples are needed to split, got {N}", field="samples")
    order = np.random.default_rng(seed).permutation(N)
    n_train = N * 70 // 100
    n_val = N * 15 // 100
    return (
        samples.take(order[:n_train]),
        samples.take(order[n_train:n_train + n_val]),
        samples.take(order[n_train + n_val:]),
    )


class _TreeBuilder:
    """Exact greedy growth of one tree on pre-coded features."""

    def __init__(self, codes: np.ndarray, uniques: List[np.ndarray], cfg: TrainConfig, min_gain: float):
        self.codes = codes
        self.uniques = uniques
        self.cfg = cfg
        self.min_gain = min_gain

    def _best_split(self, idx: np.ndarray, r: np.ndarray, G: float):
        n = len(idx)
        lam = self.cfg.reg_lambda
        msl = self.cfg.min_samples_leaf
        parent = G * G / (n + lam)
        best = None
        for f, uniq in enumerate(self.uniques):
            codes_f = self.codes[idx, f]
            if len(uniq) <= 4 * n:
                cnt = np.bincount(codes_f, minlength=len(uniq))
                sums = np.bincount(codes_f, weights=r, minlength=len(uniq))
                present = np.nonzero(cnt)[0]
                cnt, sums = cnt[present], sums[present]
            else:
                present, inverse = np.unique(codes_f, return_inverse=True)
                cnt = np.bincount(inverse)
                sums = np.bincount(inverse, weights=r)
            if len(present) < 2:
                continue
            n_left = np.cumsum(cnt)[:-1]
            g_left = np.cumsum(sums)[:-1]
            n_right = n - n_left
            g_right = G - g_left
            gain = g_left ** 2 / (n_left + lam) + g_right ** 2 / (n_right + lam) - parent
            gain[(n_left < msl) | (n_right < msl)] = -np.inf
            j = int(np.argmax(gain))
            if gain[j] <= self.min_gain:
                continue
            if best is None or gain[j] > best[0]:
                lo, hi = uniq[present[j]], uniq[present[j + 1]]
                threshold = 0.5 * (lo + hi)
                if threshold <= lo:
                    threshold = hi
                best = (float(gain[j]), f, float(threshold), int(present[j]))
        return best

    def build(self, residuals: np.ndarray) -> RegressionTree:
        feature, threshold, left, right, value = [], [], [], [], []
        lam = self.cfg.reg_lambda

        def new_node():
            for column, default in ((feature, -1), (threshold, 0.0), (left, 0), (right, 0), (value, 0.0)):
                column.append(default)
            return len(feature) - 1

        stack = [(new_node(), np.arange(len(residuals)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            r = residuals[idx]
            G = float(r.sum())
            value[node] = G / (len(idx) + lam) if len(idx) + lam > 0 else 0.0
            if depth >= self.cfg.max_depth or len(idx) < 2 * self.cfg.min_samples_leaf:
                continue
            split = self._best_split(idx, r, G)
            if split is None:
                continue
            _, f, thr, last_left_code = split
            mask = self.codes[idx, f] <= last_left_code
            feature[node], threshold[node] = f, thr
            left[node], right[node] = new_node(), new_node()
            stack.append((right[node], idx[~mask], depth + 1))
            stack.append((left[node], idx[mask], depth + 1))

        return RegressionTree(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold, dtype=float),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            value=np.asarray(value, dtype=float),
        )


def _rmse(y: np.ndarray, pred: np.ndarray) -> float:
    return math.sqrt(float(np.mean((y - pred) ** 2)))


def fit(train: Dataset, validation: Optional[Dataset], cfg: TrainConfig, progress: bool = False) -> BoostedEnsemble:
    """
    Boost regression trees on squared error.

    Training rows are put in a canonical order first, so the model does not
    depend on the order the rows arrive in.

    Args:
        train (Dataset): Training rows.
        validation (Optional[Dataset]): Rows for early stopping; None keeps every tree.
        cfg (TrainConfig): Hyper-parameters.
        progress (bool): Show a tqdm bar over boosting rounds.

    Returns:
        BoostedEnsemble: Ensemble truncated to its best-validation prefix.

    Raises:
        DomainError: If the training set is empty.
    """
    if len(train) == 0:
        raise DomainError("training set is empty", field="train")
    X, y = train.X, train.y
    order = np.lexsort(np.column_stack([X, y]).T[::-1])
    X, y = X[order], y[order]

    uniques, codes = [], np.empty(X.shape, dtype=np.int64)
    for f in range(X.shape[1]):
        uniq, inverse = np.unique(X[:, f], return_inverse=True)
        uniques.append(uniq)
        codes[:, f] = inverse.reshape(-1)

    base = float(np.mean(y))
    model = BoostedEnsemble(base_score=base, learning_rate=cfg.learning_rate, n_features=X.shape[1])
    min_gain = _GAIN_RTOL * max(float(np.sum(y * y)), np.finfo(float).tiny)
    builder = _TreeBuilder(codes, uniques, cfg, min_gain)

    pred = np.full(len(y), base)
    use_validation = validation is not None and len(validation) > 0
    if use_validation:
        val_pred = np.full(len(validation), base)
        best_rmse = _rmse(validation.y, val_pred)
        best_count = 0

    rounds = tqdm(range(cfg.max_trees), desc="boosting", disable=not progress, leave=False)
    for k in rounds:
        tree = builder.build(y - pred)
        if cfg.max_depth > 0 and tree.n_nodes == 1:
            logger.debug("no split improves the residuals after %d trees", k)
            break
        model.trees.append(tree)
        pred = pred + cfg.learning_rate * tree.predict(X)
        if use_validation:
            val_pred = val_pred + cfg.learning_rate * tree.predict(validation.X)
            rmse = _rmse(validation.y, val_pred)
            if rmse < best_rmse:
                best_rmse, best_count = rmse, len(model.trees)
            elif len(model.trees) - best_count >= cfg.early_stopping_rounds:
                logger.debug("early stop at %d trees, best prefix %d", len(model.trees), best_count)
                break

    if use_validation:
        del model.trees[best_count:]
        model.best_validation_rmse = best_rmse
    logger.info("fitted %d trees (train rows %d)", model.n_trees, len(y))
    return model


def predict(model: BoostedEnsemble, features) -> float:
    """Prediction for one feature vector."""
    x = np.asarray(features, dtype=float).reshape(1, -1)
    return float(model.predict_batch(x)[0])


def score(model: BoostedEnsemble, dataset: Dataset) -> Dict[str, float]:
    """
    RMSE, MAE and R² of the model on a dataset.

    R² is 1 when the targets are constant and predicted exactly, and -inf
    when they are constant but mispredicted.

    Raises:
        DomainError: If the dataset is empty.
    """
    if len(dataset) == 0:
        raise DomainError("cannot score an empty dataset", field="dataset")
    pred = model.predict_batch(dataset.X)
    err = dataset.y - pred
    sse = float(np.sum(err ** 2))
    sst = float(np.sum((dataset.y - np.mean(dataset.y)) ** 2))
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 1.0 if sse == 0 else -math.inf
    return {
        "rmse": math.sqrt(sse / len(dataset)),
        "mae": float(np.mean(np.abs(err))),
        "r2": r2,
        "n": len(dataset),
    }


def save_model(model: BoostedEnsemble, path: str) -> None:
    write_text_atomic(path, json.dumps(model.to_dict(), indent=1, allow_nan=False) + "\n")


def load_model(path: str) -> BoostedEnsemble:
    return BoostedEnsemble.from_dict(json.loads(read_text(path)))
