"""Base learners and pool generation from bootstrapped candidates.

All learners are small numpy implementations so training is bit-reproducible
from a seed. Features are z-scored with the statistics of each classifier's
own training sample; the scaler travels with the fitted model.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numba
import numpy as np

from .dataset_io import Dataset, FoldSplit, bootstrap
from .seeding import derive_seed

KNN_KS = (1, 3, 5, 7, 9, 13, 21)


@dataclass(frozen=True)
class Technique:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in ("Perceptron", "KNN", "DecisionTree", "GaussianNB", "MLP"):
            raise ValueError(f"unknown technique {self.kind!r}")
        if self.kind == "KNN" and dict(self.params).get("k") not in KNN_KS:
            raise ValueError(f"KNN k must be one of {KNN_KS}")

    @property
    def label(self) -> str:
        if self.kind == "KNN":
            return f"KNN({dict(self.params)['k']})"
        return self.kind


PERCEPTRON = Technique("Perceptron")
MULTI_TECHNIQUES = (
    *(Technique("KNN", (("k", k),)) for k in KNN_KS),
    Technique("DecisionTree"),
    Technique("GaussianNB"),
    Technique("MLP"),
    PERCEPTRON,
)


def _argmax_lowest(scores: np.ndarray) -> np.ndarray:
    # np.argmax already returns the first maximum, i.e. the lowest class index
    return np.argmax(scores, axis=1)


class Scaler:
    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)

    @classmethod
    def fit(cls, X):
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, width):
        return cls(np.zeros(width), np.ones(width))

    def __call__(self, X):
        return (X - self.mean) / self.scale


class ConstantModel:
    def __init__(self, label: int):
        self.label = int(label)

    def decide(self, Z):
        return np.full(Z.shape[0], self.label, dtype=np.int64)

    def params(self):
        return {"label": self.label}


@numba.njit(cache=True)
def _perceptron_epochs(Z, T, W, b, orders, lr):
    n_out = W.shape[0]
    for epoch in range(orders.shape[0]):
        mistakes = 0
        for t in range(orders.shape[1]):
            i = orders[epoch, t]
            for o in range(n_out):
                s = b[o]
                for f in range(Z.shape[1]):
                    s += W[o, f] * Z[i, f]
                pred = 1.0 if s > 0.0 else -1.0
                if pred != T[i, o]:
                    mistakes += 1
                    for f in range(Z.shape[1]):
                        W[o, f] += lr * T[i, o] * Z[i, f]
                    b[o] += lr * T[i, o]
        if mistakes == 0:
            break


class PerceptronModel:
    """Linear threshold unit; one weight row for two classes, one-vs-rest above that."""

    def __init__(self, weights, bias, classes):
        self.weights = np.atleast_2d(np.asarray(weights, dtype=float))
        self.bias = np.atleast_1d(np.asarray(bias, dtype=float))
        self.classes = np.asarray(classes, dtype=np.int64)

    @classmethod
    def fit(cls, Z, y, rng, lr=1.0, epochs=100):
        classes = np.unique(y)
        if classes.size == 2:
            T = np.where(y == classes[1], 1.0, -1.0)[:, None]
        else:
            T = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
        W = np.zeros((T.shape[1], Z.shape[1]))
        b = np.zeros(T.shape[1])
        orders = np.stack([rng.permutation(Z.shape[0]) for _ in range(epochs)])
        _perceptron_epochs(np.ascontiguousarray(Z), T, W, b, orders, lr)
        return cls(W, b, classes)

    def decide(self, Z):
        scores = Z @ self.weights.T + self.bias
        if self.classes.size == 2:
            return self.classes[(scores[:, 0] > 0).astype(np.int64)]
        return self.classes[_argmax_lowest(scores)]

    def params(self):
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist(), "classes": self.classes.tolist()}


class KNNModel:
    def __init__(self, k, points, labels, n_classes):
        self.k = int(k)
        self.points = np.asarray(points, dtype=float)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.n_classes = int(n_classes)

    def decide(self, Z):
        k = min(self.k, self.points.shape[0])
        d2 = (
            np.sum(Z**2, axis=1)[:, None]
            - 2.0 * Z @ self.points.T
            + np.sum(self.points**2, axis=1)[None, :]
        )
        # stable sort: equidistant neighbours resolve to the lower training index
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        votes = np.zeros((Z.shape[0], self.n_classes))
        np.add.at(votes, (np.arange(Z.shape[0])[:, None], self.labels[nearest]), 1.0)
        return _argmax_lowest(votes)

    def params(self):
        return {"k": self.k, "points": self.points.tolist(), "labels": self.labels.tolist(), "n_classes": self.n_classes}


class GaussianNBModel:
    def __init__(self, classes, log_prior, mean, var):
        self.classes = np.asarray(classes, dtype=np.int64)
        self.log_prior = np.asarray(log_prior, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.var = np.asarray(var, dtype=float)

    @classmethod
    def fit(cls, Z, y, var_floor=1e-9):
        classes = np.unique(y)
        mean = np.stack([Z[y == c].mean(axis=0) for c in classes])
        var = np.stack([Z[y == c].var(axis=0) for c in classes]) + var_floor
        prior = np.array([np.mean(y == c) for c in classes])
        return cls(classes, np.log(prior), mean, var)

    def decide(self, Z):
        ll = -0.5 * (
            np.sum(np.log(2.0 * np.pi * self.var), axis=1)[None, :]
            + np.sum((Z[:, None, :] - self.mean[None]) ** 2 / self.var[None], axis=2)
        )
        return self.classes[_argmax_lowest(ll + self.log_prior)]

    def params(self):
        return {
            "classes": self.classes.tolist(),
            "log_prior": self.log_prior.tolist(),
            "mean": self.mean.tolist(),
            "var": self.var.tolist(),
        }


class TreeModel:
    """CART with Gini impurity stored as flat node arrays."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.int64)

    @classmethod
    def fit(cls, Z, y, n_classes, max_depth=10, min_leaf=1):
        nodes = []  # [feature, threshold, left, right, value]
        onehot = np.eye(n_classes, dtype=np.int64)[y]

        def grow(rows, depth):
            counts = onehot[rows].sum(axis=0)
            node = len(nodes)
            nodes.append([-1, 0.0, -1, -1, int(np.argmax(counts))])
            if depth >= max_depth or np.count_nonzero(counts) <= 1 or rows.size < 2 * min_leaf:
                return node
            split = _best_split(Z[rows], onehot[rows], min_leaf)
            if split is None:
                return node
            f, thr = split
            go_left = Z[rows, f] <= thr
            nodes[node][0], nodes[node][1] = f, thr
            nodes[node][2] = grow(rows[go_left], depth + 1)
            nodes[node][3] = grow(rows[~go_left], depth + 1)
            return node

        grow(np.arange(Z.shape[0]), 0)
        cols = list(zip(*nodes))
        return cls(*cols)

    def decide(self, Z):
        at = np.zeros(Z.shape[0], dtype=np.int64)
        active = self.feature[at] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            node = at[idx]
            go_left = Z[idx, self.feature[node]] <= self.threshold[node]
            at[idx] = np.where(go_left, self.left[node], self.right[node])
            active = self.feature[at] >= 0
        return self.value[at]

    def params(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }


def _best_split(X, Y, min_leaf):
    """Return (feature, threshold) with the lowest weighted Gini, or None."""
    n = X.shape[0]
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    left = np.cumsum(Y[order], axis=0)[:-1].astype(float)  # (n-1, d, L)
    total = Y.sum(axis=0).astype(float)
    right = total[None, None, :] - left
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    gini_l = 1.0 - np.sum(left**2, axis=2) / nl**2
    gini_r = 1.0 - np.sum(right**2, axis=2) / nr**2
    impurity = (nl * gini_l + nr * gini_r) / n
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid &= (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return None
    impurity = np.where(valid, impurity, np.inf)
    parent = 1.0 - np.sum(total**2) / n**2
    # feature-major scan so ties go to the lowest feature, then lowest threshold
    flat = impurity.T.ravel()
    best = int(np.argmin(flat))
    if not flat[best] < parent - 1e-12:
        return None
    f, pos = divmod(best, n - 1)
    return f, 0.5 * (xs[pos, f] + xs[pos + 1, f])


class MLPModel:
    """One tanh hidden layer with a softmax output, trained by minibatch SGD with momentum."""

    def __init__(self, W1, b1, W2, b2, classes):
        self.W1 = np.asarray(W1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.W2 = np.asarray(W2, dtype=float)
        self.b2 = np.asarray(b2, dtype=float)
        self.classes = np.asarray(classes, dtype=np.int64)

    @classmethod
    def fit(cls, Z, y, rng, hidden=100, lr=0.01, epochs=200, batch=32, momentum=0.9):
        classes = np.unique(y)
        T = (y[:, None] == classes[None, :]).astype(float)
        d, L = Z.shape[1], classes.size
        lim1 = np.sqrt(6.0 / (d + hidden))
        lim2 = np.sqrt(6.0 / (hidden + L))
        W1 = rng.uniform(-lim1, lim1, (d, hidden))
        b1 = rng.uniform(-lim1, lim1, hidden)
        W2 = rng.uniform(-lim2, lim2, (hidden, L))
        b2 = rng.uniform(-lim2, lim2, L)
        vel = [np.zeros_like(W1), np.zeros_like(b1), np.zeros_like(W2), np.zeros_like(b2)]
        n = Z.shape[0]
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                x, t = Z[rows], T[rows]
                h = np.tanh(x @ W1 + b1)
                logits = h @ W2 + b2
                logits -= logits.max(axis=1, keepdims=True)
                p = np.exp(logits)
                p /= p.sum(axis=1, keepdims=True)
                g_out = (p - t) / rows.size
                g_h = (g_out @ W2.T) * (1.0 - h**2)
                grads = (x.T @ g_h, g_h.sum(axis=0), h.T @ g_out, g_out.sum(axis=0))
                for v, g, w in zip(vel, grads, (W1, b1, W2, b2)):
                    v *= momentum
                    v -= lr * g
                    w += v
        return cls(W1, b1, W2, b2, classes)

    def decide(self, Z):
        logits = np.tanh(Z @ self.W1 + self.b1) @ self.W2 + self.b2
        return self.classes[_argmax_lowest(logits)]

    def params(self):
        return {
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2.tolist(),
            "classes": self.classes.tolist(),
        }


_MODEL_TYPES = {
    "Constant": ConstantModel,
    "Perceptron": PerceptronModel,
    "KNN": KNNModel,
    "GaussianNB": GaussianNBModel,
    "DecisionTree": TreeModel,
    "MLP": MLPModel,
}


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    technique: Technique
    model: object
    scaler: Scaler
    train_seed: int
    n_features: int

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return self.model.decide(self.scaler(X))

    def to_dict(self) -> dict:
        return {
            "technique": self.technique.kind,
            "params": dict(self.technique.params),
            "model": type(self.model).__name__,
            "model_params": self.model.params(),
            "scaler": {"mean": self.scaler.mean.tolist(), "scale": self.scaler.scale.tolist()},
            "train_seed": self.train_seed,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedClassifier":
        model_cls = {c.__name__: c for c in _MODEL_TYPES.values()}[d["model"]]
        return cls(
            Technique(d["technique"], tuple(sorted(d["params"].items()))),
            model_cls(**d["model_params"]),
            Scaler(**d["scaler"]),
            d["train_seed"],
            d["n_features"],
        )


def train(technique: Technique, features, labels, seed: int, n_classes: int | None = None) -> TrainedClassifier:
    """Fit one base classifier; deterministic given ``seed``."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training requires at least one instance")
    if X.shape[0] != y.shape[0]:
        raise ValueError("features and labels differ in length")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    scaler = Scaler.fit(X)
    Z = scaler(X)
    rng = np.random.default_rng(seed)
    if np.unique(y).size == 1:
        model = ConstantModel(y[0])
    elif technique.kind == "Perceptron":
        model = PerceptronModel.fit(Z, y, rng)
    elif technique.kind == "KNN":
        model = KNNModel(dict(technique.params)["k"], Z, y, n_classes)
    elif technique.kind == "GaussianNB":
        model = GaussianNBModel.fit(Z, y)
    elif technique.kind == "DecisionTree":
        model = TreeModel.fit(Z, y, n_classes)
    else:
        model = MLPModel.fit(Z, y, rng)
    return TrainedClassifier(technique, model, scaler, seed, X.shape[1])


def predict(clf: TrainedClassifier, features) -> np.ndarray:
    return clf.predict(features)


@dataclass(eq=False)
class ClassifierPool:
    members: list
    val1_accuracy: np.ndarray
    candidate_index: np.ndarray
    predictions: dict = field(default_factory=dict)  # split tag -> (|C|, m) label matrix

    def __len__(self):
        return len(self.members)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for tag in sorted(self.predictions):
            h.update(tag.encode())
            h.update(np.ascontiguousarray(self.predictions[tag], dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


def build_pool(
    mode: str,
    split: FoldSplit,
    ds: Dataset,
    pool_size: int,
    candidates: int = 3000,
    seed: int = 0,
) -> ClassifierPool:
    """Train ``candidates`` bootstrapped classifiers and keep the best ``pool_size``.

    Mode ``P`` trains perceptrons only; mode ``M`` cycles through the eleven
    techniques in ``MULTI_TECHNIQUES``. Candidates are ranked by validation-1
    accuracy, ties going to the earlier candidate. Each retained member's
    predictions on val1, val2 and test are cached on the pool.
    """
    if mode not in ("P", "M"):
        raise ValueError(f"mode must be 'P' or 'M', not {mode!r}")
    if pool_size > candidates:
        raise ValueError(f"pool_size {pool_size} exceeds candidate count {candidates}")
    if pool_size < 1:
        raise ValueError("pool_size must be positive")
    techniques = (PERCEPTRON,) if mode == "P" else MULTI_TECHNIQUES
    splits = {"val1": split.val1_idx, "val2": split.val2_idx, "test": split.test_idx}
    X = ds.features
    trained, preds, acc = [], {tag: [] for tag in splits}, np.empty(candidates)
    for i in range(candidates):
        cand_seed = derive_seed(seed, "candidate", i)
        sample = bootstrap(split.train_idx, derive_seed(cand_seed, "bootstrap"))
        clf = train(
            techniques[i % len(techniques)],
            X[sample.indices],
            ds.labels[sample.indices],
            derive_seed(cand_seed, "train"),
            n_classes=ds.class_count,
        )
        for tag, idx in splits.items():
            preds[tag].append(clf.predict(X[idx]))
        acc[i] = np.mean(preds["val1"][-1] == ds.labels[split.val1_idx])
        trained.append(clf)
    # stable sort on -accuracy keeps the lower candidate index first among ties
    keep = np.argsort(-acc, kind="stable")[:pool_size]
    return ClassifierPool(
        members=[trained[i] for i in keep],
        val1_accuracy=acc[keep],
        candidate_index=keep,
        predictions={tag: np.stack([rows[i] for i in keep]) for tag, rows in preds.items()},
    )



POOL_FORMAT_VERSION = 1


def save_pool(pool: ClassifierPool, path) -> None:
    """Write model parameters and cached label matrices as versioned JSON."""
    payload = {
        "format": "cife-pool",
        "version": POOL_FORMAT_VERSION,
        "members": [m.to_dict() for m in pool.members],
        "val1_accuracy": pool.val1_accuracy.tolist(),
        "candidate_index": pool.candidate_index.tolist(),
        "predictions": {tag: rows.tolist() for tag, rows in pool.predictions.items()},
        "checksum": pool.checksum(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_pool(path) -> ClassifierPool:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "cife-pool" or payload.get("version") != POOL_FORMAT_VERSION:
        raise ValueError(f"{path}: not a version-{POOL_FORMAT_VERSION} pool file")
    pool = ClassifierPool(
        members=[TrainedClassifier.from_dict(m) for m in payload["members"]],
        val1_accuracy=np.asarray(payload["val1_accuracy"]),
        candidate_index=np.asarray(payload["candidate_index"], dtype=np.int64),
        predictions={t: np.asarray(r, dtype=np.int64) for t, r in payload["predictions"].items()},
    )
    if pool.checksum() != payload["checksum"]:
        raise ValueError(f"{path}: label-matrix checksum mismatch")
    return pool
