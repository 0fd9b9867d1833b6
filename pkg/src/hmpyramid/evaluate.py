"""How good is a generative model's output?  Distance-based coverage metrics,
nearest-neighbor classification from generated pools, and linear probes on
internal representations.

All distances are Euclidean over flattened images.  Bulk nearest-neighbor
queries run through one shared BLAS-backed path, so tie-breaking (lowest
index wins) is identical across every metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .machine import HelmholtzMachine
from .numerics import sigmoid

__all__ = [
    "nearest_in_set",
    "density_vector",
    "normalized_entropy",
    "unrepresented_count",
    "mean_min_distance",
    "adm",
    "novelty",
    "knn1_classify",
    "knn1_accuracy",
    "ProbeModel",
    "probe_train",
    "probe_feature_sets",
    "improvement_factor",
]


def _check_pool(queries, pool):
    q = np.asarray(queries, dtype=np.float64)
    p = np.asarray(pool, dtype=np.float64)
    if q.ndim != 2 or p.ndim != 2:
        raise DimensionError("expected 2-D (n, features) arrays")
    if q.shape[1] != p.shape[1]:
        raise DimensionError(f"feature widths differ: {q.shape[1]} vs {p.shape[1]}")
    if q.shape[0] == 0 or p.shape[0] == 0:
        raise ValueError("empty query or pool set")
    return q, p


def _nearest(queries, pool, chunk: int = 512):
    """Index and distance of each query's nearest pool row (ties: lowest
    index).  Distances via |q|^2 + |p|^2 - 2 q.p, clamped at zero."""
    q, p = _check_pool(queries, pool)
    p_sq = np.einsum("ij,ij->i", p, p)
    idx = np.empty(len(q), dtype=np.int64)
    dist = np.empty(len(q))
    for start in range(0, len(q), chunk):
        block = q[start:start + chunk]
        d2 = np.einsum("ij,ij->i", block, block)[:, None] + p_sq[None, :]
        d2 -= 2.0 * (block @ p.T)
        np.maximum(d2, 0.0, out=d2)
        best = d2.argmin(axis=1)
        idx[start:start + chunk] = best
        dist[start:start + chunk] = np.sqrt(d2[np.arange(len(block)), best])
    return idx, dist


def nearest_in_set(sample, pool) -> tuple[int, float]:
    """Index and distance of the pool row closest to one sample (ties: lowest
    index)."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 1:
        raise DimensionError(f"sample must be 1-D, got shape {sample.shape}")
    idx, dist = _nearest(sample[None, :], pool)
    return int(idx[0]), float(dist[0])


def density_vector(generated, train) -> np.ndarray:
    """Fraction of generated samples falling nearest to each training sample.

    Entry i is the share of ``generated`` whose nearest neighbor in ``train``
    is row i; entries sum to 1.
    """
    g, t = _check_pool(generated, train)
    idx, _ = _nearest(g, t)
    return np.bincount(idx, minlength=len(t)).astype(np.float64) / len(g)


def entropy(fractions) -> float:
    """Shannon entropy of an assignment distribution in nats.  Zero entries
    contribute nothing."""
    f = np.asarray(fractions, dtype=np.float64)
    if f.ndim != 1 or len(f) < 1:
        raise ValueError("need a nonempty 1-D distribution")
    pos = f[f > 0.0]
    return float(-np.sum(pos * np.log(pos)))


def normalized_entropy(fractions) -> float:
    """Shannon entropy of an assignment distribution, scaled to [0, 1] by the
    uniform maximum ln(N).  N must be >= 2."""
    f = np.asarray(fractions, dtype=np.float64)
    if f.ndim != 1 or len(f) < 2:
        raise ValueError("need a 1-D distribution over at least two bins")
    return float(entropy(f) / np.log(len(f)))


def unrepresented_count(fractions) -> int:
    """Number of training samples no generated sample landed on."""
    f = np.asarray(fractions, dtype=np.float64)
    return int(np.count_nonzero(f == 0.0))


def mean_min_distance(generated, train) -> float:
    """Average distance from each generated sample to its nearest training
    sample: how far generation strays from the data it saw."""
    g, t = _check_pool(generated, train)
    _, dist = _nearest(g, t)
    return float(dist.mean())


def adm(samples) -> float:
    """Average distance of samples to their own mean: the spread of a pool."""
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ValueError("need a non-empty 2-D sample array")
    return float(np.linalg.norm(s - s.mean(axis=0), axis=1).mean())


def novelty(train, generated) -> float:
    """Summed distance from each training sample to its nearest generated
    sample: total ground the generated pool fails to cover."""
    t, g = _check_pool(train, generated)
    _, dist = _nearest(t, g)
    return float(dist.sum())


def knn1_classify(train, train_labels, query) -> int:
    """Label of the training row nearest to one query vector."""
    idx, _ = nearest_in_set(query, train)
    return int(np.asarray(train_labels)[idx])


def knn1_accuracy(train, train_labels, test, test_labels) -> float:
    """Fraction of test vectors whose nearest training row shares their
    label."""
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)
    t, q = _check_pool(train, test)
    if len(train_labels) != len(t) or len(test_labels) != len(q):
        raise DimensionError("label counts must match their vector counts")
    idx, _ = _nearest(q, t)
    return float(np.mean(train_labels[idx] == test_labels))


@dataclass
class ProbeModel:
    """Multinomial logistic classifier: weight matrix (classes, features + 1),
    bias in the last column.  Prediction is the argmax score (ties: lowest
    class id)."""

    weights: np.ndarray

    def _scores(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1] - 1:
            raise DimensionError(
                f"features must be (n, {self.weights.shape[1] - 1}), got {x.shape}"
            )
        return x @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict(self, features) -> np.ndarray:
        return self._scores(features).argmax(axis=1)

    def accuracy(self, features, labels) -> float:
        return float(np.mean(self.predict(features) == np.asarray(labels)))

    def cross_entropy(self, features, labels) -> float:
        """Mean negative log-probability of the true labels."""
        s = self._scores(features)
        s -= s.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(s).sum(axis=1))
        labels = np.asarray(labels)
        return float(np.mean(log_z - s[np.arange(len(labels)), labels]))


def probe_train(features, labels, iterations: int = 300, step: float = 0.5,
                seed: int = 0, init_sigma: float = 0.0) -> ProbeModel:
    """Fit a softmax classifier by full-batch gradient descent.

    Weights start at zero (making the fit deterministic and ``seed``
    irrelevant) unless ``init_sigma`` requests a random start.  Class count is
    ``max(labels) + 1``; at least two classes must be present.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.ndim != 1 or len(x) != len(y):
        raise DimensionError("need (n, features) and matching (n,) labels")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if not step > 0:
        raise ValueError("step must be positive")
    if len(np.unique(y)) < 2:
        raise ValueError("labels are degenerate: need at least two classes present")
    n_classes = int(y.max()) + 1
    if init_sigma > 0:
        from .numerics import make_rng

        w = make_rng(seed, 0).normal(0.0, init_sigma, (n_classes, x.shape[1] + 1))
    else:
        w = np.zeros((n_classes, x.shape[1] + 1))
    x_aug = np.concatenate([x, np.ones((len(x), 1))], axis=1)
    onehot = np.zeros((len(y), n_classes))
    onehot[np.arange(len(y)), y] = 1.0
    for _ in range(iterations):
        s = x_aug @ w.T
        s -= s.max(axis=1, keepdims=True)
        np.exp(s, out=s)
        s /= s.sum(axis=1, keepdims=True)
        w -= (step / len(x)) * ((s - onehot).T @ x_aug)
    return ProbeModel(w)


def probe_feature_sets(machine: HelmholtzMachine, visibles) -> dict[str, np.ndarray]:
    """Mean-field layer activities as probe features, one batch pass.

    Returns ``layer_k`` (activities of hidden layer k) for k = 1..L followed
    by ``concat_1_k`` (layers 1..k side by side), in that order.
    """
    x = np.asarray(visibles, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != machine.arch.sizes[0]:
        raise DimensionError(
            f"visibles must be (n, {machine.arch.sizes[0]}), got {x.shape}"
        )
    layers = []
    act = x
    for Rk in machine.R:
        act = sigmoid(
            act @ Rk[:, :-1].T + Rk[:, -1]
        )
        layers.append(act)
    sets = {f"layer_{k}": layers[k - 1] for k in range(1, machine.n_hidden + 1)}
    for k in range(1, machine.n_hidden + 1):
        sets[f"concat_1_{k}"] = np.concatenate(layers[:k], axis=1)
    return sets


def improvement_factor(accuracy: float, baseline: float) -> float:
    """Ratio of an accuracy to a baseline accuracy; baseline must be
    positive."""
    if not baseline > 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return float(accuracy) / float(baseline)
