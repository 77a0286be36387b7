"""Distribution-fidelity evaluation of synthetic correlation matrices.

Pipeline: vectorize lower triangles, fit a 2-D PCA basis on the
reference (empirical) set only, project every set in that basis, then
compare clouds by exact 2-Wasserstein distance (minimum-cost perfect
assignment on squared Euclidean costs).  The summary statistic pair
(mu_e, mu_g) is the mean within-real distance versus the mean
real-to-synthetic distance; a faithful generator has mu_g close to mu_e.

Conditioning fidelity is measured by a softmax classifier over the
stylized-fact feature vector, trained on the real corpus and applied to
synthetic samples against their conditioning labels.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import neural, rng
from .corpus import LabeledCorpus
from .exceptions import DegenerateBasis, InvalidInput
from .facts import FEATURE_NAMES, feature_vector
from .gan import REGIMES, tri_from_matrix

EXACT_LIMIT = 512


@dataclass
class PointCloud2D:
    points: np.ndarray  # (n, 2)
    basis: np.ndarray  # (2, d) orthonormal rows
    mean: np.ndarray  # (d,)


@dataclass
class DistanceStats:
    mu_e: float
    sigma_e: float
    mu_g: float
    sigma_g: float
    max_within: float
    min_between: float


@dataclass
class FidelityResult:
    confusion: np.ndarray  # rows: conditioning label, cols: predicted
    accuracy: float
    real_holdout_accuracy: float
    weak_classifier: bool


def _vectorize(mats) -> np.ndarray:
    return np.stack([tri_from_matrix(m) for m in mats])


def pca_project(reference, *others):
    """Fit a 2-D basis on the reference set; project every set in it.

    The synthetic sets never influence the basis.  Returns one
    :class:`PointCloud2D` per input set, reference first.
    """
    if len(reference) == 0:
        raise InvalidInput("reference set is empty")
    x = _vectorize(reference)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / max(len(reference) - 1, 1)
    w, v = np.linalg.eigh(cov)
    if np.sum(w > 1e-12 * max(w[-1], 1.0)) < 2:
        raise DegenerateBasis("reference set has rank < 2")
    basis = v[:, -2:][:, ::-1].T  # rows: first and second principal axes
    # deterministic sign: largest-magnitude coefficient positive
    for r in range(2):
        k = int(np.argmax(np.abs(basis[r])))
        if basis[r, k] < 0:
            basis[r] = -basis[r]
    clouds = [PointCloud2D((xc @ basis.T), basis, mean)]
    for other in others:
        xo = _vectorize(other) - mean
        clouds.append(PointCloud2D(xo @ basis.T, basis, mean))
    return clouds


def _sha_order(points: np.ndarray) -> np.ndarray:
    keys = [
        hashlib.sha256(np.ascontiguousarray(p, dtype="<f8").tobytes()).digest()
        for p in points
    ]
    return np.asarray(sorted(range(len(keys)), key=keys.__getitem__))


def subsample_to(points: np.ndarray, n: int) -> np.ndarray:
    """Deterministic subsample: order by SHA-256 of the row bytes."""
    if len(points) <= n:
        return points
    order = _sha_order(points)[:n]
    return points[order]


@dataclass
class W2Result:
    value: float
    exact: bool

    def __float__(self):
        return self.value


def wasserstein2(a, b, n_slices: int = 100, seed: int = 0) -> W2Result:
    """2-Wasserstein distance between equal-size point clouds.

    Exact assignment up to 512 points per side; beyond that, a sliced
    approximation over ``n_slices`` random directions, flagged
    ``exact=False``.  Unequal sizes are equalized by deterministic
    SHA-256 subsampling of the larger cloud.
    """
    pa = a.points if isinstance(a, PointCloud2D) else np.asarray(a, float)
    pb = b.points if isinstance(b, PointCloud2D) else np.asarray(b, float)
    n = min(len(pa), len(pb))
    if n == 0:
        raise InvalidInput("empty point cloud")
    pa = subsample_to(pa, n)
    pb = subsample_to(pb, n)

    if n <= EXACT_LIMIT:
        diff = pa[:, None, :] - pb[None, :, :]
        cost = np.sum(diff * diff, axis=2)
        rows, cols = linear_sum_assignment(cost)
        return W2Result(float(np.sqrt(cost[rows, cols].mean())), True)

    g = rng.generator(seed, 0)
    dim = pa.shape[1]
    total = 0.0
    for _ in range(n_slices):
        u = g.standard_normal(dim)
        u /= np.linalg.norm(u)
        qa = np.sort(pa @ u)
        qb = np.sort(pb @ u)
        total += np.mean((qa - qb) ** 2)
    return W2Result(float(np.sqrt(dim * total / n_slices)), False)


def distance_stats(real_sets, synth_sets) -> DistanceStats:
    """Mean/std of pairwise cloud distances: real-real vs real-synthetic."""
    if len(real_sets) < 2 or len(synth_sets) < 1:
        raise InvalidInput("need >= 2 real sets and >= 1 synthetic set")
    within = [
        wasserstein2(a, b).value for a, b in combinations(real_sets, 2)
    ]
    between = [
        wasserstein2(r, s).value for r in real_sets for s in synth_sets
    ]
    return DistanceStats(
        mu_e=float(np.mean(within)),
        sigma_e=float(np.std(within)),
        mu_g=float(np.mean(between)),
        sigma_g=float(np.std(between)),
        max_within=float(np.max(within)),
        min_between=float(np.min(between)),
    )


# ---------------------------------------------------------------------------
# feature-based conditioning-fidelity classifier


def _features_and_labels(corp: LabeledCorpus):
    x = np.stack([feature_vector(it.matrix).to_array() for it in corp.items])
    y = np.asarray([REGIMES.index(it.label) for it in corp.items])
    if not np.all(np.isfinite(x)):
        # degenerate feature values (flagged NaN) are zeroed for the model
        x = np.nan_to_num(x)
    return x, y


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_feature_classifier(
    x, y, seed: int = 0, hidden: int = 32, epochs: int = 400, lr: float = 1e-2
):
    """Softmax classifier over feature vectors, built on the neural engine."""
    g = np.random.Generator(np.random.PCG64(rng.mix(seed, 5)))
    mu, sd = x.mean(axis=0), x.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    xs = ((x - mu) / sd).astype(np.float32)
    net = neural.Network(
        [
            neural.Dense(x.shape[1], hidden, g), neural.Tanh(),
            neural.Dense(hidden, 3, g),
        ],
        (x.shape[1],),
    )
    opt = neural.Adam(net, lr=lr)
    t = np.eye(3, dtype=np.float32)[y]
    for _ in range(epochs):
        logits, caches = net.forward(xs)
        p = _softmax(logits.astype(np.float64))
        dlogits = ((p - t) / len(xs)).astype(np.float32)
        _, grads = net.backward(caches, dlogits)
        opt.step(grads)
    return net, (mu, sd)


def _predict(net, scaler, x):
    mu, sd = scaler
    xs = ((x - mu) / sd).astype(np.float32)
    logits, _ = net.forward(xs)
    return np.argmax(logits, axis=1)


def classifier_fidelity(
    train_corpus: LabeledCorpus,
    synth_corpus: LabeledCorpus,
    seed: int = 0,
    holdout_frac: float = 0.2,
) -> FidelityResult:
    """Confusion matrix of a feature-vector softmax classifier applied to
    synthetic samples against their conditioning labels."""
    if train_corpus.dim != synth_corpus.dim:
        raise InvalidInput("corpora must share dim")
    x, y = _features_and_labels(train_corpus)
    xs_, ys_ = _features_and_labels(synth_corpus)

    # stratified deterministic holdout
    tr_idx, ho_idx = [], []
    for cls in range(3):
        idx = np.flatnonzero(y == cls)
        g = rng.generator(seed, 100 + cls)
        idx = idx[g.permutation(len(idx))]
        k = max(1, int(round(holdout_frac * len(idx))))
        ho_idx.extend(idx[:k])
        tr_idx.extend(idx[k:])
    tr_idx, ho_idx = np.asarray(tr_idx), np.asarray(ho_idx)

    net, scaler = train_feature_classifier(x[tr_idx], y[tr_idx], seed=seed)
    real_acc = float(np.mean(_predict(net, scaler, x[ho_idx]) == y[ho_idx]))

    pred = _predict(net, scaler, xs_)
    confusion = np.zeros((3, 3), dtype=int)
    for t_, p_ in zip(ys_, pred):
        confusion[t_, p_] += 1
    acc = float(np.trace(confusion)) / max(len(ys_), 1)
    return FidelityResult(
        confusion=confusion,
        accuracy=acc,
        real_holdout_accuracy=real_acc,
        weak_classifier=real_acc < 0.40,
    )
