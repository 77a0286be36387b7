"""Stylized facts of financial correlation matrices and derived features.

Six metrics are quantified per matrix:

1. positively shifted pairwise correlations (mean and skew),
2. dominant first eigenvalue relative to the Marchenko-Pastur bulk,
3. fraction of other eigenvalues above the Marchenko-Pastur edge,
4. sign consistency of the first eigenvector (Perron-Frobenius),
5. hierarchical cluster structure (cophenetic correlation),
6. scale-free-ness of the minimum spanning tree (degree tail exponent).

The distance transform throughout is d_ij = sqrt(2 (1 - rho_ij)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import cophenet, linkage
from scipy.spatial.distance import squareform
from scipy.stats import skew

from .core import symmetrize
from .exceptions import DegenerateStructure, InvalidInput

DEFAULT_Q_RATIO = 80.0 / 252.0

FEATURE_NAMES = (
    "mean_corr",
    "std_corr",
    "eig1_share",
    "top5pct_eig_share",
    "evec1_dispersion",
    "cophenetic_coeff",
    "cluster_separation",
    "mst_tail_exponent",
)


@dataclass
class StylizedFactReport:
    sf1_mean_offdiag: float
    sf1_skew: float
    sf2_top_eig_share: float
    sf2_mp_bounds: tuple[float, float]
    sf3_outlier_eig_fraction: float
    sf4_first_evec_sign_consistency: float
    sf5_cophenetic_coeff: float
    sf6_mst_degree_tail_exponent: float
    sf6_max_degree: int
    degenerate_evec: bool = False
    insufficient_dimension: bool = False


def mp_bounds(q_ratio: float) -> tuple[float, float]:
    """Marchenko-Pastur support edges (1 +/- sqrt(q))^2 for q = dim/T."""
    if q_ratio <= 0:
        raise InvalidInput("q_ratio must be positive")
    sq = np.sqrt(q_ratio)
    return ((1.0 - sq) ** 2, (1.0 + sq) ** 2)


def corr_distance(c: np.ndarray) -> np.ndarray:
    d2 = np.clip(2.0 * (1.0 - c), 0.0, None)
    d = np.sqrt(d2)
    np.fill_diagonal(d, 0.0)
    return d


def mst(c) -> list[tuple[int, int]]:
    """Minimum spanning tree on d = sqrt(2(1-rho)) by Kruskal.

    Ties broken lexicographically on (i, j) so the tree is deterministic.
    """
    c = symmetrize(c)
    n = c.shape[0]
    d = corr_distance(c)
    edges = sorted(
        ((d[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    )
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
            if len(tree) == n - 1:
                break
    return tree


def mst_degrees(tree, n: int) -> np.ndarray:
    deg = np.zeros(n, dtype=int)
    for i, j in tree:
        deg[i] += 1
        deg[j] += 1
    return deg


def degree_tail_exponent(degrees: np.ndarray) -> float:
    """Log-log least-squares slope of the degree frequency distribution.

    Fit is over degrees >= 2 when at least two distinct such degrees
    occur; otherwise over all degrees; 0.0 when even that is impossible.
    The returned exponent is the negated slope (positive for decaying
    tails).  A comparative feature, not a statistical estimate.
    """
    vals, counts = np.unique(degrees[degrees >= 1], return_counts=True)
    mask = vals >= 2
    if mask.sum() < 2:
        mask = np.ones_like(vals, dtype=bool)
    if mask.sum() < 2:
        return 0.0
    x = np.log(vals[mask].astype(float))
    y = np.log(counts[mask].astype(float))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def _linkage(c: np.ndarray):
    d = corr_distance(c)
    return linkage(squareform(d, checks=False), method="average")


def cophenetic_coeff(c: np.ndarray) -> float:
    d = corr_distance(c)
    z = _linkage(c)
    coph, _ = cophenet(z, squareform(d, checks=False))
    return float(coph)


def stylized_report(c, q_ratio: float = DEFAULT_Q_RATIO) -> StylizedFactReport:
    c = symmetrize(c)
    n = c.shape[0]
    off = c[~np.eye(n, dtype=bool)]
    sf1_mean = float(off.mean())
    sf1_skew = float(skew(off)) if off.std() > 0 else 0.0

    w, v = np.linalg.eigh(c)
    lam_minus, lam_plus = mp_bounds(q_ratio)
    top = float(w[-1])
    sf2_share = top / n
    sf3 = float(np.sum(w[:-1] > lam_plus)) / n

    v1 = v[:, -1]
    degenerate = n >= 2 and (w[-1] - w[-2]) <= 1e-12 * max(1.0, w[-1])
    pos = np.sum(v1 > 0)
    neg = np.sum(v1 < 0)
    sf4 = max(pos, neg) / n

    if n < 4:
        return StylizedFactReport(
            sf1_mean, sf1_skew, sf2_share, (lam_minus, lam_plus), sf3, sf4,
            float("nan"), float("nan"), 0,
            degenerate_evec=degenerate, insufficient_dimension=True,
        )

    sf5 = cophenetic_coeff(c)
    tree = mst(c)
    deg = mst_degrees(tree, n)
    sf6 = degree_tail_exponent(deg)
    return StylizedFactReport(
        sf1_mean, sf1_skew, sf2_share, (lam_minus, lam_plus), sf3, sf4,
        sf5, sf6, int(deg.max()), degenerate_evec=degenerate,
    )


def _kmedoids(d: np.ndarray, k: int, max_iter: int = 100):
    """Deterministic PAM: greedy build then swap until no improvement."""
    n = d.shape[0]
    medoids = [int(np.argmin(d.sum(axis=0)))]
    while len(medoids) < k:
        best_gain, best_c = -np.inf, None
        cur = d[:, medoids].min(axis=1)
        for cand in range(n):
            if cand in medoids:
                continue
            gain = np.sum(np.maximum(cur - d[:, cand], 0.0))
            if gain > best_gain:
                best_gain, best_c = gain, cand
        medoids.append(best_c)
    medoids = sorted(medoids)

    def cost(ms):
        return float(d[:, ms].min(axis=1).sum())

    best = cost(medoids)
    for _ in range(max_iter):
        improved = False
        for mi in range(k):
            for cand in range(n):
                if cand in medoids:
                    continue
                trial = sorted(medoids[:mi] + [cand] + medoids[mi + 1:])
                ctrial = cost(trial)
                if ctrial < best - 1e-12:
                    medoids, best = trial, ctrial
                    improved = True
        if not improved:
            break
    labels = np.argmin(d[:, medoids], axis=1)
    return np.asarray(medoids), labels


def _silhouette(d: np.ndarray, labels: np.ndarray) -> float:
    n = d.shape[0]
    uniq = np.unique(labels)
    if uniq.size < 2:
        return -1.0
    s = np.zeros(n)
    for i in range(n):
        own = labels[i]
        mask_own = (labels == own) & (np.arange(n) != i)
        if not mask_own.any():
            # singleton cluster: silhouette defined as 0
            continue
        a = d[i, mask_own].mean()
        b = min(
            d[i, labels == other].mean() for other in uniq if other != own
        )
        denom = max(a, b)
        s[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(s.mean())


def cluster_separation(c: np.ndarray, k_range=range(2, 7)):
    """Best mean silhouette over a k-medoids scan on sqrt(2(1-rho))."""
    d = corr_distance(c)
    best = -1.0
    best_k = None
    for k in k_range:
        if k >= c.shape[0]:
            break
        _, labels = _kmedoids(d, k)
        s = _silhouette(d, labels)
        if s > best:
            best, best_k = s, k
    return best, best_k


@dataclass
class FeatureVector:
    mean_corr: float
    std_corr: float
    eig1_share: float
    top5pct_eig_share: float
    evec1_dispersion: float
    cophenetic_coeff: float
    cluster_separation: float
    mst_tail_exponent: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES])

    @classmethod
    def from_array(cls, a):
        return cls(*[float(x) for x in a])


def feature_vector(c) -> FeatureVector:
    """Fixed-order feature summary of the correlation structure."""
    c = symmetrize(c)
    n = c.shape[0]
    if n < 4:
        raise InvalidInput("feature_vector requires dim >= 4")
    off = c[~np.eye(n, dtype=bool)]
    if np.allclose(off, off[0]) and abs(off[0] - 1.0) < 1e-12:
        raise DegenerateStructure("all columns identical")

    w, v = np.linalg.eigh(c)
    eig1_share = float(w[-1]) / n
    ntop = max(1, int(np.ceil(0.05 * n)))
    top_share = float(np.sum(w[-ntop:])) / n

    v1 = v[:, -1]
    if np.sum(v1) < 0:
        v1 = -v1
    v1n = v1 / np.linalg.norm(v1)
    dispersion = float(np.std(v1n))
    if (w[-1] - w[-2]) <= 1e-12 * max(1.0, w[-1]):
        dispersion = float("nan")

    sep, _ = cluster_separation(c)
    fv = FeatureVector(
        mean_corr=float(off.mean()),
        std_corr=float(off.std()),
        eig1_share=eig1_share,
        top5pct_eig_share=top_share,
        evec1_dispersion=dispersion,
        cophenetic_coeff=cophenetic_coeff(c),
        cluster_separation=sep,
        mst_tail_exponent=degree_tail_exponent(
            mst_degrees(mst(c), n)
        ),
    )
    return fv
