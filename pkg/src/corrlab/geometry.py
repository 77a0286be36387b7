"""Affine-invariant (Fisher-Rao) geometry on SPD matrices.

Implements the geodesic, the distance, and five notions of mean for a set
of correlation matrices:

* M1 -- Euclidean (arithmetic) mean,
* M2 -- Riemannian barycenter (Karcher mean), in general a covariance
  matrix that leaves the elliptope,
* M3 -- M2 renormalized to unit diagonal,
* M4 -- Frechet mean constrained to the elliptope,
* M5 -- Riemannian projection of M2 onto the elliptope.

The geodesic between two correlation matrices generally leaves the
elliptope (the elliptope is not totally geodesic in the SPD manifold);
the 2x2 pair with correlations +/-rho is the canonical illustration: the
midpoint is sqrt(1 - rho^2) * I, whose diagonal is below one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .core import nearest_correlation, symmetrize
from .exceptions import ConvergenceFailure, InvalidInput, NotPositiveDefinite

_JITTER_EIG = 1e-10


class MeanMethod(Enum):
    M1_EUCLIDEAN = "m1"
    M2_RIEMANNIAN_BARYCENTER = "m2"
    M3_NORMALIZED_BARYCENTER = "m3"
    M4_CONSTRAINED_FRECHET = "m4"
    M5_RIEMANNIAN_PROJECTION = "m5"


@dataclass
class MeanResult:
    matrix: np.ndarray
    method: MeanMethod
    iterations: int
    converged: bool
    grad_norm: float
    jitter_applied: bool
    best_effort: bool = False


def _eig_fun(a: np.ndarray, fun) -> np.ndarray:
    w, v = np.linalg.eigh(symmetrize(a))
    return (v * fun(w)) @ v.T


def _check_pd(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = symmetrize(a)
    w = np.linalg.eigvalsh(a)
    if w[0] <= 0:
        raise NotPositiveDefinite(f"{name} has min eigenvalue {w[0]:.3e}")
    return a


def spd_sqrt(a):
    return _eig_fun(a, np.sqrt)


def spd_inv_sqrt(a):
    return _eig_fun(a, lambda w: 1.0 / np.sqrt(w))


def spd_log(a):
    return _eig_fun(a, np.log)


def spd_exp(a):
    return _eig_fun(a, np.exp)


def spd_power(a, t: float):
    return _eig_fun(a, lambda w: np.power(w, t))


def airm_distance(a, b) -> float:
    """Fisher-Rao distance ||log(A^{-1/2} B A^{-1/2})||_F."""
    a = _check_pd(a, "A")
    b = _check_pd(b, "B")
    if a.shape != b.shape:
        raise InvalidInput("dimension mismatch")
    ais = spd_inv_sqrt(a)
    w = np.linalg.eigvalsh(symmetrize(ais @ b @ ais))
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def geodesic(a, b, t: float) -> np.ndarray:
    """Point gamma(t) = A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInput(f"t must lie in [0, 1], got {t}")
    a = _check_pd(a, "A")
    b = _check_pd(b, "B")
    asq = spd_sqrt(a)
    ais = spd_inv_sqrt(a)
    mid = spd_power(symmetrize(ais @ b @ ais), t)
    return symmetrize(asq @ mid @ asq)


def _jitter(mats):
    out = []
    jittered = False
    for m in mats:
        m = symmetrize(m)
        if np.linalg.eigvalsh(m)[0] < _JITTER_EIG:
            m = m + _JITTER_EIG * np.eye(m.shape[0])
            jittered = True
        out.append(m)
    return out, jittered


def karcher_mean(mats, tol: float = 1e-10, max_iter: int = 1000):
    """Riemannian barycenter by fixed-point iteration with step halving."""
    x = symmetrize(sum(mats) / len(mats))
    obj = _frechet_objective(x, mats)
    step = 1.0
    for it in range(max_iter):
        xs = spd_sqrt(x)
        xis = spd_inv_sqrt(x)
        tang = sum(spd_log(symmetrize(xis @ m @ xis)) for m in mats) / len(mats)
        grad_norm = float(np.linalg.norm(tang, ord="fro"))
        if grad_norm <= tol:
            return x, it, grad_norm
        cand = symmetrize(xs @ spd_exp(step * tang) @ xs)
        cand_obj = _frechet_objective(cand, mats)
        if cand_obj > obj + 1e-14:
            step /= 2.0
            continue
        x, obj = cand, cand_obj
        step = min(1.0, step * 1.5)
    raise ConvergenceFailure(
        f"Karcher mean did not converge in {max_iter} iterations",
        last_iterate=x,
        residual=grad_norm,
    )


def _frechet_objective(c, mats) -> float:
    return sum(airm_distance(c, m) ** 2 for m in mats)


def _corr_2x2(rho: float) -> np.ndarray:
    return np.array([[1.0, rho], [rho, 1.0]])


def _minimize_over_elliptope(targets, start, tol=1e-10, max_iter=200):
    """Heuristic constrained minimizer of the Frechet objective.

    dim 2: exact 1-D search over the off-diagonal.  dim > 2: geodesic
    steps toward the unconstrained barycenter direction with a
    nearest-correlation repair after each step; monotone in the objective.
    """
    dim = start.shape[0]
    if dim == 2:
        def f(rho):
            return _frechet_objective(_corr_2x2(rho), targets)

        res = minimize_scalar(
            f, bounds=(-1 + 1e-9, 1 - 1e-9), method="bounded",
            options={"xatol": 1e-12},
        )
        return _corr_2x2(float(res.x)), int(res.nfev), 0.0, True, False

    c = start.copy()
    obj = _frechet_objective(c, targets)
    step = 1.0
    grad_norm = np.inf
    for it in range(max_iter):
        cs = spd_sqrt(c)
        cis = spd_inv_sqrt(c)
        tang = sum(
            spd_log(symmetrize(cis @ m @ cis)) for m in targets
        ) / len(targets)
        grad_norm = float(np.linalg.norm(tang, ord="fro"))
        if grad_norm <= tol:
            return c, it, grad_norm, True, False
        improved = False
        while step > 1e-10:
            raw = symmetrize(cs @ spd_exp(step * tang) @ cs)
            cand = nearest_correlation(raw + _JITTER_EIG * np.eye(dim))
            cand = cand + _JITTER_EIG * np.eye(dim)
            cand_obj = _frechet_objective(cand, targets)
            if cand_obj < obj - 1e-14:
                c, obj = cand, cand_obj
                improved = True
                break
            step /= 2.0
        if not improved:
            # stalled: constrained stationary point not certified
            return c, it, grad_norm, False, True
    return c, max_iter, grad_norm, False, True


def mean(method: MeanMethod, mats) -> MeanResult:
    """Compute the requested mean of a non-empty set of correlation matrices."""
    if not mats:
        raise InvalidInput("empty matrix set")
    mats = [symmetrize(m) for m in mats]
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise InvalidInput("matrices must share a common dimension")
    dim = dims.pop()

    if method is MeanMethod.M1_EUCLIDEAN:
        m1 = sum(mats) / len(mats)
        return MeanResult(m1, method, 0, True, 0.0, False)

    mats_pd, jittered = _jitter(mats)
    sigma, iters, grad = karcher_mean(mats_pd)

    if method is MeanMethod.M2_RIEMANNIAN_BARYCENTER:
        return MeanResult(sigma, method, iters, True, grad, jittered)

    d = np.sqrt(np.diag(sigma))
    m3 = sigma / np.outer(d, d)
    np.fill_diagonal(m3, 1.0)
    if method is MeanMethod.M3_NORMALIZED_BARYCENTER:
        return MeanResult(m3, method, iters, True, grad, jittered)

    start = symmetrize(m3) + (_JITTER_EIG * np.eye(dim) if dim > 2 else 0.0)
    if method is MeanMethod.M4_CONSTRAINED_FRECHET:
        targets = mats_pd
    elif method is MeanMethod.M5_RIEMANNIAN_PROJECTION:
        targets = [sigma]
    else:  # pragma: no cover
        raise InvalidInput(f"unknown method {method}")

    c, it2, grad2, converged, best_effort = _minimize_over_elliptope(
        targets, start
    )
    c = symmetrize(c)
    np.fill_diagonal(c, 1.0)
    return MeanResult(c, method, it2, converged, grad2, jittered, best_effort)
