"""Dense symmetric-matrix foundation.

Correlation matrices are represented as plain ``numpy.ndarray`` of shape
(n, n), float64.  A valid correlation matrix is symmetric, has a unit
diagonal, off-diagonal entries in [-1, 1] and is positive semidefinite;
:func:`validate` checks all of this and reports every violated condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import (
    ConvergenceFailure,
    InvalidInput,
    NotPositiveDefinite,
    NumericalFailure,
)

DEFAULT_TOL = 1e-8


class Violation(Enum):
    DIAGONAL = "Diagonal"
    RANGE = "Range"
    PSD = "PSD"
    ASYMMETRY = "Asymmetry"


@dataclass
class ValidationReport:
    is_valid: bool
    diag_max_dev: float
    offdiag_max_abs: float
    min_eigenvalue: float
    failures: list[Violation] = field(default_factory=list)


def as_symmetric(m) -> np.ndarray:
    """Coerce to a float64 square array, checking exact storage symmetry."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 2:
        raise InvalidInput("matrix dimension must be >= 2")
    return a


def symmetrize(m) -> np.ndarray:
    """Return (M + M^T)/2 as float64."""
    a = as_symmetric(m)
    return (a + a.T) / 2.0


def validate(m, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check elliptope membership and report every violated condition.

    ``tol`` bounds the acceptable violation of unit diagonal / entry range;
    the smallest eigenvalue may be as low as ``-tol``.
    """
    a = as_symmetric(m)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    if tol <= 0:
        raise InvalidInput("tol must be positive")

    failures = []
    if not np.array_equal(a, a.T):
        failures.append(Violation.ASYMMETRY)
        a = (a + a.T) / 2.0

    diag_max_dev = float(np.max(np.abs(np.diag(a) - 1.0)))
    off = a[~np.eye(a.shape[0], dtype=bool)]
    offdiag_max_abs = float(np.max(np.abs(off))) if off.size else 0.0

    if diag_max_dev > max(tol, 1e-12):
        failures.append(Violation.DIAGONAL)
    if offdiag_max_abs > 1.0 + tol:
        failures.append(Violation.RANGE)

    w = np.linalg.eigvalsh(a)
    min_eig = float(w[0])
    if min_eig < -tol:
        failures.append(Violation.PSD)

    return ValidationReport(
        is_valid=not failures,
        diag_max_dev=diag_max_dev,
        offdiag_max_abs=offdiag_max_abs,
        min_eigenvalue=min_eig,
        failures=failures,
    )


def is_correlation(m, tol: float = DEFAULT_TOL) -> bool:
    return validate(m, tol).is_valid


def eigh(m):
    """Symmetric eigendecomposition, eigenvalues ascending.

    Returns ``(values, vectors)`` with ``M = V diag(values) V^T``.
    """
    a = symmetrize(m)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalFailure(f"eigendecomposition failed: {exc}")
    return w, v


def cholesky(m) -> np.ndarray:
    """Lower-triangular Cholesky factor of a positive definite matrix."""
    a = symmetrize(m)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix is not positive definite")


def _project_psd(a: np.ndarray) -> np.ndarray:
    """Project onto the PSD cone by clipping negative eigenvalues at 0."""
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.T


def _project_unit_diag(a: np.ndarray) -> np.ndarray:
    b = a.copy()
    np.fill_diagonal(b, 1.0)
    return b


def nearest_correlation(
    s,
    tol: float = DEFAULT_TOL,
    max_iter: int = 200,
    return_info: bool = False,
):
    """Nearest correlation matrix by Higham's alternating projections.

    Alternates projection onto the PSD cone and the unit-diagonal affine
    set with a Dykstra correction on the cone step.  The final step
    re-imposes the unit diagonal exactly, then clips entries to [-1, 1].
    """
    a = symmetrize(s)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    if tol <= 0:
        raise InvalidInput("tol must be positive")

    y = a.copy()
    ds = np.zeros_like(a)
    residuals = []
    for _ in range(max_iter):
        r = y - ds
        x = _project_psd(r)
        ds = x - r
        y_new = _project_unit_diag(x)
        rel = np.linalg.norm(y_new - y, ord="fro") / max(
            np.linalg.norm(y_new, ord="fro"), 1.0
        )
        residuals.append(rel)
        y = y_new
        if rel <= tol:
            break
    else:
        raise ConvergenceFailure(
            f"no convergence within {max_iter} iterations",
            last_iterate=y,
            residual=residuals[-1],
        )

    out = _project_unit_diag(_project_psd(y - ds))
    # the unit-diagonal step can leave the smallest eigenvalue slightly
    # below 0; polish with plain alternating projections until the result
    # is PSD well inside the validation tolerance
    for _ in range(100):
        if np.linalg.eigvalsh(out)[0] >= -min(tol, DEFAULT_TOL) / 10.0:
            break
        out = _project_unit_diag(_project_psd(out))
    np.clip(out, -1.0, 1.0, out=out)
    out = (out + out.T) / 2.0
    np.fill_diagonal(out, 1.0)
    if return_info:
        return out, residuals
    return out
