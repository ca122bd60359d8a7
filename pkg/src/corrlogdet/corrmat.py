"""Self-normalized data and the log-determinant of the sample correlation matrix.

Data matrices are ``p x n`` arrays: row ``i`` holds the ``n`` observations of
variable ``i``. ``R = Y Y^T`` where ``Y`` has unit-norm rows.

Two independent routes to ``log det R``:

* ``logdet_cholesky`` factors ``R`` explicitly (reference route).
* ``logdet_perpendiculars`` accumulates the squared distances ``Delta^2`` of each
  unit row to the span of the rows before it, ``det R = prod Delta^2``.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.linalg import lapack

from ._validation import check_data_matrix

__all__ = [
    "LogDetResult",
    "RankCollapseError",
    "SingularCorrelationError",
    "self_normalize",
    "correlation_matrix",
    "logdet_cholesky",
    "logdet_perpendiculars",
    "read_csv",
    "write_csv",
]

RANK_COLLAPSE = 1e-300
CHOLESKY_MAX_P = 2000
_REORTH_RATIO = 1.0 / math.sqrt(2.0)


class SingularCorrelationError(ArithmeticError):
    def __init__(self, pivot):
        self.pivot = pivot
        super().__init__(f"correlation matrix numerically singular (non-positive pivot at index {pivot})")


class RankCollapseError(ArithmeticError):
    def __init__(self, row, delta2):
        self.row = row
        self.delta2 = delta2
        super().__init__(f"rank collapse at row {row} (Delta^2 = {delta2:.3e})")


@dataclass
class LogDetResult:
    logdet: float
    method: str
    deltas: np.ndarray = None
    min_residual: float = field(default=float("nan"))

    def __float__(self):
        return float(self.logdet)


def self_normalize(X):
    """Scale each row of ``X`` to unit Euclidean norm."""
    X = check_data_matrix(X, require_p_le_n=False)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ValueError(f"degenerate observation: zero row norm (row {bad[0]})")
    return X / norms[:, None]


def correlation_matrix(X):
    """``R = Y Y^T`` with the diagonal set to exactly 1."""
    Y = self_normalize(check_data_matrix(X))
    R = Y @ Y.T
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return R


def logdet_cholesky(X):
    """``2 sum log diag(L)`` for the Cholesky factor ``L`` of ``R``."""
    X = check_data_matrix(X)
    if X.shape[0] > CHOLESKY_MAX_P:
        raise ValueError(f"Cholesky route limited to p <= {CHOLESKY_MAX_P}; use logdet_perpendiculars")
    R = correlation_matrix(X)
    c, info = lapack.dpotrf(R, lower=1, clean=0)
    if info > 0:
        raise SingularCorrelationError(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    d = np.diag(c)
    return LogDetResult(logdet=float(2.0 * np.sum(np.log(d))), method="cholesky", min_residual=float(d.min() ** 2))


def perpendicular_deltas(Y, method="householder"):
    """Squared distances ``Delta^2_{i+1}`` of unit rows to the span of earlier rows."""
    if method == "householder":
        r = np.linalg.qr(Y.T, mode="r")
        d = np.abs(np.diag(r))
        return d * d
    if method == "gram_schmidt":
        return _gram_schmidt_deltas(Y)
    raise ValueError(f"unknown perpendiculars method {method!r}")


def _gram_schmidt_deltas(Y):
    p, n = Y.shape
    basis = np.empty((p, n))
    deltas = np.empty(p)
    for i in range(p):
        y = Y[i]
        r = y - basis[:i].T @ (basis[:i] @ y)
        nr = np.linalg.norm(r)
        if nr < _REORTH_RATIO * np.linalg.norm(y):
            # twice is enough
            r = r - basis[:i].T @ (basis[:i] @ r)
            nr = np.linalg.norm(r)
        deltas[i] = nr * nr
        if deltas[i] < RANK_COLLAPSE:
            raise RankCollapseError(i, deltas[i])
        basis[i] = r / nr
    return deltas


def logdet_perpendiculars(X, method="householder"):
    """``log det R = sum_i log Delta^2_{i+1}`` via an orthogonal factorization.

    ``method='householder'`` reads the perpendiculars off the R factor of a
    Householder QR of ``Y^T``; ``method='gram_schmidt'`` builds them row by row
    with modified Gram-Schmidt and one selective reorthogonalization.
    """
    X = check_data_matrix(X)
    Y = self_normalize(X)
    deltas = perpendicular_deltas(Y, method)
    bad = np.flatnonzero(deltas < RANK_COLLAPSE)
    if bad.size:
        raise RankCollapseError(int(bad[0]), float(deltas[bad[0]]))
    deltas = np.minimum(deltas, 1.0)
    return LogDetResult(
        logdet=float(np.sum(np.log(deltas))),
        method=f"perpendiculars/{method}",
        deltas=deltas,
        min_residual=float(deltas.min()),
    )


def read_csv(path, header=False):
    """Load a data matrix; one observation row (variable) per line."""
    try:
        X = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except OSError as exc:
        raise OSError(f"cannot read data matrix from {path}: {exc}") from exc
    return X


def write_csv(path, X, header=None):
    X = np.asarray(X, dtype=float)
    kwargs = {"header": header, "comments": ""} if header else {}
    np.savetxt(path, X, delimiter=",", fmt="%.17g", **kwargs)
