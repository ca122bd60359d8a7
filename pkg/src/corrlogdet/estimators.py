"""scikit-learn style wrappers.

These take data in the usual ``(n_samples, n_features)`` orientation. The
functional API works with ``p x n`` matrices whose rows are variables, so
each estimator transposes on the way in (and out).
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .corrmat import self_normalize
from .normalization import DEFAULT_W
from .simharness import independence_test
from .truncation import apply_truncation, plan_truncation

__all__ = ["SelfNormalizer", "Truncator", "LogDetIndependenceTest"]


def _to_rows(X):
    return check_array(X, dtype=float, ensure_min_samples=1).T


class SelfNormalizer(TransformerMixin, BaseEstimator):
    """Scale every feature column to unit Euclidean norm."""

    def fit(self, X, y=None):
        self.n_features_in_ = _to_rows(X).shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        Y = _to_rows(X)
        if Y.shape[0] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {Y.shape[0]}")
        return self_normalize(Y).T


class Truncator(TransformerMixin, BaseEstimator):
    """Zero the entries above the truncation schedule for the fitted shape.

    ``n_changed_`` holds the number of entries zeroed by the last ``transform``.
    """

    def __init__(self, a=2.5, c_frak=0.125, mode="auto"):
        self.a = a
        self.c_frak = c_frak
        self.mode = mode

    def fit(self, X, y=None):
        p, n = _to_rows(X).shape
        self.plan_ = plan_truncation(p, n, a=self.a, c_frak=self.c_frak, mode=self.mode)
        self.n_features_in_ = p
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        out = apply_truncation(_to_rows(X), self.plan_)
        self.n_changed_ = out.changed
        return out.X_hat.T


class LogDetIndependenceTest(BaseEstimator):
    """Test of complete independence of the features via ``log det`` of the correlation matrix.

    Needs ``n_features <= n_samples``. After ``fit``: ``statistic_`` (z),
    ``pvalue_``, ``reject_``, ``logdet_`` and ``constants_``.

    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> test = LogDetIndependenceTest(normalization="gaussian_exact").fit(rng.standard_normal((500, 50)))
    >>> bool(test.reject_)
    False
    """

    def __init__(self, level=0.05, w=DEFAULT_W, regime=None, normalization="asymptotic"):
        self.level = level
        self.w = w
        self.regime = regime
        self.normalization = normalization

    def fit(self, X, y=None):
        rows = _to_rows(X)
        res = independence_test(rows, self.level, self.w, self.normalization, self.regime)
        self.n_features_in_ = rows.shape[0]
        self.statistic_ = res.z
        self.pvalue_ = res.pvalue
        self.reject_ = res.reject
        self.logdet_ = res.logdet
        self.constants_ = res.consts
        return self

    def predict(self, X):
        """1 if independence is rejected for ``X``, else 0 (one label per call)."""
        return np.array([int(self.fit(X).reject_)])
