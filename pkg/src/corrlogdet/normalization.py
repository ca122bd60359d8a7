"""Centering and scaling of ``log det R``.

Three normalizations, selected by how close ``p`` is to ``n``:

* general:        mu = (p-n+1/2) log(1-(p-1)/n) - p + p/n,  var = -2 log(1-(p-1)/n) - 2p/n
* near-singular:  mu = (p-n+1/2) log(1-(p-1)/n) - p,        var = -2 log(1-(p-1)/n)
* square (p = n): mu = -log(n)/2 - n,                        var = 2 log n

``gaussian_exact_constants`` gives the exact finite-sample mean and variance
of ``log det R`` for Gaussian entries (a product of independent Beta
variables). It is not one of the limit normalizations; it is provided as a
finite-n reference.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from ._validation import check_dims

__all__ = [
    "Regime",
    "CLTConstants",
    "select_regime",
    "clt_constants",
    "gaussian_exact_constants",
    "standardize_logdet",
    "c_n",
    "norm_cdf",
    "norm_ppf",
    "DEFAULT_W",
]

DEFAULT_W = 0.5
GENERAL = "general"
NEAR_SINGULAR = "near_singular"
SQUARE = "square"
_KINDS = (GENERAL, NEAR_SINGULAR, SQUARE)
_ALIASES = {"near": NEAR_SINGULAR, "near-singular": NEAR_SINGULAR, "nearsingular": NEAR_SINGULAR}


def norm_cdf(x):
    return special.ndtr(x)


def norm_ppf(q):
    return special.ndtri(q)


def _near_threshold(n, w):
    return math.ceil(n ** (1.0 - w))


@dataclass(frozen=True)
class Regime:
    kind: str
    w: float = DEFAULT_W

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown regime {self.kind!r}; expected one of {_KINDS}")
        if not 0.0 < self.w < 1.0:
            raise ValueError(f"w must lie in (0, 1), got {self.w}")

    def threshold(self, n):
        """Largest ``n - p`` admitted by the near-singular regime."""
        return _near_threshold(n, self.w)

    def admits(self, p, n):
        if self.kind == SQUARE:
            return p == n
        if self.kind == NEAR_SINGULAR:
            return 0 <= n - p <= self.threshold(n)
        return True


def _as_regime(regime, w=DEFAULT_W):
    if isinstance(regime, Regime):
        return regime
    kind = _ALIASES.get(str(regime).lower(), str(regime).lower())
    return Regime(kind, w)


def select_regime(p, n, w=DEFAULT_W):
    """Square if ``p == n``, near-singular if ``n - p <= ceil(n^(1-w))``, else general."""
    if p > n:
        raise ValueError(f"theory requires p <= n, got p={p}, n={n}")
    p, n = check_dims(p, n)
    if not 0.0 < w < 1.0:
        raise ValueError(f"w must lie in (0, 1), got {w}")
    if p == n:
        return Regime(SQUARE, w)
    if n - p <= _near_threshold(n, w):
        return Regime(NEAR_SINGULAR, w)
    return Regime(GENERAL, w)


@dataclass(frozen=True)
class CLTConstants:
    mu: float
    sigma: float
    regime: Regime
    p: int
    n: int
    source: str = "asymptotic"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("scale must be positive")

    @property
    def variance(self):
        return self.sigma * self.sigma

    @property
    def c_n(self):
        return c_n(self.p, self.n)

    def to_json(self):
        out = {"mu": self.mu, "sigma": self.sigma, "regime": self.regime.kind, "w": self.regime.w}
        if self.source != "asymptotic":
            out["source"] = self.source
        return out


def _log_one_minus(p, n):
    # log(1 - (p-1)/n), exact -log(n) at p == n
    return math.log(n - p + 1) - math.log(n)


def clt_constants(p, n, regime=None, w=DEFAULT_W):
    """Asymptotic centering ``mu`` and scale ``sigma`` for the given regime.

    ``regime`` may be a ``Regime``, a regime name, or ``None`` (auto-select
    with ``w``).
    """
    p, n = check_dims(p, n)
    regime = select_regime(p, n, w) if regime is None else _as_regime(regime, w)
    if not regime.admits(p, n):
        raise ValueError(f"regime {regime.kind!r} (w={regime.w}) does not apply to p={p}, n={n}")
    ell = _log_one_minus(p, n)
    if regime.kind == GENERAL:
        mu = (p - n + 0.5) * ell - p + p / n
        var = -2.0 * ell - 2.0 * p / n
        if not var > 0:
            raise ValueError(
                "variance formula non-positive: p too small relative to n for the general "
                f"normalization (p={p}, n={n}, var={var:.6g})"
            )
    elif regime.kind == NEAR_SINGULAR:
        mu = (p - n + 0.5) * ell - p
        var = -2.0 * ell
    else:
        mu = -0.5 * math.log(n) - n
        var = 2.0 * math.log(n)
    if not var > 0:
        raise ValueError(f"variance formula non-positive (p={p}, n={n})")
    return CLTConstants(mu=mu, sigma=math.sqrt(var), regime=regime, p=p, n=n)


def gaussian_exact_constants(p, n, w=DEFAULT_W):
    """Exact mean and sd of ``log det R`` for i.i.d. Gaussian entries.

    ``Delta^2_{i+1} ~ Beta((n-i)/2, i/2)`` independently, so the moments are
    sums of digamma / trigamma differences.
    """
    p, n = check_dims(p, n)
    i = np.arange(1, p)
    a = (n - i) / 2.0
    mean = float(np.sum(special.digamma(a) - special.digamma(n / 2.0)))
    var = float(np.sum(special.polygamma(1, a) - special.polygamma(1, n / 2.0)))
    if not var > 0:
        raise ValueError(f"degenerate exact variance for p={p}, n={n}")
    return CLTConstants(mu=mean, sigma=math.sqrt(var), regime=select_regime(p, n, w), p=p, n=n, source="gaussian_exact")


def standardize_logdet(logdet, consts):
    """``(logdet - mu) / sigma``; vectorized over ``logdet``."""
    z = (np.asarray(logdet, dtype=float) - consts.mu) / consts.sigma
    return float(z) if z.ndim == 0 else z


def c_n(p, n):
    """``sum_{i<p} log((n-i)/n) = -p log n + log(n (n-1) ... (n-p+1))`` via log-gamma."""
    return math.lgamma(n + 1) - math.lgamma(n - p + 1) - p * math.log(n)
