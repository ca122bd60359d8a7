"""Regularly varying laws: definition, sampling and standardization.

A ``TailLaw`` describes a positive magnitude ``M`` with

    P(M > x) = L(x) x^-alpha / (L(x0) x0^-alpha),   x >= x0,

and ``P(M > x) = 1`` below the onset ``x0``. The signed variate is ``+M`` with
probability ``skew`` and ``-M`` otherwise. ``standardize`` turns it into a
mean-zero, unit-variance law by an affine map, which keeps the tail index.

Two slowly varying factors are supported: a constant (pure Pareto tail) and
``(log x)^gamma``. The latter with ``alpha = 3`` and ``gamma = 1/4 - c`` is our
concrete choice for the boundary tail condition ``x^3 P(|xi| > x) ~ (log x)^(1/4-c)``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate

from . import _rng

__all__ = [
    "TailLaw",
    "StandardizedLaw",
    "GaussianLaw",
    "tail_prob",
    "sample",
    "standardize",
    "truncated_moment",
    "law_from_json",
    "law_to_json",
]

_NEWTON_TOL = 1e-12
_NEWTON_MAXITER = 100
# smallest tail probability fed to the inverse transform (one double-precision ulp at 1)
_W_FLOOR = 2.0**-53
_QUAD_EPSABS = 1e-10


@dataclass(frozen=True)
class TailLaw:
    alpha: float
    sv_kind: str = "constant"
    sv_param: float = 1.0
    x0: float = 1.0
    skew: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"tail index must be positive, got {self.alpha}")
        if self.sv_kind not in ("constant", "logpower"):
            raise ValueError(f"unknown slowly varying kind {self.sv_kind!r}")
        if not 0.0 <= self.skew <= 1.0:
            raise ValueError(f"skew must lie in [0, 1], got {self.skew}")
        if self.sv_kind == "constant":
            if not self.sv_param > 0:
                raise ValueError("constant slowly varying factor must be positive")
            if not self.x0 > 0:
                raise ValueError("x0 must be positive")
        else:
            if self.sv_param < 0:
                raise ValueError("log-power exponent gamma must be >= 0")
            if not self.x0 > 1:
                raise ValueError("x0 must exceed 1 for a log-power factor")
            # monotone tail needs log(x0) > gamma / alpha
            if not math.log(self.x0) > self.sv_param / self.alpha:
                raise ValueError(
                    f"log-power tail is not monotone: need x0 > exp(gamma/alpha) = "
                    f"{math.exp(self.sv_param / self.alpha):.6g}"
                )

    @classmethod
    def pareto(cls, alpha, x0=1.0, skew=0.5):
        return cls(alpha=alpha, sv_kind="constant", sv_param=1.0, x0=x0, skew=skew)

    @classmethod
    def logpower(cls, alpha, gamma, x0, skew=0.5):
        return cls(alpha=alpha, sv_kind="logpower", sv_param=gamma, x0=x0, skew=skew)

    def slowly_varying(self, x):
        x = np.asarray(x, dtype=float)
        if self.sv_kind == "constant":
            return np.full_like(x, self.sv_param)
        return np.log(x) ** self.sv_param

    def _log_tail(self, logx):
        """log P(M > x) for log x >= log x0 (vectorized)."""
        t0 = math.log(self.x0)
        out = -self.alpha * (logx - t0)
        if self.sv_kind == "logpower" and self.sv_param != 0.0:
            out = out + self.sv_param * (np.log(logx) - math.log(t0))
        return out

    def magnitudes(self, w):
        """Inverse transform: the magnitude ``m`` with ``P(M > m) = w`` for ``w`` in (0, 1]."""
        w = np.asarray(w, dtype=float)
        if self.sv_kind == "logpower" and self.sv_param != 0.0:
            t0 = math.log(self.x0)
            logw = np.log(w)
            t = _solve_log_tail(self.alpha, self.sv_param, t0, logw, t0 - logw / self.alpha)
            return np.exp(t)
        m = np.power(w, -1.0 / self.alpha)
        m *= self.x0
        return m


def _solve_log_tail(alpha, gamma, t0, logw, t):
    # h(t) = alpha (t - t0) - gamma log(t / t0) + log w is increasing and convex
    # on t > gamma/alpha, and the pure-Pareto start lies left of the root, so
    # Newton overshoots once and then decreases monotonically.
    lt0 = math.log(t0)
    for _ in range(_NEWTON_MAXITER):
        h = alpha * (t - t0) - gamma * (np.log(t) - lt0) + logw
        step = h / (alpha - gamma / t)
        t = t - step
        if np.all(np.abs(step) <= _NEWTON_TOL * np.maximum(1.0, np.abs(t))):
            return t
    raise RuntimeError("log-power inverse transform failed to converge (sampler defect)")


@dataclass(frozen=True)
class StandardizedLaw:
    """``xi = (sign * M - shift) / scale`` with mean 0 and variance 1."""

    base: TailLaw
    shift: float
    scale: float

    @property
    def alpha(self):
        return self.base.alpha

    def from_uniforms(self, u):
        """Map uniforms in [0, 1] to draws of ``xi``; one uniform per draw, ``u <= q`` gives the + sign."""
        u = np.asarray(u, dtype=float)
        q = self.base.skew
        d = u - q
        if 0.0 < q < 1.0:
            # |u - q| rescaled to (0, 1] within the chosen sign branch
            w = np.abs(d)
            if q == 0.5:
                w *= 2.0
            else:
                w *= np.where(d <= 0.0, 1.0 / q, 1.0 / (1.0 - q))
        else:
            w = u.copy()
        np.clip(w, _W_FLOOR, 1.0, out=w)
        x = self.base.magnitudes(w)
        np.negative(d, out=d)
        np.copysign(x, d, out=x)
        if self.shift != 0.0:
            x -= self.shift
        x *= 1.0 / self.scale
        return x

    def matrix(self, gen, shape):
        """Matrix of i.i.d. draws from a ``numpy.random.Generator``."""
        return self.from_uniforms(gen.random(shape))

    def abs_tail_prob(self, x):
        """P(|xi| > x), exact."""
        t = x * self.scale
        h = self.shift
        q = self.base.skew
        # +M branch: |M - h| > t  <=>  M > h + t  or  M < h - t
        plus = tail_prob(self.base, h + t) + _below(self.base, h - t)
        # -M branch: |M + h| > t  <=>  M > t - h  or  M < -t - h
        minus = tail_prob(self.base, t - h) + _below(self.base, -t - h)
        return q * plus + (1.0 - q) * minus

    def tail_slowly_varying(self, x):
        """Asymptotic slowly varying factor of ``|xi|``: P(|xi| > x) ~ L(x) x^-alpha."""
        b = self.base
        norm = float(b.slowly_varying(b.x0)) * b.x0 ** (-b.alpha)
        # shift is negligible and L(scale x) / L(x) -> 1
        return float(b.slowly_varying(x)) / norm * self.scale ** (-b.alpha)

    def to_json(self):
        return law_to_json(self.base)


class GaussianLaw:
    """Standard normal entries; the light-tailed reference law."""

    alpha = math.inf

    def matrix(self, gen, shape):
        return gen.standard_normal(shape)

    def to_json(self):
        return {"gaussian": True}

    def __repr__(self):
        return "GaussianLaw()"

    def __eq__(self, other):
        return isinstance(other, GaussianLaw)

    def __hash__(self):
        return hash(GaussianLaw)


def _below(law, y):
    """P(M < y)."""
    if y <= law.x0:
        return 0.0
    return 1.0 - tail_prob(law, y)


def tail_prob(law, x):
    """P(M > x) for the magnitude of ``law``; exactly 1 for ``x <= x0``."""
    x = float(x)
    if x <= law.x0:
        return 1.0
    return float(math.exp(law._log_tail(math.log(x))))


def _moment_integral(law, beta, lo, hi):
    """int_lo^hi beta y^(beta-1) P(M > y) dy on t = log y; ``hi`` may be inf."""

    def integrand(t):
        return beta * math.exp(beta * t + float(law._log_tail(t)))

    a = math.log(lo)
    b = math.inf if math.isinf(hi) else math.log(hi)
    if b <= a:
        return 0.0
    val, _ = integrate.quad(integrand, a, b, epsabs=_QUAD_EPSABS, epsrel=1e-12, limit=500)
    return val


def _raw_moment(law, beta):
    """E M^beta for beta < alpha."""
    if law.sv_kind == "constant":
        return law.alpha * law.x0**beta / (law.alpha - beta)
    return law.x0**beta + _moment_integral(law, beta, law.x0, math.inf)


def standardize(law):
    """Affine map of ``law`` to mean 0 and variance 1."""
    if law.alpha <= 2:
        raise ValueError("infinite variance, not standardizable (alpha <= 2)")
    m1 = _raw_moment(law, 1.0)
    m2 = _raw_moment(law, 2.0)
    shift = (2.0 * law.skew - 1.0) * m1
    var = m2 - shift * shift
    return StandardizedLaw(base=law, shift=shift, scale=math.sqrt(var))


def sample(law, seed, count, start=0):
    """Draws ``start .. start+count-1`` of the stream for ``(law, seed)``.

    Any index range reproduces the corresponding slice of a longer run.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    return law.from_uniforms(_rng.uniform_block(seed, start, count))


def truncated_moment(law, beta, x, side):
    """E M^beta 1(M <= x) (``side='below'``) or E M^beta 1(M > x) (``side='above'``)."""
    if not x > law.x0:
        raise ValueError(f"truncation point must exceed x0={law.x0}")
    tail_x = tail_prob(law, x)
    if side == "below":
        return law.x0**beta - x**beta * tail_x + _moment_integral(law, beta, law.x0, x)
    if side == "above":
        if beta >= law.alpha:
            raise ValueError(f"divergent moment: beta={beta} >= alpha={law.alpha}")
        return x**beta * tail_x + _moment_integral(law, beta, x, math.inf)
    raise ValueError(f"side must be 'below' or 'above', got {side!r}")


def law_to_json(law):
    return {
        "alpha": law.alpha,
        "sv": {"kind": law.sv_kind, "param": law.sv_param},
        "x0": law.x0,
        "skew": law.skew,
    }


def law_from_json(obj):
    if obj.get("gaussian"):
        return GaussianLaw()
    sv = obj.get("sv", {"kind": "constant", "param": 1.0})
    return TailLaw(
        alpha=float(obj["alpha"]),
        sv_kind=sv["kind"],
        sv_param=float(sv["param"]),
        x0=float(obj.get("x0", 1.0)),
        skew=float(obj.get("skew", 0.5)),
    )
