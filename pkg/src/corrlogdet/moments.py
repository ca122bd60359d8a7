"""Mixed moments of self-normalized entries.

``beta_{k1..kr} = E(Y_11^k1 ... Y_1r^kr)`` for a row ``Y_1`` of unit norm.

The Monte Carlo estimator averages the monomial over *all* ordered tuples of
distinct coordinates in each sampled row. That average is an exact function
of the row's power sums ``P_m = sum_j Y_j^m`` (Moebius inversion over set
partitions), so it costs a few passes over the row and removes the
coordinate-choice noise entirely. For ``idx = (2,)`` every row contributes
exactly ``1/n``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import special

from . import _rng

__all__ = [
    "MomentIndex",
    "MomentEstimate",
    "estimate_mixed_moment",
    "row_moment_statistics",
    "moment_rate_limit",
    "moment_scaling",
    "gaussian_moment_exact",
]

CHUNK_ENTRIES = 1 << 21
MAX_DEGENERATE_FRACTION = 1e-4
_POLE_TOL = 1e-9


@dataclass(frozen=True)
class MomentIndex:
    exponents: tuple

    def __init__(self, *exponents):
        if len(exponents) == 1 and not isinstance(exponents[0], (int, np.integer)):
            exponents = tuple(exponents[0])
        exps = tuple(sorted((int(k) for k in exponents), reverse=True))
        if not exps:
            raise ValueError("moment index needs at least one exponent")
        if any(k < 1 for k in exps):
            raise ValueError(f"exponents must be positive integers, got {exps}")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def parse(cls, text):
        return cls(tuple(int(t) for t in str(text).replace(" ", "").split(",") if t))

    @property
    def r(self):
        return len(self.exponents)

    @property
    def degree(self):
        return sum(self.exponents)

    @property
    def all_even(self):
        return all(k % 2 == 0 for k in self.exponents)

    def __str__(self):
        return ",".join(str(k) for k in self.exponents)


@dataclass
class MomentEstimate:
    value: float
    se: float
    samples: int
    n: int
    law: dict
    idx: MomentIndex
    degenerate_rows: int = 0
    chunk_rows: int = 0

    def to_json(self):
        return {
            "estimate": self.value,
            "se": self.se,
            "samples": self.samples,
            "n": self.n,
            "index": list(self.idx.exponents),
            "law": self.law,
            "degenerate_rows": self.degenerate_rows,
            "chunk_rows": self.chunk_rows,
        }


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for j in range(len(part)):
            yield part[:j] + [[first] + part[j]] + part[j + 1 :]


@lru_cache(maxsize=None)
def _mobius_terms(exponents):
    """``[(coefficient, (m1, m2, ...))]`` with sum over distinct tuples = sum coeff * prod P_m."""
    terms = {}
    for part in _set_partitions(list(range(len(exponents)))):
        coeff = 1
        for block in part:
            coeff *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
        key = tuple(sorted(sum(exponents[j] for j in block) for block in part))
        terms[key] = terms.get(key, 0) + coeff
    return tuple((c, k) for k, c in terms.items() if c != 0)


def row_moment_statistics(X, idx):
    """Per-row average of the monomial over ordered distinct coordinate tuples of ``X / ||X||``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if idx.r > n:
        raise ValueError(f"index needs {idx.r} distinct coordinates, row length is {n}")
    terms = _mobius_terms(idx.exponents)
    needed = sorted({m for _, key in terms for m in key})
    x2 = X * X
    s2 = x2.sum(axis=1)
    power = {2: np.ones_like(s2)}
    for m in needed:
        if m == 2:
            continue
        if m == 1:
            raw = X.sum(axis=1)
        elif m % 2 == 0:
            raw = (x2 ** (m // 2)).sum(axis=1)
        else:
            raw = (x2 ** (m // 2) * X).sum(axis=1)
        power[m] = raw / s2 ** (m / 2.0)
    total = np.zeros_like(s2)
    for coeff, key in terms:
        prod = np.ones_like(s2)
        for m in key:
            prod = prod * power[m]
        total += coeff * prod
    falling = math.prod(range(n - idx.r + 1, n + 1))
    return total / falling


def _chunk_values(args):
    law, n, idx, seed, chunk, rows = args
    X = law.matrix(_rng.stream(seed, chunk), (rows, n))
    zero = np.flatnonzero(np.all(X == 0.0, axis=1))
    attempt = 0
    degenerate = int(zero.size)
    while zero.size:
        attempt += 1
        X[zero] = law.matrix(_rng.stream(seed, chunk, attempt), (zero.size, n))
        zero = zero[np.all(X[zero] == 0.0, axis=1)]
        degenerate += int(zero.size)
    return row_moment_statistics(X, idx), degenerate


def estimate_mixed_moment(law, n, idx, reps, seed, workers=1, chunk_rows=None):
    """Monte Carlo estimate of ``beta_idx`` from ``reps`` independent rows of length ``n``.

    Rows are generated in fixed chunks of ``chunk_rows`` keyed by ``(seed, chunk)``,
    so the estimate does not depend on ``workers``.
    """
    if not isinstance(idx, MomentIndex):
        idx = MomentIndex(idx)
    if reps < 100:
        raise ValueError("reps must be >= 100")
    if idx.r > n:
        raise ValueError(f"index order r={idx.r} exceeds n={n}")
    if chunk_rows is None:
        chunk_rows = max(1, CHUNK_ENTRIES // n)
    jobs = []
    start = 0
    chunk = 0
    while start < reps:
        rows = min(chunk_rows, reps - start)
        jobs.append((law, n, idx, seed, chunk, rows))
        start += rows
        chunk += 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_values, jobs))
    else:
        results = [_chunk_values(job) for job in jobs]
    values = np.concatenate([r[0] for r in results])
    degenerate = sum(r[1] for r in results)
    if degenerate > MAX_DEGENERATE_FRACTION * reps:
        raise RuntimeError(f"{degenerate} of {reps} rows had zero norm; law is too degenerate")
    law_desc = law.to_json() if hasattr(law, "to_json") else {"law": repr(law)}
    return MomentEstimate(
        value=float(values.mean()),
        se=float(values.std(ddof=1) / math.sqrt(values.size)),
        samples=int(values.size),
        n=n,
        law=law_desc,
        idx=idx,
        degenerate_rows=degenerate,
        chunk_rows=chunk_rows,
    )


def _check_pole(x):
    if x <= 0 and abs(x - round(x)) < _POLE_TOL:
        raise ValueError(f"formula pole at this (alpha, index): Gamma argument {x}")


def _even_halves(idx):
    if not isinstance(idx, MomentIndex):
        idx = MomentIndex(idx)
    if not idx.all_even:
        raise ValueError(f"rate formula needs all-even exponents, got {idx}")
    return [k // 2 for k in idx.exponents]


def moment_rate_limit(alpha, idx):
    """Limit of ``n^(N1(1-alpha/2) + q alpha/2) / L(sqrt n)^(q-N1) * E prod Y^(2 k_i)``.

    ``(alpha/2)^(q-N1) Gamma(N1(1-alpha/2)+q alpha/2) prod_{k_i>=2} Gamma(k_i-alpha/2) / Gamma(sum k_i)``
    """
    if not 2.0 < alpha < 4.0:
        raise ValueError(f"rate formula needs alpha in (2, 4), got {alpha}")
    ks = _even_halves(idx)
    q = len(ks)
    n1 = sum(1 for k in ks if k == 1)
    head = n1 * (1.0 - alpha / 2.0) + q * alpha / 2.0
    args = [head] + [k - alpha / 2.0 for k in ks if k >= 2]
    for a in args:
        _check_pole(a)
    log_val = (q - n1) * math.log(alpha / 2.0) + sum(special.gammaln(a) for a in args) - special.gammaln(sum(ks))
    sign = np.prod([special.gammasgn(a) for a in args])
    return float(sign * math.exp(log_val))


def moment_scaling(alpha, idx, n, slowly_varying):
    """Factor ``n^(N1(1-alpha/2) + q alpha/2) / L(sqrt n)^(q-N1)`` applied to the moment."""
    ks = _even_halves(idx)
    q = len(ks)
    n1 = sum(1 for k in ks if k == 1)
    return n ** (n1 * (1.0 - alpha / 2.0) + q * alpha / 2.0) / slowly_varying ** (q - n1)


def gaussian_moment_exact(n, idx):
    """Moments of a uniform point on the unit sphere in ``R^n`` (total degree <= 8).

    ``E prod Y_j^(2k_j) = prod (2k_j - 1)!! / (n (n+2) ... (n + 2K - 2))``, ``K = sum k_j``;
    any odd exponent gives 0.
    """
    if not isinstance(idx, MomentIndex):
        idx = MomentIndex(idx)
    if idx.degree > 8:
        raise NotImplementedError(f"exact spherical moments implemented up to total degree 8, got {idx.degree}")
    if idx.r > n:
        raise ValueError(f"index order r={idx.r} exceeds n={n}")
    if not idx.all_even:
        return 0.0
    num = 1.0
    for e in idx.exponents:
        num *= math.prod(range(e - 1, 0, -2))
    K = idx.degree // 2
    den = math.prod(n + 2 * m for m in range(K))
    return num / den

