"""Monte Carlo harness: replicate the standardized log-determinant and compare with N(0, 1).

Replication ``r`` draws its matrix from the stream keyed by ``(seed, r)``, so
the z sample does not depend on how replications are split across worker
processes.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
import csv
import json
import math
import os
import time
import warnings

import numpy as np

from . import _rng
from .corrmat import (
    RankCollapseError,
    SingularCorrelationError,
    logdet_cholesky,
    logdet_perpendiculars,
)
from .heavytail import GaussianLaw, StandardizedLaw
from .normalization import (
    DEFAULT_W,
    clt_constants,
    gaussian_exact_constants,
    norm_cdf,
    norm_ppf,
    standardize_logdet,
)
from ._validation import check_data_matrix, check_dims, check_int

__all__ = [
    "SimConfig",
    "SimResult",
    "ReplacedPair",
    "ReplacementResult",
    "KSResult",
    "TestResult",
    "run_clt_experiment",
    "simulate_logdets",
    "gaussian_beta_oracle",
    "ks_statistic",
    "ks_two_sample",
    "kolmogorov_sf",
    "replacement_experiment",
    "independence_test",
    "equicorrelated_gaussian",
    "export_results",
    "load_results",
    "qq_pairs",
]

METHODS = ("perpendiculars", "cholesky")
_SERIES_TOL = 1e-12
_SF_ONE_BELOW = 0.18


@dataclass
class SimConfig:
    p: int
    n: int
    law: object = field(default_factory=GaussianLaw)
    reps: int = 1000
    seed: int = 0
    regime: object = None
    w: float = DEFAULT_W
    method: str = "perpendiculars"
    workers: int = 1

    def __post_init__(self):
        self.p, self.n = check_dims(self.p, self.n)
        self.reps = check_int(self.reps, "reps", minimum=1)
        self.seed = check_int(self.seed, "seed", minimum=0)
        self.workers = check_int(self.workers, "workers", minimum=1)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not isinstance(self.law, (StandardizedLaw, GaussianLaw)):
            raise TypeError("law must be a StandardizedLaw or GaussianLaw")

    def constants(self):
        return clt_constants(self.p, self.n, self.regime, self.w)

    def to_json(self):
        regime = self.regime.kind if hasattr(self.regime, "kind") else (self.regime or "auto")
        return {
            "p": self.p,
            "n": self.n,
            "law": self.law.to_json(),
            "reps": self.reps,
            "seed": self.seed,
            "regime": regime,
            "w": self.w,
            "method": self.method,
            "workers": self.workers,
        }


@dataclass
class KSResult:
    D: float
    pvalue: float

    def __iter__(self):
        return iter((self.D, self.pvalue))


@dataclass
class SimResult:
    z: np.ndarray
    logdet: np.ndarray
    ks: float
    ks_pvalue: float
    mean: float
    var: float
    consts: object
    config: SimConfig
    wall_time: float
    retries: int = 0

    def quantiles(self, probs=(0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)):
        return {f"{q:g}": float(np.quantile(self.z, q)) for q in probs}

    def to_dict(self):
        return {
            "config": self.config.to_json(),
            "consts": self.consts.to_json(),
            "ks": self.ks,
            "ks_pvalue": self.ks_pvalue,
            "moments": {"mean": self.mean, "var": self.var},
            "z_quantiles": self.quantiles(),
            "wall_time": self.wall_time,
            "retries": self.retries,
            "z": [float(v) for v in self.z],
        }


def _logdet(X, method):
    if method == "cholesky":
        return logdet_cholesky(X).logdet
    return logdet_perpendiculars(X).logdet


def _one_replication(law, p, n, seed, r, method):
    """Log-determinant of replication ``r``; retried once on a fresh sub-stream."""
    for attempt in (0, 1):
        gen = _rng.stream(seed, r) if attempt == 0 else _rng.stream(seed, r, _rng.RETRY)
        X = law.matrix(gen, (p, n))
        try:
            return _logdet(X, method), attempt
        except (RankCollapseError, SingularCorrelationError, ValueError) as exc:
            err = exc
    raise RuntimeError(f"replication {r}: rank collapse persisted after one retry ({err})")


def _replication_block(args):
    law, p, n, seed, lo, hi, method = args
    out = np.empty(hi - lo)
    retries = 0
    for k, r in enumerate(range(lo, hi)):
        out[k], extra = _one_replication(law, p, n, seed, r, method)
        retries += extra
    return lo, out, retries


def _blocks(reps, workers):
    size = max(1, math.ceil(reps / (4 * workers)))
    return [(lo, min(lo + size, reps)) for lo in range(0, reps, size)]


def simulate_logdets(law, p, n, reps, seed, method="perpendiculars", workers=1):
    """``reps`` log-determinants, replication ``r`` from stream ``(seed, r)``.

    Returns ``(logdets, retries)``.
    """
    out = np.empty(reps)
    jobs = [(law, p, n, seed, lo, hi, method) for lo, hi in _blocks(reps, workers)]
    retries = 0
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_replication_block, jobs))
    else:
        done = [_replication_block(job) for job in jobs]
    for lo, vals, extra in done:
        out[lo : lo + vals.size] = vals
        retries += extra
    return out, retries


def run_clt_experiment(config):
    consts = config.constants()
    t0 = time.perf_counter()
    logdets, retries = simulate_logdets(
        config.law, config.p, config.n, config.reps, config.seed, config.method, config.workers
    )
    z = np.atleast_1d(standardize_logdet(logdets, consts))
    if z.size >= 2:
        ks = ks_statistic(z)
        mean, var = float(z.mean()), float(z.var(ddof=1))
    else:
        # a single draw: distance to Phi of the one-point empirical cdf
        ks = KSResult(D=float(max(norm_cdf(z[0]), 1.0 - norm_cdf(z[0]))), pvalue=math.nan)
        mean, var = float(z[0]), math.nan
    return SimResult(
        z=z,
        logdet=logdets,
        ks=ks.D,
        ks_pvalue=ks.pvalue,
        mean=mean,
        var=var,
        consts=consts,
        config=config,
        wall_time=time.perf_counter() - t0,
        retries=retries,
    )


def gaussian_beta_oracle(p, n, reps, seed, return_deltas=False):
    """Exact Gaussian log-determinants as sums of independent ``log Beta((n-i)/2, i/2)``.

    The ``i = 0`` factor is the constant 1.
    """
    p, n = check_dims(p, n)
    reps = check_int(reps, "reps", minimum=1)
    gen = _rng.stream(seed, _rng.ORACLE)
    i = np.arange(1, p)
    deltas = np.ones((reps, p))
    if p > 1:
        deltas[:, 1:] = gen.beta((n - i) / 2.0, i / 2.0, size=(reps, p - 1))
    logdets = np.log(deltas).sum(axis=1)
    return (logdets, deltas) if return_deltas else logdets


def kolmogorov_sf(x):
    """``P(K > x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)``, clipped to [0, 1]."""
    if x < _SF_ONE_BELOW:
        # the series converges slowly here and P(K <= x) < 1e-15
        return 1.0
    total = 0.0
    k = 1
    while True:
        term = 2.0 * math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 else -term
        if term < _SERIES_TOL:
            break
        k += 1
    return min(max(total, 0.0), 1.0)


def ks_statistic(samples):
    """One-sample KS distance of ``samples`` to the standard normal, with asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    N = x.size
    if N < 2:
        raise ValueError("KS statistic needs at least 2 samples")
    F = norm_cdf(x)
    k = np.arange(1, N + 1)
    D = float(max(np.max(k / N - F), np.max(F - (k - 1) / N)))
    return KSResult(D=D, pvalue=kolmogorov_sf(math.sqrt(N) * D) if D > 0 else 1.0)


def ks_two_sample(a, b):
    """Two-sample KS distance ``sup |F_a - F_b|`` with the asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size < 1 or b.size < 1:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    D = float(np.max(np.abs(Fa - Fb)))
    m = a.size * b.size / (a.size + b.size)
    return KSResult(D=D, pvalue=kolmogorov_sf(math.sqrt(m) * D) if D > 0 else 1.0)


@dataclass
class ReplacedPair:
    logdet_R: float
    logdet_R_check: float
    sigma_scaled_diff: float


@dataclass
class ReplacementResult:
    pairs: list
    s1: int
    sigma: float
    skipped: bool = False

    @property
    def scaled_diffs(self):
        return np.array([pr.sigma_scaled_diff for pr in self.pairs])

    def quantiles(self, probs=(0.1, 0.25, 0.5, 0.75, 0.9)):
        d = self.scaled_diffs
        return {f"{q:g}": float(np.quantile(d, q)) for q in probs} if d.size else {}

    def to_json(self):
        return {"s1": self.s1, "sigma": self.sigma, "skipped": self.skipped, "reps": len(self.pairs),
                "quantiles": self.quantiles()}


def replacement_experiment(config, s1_override=None, gaussian_law=None):
    """``sigma_n |log det R_check - log det R|`` where ``R_check`` swaps the last ``s1`` rows for Gaussian rows.

    ``s1 = floor(p / 100)`` unless overridden. Both matrices share the first
    ``p - s1`` rows exactly. ``gaussian_law`` replaces the Gaussian block law
    (for same-law sanity checks).
    """
    s1 = config.p // 100 if s1_override is None else check_int(s1_override, "s1", minimum=0)
    if s1 > config.p:
        raise ValueError(f"s1={s1} exceeds p={config.p}")
    consts = config.constants()
    if s1 == 0:
        warnings.warn("replacement block empty (s1 = 0); experiment skipped", RuntimeWarning, stacklevel=2)
        return ReplacementResult(pairs=[], s1=0, sigma=consts.sigma, skipped=True)
    block_law = gaussian_law if gaussian_law is not None else GaussianLaw()
    p, n = config.p, config.n
    pairs = []
    for r in range(config.reps):
        X = config.law.matrix(_rng.stream(config.seed, r), (p, n))
        X_check = X.copy()
        X_check[p - s1 :] = block_law.matrix(_rng.stream(config.seed, r, _rng.REPLACE), (s1, n))
        a = _logdet(X, config.method)
        b = _logdet(X_check, config.method)
        pairs.append(ReplacedPair(a, b, abs(b - a) / consts.sigma))
    return ReplacementResult(pairs=pairs, s1=s1, sigma=consts.sigma)


@dataclass
class TestResult:
    z: float
    pvalue: float
    reject: bool
    consts: object
    logdet: float

    def to_json(self):
        return {"z": self.z, "pvalue": self.pvalue, "reject": self.reject, "logdet": self.logdet,
                "consts": self.consts.to_json()}


def _pvalue(z):
    return float(min(1.0, 2.0 * norm_cdf(-abs(z))))


def independence_test(data, level=0.05, w=DEFAULT_W, normalization="asymptotic", regime=None):
    """Two-sided test of complete independence of the ``p`` rows of ``data`` (``p x n``).

    ``normalization='asymptotic'`` uses the limit constants; ``'gaussian_exact'``
    uses the exact finite-sample Gaussian mean and variance.
    """
    X = check_data_matrix(data)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    p, n = X.shape
    if normalization == "asymptotic":
        consts = clt_constants(p, n, regime, w)
    elif normalization == "gaussian_exact":
        consts = gaussian_exact_constants(p, n, w)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    ld = logdet_perpendiculars(X).logdet
    z = standardize_logdet(ld, consts)
    pv = _pvalue(z)
    return TestResult(z=z, pvalue=pv, reject=pv < level, consts=consts, logdet=ld)


def equicorrelated_gaussian(p, n, rho, gen):
    """``p x n`` Gaussian data whose rows have pairwise correlation ``rho`` (columns i.i.d.)."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    Z = gen.standard_normal((p, n))
    g = gen.standard_normal(n)
    return math.sqrt(1.0 - rho) * Z + math.sqrt(rho) * g[None, :]


def qq_pairs(z):
    z = np.sort(np.asarray(z, dtype=float))
    N = z.size
    theo = norm_ppf((np.arange(1, N + 1) - 0.5) / N)
    return np.column_stack([theo, z])


def _qq_path(path):
    root, _ = os.path.splitext(path)
    return root + ".qq.csv"


def export_results(result, path, format="json"):
    """Write ``result`` as JSON (full schema) or CSV (raw z); QQ pairs go to ``<stem>.qq.csv``."""
    path = os.fspath(path)
    try:
        if format == "json":
            with open(path, "w") as fh:
                json.dump(result.to_dict(), fh, indent=1, default=_json_default)
        elif format == "csv":
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["z"])
                for v in result.z:
                    wr.writerow([repr(float(v))])
        else:
            raise ValueError(f"unknown export format {format!r}")
        with open(_qq_path(path), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["theoretical", "sample"])
            for t, s in qq_pairs(result.z):
                wr.writerow([repr(float(t)), repr(float(s))])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return _qq_path(path)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return asdict(obj)


def load_results(path):
    """Read the z sample back from a JSON or CSV export."""
    path = os.fspath(path)
    try:
        if path.endswith(".csv"):
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            if not rows or rows[0] != ["z"]:
                raise ValueError(f"{path}: expected a 'z' header")
            return np.array([float(r[0]) for r in rows[1:]])
        with open(path) as fh:
            return np.array(json.load(fh)["z"], dtype=float)
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
