"""Global and multilevel block truncation schedules, and exceedance counts.

Rows are numbered ``1..p`` in plans (matching the block formulas); arrays are
indexed from 0 as usual. All ``log`` are natural logs, and fractional block
boundaries are floored.

Far from singularity (``n - p >= p^(1/6) log^(1/4) p``) a single level
``n^(2/3) log n`` applies to every entry. Otherwise the last rows are split
into blocks: each block truncates its top rows at a block-wide level and its
bottom rows at the row-dependent level ``(n (p - i))^(1/3) log^(1/12) n``; the
last ``d_n`` rows use ``(n d_n)^(1/3) log^(1/12) n``. At desk-scale ``n`` the
block-count condition usually has no solution; the plan then uses one block
and is flagged degenerate rather than rejected.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._validation import check_data_matrix, check_int

__all__ = [
    "TruncationRange",
    "TruncationPlan",
    "TruncationOutcome",
    "ExceedanceProfile",
    "plan_parameters",
    "plan_truncation",
    "apply_truncation",
    "exceedance_profile",
]

GLOBAL_ONLY = "global_only"
MULTILEVEL = "multilevel"


@dataclass(frozen=True)
class TruncationRange:
    row_lo: int
    row_hi: int
    level: float
    kind: str


@dataclass
class TruncationPlan:
    p: int
    n: int
    a: float
    c_frak: float
    mode: str
    s1: int
    s2: int
    s3: int
    d_n: float
    K: int
    ranges: list
    degenerate: bool = False
    notes: list = field(default_factory=list)

    @property
    def global_level(self):
        return _global_level(self.n)

    def row_levels(self):
        """Level for each row, as a length-``p`` array (0-based)."""
        out = np.empty(self.p)
        for r in self.ranges:
            out[r.row_lo - 1 : r.row_hi] = r.level
        return out

    def to_json(self):
        return {
            "p": self.p,
            "n": self.n,
            "a": self.a,
            "c_frak": self.c_frak,
            "mode": self.mode,
            "s1": self.s1,
            "s2": self.s2,
            "s3": self.s3,
            "d_n": self.d_n,
            "K": self.K,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
            "ranges": [
                {"row_lo": r.row_lo, "row_hi": r.row_hi, "level": r.level, "kind": r.kind} for r in self.ranges
            ],
        }


def _global_level(n):
    return n ** (2.0 / 3.0) * math.log(n)


def plan_parameters(p, n, a=2.5):
    """``s1 = [p/100]``, ``s2 = [sqrt(-log(1-(p-1)/n))]``, ``s3 = [p / log^a p]``."""
    s1 = p // 100
    s2 = int(math.floor(math.sqrt(math.log(n) - math.log(n - p + 1))))
    lp = math.log(p)
    s3 = int(math.floor(p / lp**a)) if lp > 0 else 0
    return s1, s2, s3


def plan_truncation(p, n, a=2.5, c_frak=0.125, mode="auto"):
    p = check_int(p, "p", minimum=1)
    n = check_int(n, "n", minimum=1)
    if p > n:
        raise ValueError(f"theory requires p <= n, got p={p}, n={n}")
    if not a > 2:
        raise ValueError(f"a must exceed 2, got {a}")
    if not 0.0 < c_frak < 0.25:
        raise ValueError(f"c_frak must lie in (0, 1/4), got {c_frak}")
    if mode not in ("auto", GLOBAL_ONLY, MULTILEVEL, "global"):
        raise ValueError(f"unknown truncation mode {mode!r}")

    s1, s2, s3 = plan_parameters(p, n, a)
    d_n = s2 ** (1.0 - c_frak) if s2 > 0 else 0.0
    lp = math.log(p)
    notes = []
    if p < 2:
        notes.append("p < 2: s3 undefined, set to 0")

    edge = p ** (1.0 / 6.0) * lp**0.25
    if mode == "auto":
        mode = GLOBAL_ONLY if n - p >= edge else MULTILEVEL
    elif mode == "global":
        mode = GLOBAL_ONLY

    if mode == GLOBAL_ONLY:
        ranges = [TruncationRange(1, p, _global_level(n), "global")]
        return TruncationPlan(p, n, a, c_frak, mode, s1, s2, s3, d_n, 1, ranges, False, notes)

    ln = math.log(n)
    K, found = _choose_k(p, n, d_n, c_frak)
    degenerate = not found
    if degenerate:
        notes.append("block-count inequality has no solution at this size; K clamped to 1")

    # rows past p - d_n form the tail; keep at least the last row there so no level is 0
    d_eff = d_n
    if d_n < 1.0:
        d_eff = 1.0
        notes.append("d_n < 1: the tail block is taken as the last row (d_n = 1)")
    cut = int(math.floor(p - d_eff))
    cut = min(max(cut, 0), p)
    ranges = []

    def emit(lo, hi, level, kind):
        hi = min(hi, cut)
        if lo <= hi:
            ranges.append(TruncationRange(lo, hi, level, kind))

    prev = min(int(math.floor(p - edge)), cut)
    prev = max(prev, 0)
    emit(1, prev, _global_level(n), "global")
    for k in range(1, K + 1):
        e_k = p ** (1.0 / (2.0 * 3**k))
        e_next = p ** (1.0 / (2.0 * 3 ** (k + 1)))
        mid = max(int(math.floor(p - e_next * lp ** (5.0 / 12.0))), prev)
        end = max(int(math.floor(p - e_next * lp**0.25)), mid)
        emit(prev + 1, mid, (n * e_k) ** (1.0 / 3.0) * ln ** (1.0 / 6.0), f"block{k}")
        for i in range(mid + 1, min(end, cut) + 1):
            ranges.append(TruncationRange(i, i, (n * (p - i)) ** (1.0 / 3.0) * ln ** (1.0 / 12.0), f"block{k}-local"))
        prev = max(prev, min(end, cut))
    # block K runs to row p - d_n; rows past its local segment keep the row-wise level
    for i in range(prev + 1, cut + 1):
        ranges.append(TruncationRange(i, i, (n * (p - i)) ** (1.0 / 3.0) * ln ** (1.0 / 12.0), f"block{K}-local"))
    if cut < p:
        ranges.append(TruncationRange(cut + 1, p, (n * d_eff) ** (1.0 / 3.0) * ln ** (1.0 / 12.0), "tail"))
    return TruncationPlan(p, n, a, c_frak, MULTILEVEL, s1, s2, s3, d_n, K, ranges, degenerate, notes)


def _choose_k(p, n, d_n, c_frak):
    lp = math.log(p) if p > 1 else 0.0
    k_max = max(1, int(math.floor(math.log(n) ** (c_frak / 2.0))))
    best = None
    for k in range(1, k_max + 1):
        lower = p ** (1.0 / (2.0 * 3 ** (k + 1))) * lp**0.25
        upper = p ** (1.0 / (2.0 * 3**k)) * lp**0.25
        if lower < d_n <= upper:
            best = k
    return (best, True) if best is not None else (1, False)


@dataclass
class TruncationOutcome:
    X_hat: np.ndarray
    changed: int
    changed_by_range: list


def apply_truncation(X, plan):
    """Zero every entry at or above its row's level."""
    X = check_data_matrix(X, require_p_le_n=False)
    if X.shape != (plan.p, plan.n):
        raise ValueError(f"plan is for shape {(plan.p, plan.n)}, data has shape {X.shape}")
    levels = plan.row_levels()
    hit = np.abs(X) >= levels[:, None]
    X_hat = np.where(hit, 0.0, X)
    per_row = hit.sum(axis=1)
    by_range = [int(per_row[r.row_lo - 1 : r.row_hi].sum()) for r in plan.ranges]
    return TruncationOutcome(X_hat=X_hat, changed=int(per_row.sum()), changed_by_range=by_range)


@dataclass
class ExceedanceProfile:
    c_alpha: float
    eps_alpha: float
    alpha: float
    level: float
    row_counts: np.ndarray
    col_counts: np.ndarray
    total: int
    row_col_ok: bool
    total_ok: bool

    @property
    def event(self):
        return self.row_col_ok and self.total_ok


def exceedance_profile(X, c_alpha, eps_alpha, alpha):
    """Counts of ``|X_ij| > n^c_alpha`` and the two conditions of the high-probability event.

    ``max_i sum_j psi_ij + max_j sum_i psi_ij <= 2 max(n^(1 - alpha c + eps), log n)``
    and ``sum psi_ij <= n^(2 - alpha c + eps)``.
    """
    X = check_data_matrix(X, require_p_le_n=False)
    if not 0.0 < c_alpha <= 2.0 / 3.0:
        raise ValueError(f"c_alpha must lie in (0, 2/3], got {c_alpha}")
    if not eps_alpha > 0:
        raise ValueError("eps_alpha must be positive")
    n = X.shape[1]
    level = n**c_alpha
    psi = np.abs(X) > level
    rows = psi.sum(axis=1)
    cols = psi.sum(axis=0)
    total = int(rows.sum())
    bound = 2.0 * max(n ** (1.0 - alpha * c_alpha + eps_alpha), math.log(n))
    return ExceedanceProfile(
        c_alpha=c_alpha,
        eps_alpha=eps_alpha,
        alpha=alpha,
        level=level,
        row_counts=rows,
        col_counts=cols,
        total=total,
        row_col_ok=bool(rows.max() + cols.max() <= bound),
        total_ok=bool(total <= n ** (2.0 - alpha * c_alpha + eps_alpha)),
    )
