"""Projection matrices ``Q_i = P_i / (n - i)`` and resolvent diagnostics.

``P_i`` projects onto the orthogonal complement of the span of the first ``i``
data rows. It is built from an orthonormal basis of that span and never from
``(B_i B_i^T)^-1``. These are diagnostic objects (dense ``n x n``); the
log-determinant pipeline never forms them.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._validation import check_data_matrix, check_int

__all__ = [
    "NormalizedProjection",
    "DiagSummary",
    "ResolventProbe",
    "QBoundReport",
    "projection_matrix",
    "diag_summary",
    "q_bound_sums",
    "q_bound_sums_bruteforce",
    "verify_q_bounds",
    "diag_via_sherman_morrison",
    "max_projection_diagonal",
    "resolvent_trace",
    "resolvent_traces",
    "stieltjes_formula",
    "smallest_eigenvalue_margin",
    "epsilon_grid",
]

MAX_DENSE_N = 512
BOUND_SLACK = 1.0 + 1e-8

BOUND_NAMES = (
    "row_abs_sum",  # max_k sum_l |q_kl|
    "offdiag_abs_sum",  # sum_{k!=l} |q_kl|
    "row_pair_products",  # max_k sum_{l!=s} |q_kl q_ks|
    "star3",  # sum_{k,l,s distinct} |q_kl q_ks|
    "triangle",  # sum_{k,l,s distinct} |q_kl q_ks q_ls|
    "path4",  # sum_{k,l,s,m distinct} |q_kl q_ks q_lm|
    "star4",  # sum_{k,l,s,m distinct} |q_kl q_ks q_km|
)


def _rank_tol(s, shape):
    return max(shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)


def _row_space_basis(B):
    """Orthonormal basis (n x i) of the row space of ``B``; raises if rank-deficient."""
    i = B.shape[0]
    if i == 0:
        return np.zeros((B.shape[1], 0))
    U, s, _ = np.linalg.svd(B.T, full_matrices=False)
    if s[-1] <= _rank_tol(s, B.shape) or s[-1] == 0:
        raise np.linalg.LinAlgError("rows not independent")
    return U


@dataclass
class NormalizedProjection:
    i: int
    n: int
    Q: np.ndarray

    @property
    def diag(self):
        return np.diag(self.Q)

    @property
    def P(self):
        return self.Q * (self.n - self.i)


def projection_matrix(X, i, max_n=MAX_DENSE_N):
    """``Q_i = (I - V V^T) / (n - i)``, ``V`` an orthonormal basis of the first ``i`` rows."""
    X = check_data_matrix(X, require_p_le_n=False)
    p, n = X.shape
    i = check_int(i, "i", minimum=0)
    if n > max_n:
        raise ValueError(f"dense projection limited to n <= {max_n} (got n={n}); raise max_n explicitly")
    if i >= n:
        raise ValueError("zero projection: i must be < n")
    if i > p:
        raise ValueError(f"i={i} exceeds the number of rows p={p}")
    V = _row_space_basis(X[:i])
    P = np.eye(n) - V @ V.T
    P = 0.5 * (P + P.T)
    return NormalizedProjection(i=i, n=n, Q=P / (n - i))


@dataclass
class DiagSummary:
    S: dict
    max_diag: float

    def __getitem__(self, k):
        return self.S[k]


def diag_summary(proj):
    d = proj.diag
    return DiagSummary(S={k: float(np.sum(d**k)) for k in (1, 2, 3, 4)}, max_diag=float(d.max()))


def q_bound_sums(Q):
    """Left-hand sides of the seven deterministic bounds, in O(n^2) + one O(n^3) product.

    Multi-index sums run over pairwise distinct indices. ``A = |Q|`` and ``B``
    is ``A`` with its diagonal removed.
    """
    A = np.abs(Q)
    B = A.copy()
    np.fill_diagonal(B, 0.0)
    a_row = A.sum(axis=1)
    r = B.sum(axis=1)
    r2 = (B * B).sum(axis=1)
    r3 = (B**3).sum(axis=1)
    B2 = B @ B
    tr_b3 = float(np.sum(B2 * B))
    return {
        "row_abs_sum": float(a_row.max()),
        "offdiag_abs_sum": float(r.sum()),
        "row_pair_products": float(np.max(a_row**2 - (A * A).sum(axis=1))),
        "star3": float(np.sum(r * r - r2)),
        "triangle": tr_b3,
        # inclusion-exclusion over the coincidences s=l, s=m, m=k
        "path4": float(r @ B @ r - 2.0 * (B * B).sum(axis=0) @ r - tr_b3 + np.sum(B**3)),
        # e_3 of each off-diagonal row, times 3!
        "star4": float(np.sum(r**3 - 3.0 * r * r2 + 2.0 * r3)),
    }


def q_bound_sums_bruteforce(Q):
    """Direct enumeration of the same sums (O(n^4) memory and time; n <= 40)."""
    n = Q.shape[0]
    if n > 40:
        raise ValueError("brute-force bound sums limited to n <= 40")
    A = np.abs(Q)
    idx = np.arange(n)
    ne = idx[:, None] != idx[None, :]
    # pairwise-distinct masks
    d3 = ne[:, :, None] & ne[:, None, :] & ne[None, :, :]
    d4 = (
        d3[:, :, :, None]
        & ne[:, None, None, :]
        & ne[None, :, None, :]
        & ne[None, None, :, :]
    )
    out = {}
    out["row_abs_sum"] = float(A.sum(axis=1).max())
    out["offdiag_abs_sum"] = float(np.sum(A * ne))
    rp = np.einsum("kl,ks->kls", A, A) * ne[None, :, :]
    out["row_pair_products"] = float(rp.sum(axis=(1, 2)).max())
    out["star3"] = float(np.sum(np.einsum("kl,ks->kls", A, A) * d3))
    out["triangle"] = float(np.sum(np.einsum("kl,ks,ls->kls", A, A, A) * d3))
    out["path4"] = float(np.sum(np.einsum("kl,ks,lm->klsm", A, A, A) * d4))
    out["star4"] = float(np.sum(np.einsum("kl,ks,km->klsm", A, A, A) * d4))
    return out


def q_bound_limits(n, i):
    m = n - i
    return {
        "row_abs_sum": math.sqrt(n) / m,
        "offdiag_abs_sum": n / math.sqrt(m),
        "row_pair_products": n / m**2,
        "star3": n / m,
        "triangle": n / m**2,
        "path4": n / m**1.5,
        "star4": n**1.5 / m**2,
    }


@dataclass
class QBoundReport:
    n: int
    i: int
    lhs: dict
    rhs: dict

    @property
    def ok(self):
        return {k: self.lhs[k] <= self.rhs[k] * BOUND_SLACK for k in BOUND_NAMES}

    @property
    def ratios(self):
        return {k: self.lhs[k] / self.rhs[k] for k in BOUND_NAMES}

    @property
    def all_ok(self):
        return all(self.ok.values())

    def to_json(self):
        ok = self.ok
        return {
            "n": self.n,
            "i": self.i,
            "bounds": {k: {"lhs": self.lhs[k], "rhs": self.rhs[k], "ok": bool(ok[k])} for k in BOUND_NAMES},
        }


def verify_q_bounds(proj):
    """Evaluate all seven bounds on ``proj``; a violation is reported, not raised."""
    if proj.n > 200:
        raise ValueError("bound verification limited to n <= 200")
    return QBoundReport(n=proj.n, i=proj.i, lhs=q_bound_sums(proj.Q), rhs=q_bound_limits(proj.n, proj.i))


def diag_via_sherman_morrison(X, i, ell):
    """``p_{i,ll} = 1 / (1 + v^T (B_(l) B_(l)^T)^-1 v)`` with ``v`` column ``ell`` of ``B_i``.

    When deleting column ``ell`` drops the rank of ``B_i`` the coordinate
    ``e_ell`` lies in the row space and the diagonal is exactly 0.
    """
    X = check_data_matrix(X, require_p_le_n=False)
    i = check_int(i, "i", minimum=0)
    ell = check_int(ell, "ell", minimum=0)
    if i == 0:
        return 1.0
    B = X[:i]
    s_full = np.linalg.svd(B, compute_uv=False)
    if s_full[-1] <= _rank_tol(s_full, B.shape) or s_full[-1] == 0:
        raise np.linalg.LinAlgError("rows not independent")
    v = B[:, ell]
    Bl = np.delete(B, ell, axis=1)
    if Bl.shape[1] < i:
        return 0.0
    s = np.linalg.svd(Bl, compute_uv=False)
    if s[-1] <= _rank_tol(s_full, B.shape):
        return 0.0
    G = Bl @ Bl.T
    c = np.linalg.cholesky(G)
    w = np.linalg.solve(c, v)
    return float(1.0 / (1.0 + w @ w))


def max_projection_diagonal(X, i):
    """``max_k p_{i,kk}`` without forming ``P_i``: ``1 - ||row k of V||^2``."""
    X = check_data_matrix(X, require_p_le_n=False)
    V = _row_space_basis(X[:i])
    return float(np.max(1.0 - np.sum(V * V, axis=1)))


@dataclass
class ResolventProbe:
    epsilon: float
    trace_mean: float
    p: int
    n: int


def _scaled_gram_eigs(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    n = X.shape[1]
    return np.linalg.eigvalsh(X @ X.T / n)


def resolvent_traces(X, epsilons):
    """``(1/p) tr (X X^T / n + eps I)^-1`` for each ``eps``, sharing one eigendecomposition."""
    lam = _scaled_gram_eigs(X)
    p = lam.size
    n = np.asarray(X).shape[-1]
    out = []
    for eps in np.atleast_1d(epsilons):
        if not eps > 0:
            raise ValueError(f"epsilon must be positive, got {eps}")
        out.append(ResolventProbe(epsilon=float(eps), trace_mean=float(np.mean(1.0 / (lam + eps))), p=p, n=n))
    return out


def resolvent_trace(X, epsilon):
    return resolvent_traces(X, [epsilon])[0]


def stieltjes_formula(p, n, epsilon):
    """``2 / (eps + 1 - p/n + sqrt((eps + 1 - p/n)^2 + 4 eps p/n))``."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    y = p / n
    b = epsilon + 1.0 - y
    return 2.0 / (b + math.sqrt(b * b + 4.0 * epsilon * y))


def epsilon_grid(n):
    """The regularizers ``n^-1/10, n^-1/4, n^-5/12`` used by the resolvent checks."""
    return [n ** (-0.1), n ** (-0.25), n ** (-5.0 / 12.0)]


def smallest_eigenvalue_margin(X, i):
    """``lambda_min(B_i B_i^T / n)`` against the margin ``(1 - sqrt(i/n))^2``."""
    X = check_data_matrix(X, require_p_le_n=False)
    i = check_int(i, "i", minimum=1)
    n = X.shape[1]
    if i > X.shape[0]:
        raise ValueError(f"i={i} exceeds p={X.shape[0]}")
    B = X[:i]
    lam = max(float(np.linalg.eigvalsh(B @ B.T / n)[0]), 0.0)
    margin = (1.0 - math.sqrt(i / n)) ** 2
    return {"lambda_min": lam, "threshold": margin, "ratio": lam / margin if margin > 0 else math.inf}
