"""Linear solvers for blocked random-feature regression.

Three pieces:

* the dual-form ridge solve  a = A*(AA* + lambda I)^{-1} f,  which is the
  cheap route in the over-parameterized regime N >> M;
* the hierarchical-orthogonality penalty:  per-term Hermitian PSD blocks
  W_u = (1/M^2) A_u* (sum_{v subset u} A_v A_v*) A_u  and their principal
  square roots;
* an iterative least-squares solve of the stacked system
  [A; sqrt(lambda W)] a = [f; 0]  via complex LSQR with diagonal column
  preconditioning, stopped on the relative normal-equation residual
  ||(A*A + lambda W) a - A*f|| / ||A*f||.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .features import CoefficientVector, FeatureMatrix
from .index_sets import AnovaIndexSet


class SolverFailure(RuntimeError):
    """A linear solve did not reach its contract; carries diagnostics."""

    def __init__(self, message, residual=None, condition=None):
        super().__init__(message)
        self.residual = residual
        self.condition = condition


@dataclass
class SolverOptions:
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int | None = None  # default 10 (N + M)


@dataclass
class PenaltyBlocks:
    """Per-term penalty blocks W_u and their principal square roots."""

    blocks: dict
    sqrts: dict

    def terms(self):
        return list(self.blocks)


@dataclass
class IterativeInfo:
    iterations: int
    ne_residual: float
    objective_history: np.ndarray  # stacked residual norms, one per iteration
    converged: bool


def _as_matrix(a):
    return a.values if isinstance(a, FeatureMatrix) else np.asarray(a)


def ridge_solve_dual(A, f, lam: float):
    """Minimum-norm ridge solution a = A*(AA* + lambda I)^{-1} f.

    With lam = 0 this interpolates when AA* is invertible; a singular
    system raises :class:`SolverFailure` with a condition estimate.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    mat = _as_matrix(A)
    m = mat.shape[0]
    gram = mat @ mat.conj().T
    gram[np.diag_indices(m)] += lam
    try:
        cho = linalg.cho_factor(gram, check_finite=False)
        y = linalg.cho_solve(cho, np.asarray(f, dtype=complex), check_finite=False)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(gram)
        raise SolverFailure(
            f"dual ridge system singular at lambda={lam} (cond ~ {cond:.3e})",
            condition=cond,
        ) from exc
    a = mat.conj().T @ y
    if isinstance(A, FeatureMatrix):
        return CoefficientVector(a, A.feature_set)
    return a


def ridge_solve_restricted(mat: np.ndarray, f, lam: float) -> np.ndarray:
    """Plain ridge on an explicit (sub)matrix, primal or dual by shape."""
    m, n = mat.shape
    f = np.asarray(f, dtype=complex)
    if n <= m:
        gram = mat.conj().T @ mat
        gram[np.diag_indices(n)] += lam
        rhs = mat.conj().T @ f
        try:
            return linalg.solve(gram, rhs, assume_a="pos", check_finite=False)
        except linalg.LinAlgError:
            return np.linalg.lstsq(gram, rhs, rcond=None)[0]
    return ridge_solve_dual(mat, f, lam)


def build_penalty(A: FeatureMatrix, U: AnovaIndexSet | None = None) -> PenaltyBlocks:
    """Hierarchical-orthogonality penalty blocks for every term of A.

    For each term u the inner sum runs over all strict subsets v of u that
    carry a feature block; the empty term (all-ones column) must be present
    whenever any non-empty term is penalized.  For u = {i} the inner sum is
    exactly the all-ones M x M matrix.
    """
    fs = A.feature_set
    slices = fs.block_slices()
    terms = list(slices) if U is None else [u for u in slices if u in U.terms]
    m = A.shape[0]
    blocks, sqrts = {}, {}
    for u in terms:
        if u and () not in slices:
            raise ValueError("penalty needs the empty-term block (all-ones column)")
        a_u = A.values[:, slices[u]]
        n_u = a_u.shape[1]
        w = np.zeros((n_u, n_u), dtype=complex)
        for v in slices:
            if v != u and set(v) < set(u):
                b = A.values[:, slices[v]].conj().T @ a_u  # (n_v, n_u)
                w += b.conj().T @ b
        w /= m**2
        w = 0.5 * (w + w.conj().T)
        vals, vecs = linalg.eigh(w, check_finite=False)
        clip = 1e-10 * max(float(vals[-1]), 0.0)
        vals = np.where(vals < clip, 0.0, vals)  # Gram structure: negatives are rounding
        blocks[u] = w
        sqrts[u] = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return PenaltyBlocks(blocks, sqrts)


def penalty_value(a: CoefficientVector, penalty: PenaltyBlocks):
    """Per-term quadratic forms a_u* W_u a_u and their (real) total."""
    per_block = {}
    for u, w in penalty.blocks.items():
        try:
            a_u = a.block(u)
        except KeyError:
            raise ValueError(f"coefficient vector has no block for term {u}")
        per_block[u] = float(np.real(a_u.conj() @ w @ a_u))
    return per_block, float(sum(per_block.values()))


def _lsqr(matvec, rmatvec, b, n, atol, iter_lim):
    """Complex LSQR (Paige & Saunders) with an objective-norm history."""
    x = np.zeros(n, dtype=complex)
    u = b.astype(complex).copy()
    beta = np.linalg.norm(u)
    if beta == 0:
        return x, np.zeros(0), 0
    u /= beta
    v = rmatvec(u)
    alpha = np.linalg.norm(v)
    if alpha == 0:
        return x, np.zeros(0), 0
    v /= alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    arnorm0 = alpha * beta
    history = []
    for it in range(1, iter_lim + 1):
        u = matvec(v) - alpha * u
        beta = np.linalg.norm(u)
        if beta > 0:
            u /= beta
        v = rmatvec(u) - beta * v
        alpha = np.linalg.norm(v)
        if alpha > 0:
            v /= alpha
        rho = np.hypot(rhobar, beta)
        c, s = rhobar / rho, beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        x += (phi / rho) * w
        w = v - (theta / rho) * w
        history.append(phibar)
        # ||A~* r~|| estimate relative to its starting value
        arnorm = phibar * abs(rhobar)
        if arnorm <= atol * arnorm0 or phibar <= atol * np.linalg.norm(b):
            return x, np.asarray(history), it
    return x, np.asarray(history), iter_lim


def penalized_solve(
    A: FeatureMatrix,
    f,
    penalty: PenaltyBlocks,
    lam: float,
    opts: SolverOptions | None = None,
):
    """Iterative solve of  min ||A a - f||^2 + lambda a* W a  (stacked form).

    Returns (coefficients, info).  Convergence is measured by the relative
    normal-equation residual ||(A*A + lambda W) a - A*f|| / ||A*f||; failing
    to reach ``opts.tol`` within ``opts.max_iter`` iterations raises
    :class:`SolverFailure` carrying the last residual.
    """
    if not lam > 0:
        raise ValueError("penalized solve needs lambda > 0")
    opts = opts or SolverOptions()
    mat = A.values
    m, n = mat.shape
    slices = A.feature_set.block_slices()
    roots = [(slices[u], np.sqrt(lam) * penalty.sqrts[u]) for u in penalty.sqrts]
    w_blocks = [(slices[u], penalty.blocks[u]) for u in penalty.blocks]
    f = np.asarray(f, dtype=complex)

    def apply_root(x):
        out = np.empty(n, dtype=complex)
        for sl, r in roots:
            out[sl] = r @ x[sl]
        return out

    def apply_w(x):
        out = np.empty(n, dtype=complex)
        for sl, wb in w_blocks:
            out[sl] = wb @ x[sl]
        return out

    # diagonal column preconditioner; ||A[:, j]||^2 = M for unit-modulus entries
    diag_w = np.empty(n)
    for sl, wb in w_blocks:
        diag_w[sl] = np.real(np.diag(wb))
    scale = np.sqrt(np.sum(np.abs(mat) ** 2, axis=0) + lam * diag_w)
    scale[scale == 0] = 1.0

    def matvec(x):
        xs = x / scale
        return np.concatenate([mat @ xs, apply_root(xs)])

    def rmatvec(y):
        return (mat.conj().T @ y[:m] + apply_root(y[m:])) / scale

    atf = mat.conj().T @ f
    atf_norm = np.linalg.norm(atf)
    if atf_norm == 0:
        zero = CoefficientVector(np.zeros(n), A.feature_set)
        return zero, IterativeInfo(0, 0.0, np.zeros(0), True)

    def ne_residual(a):
        return np.linalg.norm(mat.conj().T @ (mat @ a) + lam * apply_w(a) - atf) / atf_norm

    max_iter = opts.max_iter if opts.max_iter is not None else 10 * (n + m)
    history = []
    x = np.zeros(n, dtype=complex)
    done = 0
    converged = False
    # run LSQR in bursts on the residual system (warm restart), checking the
    # contract residual between bursts; burst phibar values are the full
    # stacked objective, so the recorded history stays monotone
    burst = max(50, min(500, n // 4))
    while done < max_iter and not converged:
        rhs_res = np.concatenate([f - mat @ x, -apply_root(x)])
        step = min(burst, max_iter - done)
        dx_hat, hist, used = _lsqr(matvec, rmatvec, rhs_res, n, atol=opts.tol * 1e-2, iter_lim=step)
        x = x + dx_hat / scale
        history.extend(hist.tolist())
        done += max(used, 1)
        converged = ne_residual(x) <= opts.tol
        if used == 0:
            break  # exact or numerically stagnant residual system
    res = ne_residual(x)
    info = IterativeInfo(done, float(res), np.asarray(history), converged)
    if not converged:
        raise SolverFailure(
            f"penalized solve: normal-equation residual {res:.3e} > tol {opts.tol:.1e} "
            f"after {done} iterations",
            residual=res,
        )
    return CoefficientVector(x, A.feature_set), info
