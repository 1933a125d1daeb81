"""Sparse random-feature fitters fed by the boosting step.

``fit_shrimp`` runs iterative magnitude pruning: start from the full
dual-ridge solution, repeatedly drop the smallest-magnitude coefficients,
re-solve on the survivors, and return the model along the pruning path
with the smallest validation error.  ``fit_harfe`` runs a hard
thresholding pursuit: gradient step, keep the s largest entries, solve the
ridge problem restricted to that support, iterate until the support
stabilizes.  Both operate on any feature set (ANOVA-truncated or plain
q-sparse) and use the complex modulus as the pruning criterion, with ties
broken toward the lower column index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import CoefficientVector, FeatureSet, assemble_matrix
from .sampling import STREAM_SPLIT, SampleSet, stream_rng
from .solvers import ridge_solve_restricted


@dataclass
class PruneSchedule:
    keep_fraction: float = 0.5
    min_survivors: int = 4
    max_rounds: int = 20

    def __post_init__(self):
        if not 0.0 < self.keep_fraction < 1.0:
            raise ValueError("keep_fraction must be in (0, 1)")


@dataclass
class HtpConfig:
    sparsity: int
    step: float | None = None  # default 1/||A||^2 via power iteration
    ridge: float = 1e-6
    max_iter: int = 500
    stop_on_support: bool = True


def mse(features: FeatureSet, a: CoefficientVector, data: SampleSet) -> float:
    """Mean squared error of real-part predictions against the labels."""
    if data.labels is None:
        raise ValueError("sample set needs labels")
    pred = (assemble_matrix(features, data).values @ a.values).real
    return float(np.mean((data.labels - pred) ** 2))


def _argsort_by_magnitude(values: np.ndarray) -> np.ndarray:
    """Column indices sorted by decreasing modulus, lower index first on ties."""
    return np.lexsort((np.arange(values.shape[0]), -np.abs(values)))


def _split_train_val(data: SampleSet, seed) -> tuple[SampleSet, SampleSet]:
    rng = stream_rng(seed, STREAM_SPLIT)
    m = data.count
    perm = rng.permutation(m)
    n_val = max(1, m // 5)
    val, train = perm[:n_val], perm[n_val:]
    return (
        SampleSet(data.points[train], data.labels[train]),
        SampleSet(data.points[val], data.labels[val]),
    )


def fit_shrimp(
    features: FeatureSet,
    train: SampleSet,
    val: SampleSet | None = None,
    lam: float = 1e-6,
    schedule: PruneSchedule | None = None,
    seed: int = 0,
):
    """Iterative magnitude pruning with validation-based model selection.

    Returns ``(a, kept, val_mse)``: the full-length coefficient vector of
    the best model on the pruning path (zeros off its support), its
    boolean survivor mask, and its validation MSE.  Without an explicit
    validation set an 80/20 seeded split of ``train`` is used.
    """
    if train.labels is None:
        raise ValueError("training set needs labels")
    schedule = schedule or PruneSchedule()
    if val is None:
        train, val = _split_train_val(train, seed)
    a_train = assemble_matrix(features, train).values
    a_val = assemble_matrix(features, val).values
    n = features.n_total

    def solve(mask):
        coef = np.zeros(n, dtype=complex)
        coef[mask] = ridge_solve_restricted(a_train[:, mask], train.labels, lam)
        return coef

    mask = np.ones(n, dtype=bool)
    coef = solve(mask)
    path = []

    def record(mask, coef):
        resid = val.labels - (a_val @ coef).real
        path.append((mask.copy(), coef, float(np.mean(resid**2))))

    record(mask, coef)
    for _ in range(schedule.max_rounds):
        k = int(mask.sum())
        k_new = math.ceil(schedule.keep_fraction * k)
        if k_new >= k or k_new < schedule.min_survivors:
            break
        order = _argsort_by_magnitude(coef)
        keep_cols = [j for j in order if mask[j]][:k_new]
        mask = np.zeros(n, dtype=bool)
        mask[keep_cols] = True
        coef = solve(mask)
        record(mask, coef)

    best = min(range(len(path)), key=lambda i: path[i][2])
    mask, coef, val_mse = path[best]
    return CoefficientVector(coef, features), mask, val_mse


def _operator_norm_sq(mat: np.ndarray, iters: int = 20, seed: int = 0) -> float:
    """||A||_op^2 estimated by power iteration on A*A."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(mat.shape[1]) + 1j * rng.standard_normal(mat.shape[1])
    v /= np.linalg.norm(v)
    sigma = 1.0
    for _ in range(iters):
        w = mat.conj().T @ (mat @ v)
        sigma = np.linalg.norm(w)
        if sigma == 0.0:
            return 1.0
        v = w / sigma
    return float(sigma)


def fit_harfe(features: FeatureSet, train: SampleSet, cfg: HtpConfig):
    """Hard thresholding pursuit for the s-sparse random-feature ridge problem.

    Returns ``(a, support, stabilized)``: coefficients with at most s
    non-zeros, their support set, and whether the support stabilized; when
    it does not within ``max_iter`` iterations the best-residual iterate
    is returned with ``stabilized=False`` as the diagnostic.
    """
    if train.labels is None:
        raise ValueError("training set needs labels")
    n = features.n_total
    if cfg.sparsity > n:
        raise ValueError("sparsity exceeds the number of features")
    mat = assemble_matrix(features, train).values
    f = train.labels.astype(complex)
    eta = cfg.step if cfg.step is not None else 1.0 / _operator_norm_sq(mat)

    coef = np.zeros(n, dtype=complex)
    support_prev: tuple = ()
    best = (np.inf, coef, support_prev)
    stabilized = False
    for _ in range(cfg.max_iter):
        grad = mat.conj().T @ (f - mat @ coef) - cfg.ridge * coef
        shifted = coef + eta * grad
        support = tuple(sorted(_argsort_by_magnitude(shifted)[: cfg.sparsity].tolist()))
        coef = np.zeros(n, dtype=complex)
        cols = list(support)
        coef[cols] = ridge_solve_restricted(mat[:, cols], f, cfg.ridge)
        resid = float(np.linalg.norm(f - mat @ coef))
        if resid < best[0]:
            best = (resid, coef.copy(), support)
        if cfg.stop_on_support and support == support_prev:
            stabilized = True
            break
        support_prev = support
    if not stabilized:
        _, coef, support = best
    return CoefficientVector(coef, features), set(support), stabilized
