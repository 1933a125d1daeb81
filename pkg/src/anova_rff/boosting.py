"""ANOVA-boosting: find the important interaction terms of sampled data.

Two procedures, one per input-dependence regime:

* ``boost_independent`` starts from all order-q terms, fits a dual-form
  ridge model on ANOVA-truncated features, estimates each maximal term's
  pure-interaction variance by the Monte-Carlo ANOVA recursion, prunes
  terms below the threshold, and replaces them with the uncovered
  lower-order subsets, refining downward for q rounds.

* ``boost_dependent`` starts from all terms up to order q, fits the
  penalized least-squares model whose weight matrix pushes the blocks
  toward hierarchical orthogonality, prunes by the variance sensitivity
  index round by round (order q first, then q-1, ...), and finally makes
  the surviving family anti-downward-closed.

Both keep already drawn features across rounds (per-term streams make the
retained frequencies bit-identical) and are deterministic given the
sample set and configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import index_sets as isets
from .features import FeatureSet, assemble_matrix, draw_feature_set
from .index_sets import AnovaIndexSet
from .sampling import FeatureDensitySpec, SampleSet
from .sensitivity import mc_variance, sobol_indices_dependent
from .solvers import SolverOptions, build_penalty, penalized_solve, ridge_solve_dual


@dataclass
class BoostConfig:
    q: int = 2
    eps: float = 0.01
    n_features: int = 1000
    lam: float = 1e-6
    density: FeatureDensitySpec = field(default_factory=FeatureDensitySpec)
    seed: int = 0
    mode: str = "independent"  # or "dependent"
    refine_order: str = "descending"  # "pseudocode" replays the literal t-1 rule
    m_val: int | None = None  # evaluation subset for variance estimates
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.eps < 0:
            raise ValueError("threshold must be nonnegative")
        if self.n_features < 1:
            raise ValueError("feature budget must be positive")
        if self.mode not in ("independent", "dependent"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.refine_order not in ("descending", "pseudocode"):
            raise ValueError(f"unknown refine_order {self.refine_order!r}")


@dataclass
class RoundRecord:
    round: int
    candidates: AnovaIndexSet
    n_per_term: int
    estimates: dict  # term -> (s_var, s_cor or None); None when not estimated
    kept: set


@dataclass
class BoostTrace:
    rounds: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    final_features: FeatureSet | None = None

    def last_estimates(self) -> dict:
        """Each term's estimate from the last round in which it was estimated."""
        out = {}
        for rec in self.rounds:
            for u, est in rec.estimates.items():
                if est is not None:
                    out[u] = est
        return out

    def csv_rows(self) -> list[list]:
        rows = [["round", "u", "s_var", "s_cor", "kept"]]
        for rec in self.rounds:
            for u in sorted(rec.candidates.terms, key=lambda t: (len(t), t)):
                est = rec.estimates.get(u)
                s_var = "" if est is None else repr(est[0])
                s_cor = "" if est is None or est[1] is None else repr(est[1])
                rows.append(
                    [
                        rec.round,
                        ",".join(map(str, u)) if u else "-",
                        s_var,
                        s_cor,
                        int(u in rec.kept),
                    ]
                )
        return rows


def _eval_points(x: SampleSet, cfg: BoostConfig):
    if cfg.m_val is None or cfg.m_val >= x.count:
        return None  # evaluate on all sample points
    return x.points[: cfg.m_val]


def boost_independent(x: SampleSet, cfg: BoostConfig):
    """Find significant ANOVA terms for independent inputs.

    Returns ``(U, trace)``.  Stage I fits all order-q terms; each of the q
    refinement rounds prunes maximal terms whose normalized pure-term
    variance falls below the threshold and replaces them with the
    uncovered lower-order subsets, topping features up while keeping
    previous draws.
    """
    if cfg.mode != "independent":
        raise ValueError("config mode must be 'independent'")
    if x.labels is None:
        raise ValueError("sample set needs labels")
    if x.count < 2:
        raise ValueError("need at least two samples")
    d = x.dimension
    if cfg.q > d:
        raise ValueError("q exceeds the input dimension")
    denom = float(np.var(x.labels, ddof=1))
    trace = BoostTrace()
    if denom == 0.0:
        trace.warnings.append("labels are constant; returning the constant term only")
        return AnovaIndexSet(d, [()]), trace

    U = isets.all_subsets_of_order(d, cfg.q)
    features = draw_feature_set(U, cfg.n_features, cfg.density, None, cfg.seed)
    A = assemble_matrix(features, x)
    a = ridge_solve_dual(A, x.labels, cfg.lam)
    ev = _eval_points(x, cfg)

    for t in range(1, cfg.q + 1):
        maximal = isets.maximal_terms(U)
        estimates = {}
        kept = set()
        for u in U.terms:
            if u in maximal:
                s = mc_variance(features, a, x, u, denom, eval_points=ev)
                estimates[u] = (s, None)
                if s >= cfg.eps:
                    kept.add(u)
            else:
                estimates[u] = None
                kept.add(u)  # covered terms stay until their own order is refined
        rec = RoundRecord(t, U, cfg.n_features // len(U), estimates, kept)
        U = U.replace_terms(kept)
        k = cfg.q - t if cfg.refine_order == "descending" else t - 1
        U = U.replace_terms(U.terms | isets.uncovered_subsets(U, k).terms)
        trace.rounds.append(rec)
        features = draw_feature_set(U, cfg.n_features, cfg.density, features, cfg.seed)
        A = assemble_matrix(features, x)
        a = ridge_solve_dual(A, x.labels, cfg.lam)

    if set(U.terms) <= {()}:
        trace.warnings.append("all terms pruned; returning the constant term only")
        U = AnovaIndexSet(d, [()])
    trace.final_features = features
    return U, trace


def boost_dependent(x: SampleSet, cfg: BoostConfig):
    """Find significant ANOVA terms for possibly dependent inputs.

    Returns ``(U, trace)``.  Starts from all terms of order <= q; in round
    t (t = q down to 1) the penalized least-squares fit separates the
    blocks, and a term of order >= t survives only if its variance index
    exceeds the threshold.  The result is pruned to an anti-downward-closed
    family and features are topped up once more for downstream fitting.
    """
    if cfg.mode != "dependent":
        raise ValueError("config mode must be 'dependent'")
    if x.labels is None:
        raise ValueError("sample set needs labels")
    if x.count < 2:
        raise ValueError("need at least two samples")
    d = x.dimension
    if cfg.q > d:
        raise ValueError("q exceeds the input dimension")
    trace = BoostTrace()
    if float(np.var(x.labels, ddof=1)) == 0.0:
        trace.warnings.append("labels are constant; returning the constant term only")
        return AnovaIndexSet(d, [()]), trace

    U = isets.all_subsets_up_to_order(d, cfg.q)
    features = None
    for t in range(cfg.q, 0, -1):
        features = draw_feature_set(U, cfg.n_features, cfg.density, features, cfg.seed)
        A = assemble_matrix(features, x)
        penalty = build_penalty(A)
        a, _info = penalized_solve(A, x.labels, penalty, cfg.lam, cfg.solver)
        report = sobol_indices_dependent(A, a, x.labels, seed=cfg.seed)
        estimates = {
            u: (report.variance_indices[u], report.covariance_indices[u])
            for u in report.variance_indices
        }
        estimates[()] = None
        kept = {
            u
            for u in U.terms
            if len(u) < t or (u in report.variance_indices and report.variance_indices[u] > cfg.eps)
        }
        trace.rounds.append(RoundRecord(t, U, cfg.n_features // len(U), estimates, kept))
        U = U.replace_terms(kept)

    U = isets.prune_to_anti_downward_closed(U)
    if len(U) == 0 or set(U.terms) == {()}:
        trace.warnings.append("all terms pruned; returning the constant term only")
        U = AnovaIndexSet(d, [()])
    features = draw_feature_set(U, cfg.n_features, cfg.density, features, cfg.seed)
    trace.final_features = features
    return U, trace
