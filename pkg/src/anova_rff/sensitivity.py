"""Monte-Carlo ANOVA term evaluation and sensitivity indices.

Two estimator families:

* independent inputs: the sampling measure is a product, so every integral
  in the recursive ANOVA definition can be replaced by a Monte-Carlo sum
  over the sample points.  For a feature block supported on u this gives,
  for every v contained in u,

      g_v(x_v) = (1/M) sum_omega a_omega sum_j
                 e^{i <x^(j)_{u\\v}, omega_{u\\v}>}
                 prod_{i in v} (e^{i x_i omega_i} - e^{i x^(j)_i omega_i}),

  and the pure-u variance (1/M) sum_x |g_u(x_u)|^2 is the pruning signal.
  The product over v is expanded exactly into per-subset Monte-Carlo sums
  S_z(omega) = sum_j prod_{i in z} e^{i x^(j)_i omega_i}, which are shared
  across evaluation points; the result is identical to the nested-loop
  evaluation (it is the same finite sum) at a fraction of the cost.

* possibly dependent inputs: variance and covariance indices are read off
  the fitted block predictions,  S_var = mean|A_u a_u|^2 / var(f)  and
  S_cor = sum over overlapping, non-nested terms of the real part of the
  mean cross product, normalized the same way.  Norms are mean-of-squares
  so numerator and denominator are per-sample quantities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .features import CoefficientVector, FeatureMatrix, FeatureSet
from .index_sets import Subset, normalize_subset


def mc_anova_term(omegas, u, a_u, points, v, eval_points) -> np.ndarray:
    """Monte-Carlo ANOVA term of a feature block, evaluated at given points.

    Parameters
    ----------
    omegas : (n_u, |u|) frequencies of the block supported on u
    u, v : variable subsets (1-based), v must be contained in u
    a_u : (n_u,) complex block coefficients
    points : (M, d) sample matrix defining the Monte-Carlo measure
    eval_points : (m, d) points at which to evaluate the term

    Returns the complex (m,) vector of term values.
    """
    u = normalize_subset(u)
    v = normalize_subset(v)
    if not set(v) <= set(u):
        raise ValueError(f"v={v} is not a subset of u={u}")
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    ev = np.atleast_2d(np.asarray(getattr(eval_points, "points", eval_points), dtype=float))
    a_u = np.asarray(a_u, dtype=complex).reshape(-1)
    omegas = np.asarray(omegas, dtype=float).reshape(len(a_u), len(u))
    m_samp = pts.shape[0]
    if m_samp < 1:
        raise ValueError("need at least one sample point")

    cols = [i - 1 for i in u]
    pos_of = {i: p for p, i in enumerate(u)}
    # per-coordinate exponentials at the sample points: (M, n_u, |u|)
    c = np.exp(1j * pts[:, cols][:, :, None] * omegas.T[None, :, :]).transpose(0, 2, 1)
    # subset Monte-Carlo sums S_z = sum_j prod_{i in z} c_jki, shape (n_u,)
    s_sums = {}
    for r in range(len(u) + 1):
        for z in itertools.combinations(u, r):
            if z:
                s_sums[z] = np.prod(c[:, :, [pos_of[i] for i in z]], axis=2).sum(axis=0)
            else:
                s_sums[z] = np.full(len(a_u), float(m_samp), dtype=complex)

    if v:
        b = np.exp(1j * ev[:, [i - 1 for i in v]][:, :, None] * omegas[:, [pos_of[i] for i in v]].T[None, :, :])
        b = b.transpose(0, 2, 1)  # (m, n_u, |v|)
    acc = np.zeros((ev.shape[0], len(a_u)), dtype=complex)
    vpos = {i: p for p, i in enumerate(v)}
    for r in range(len(v) + 1):
        for w in itertools.combinations(v, r):
            sign = (-1.0) ** (len(v) - len(w))
            rest = tuple(i for i in u if i not in w)
            coef = sign * s_sums[rest]
            if w:
                acc += np.prod(b[:, :, [vpos[i] for i in w]], axis=2) * coef[None, :]
            else:
                acc += np.broadcast_to(coef[None, :], acc.shape)
    return (acc @ a_u) / m_samp


def mc_variance(
    features: FeatureSet,
    a: CoefficientVector,
    samples,
    u,
    denom: float,
    eval_points=None,
) -> float:
    """Normalized Monte-Carlo variance of the pure-u term of block u.

    Returns (1/m) sum_x |g_u(x_u)|^2 / denom over the evaluation points
    (the sample points by default; a validation subset caps the cost).
    ``denom`` is the label-variance estimate.  A term without features
    contributes zero.
    """
    pts = np.asarray(getattr(samples, "points", samples), dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("variance needs at least two samples")
    u = normalize_subset(u)
    if u not in features.groups:
        return 0.0
    ev = pts if eval_points is None else np.asarray(
        getattr(eval_points, "points", eval_points), dtype=float
    )
    g = mc_anova_term(features.groups[u], u, a.block(u), pts, u, ev)
    return float(np.mean(np.abs(g) ** 2) / denom)


@dataclass
class SensitivityReport:
    """Per-term sensitivity estimates for the non-empty terms of a model."""

    variance_indices: dict
    covariance_indices: dict
    label_variance: float
    sample_count: int
    feature_count: int
    seed: int | None = None

    def terms(self) -> list[Subset]:
        return sorted(self.variance_indices, key=lambda u: (len(u), u))

    def total(self, u) -> float:
        u = normalize_subset(u)
        return self.variance_indices[u] + self.covariance_indices.get(u, 0.0)

    def variance_sum(self) -> float:
        return float(sum(self.variance_indices.values()))

    def normalized_variance(self) -> dict:
        """Variance indices rescaled to sum to one (pie-chart normalization)."""
        s = self.variance_sum()
        if s == 0.0:
            return {u: 0.0 for u in self.variance_indices}
        return {u: val / s for u, val in self.variance_indices.items()}

    def csv_rows(self) -> list[list]:
        norm = self.normalized_variance()
        rows = [["u", "s_var", "s_cor", "s_total", "normalized_s_var"]]
        for u in self.terms():
            rows.append(
                [
                    ",".join(map(str, u)) if u else "-",
                    repr(self.variance_indices[u]),
                    repr(self.covariance_indices.get(u, 0.0)),
                    repr(self.total(u)),
                    repr(norm[u]),
                ]
            )
        return rows


def sobol_indices_dependent(A: FeatureMatrix, a: CoefficientVector, labels, seed=None) -> SensitivityReport:
    """Variance/covariance sensitivity indices of a fitted blocked model.

    The covariance index of u sums real-part cross products with every
    other non-empty term that overlaps u without being contained in it;
    for independent inputs these should be near zero.  The constant term
    carries no variance and is excluded from the report.
    """
    f = np.asarray(labels, dtype=float)
    m = f.shape[0]
    if m < 2:
        raise ValueError("need at least two samples")
    denom = float(np.var(f, ddof=1))
    if denom == 0.0:
        raise ValueError("labels have zero variance; indices undefined")
    fs = A.feature_set
    terms = [u for u in fs.terms if u]
    preds = {u: A.block(u) @ a.block(u) for u in terms}
    s_var = {u: float(np.mean(np.abs(p) ** 2)) / denom for u, p in preds.items()}
    s_cor = {}
    for u in terms:
        acc = 0.0
        for v in terms:
            if v == u or not (set(v) & set(u)) or set(v) <= set(u):
                continue
            acc += float(np.real(np.vdot(preds[u], preds[v]))) / m
        s_cor[u] = acc / denom
    return SensitivityReport(
        variance_indices=s_var,
        covariance_indices=s_cor,
        label_variance=denom,
        sample_count=m,
        feature_count=fs.n_total,
        seed=seed,
    )
