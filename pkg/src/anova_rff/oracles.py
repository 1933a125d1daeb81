"""Ground-truth machinery for validating the estimators.

Everything here is deliberately independent of the production code paths:
exact quadrature for the 2-d tensor-product fixture, nested Monte-Carlo
Sobol shares for product measures, and a literal nested-loop evaluation of
the Monte-Carlo ANOVA term formula at tiny scale.  Oracle values are
computed and frozen before the estimators they check are tuned.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .index_sets import normalize_subset
from .sampling import (
    STANDARD_NORMAL,
    STREAM_ORACLE,
    TEST_FUNCTIONS,
    evaluate_test_function,
    marginal_ppf,
    stream_rng,
    tensor2d_factor1,
    tensor2d_factor2,
)

_QUAD_TOL = 1e-10


@dataclass
class TensorFixture:
    """A 2-d tensor-product function g1(x1) g2(x2) with a marginal choice.

    ``breakpoints`` list the factors' kink locations so the quadrature can
    split there.
    """

    g1: callable = tensor2d_factor1
    g2: callable = tensor2d_factor2
    marginal: tuple = STANDARD_NORMAL
    breakpoints1: tuple = (0.0,)
    breakpoints2: tuple = (-1.0, 0.0, 1.0)


@dataclass
class Tensor2Anova:
    """Exact ANOVA decomposition of a 2-d tensor-product fixture."""

    f_empty: float
    g1_mean: float
    g2_mean: float
    fixture: TensorFixture

    def f1(self, x1):
        return (self.fixture.g1(x1) - self.g1_mean) * self.g2_mean

    def f2(self, x2):
        return (self.fixture.g2(x2) - self.g2_mean) * self.g1_mean

    def f12(self, x1, x2):
        return (self.fixture.g1(x1) - self.g1_mean) * (self.fixture.g2(x2) - self.g2_mean)


def _marginal_mean(g, marginal, breakpoints):
    """One-dimensional mean of g under the marginal, split at the kinks."""
    if marginal[0] == "standard-normal":
        dens = lambda x: np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        lo, hi = -np.inf, np.inf
    elif marginal[0] == "uniform":
        _, a, b = marginal
        dens = lambda x: 1.0 / (b - a)
        lo, hi = a, b
    else:
        raise ValueError(f"unknown marginal {marginal!r}")
    cuts = sorted({lo, hi} | {p for p in breakpoints if lo < p < hi})
    total, err = 0.0, 0.0
    for left, right in zip(cuts[:-1], cuts[1:]):
        val, abserr = integrate.quad(
            lambda x: g(x) * dens(x), left, right, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200
        )
        total += val
        err += abserr
    if err > 1e-8:
        raise ArithmeticError(f"quadrature error {err:.2e} above tolerance")
    return total


def exact_anova_tensor2(fixture: TensorFixture | None = None) -> Tensor2Anova:
    """Constants and ANOVA terms of the 2-d tensor fixture by quadrature."""
    fixture = fixture or TensorFixture()
    g1_mean = _marginal_mean(fixture.g1, fixture.marginal, fixture.breakpoints1)
    g2_mean = _marginal_mean(fixture.g2, fixture.marginal, fixture.breakpoints2)
    return Tensor2Anova(g1_mean * g2_mean, g1_mean, g2_mean, fixture)


# active variables of each named benchmark (terms beyond these are inert)
ACTIVE_DIMS = {"fT1": 4, "fT2": 3, "fT3": 5, "friedmann9": 5, "tensor2d": 2}


def oracle_sobol_independent(
    fn,
    marginal=STANDARD_NORMAL,
    m_outer: int = 200_000,
    m_inner: int = 2_000,
    seed: int = 0,
    terms=None,
    dimension: int | None = None,
):
    """Brute-force Sobol variance shares for a product sampling measure.

    Conditional means are nested Monte-Carlo averages over a common inner
    sample; the ANOVA recursion is applied at the outer points.  Returns
    ``(shares, meta)`` where shares maps each requested term to
    ``(share, stderr)`` and meta carries the mean and total-variance
    estimates.  Only product (independent) marginals are supported.
    """
    if callable(fn):
        if dimension is None:
            raise ValueError("callable oracle targets need an explicit dimension")
        func, d = fn, dimension
    else:
        if fn not in TEST_FUNCTIONS:
            raise ValueError(f"unknown test function {fn!r}")
        d = dimension or TEST_FUNCTIONS[fn][0]
        func = lambda x: evaluate_test_function(fn, x)
    if terms is None:
        act = ACTIVE_DIMS.get(fn, d) if isinstance(fn, str) else d
        terms = [(i,) for i in range(1, act + 1)] + [
            (i, j) for i in range(1, act + 1) for j in range(i + 1, act + 1)
        ]
    terms = [normalize_subset(u, d) for u in terms]
    if any(len(u) == 0 for u in terms):
        raise ValueError("request non-empty terms; the mean is reported in meta")

    rng = stream_rng(seed, STREAM_ORACLE)

    def draw(n):
        return marginal_ppf(marginal, rng.random((n, d)))

    x_outer = draw(m_outer)
    x_inner = draw(m_inner)
    f_outer = func(x_outer)
    f_empty = float(np.mean(f_outer))
    variance = float(np.var(f_outer, ddof=1))

    def conditional_mean(u):
        cols = [i - 1 for i in u]
        out = np.empty(m_outer)
        chunk = max(1, 2_000_000 // m_inner)
        for start in range(0, m_outer, chunk):
            stop = min(start + chunk, m_outer)
            block = np.broadcast_to(x_inner, (stop - start, m_inner, d)).copy()
            block[:, :, cols] = x_outer[start:stop, None, cols]
            vals = func(block.reshape(-1, d)).reshape(stop - start, m_inner)
            out[start:stop] = vals.mean(axis=1)
        return out

    term_values = {}

    def anova_values(u):
        if u in term_values:
            return term_values[u]
        vals = conditional_mean(u) - f_empty
        for r in range(1, len(u)):
            for v in itertools.combinations(u, r):
                vals = vals - anova_values(v)
        term_values[u] = vals
        return vals

    shares = {}
    for u in sorted(terms, key=lambda t: (len(t), t)):
        vals = anova_values(u)
        sq = vals**2
        shares[u] = (
            float(np.mean(sq) / variance),
            float(np.std(sq) / np.sqrt(m_outer) / variance),
        )
    meta = {"mean": f_empty, "variance": variance, "m_outer": m_outer, "m_inner": m_inner}
    return shares, meta


def brute_force_mc_terms(omegas, u, a_u, points, v, eval_points) -> np.ndarray:
    """Literal nested-loop Monte-Carlo ANOVA term at tiny scale.

    Explicit loops over evaluation points, features and samples; used as
    the independent cross-check for the vectorized estimator.  Caps:
    M <= 10 samples, 10 features, |u| <= 3.
    """
    u = normalize_subset(u)
    v = normalize_subset(v)
    if not set(v) <= set(u):
        raise ValueError(f"v={v} is not a subset of u={u}")
    pts = np.asarray(getattr(points, "points", points), dtype=float)
    ev = np.atleast_2d(np.asarray(getattr(eval_points, "points", eval_points), dtype=float))
    a_u = np.asarray(a_u, dtype=complex).reshape(-1)
    omegas = np.asarray(omegas, dtype=float).reshape(len(a_u), len(u))
    if pts.shape[0] > 10 or len(a_u) > 10 or len(u) > 3:
        raise ValueError("brute-force oracle is capped at M <= 10, N <= 10, |u| <= 3")

    pos = {i: p for p, i in enumerate(u)}
    rest = [i for i in u if i not in v]
    out = np.zeros(ev.shape[0], dtype=complex)
    for m, xe in enumerate(ev):
        total = 0.0 + 0.0j
        for k in range(len(a_u)):
            om = omegas[k]
            acc = 0.0 + 0.0j
            for xj in pts:
                phase = np.exp(1j * sum(om[pos[i]] * xj[i - 1] for i in rest))
                prod = 1.0 + 0.0j
                for i in v:
                    prod *= np.exp(1j * xe[i - 1] * om[pos[i]]) - np.exp(1j * xj[i - 1] * om[pos[i]])
                acc += phase * prod
            total += a_u[k] * acc
        out[m] = total / pts.shape[0]
    return out
