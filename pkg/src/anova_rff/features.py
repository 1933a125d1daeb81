"""ANOVA-truncated random Fourier features and the blocked feature matrix.

A feature set holds, for every interaction term u in an index set, a group
of frequency vectors supported exactly on u (all stored coordinates
non-zero).  The empty term holds the single constant feature.  Feature
matrices are complex and column-blocked by term, in the canonical term
ordering (cardinality, then members), so coefficient vectors serialize
stably.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .index_sets import AnovaIndexSet, Subset, normalize_subset
from .sampling import (
    STREAM_FEATURES,
    FeatureDensitySpec,
    sample_feature_frequencies,
    stream_seed,
)


def canonical_term_order(terms) -> list[Subset]:
    return sorted(terms, key=lambda u: (len(u), u))


@dataclass
class FeatureSet:
    """Frequency groups keyed by interaction term.

    groups maps a term u to an (n_u, |u|) float matrix of frequency values;
    the empty term maps to a (1, 0) matrix (one constant feature).
    """

    dimension: int
    groups: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for u, z in self.groups.items():
            u = normalize_subset(u, self.dimension)
            z = np.asarray(z, dtype=float)
            if not u:
                z = np.zeros((z.shape[0] if z.ndim == 2 else 1, 0))
            else:
                z = z.reshape(-1, len(u))
                if np.any(z == 0.0):
                    raise ValueError(f"group {u} contains a zero coordinate; support must be exact")
            clean[u] = z
        self.groups = {u: clean[u] for u in canonical_term_order(clean)}

    @property
    def terms(self) -> list[Subset]:
        return list(self.groups)

    @property
    def n_total(self) -> int:
        return sum(z.shape[0] for z in self.groups.values())

    def group_sizes(self) -> dict:
        return {u: z.shape[0] for u, z in self.groups.items()}

    def block_slices(self) -> dict:
        """Column ranges of each group in the assembled matrix."""
        out, start = {}, 0
        for u, z in self.groups.items():
            out[u] = slice(start, start + z.shape[0])
            start += z.shape[0]
        return out

    def index_set(self) -> AnovaIndexSet:
        return AnovaIndexSet(self.dimension, self.groups)

    def full_frequencies(self) -> np.ndarray:
        """All features as dense (N, d) rows with zeros off the support."""
        out = np.zeros((self.n_total, self.dimension))
        for u, sl in self.block_slices().items():
            if u:
                out[sl, [i - 1 for i in u]] = self.groups[u]
        return out

    # --- serialization ------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "dimension": self.dimension,
            "groups": [
                {"u": list(u), "omegas": z.tolist()} for u, z in self.groups.items()
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "FeatureSet":
        payload = json.loads(text)
        groups = {
            tuple(g["u"]): np.asarray(g["omegas"], dtype=float).reshape(-1, len(g["u"]))
            for g in payload["groups"]
        }
        return cls(payload["dimension"], groups)


@dataclass
class FeatureMatrix:
    """Complex M x N matrix with entries e^{i <omega_u, x_u>}, blocked by term."""

    values: np.ndarray
    feature_set: FeatureSet

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[1] != self.feature_set.n_total:
            raise ValueError("column count does not match the feature set")

    @property
    def shape(self):
        return self.values.shape

    def block(self, u) -> np.ndarray:
        sl = self.feature_set.block_slices()[normalize_subset(u)]
        return self.values[:, sl]


@dataclass
class CoefficientVector:
    """Complex length-N coefficients blocked like their feature set."""

    values: np.ndarray
    feature_set: FeatureSet

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)
        if self.values.shape[0] != self.feature_set.n_total:
            raise ValueError("coefficient length does not match the feature set")

    def block(self, u) -> np.ndarray:
        sl = self.feature_set.block_slices()[normalize_subset(u)]
        return self.values[sl]

    def to_json(self) -> str:
        slices = self.feature_set.block_slices()
        payload = [
            {
                "u": list(u),
                "re": self.values[sl].real.tolist(),
                "im": self.values[sl].imag.tolist(),
            }
            for u, sl in slices.items()
        ]
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str, feature_set: FeatureSet) -> "CoefficientVector":
        blocks = {tuple(b["u"]): np.asarray(b["re"]) + 1j * np.asarray(b["im"]) for b in json.loads(text)}
        vals = np.concatenate([blocks[u] for u in feature_set.terms]) if blocks else np.zeros(0)
        return cls(vals, feature_set)


def _group_rng(seed, u: Subset) -> np.random.Generator:
    # one stream per (seed, term): longer draws reproduce shorter ones as a prefix
    return np.random.default_rng(stream_seed(seed, STREAM_FEATURES, len(u), *u))


def _draw_group(rng, density, k: int, n: int) -> np.ndarray:
    z = sample_feature_frequencies(density, k, n, rng)
    # exact zeros would break the support condition; redraw those rows
    # (probability zero for the continuous densities used here)
    while np.any(z == 0.0):
        bad = np.any(z == 0.0, axis=1)
        z[bad] = sample_feature_frequencies(density, k, int(bad.sum()), rng)
    return z


def draw_feature_set(
    U: AnovaIndexSet,
    n_total: int,
    density: FeatureDensitySpec,
    existing: FeatureSet | None = None,
    seed=0,
) -> FeatureSet:
    """Draw floor(n_total / |U|) features per term, keeping existing draws.

    Every non-empty term receives exactly n = floor(n_total/|U|) frequency
    vectors from the density restricted to |u| coordinates; the empty term
    holds the single constant feature.  Features already present in
    ``existing`` for surviving terms are retained (same seed regenerates
    them as the prefix of the term's stream) and only topped up; if a term
    shrank below target the earliest draws are kept.
    """
    if len(U) == 0:
        raise ValueError("index set is empty")
    n = n_total // len(U)
    if n < 1:
        raise ValueError(f"budget {n_total} below one feature per term (|U|={len(U)})")
    groups = {}
    for u in canonical_term_order(U.terms):
        if not u:
            groups[u] = np.zeros((1, 0))
            continue
        have = None
        if existing is not None and u in existing.groups:
            have = existing.groups[u]
        if have is not None and have.shape[0] >= n:
            groups[u] = have[:n]
        else:
            k_have = 0 if have is None else have.shape[0]
            z = _draw_group(_group_rng(seed, u), density, len(u), n)
            groups[u] = z if have is None else np.vstack([have, z[k_have:]])
    return FeatureSet(U.dimension, groups)


def assemble_matrix(features: FeatureSet, x) -> FeatureMatrix:
    """Evaluate all features at the sample points: entry (j, k) = e^{i <omega_k, x^{(j)}>}."""
    pts = np.asarray(getattr(x, "points", x), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != features.dimension:
        raise ValueError(
            f"points must be (M, {features.dimension}), got {pts.shape}"
        )
    cols = []
    for u, z in features.groups.items():
        phase = pts[:, [i - 1 for i in u]] @ z.T  # (M, n_u); (M, 0)@(0, 1) -> zeros for u = ()
        cols.append(np.exp(1j * phase))
    return FeatureMatrix(np.hstack(cols), features)


def predict(features: FeatureSet, a: CoefficientVector, x) -> np.ndarray:
    """Real part of the feature expansion at the given points."""
    if a.feature_set.group_sizes() != features.group_sizes():
        raise ValueError("coefficient blocks do not match the feature set")
    return (assemble_matrix(features, x).values @ a.values).real
