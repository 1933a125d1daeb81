"""Input sampling, feature-frequency densities, and benchmark test functions.

All randomness flows from one master seed through named streams, so data
draws, test draws, feature draws, splits and noise are independent and
individually reproducible.  Stream derivation uses ``numpy``'s
``SeedSequence`` spawn keys; drawing a longer prefix from the same stream
reproduces the shorter prefix bit for bit, which is what the boosting
algorithms rely on to keep already drawn features.

Conventions
-----------
* Variable indices are 1-based at every interface; arrays are row-major
  with one sample per row.
* A density "scale" sigma multiplies a unit-scale draw: Gaussian draws
  have per-coordinate variance sigma^2, Cauchy draws have half-width
  sigma, and the Sobolev-tensor density with smoothness s is the scaled
  Student-t with 2s-1 degrees of freedom.
* Archimedean copulas are sampled exactly by the frailty construction:
  draw a positive latent V from the generator's Laplace-transform law,
  then U_i = psi(E_i / V) with E_i ~ Exp(1) i.i.d.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

# named stream ids under the master seed
STREAM_DATA = 1
STREAM_TEST = 2
STREAM_FEATURES = 3
STREAM_SPLIT = 4
STREAM_NOISE = 5
STREAM_ORACLE = 6
STREAM_REPEAT = 7


def stream_seed(master_seed, stream_id, *extra) -> np.random.SeedSequence:
    """Child seed sequence for a named stream under one master seed."""
    key = (int(stream_id),) + tuple(int(e) for e in extra)
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def stream_rng(master_seed, stream_id, *extra) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master_seed, stream_id, *extra))


# ---------------------------------------------------------------------------
# sample sets


@dataclass
class SampleSet:
    """Scattered samples: an (M, d) point matrix plus optional labels."""

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be an (M, d) matrix")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points contain non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=float)
            if self.labels.shape != (self.points.shape[0],):
                raise ValueError("labels length must equal the number of rows")
            if not np.all(np.isfinite(self.labels)):
                raise ValueError("labels contain non-finite entries")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def with_labels(self, labels) -> "SampleSet":
        return SampleSet(self.points, labels)


# ---------------------------------------------------------------------------
# distribution specifications


@dataclass
class FeatureDensitySpec:
    """Feature-frequency density: gaussian, cauchy, or sobolev-tensor."""

    kind: str = "gaussian"
    scale: float = 1.0
    smoothness: float | None = None  # sobolev-tensor only, s > 1/2

    def __post_init__(self):
        if self.kind not in ("gaussian", "cauchy", "sobolev-tensor"):
            raise ValueError(f"unknown feature density kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "sobolev-tensor":
            if self.smoothness is None or not self.smoothness > 0.5:
                raise ValueError("sobolev-tensor needs smoothness s > 1/2")


# marginal specs: ("standard-normal",) or ("uniform", a, b)
STANDARD_NORMAL = ("standard-normal",)


def uniform_marginal(a: float, b: float):
    if not b > a:
        raise ValueError("uniform marginal needs b > a")
    return ("uniform", float(a), float(b))


def marginal_ppf(marginal, u):
    """Map uniform(0,1) draws through a marginal's inverse CDF."""
    if marginal[0] == "standard-normal":
        return stats.norm.ppf(u)
    if marginal[0] == "uniform":
        _, a, b = marginal
        return a + (b - a) * u
    raise ValueError(f"unknown marginal {marginal!r}")


COPULA_FAMILIES = ("clayton", "gumbel", "frank")


@dataclass
class DataDistributionSpec:
    """Input distribution: gaussian-cov, copula, or uniform-box."""

    kind: str
    dimension: int
    covariance: np.ndarray | None = None
    copula_family: str | None = None
    theta: float | None = None
    marginals: list = field(default_factory=list)  # per-coordinate marginal specs
    bounds: tuple[float, float] = (0.0, 1.0)  # uniform-box

    def __post_init__(self):
        d = self.dimension
        if d < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "gaussian-cov":
            if self.covariance is None:
                self.covariance = np.eye(d)
            self.covariance = np.asarray(self.covariance, dtype=float)
            if self.covariance.shape != (d, d):
                raise ValueError("covariance must be d x d")
            if not np.allclose(self.covariance, self.covariance.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
        elif self.kind == "copula":
            if self.copula_family not in COPULA_FAMILIES:
                raise ValueError(f"unknown copula family {self.copula_family!r}")
            th = self.theta
            if th is None:
                raise ValueError("copula needs a parameter theta")
            if self.copula_family == "clayton" and not th > 0:
                raise ValueError("Clayton needs theta > 0")
            if self.copula_family == "gumbel" and not th >= 1:
                raise ValueError("Gumbel needs theta >= 1")
            if self.copula_family == "frank" and not th > 0:
                raise ValueError("Frank needs theta > 0")
            if not self.marginals:
                self.marginals = [STANDARD_NORMAL] * d
            if len(self.marginals) != d:
                raise ValueError("need one marginal per coordinate")
        elif self.kind == "uniform-box":
            a, b = self.bounds
            if not b > a:
                raise ValueError("uniform-box needs bounds with b > a")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")


def covariance_model(name: str, d: int) -> np.ndarray:
    """Named covariance models: identity, equally correlated, mixed correlated."""
    if name == "id":
        return np.eye(d)
    if name == "equi":
        return 0.8 * np.eye(d) + 0.2 * np.ones((d, d))
    if name == "mixed":
        if d % 3 != 0:
            raise ValueError("mixed covariance needs d divisible by 3")
        block = np.array(
            [
                [1.0, -0.2, 0.4],
                [-0.2, 1.0, -0.8],
                [0.4, -0.8, 1.0],
            ]
        )
        return np.kron(np.eye(d // 3), block)
    raise ValueError(f"unknown covariance model {name!r}")


# ---------------------------------------------------------------------------
# samplers


def _stable_positive(rng, alpha, size):
    """Positive stable draw with Laplace transform exp(-s^alpha).

    Chambers-Mallows-Stuck with beta = 1 in the one-sided parameterization.
    """
    w = rng.uniform(0.0, np.pi, size=size)
    e = rng.standard_exponential(size=size)
    a = np.sin((1.0 - alpha) * w) * np.sin(alpha * w) ** (alpha / (1.0 - alpha))
    b = np.sin(w) ** (1.0 / (1.0 - alpha))
    return (a / b) ** ((1.0 - alpha) / alpha) / e ** ((1.0 - alpha) / alpha)


def _copula_uniforms(rng, family, theta, m, d):
    """Exact Archimedean sample on (0,1)^d via the frailty construction."""
    e = rng.standard_exponential(size=(m, d))
    if family == "clayton":
        v = rng.gamma(shape=1.0 / theta, scale=1.0, size=m)
        u = (1.0 + e / v[:, None]) ** (-1.0 / theta)
    elif family == "gumbel":
        if theta == 1.0:
            u = np.exp(-e)  # independence copula
        else:
            v = _stable_positive(rng, 1.0 / theta, m)
            u = np.exp(-((e / v[:, None]) ** (1.0 / theta)))
    elif family == "frank":
        p = -np.expm1(-theta)  # 1 - exp(-theta)
        v = rng.logseries(p, size=m).astype(float)
        u = -np.log1p(np.exp(-e / v[:, None]) * (np.exp(-theta) - 1.0)) / theta
    else:
        raise ValueError(f"unknown copula family {family!r}")
    # keep strictly inside (0,1) so inverse CDFs stay finite
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, 1.0 - 1e-16)


def sample_data(spec: DataDistributionSpec, m: int, seed) -> SampleSet:
    """Draw M i.i.d. input points from the specified distribution (no labels).

    Deterministic given (spec, m, seed); seed may be an integer master seed
    (the data stream is derived from it) or a ``SeedSequence``/``Generator``.
    """
    if m < 1:
        raise ValueError("need at least one sample")
    if isinstance(seed, np.random.Generator):
        rng = seed
    elif isinstance(seed, np.random.SeedSequence):
        rng = np.random.default_rng(seed)
    else:
        rng = stream_rng(seed, STREAM_DATA)
    d = spec.dimension
    if spec.kind == "gaussian-cov":
        chol = np.linalg.cholesky(spec.covariance)  # raises LinAlgError if not PD
        z = rng.standard_normal((m, d))
        x = z @ chol.T
    elif spec.kind == "uniform-box":
        a, b = spec.bounds
        x = a + (b - a) * rng.random((m, d))
    else:  # copula
        u = _copula_uniforms(rng, spec.copula_family, spec.theta, m, d)
        x = np.column_stack(
            [marginal_ppf(spec.marginals[i], u[:, i]) for i in range(d)]
        )
    return SampleSet(x)


def cholesky_factor(spec: DataDistributionSpec) -> np.ndarray:
    """The lower-triangular factor used by the gaussian-cov sampler."""
    if spec.kind != "gaussian-cov":
        raise ValueError("cholesky_factor applies to gaussian-cov specs")
    return np.linalg.cholesky(spec.covariance)


def sample_feature_frequencies(density: FeatureDensitySpec, k: int, n: int, seed) -> np.ndarray:
    """Draw an (n, k) matrix of i.i.d. frequencies from the 1-d density's k-fold product."""
    if n < 1:
        raise ValueError("need at least one frequency")
    if k < 1:
        raise ValueError("support dimension must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if density.kind == "gaussian":
        return density.scale * rng.standard_normal((n, k))
    if density.kind == "cauchy":
        return density.scale * rng.standard_cauchy((n, k))
    # sobolev-tensor: scaled Student-t with nu = 2s - 1 degrees of freedom
    nu = 2.0 * density.smoothness - 1.0
    return density.scale / np.sqrt(nu) * rng.standard_t(nu, (n, k))


# ---------------------------------------------------------------------------
# benchmark test functions


def _ft1(x):
    return x[:, 3] ** 2 + x[:, 1] * x[:, 2] + x[:, 0] * x[:, 1] + x[:, 3]


def _ft2(x):
    return np.sin(x[:, 0]) + 7.0 * np.sin(x[:, 1]) ** 2 + 0.1 * x[:, 2] ** 4 * np.sin(x[:, 0])


def _ft3(x):
    return (
        10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
    )


def _friedmann9(x):
    # 9-d modified Friedmann; coefficients rescaled for comparable term
    # variances under standard Gaussian inputs (term variances ~ 69/75/100/25).
    return (
        30.0 * np.sin(0.1 * np.pi * x[:, 0] * x[:, 1])
        + 5.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
    )


def tensor2d_factor1(x):
    """|x| / (1+x^2)^2, the kinked first factor of the 2-d tensor example."""
    x = np.asarray(x, dtype=float)
    return np.abs(x) / (1.0 + x**2) ** 2


def tensor2d_factor2(x):
    """max(1-|x|, 0), the hat-function second factor."""
    x = np.asarray(x, dtype=float)
    return np.maximum(1.0 - np.abs(x), 0.0)


def _tensor2d(x):
    return tensor2d_factor1(x[:, 0]) * tensor2d_factor2(x[:, 1])


TEST_FUNCTIONS = {
    "fT1": (4, _ft1),
    "fT2": (3, _ft2),
    "fT3": (5, _ft3),
    "friedmann9": (9, _friedmann9),
    "tensor2d": (2, _tensor2d),
}


def evaluate_test_function(name: str, x) -> np.ndarray:
    """Pointwise labels of a named benchmark; coordinates beyond the active ones are inert."""
    if name not in TEST_FUNCTIONS:
        raise ValueError(f"unknown test function {name!r}; known: {sorted(TEST_FUNCTIONS)}")
    min_dim, fn = TEST_FUNCTIONS[name]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] < min_dim:
        raise ValueError(f"{name} needs dimension >= {min_dim}, got {x.shape[1]}")
    return fn(x)


def label_samples(samples: SampleSet, fn_name: str, noise_sigma: float = 0.0, seed=None) -> SampleSet:
    """Attach (optionally noisy) test-function labels to a sample set."""
    y = evaluate_test_function(fn_name, samples.points)
    if noise_sigma > 0.0:
        if seed is None:
            raise ValueError("noise requires a seed")
        rng = (
            seed
            if isinstance(seed, np.random.Generator)
            else stream_rng(seed, STREAM_NOISE)
        )
        y = y + noise_sigma * rng.standard_normal(y.shape)
    return samples.with_labels(y)


# ---------------------------------------------------------------------------
# CSV dataset format: header x1,...,xd,y; '#' lines carry metadata


def write_samples_csv(path_or_file, samples: SampleSet, header_comments=()):
    """Write a labeled sample set with IEEE-754 round-trip formatting."""
    if samples.labels is None:
        raise ValueError("sample set has no labels")

    def _write(fh):
        for line in header_comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        d = samples.dimension
        writer.writerow([f"x{i}" for i in range(1, d + 1)] + ["y"])
        for row, y in zip(samples.points, samples.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])

    if isinstance(path_or_file, io.TextIOBase):
        _write(path_or_file)
    else:
        with open(path_or_file, "w") as fh:
            _write(fh)


def read_samples_csv(path_or_file) -> SampleSet:
    """Read a dataset written by :func:`write_samples_csv` ('#' lines skipped)."""

    def _read(fh):
        rows = [line for line in fh if not line.startswith("#")]
        reader = csv.reader(rows)
        header = next(reader)
        if not header or header[-1] != "y":
            raise ValueError("dataset header must end with 'y'")
        data = np.array([[float(v) for v in row] for row in reader])
        if data.size == 0:
            raise ValueError("dataset has no rows")
        return SampleSet(data[:, :-1], data[:, -1])

    if isinstance(path_or_file, io.TextIOBase):
        return _read(path_or_file)
    with open(path_or_file) as fh:
        return _read(fh)
