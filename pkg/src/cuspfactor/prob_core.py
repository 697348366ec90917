"""Probability kernels and small linear-algebra helpers used by the samplers.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here touches
global random state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import (
    DegenerateDistributionError,
    NumericalError,
    ParameterDomainError,
    ShapeError,
)

RngStream = np.random.Generator

LOG_2PI = float(np.log(2.0 * np.pi))

# Diagonal jitter schedule, relative to the largest diagonal entry.
JITTER_START = 1e-10
JITTER_MAX = 1e-6


def make_rng(seed: int, *key: int) -> RngStream:
    """Return a PCG64 stream for ``seed``, optionally split by an integer key.

    Streams with distinct keys come from ``SeedSequence`` spawning and are
    statistically independent; the same ``(seed, *key)`` always yields the same
    sequence.
    """
    if seed < 0 or seed >= 2**64:
        raise ParameterDomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class IsoGaussianSpec:
    p: int
    theta: float

    def __post_init__(self):
        if self.p < 1:
            raise ParameterDomainError("dimension must be positive")
        if not self.theta > 0:
            raise ParameterDomainError(f"variance must be positive, got {self.theta}")


@dataclass(frozen=True)
class IsoStudentSpec:
    """Isotropic Student-t obtained by mixing N_p(0, theta I) over theta ~ InvGa(a, b).

    Equivalently ``t`` with ``2 a`` degrees of freedom and squared scale ``b / a``.
    """

    p: int
    a: float
    b: float

    def __post_init__(self):
        if self.p < 1:
            raise ParameterDomainError("dimension must be positive")
        if not (self.a > 0 and self.b > 0):
            raise ParameterDomainError(f"shape and rate must be positive, got ({self.a}, {self.b})")


def _check_positive(**kw):
    for name, val in kw.items():
        if not (np.all(np.isfinite(val)) and np.all(np.asarray(val) > 0)):
            raise ParameterDomainError(f"{name} must be positive and finite, got {val}")


def sample_beta(a, b, rng: RngStream, size=None):
    _check_positive(a=a, b=b)
    return rng.beta(a, b, size=size)


def sample_inv_gamma(shape, rate, rng: RngStream, size=None):
    """Inverse-gamma draw with density proportional to x^(-shape-1) exp(-rate/x)."""
    _check_positive(shape=shape, rate=rate)
    return 1.0 / rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def cholesky_jitter(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding escalating diagonal jitter on failure."""
    a = np.asarray(matrix, dtype=float)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.max(np.abs(np.diag(a)))) or 1.0
    jitter = JITTER_START
    eye = np.eye(a.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(a + jitter * scale * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    cond = np.linalg.cond(a) if np.all(np.isfinite(a)) else np.inf
    raise NumericalError(
        f"Cholesky failed after jitter up to {JITTER_MAX:g}*max(diag); condition number {cond:.3e}"
    )


def sample_mvn(mean, covariance, rng: RngStream) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    k = mean.shape[0]
    if cov.shape != (k, k):
        raise ShapeError(f"covariance shape {cov.shape} does not match mean length {k}")
    chol = cholesky_jitter(cov)
    return mean + chol @ rng.standard_normal(k)


def log_density_iso_gaussian(x, spec: IsoGaussianSpec) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.p,):
        raise ShapeError(f"expected a vector of length {spec.p}, got shape {x.shape}")
    return -0.5 * spec.p * (LOG_2PI + np.log(spec.theta)) - 0.5 * float(x @ x) / spec.theta


def log_density_iso_student(x, spec: IsoStudentSpec) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.p,):
        raise ShapeError(f"expected a vector of length {spec.p}, got shape {x.shape}")
    a, b, half_p = spec.a, spec.b, 0.5 * spec.p
    return (
        -half_p * LOG_2PI
        + a * np.log(b)
        + gammaln(a + half_p)
        - gammaln(a)
        - (a + half_p) * np.log(b + 0.5 * float(x @ x))
    )


def sample_categorical_log(logweights, rng: RngStream) -> int:
    """Draw a 0-based index with probability proportional to exp(logweights)."""
    lw = np.asarray(logweights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ShapeError("logweights must be a non-empty vector")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ParameterDomainError("logweights must not contain NaN or +inf")
    top = lw.max()
    if top == -np.inf:
        raise DegenerateDistributionError("all log-weights are -inf")
    probs = np.exp(lw - top)
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    # guard against u landing on the rounded top of the cdf
    idx = min(idx, lw.size - 1)
    while probs[idx] == 0.0:
        idx -= 1
    return idx
