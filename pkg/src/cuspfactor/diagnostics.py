"""Posterior summaries and MCMC quality metrics for stored Omega draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistributionError, ParameterDomainError, ShapeError, UndefinedESSError
from .store import DrawStore, diag_positions, upper_indices

MIN_ESS_LENGTH = 10


@dataclass(frozen=True)
class ScalarTrace:
    values: np.ndarray
    label: str = ""


def _values(trace) -> np.ndarray:
    vals = trace.values if isinstance(trace, ScalarTrace) else trace
    return np.asarray(vals, dtype=float)


def _check_omega0(store: DrawStore, target: np.ndarray) -> np.ndarray:
    target = np.asarray(target, dtype=float)
    if target.shape != (store.p, store.p):
        raise ShapeError(f"reference matrix has shape {target.shape}, draws are {store.p} x {store.p}")
    if len(store) == 0:
        raise ShapeError("no draws to average over")
    return target[upper_indices(store.p)]


def posterior_mse(store: DrawStore, omega0) -> float:
    """Average over draws and upper-triangle entries of (Omega_jq - Omega0_jq)^2."""
    ref = _check_omega0(store, omega0)
    diff = store.omega - ref
    return float(np.mean(diff * diff))


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased sample autocorrelations along axis 0, via zero-padded FFT."""
    n = x.shape[0]
    centered = x - x.mean(axis=0)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=0)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=0)[:n]
    return acov / acov[0]


def ess_columns(x) -> np.ndarray:
    """Effective sample size of every column of an (N, m) array.

    Geyer's initial monotone sequence: sum adjacent autocorrelation pairs,
    stop at the first non-positive pair and force the pairs to be
    non-increasing. Results are clipped to N.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < MIN_ESS_LENGTH:
        raise UndefinedESSError(f"need at least {MIN_ESS_LENGTH} draws, got {n}")
    if not np.all(np.isfinite(x)):
        raise UndefinedESSError("trace contains non-finite values")
    spread = np.ptp(x, axis=0)
    if np.any(spread == 0):
        raise UndefinedESSError("ESS is undefined for a constant trace")
    rho = autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    positive = np.cumprod(pairs > 0, axis=0).astype(bool)
    monotone = np.minimum.accumulate(np.where(positive, pairs, np.inf), axis=0)
    monotone = np.where(positive, monotone, 0.0)
    tau = -1.0 + 2.0 * monotone.sum(axis=0)
    ess = n / np.maximum(tau, 1e-300)
    return np.minimum(ess, float(n))


def ess(trace) -> float:
    return float(ess_columns(_values(trace))[0])


def averaged_ess(store: DrawStore) -> float:
    """Mean ESS over the p(p+1)/2 upper-triangle traces of Omega."""
    return float(np.mean(ess_columns(store.omega)))


def credible_interval(trace, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed interval from type-7 (linear) empirical quantiles."""
    if not 0 < level < 1:
        raise ParameterDomainError("level must lie in (0, 1)")
    vals = _values(trace)
    if vals.size == 0:
        raise ShapeError("empty trace")
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(vals, [tail, 1.0 - tail])
    return float(lo), float(hi)


def correlation_transform(omega) -> np.ndarray:
    """Rescale a covariance matrix to unit diagonal: Omega_jq / sqrt(Omega_jj Omega_qq)."""
    omega = np.asarray(omega, dtype=float)
    d = np.diag(omega)
    if np.any(~(d > 0)):
        raise ParameterDomainError("covariance diagonal must be strictly positive")
    s = 1.0 / np.sqrt(d)
    out = omega * s[:, None] * s[None, :]
    np.fill_diagonal(out, 1.0)
    return out


def correlation_draws(store: DrawStore) -> np.ndarray:
    """Upper triangles of the correlation matrix for every stored draw."""
    omega = store.omega
    iu, ju = upper_indices(store.p)
    diag = omega[:, diag_positions(store.p)]
    if np.any(~(diag > 0)):
        raise ParameterDomainError("a stored draw has a non-positive diagonal")
    scale = 1.0 / np.sqrt(diag)
    corr = omega * scale[:, iu] * scale[:, ju]
    corr[:, iu == ju] = 1.0
    return corr


def mean_sq_dev_from_sample_corr(store: DrawStore, sample_corr) -> float:
    ref = _check_omega0(store, sample_corr)
    diff = correlation_draws(store) - ref
    return float(np.mean(diff * diff))


def posterior_mean_h_star(store: DrawStore) -> float:
    if len(store) == 0:
        raise DegenerateDistributionError("no draws")
    return float(store.h_star.mean())
