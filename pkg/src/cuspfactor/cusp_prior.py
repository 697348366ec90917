"""The cumulative shrinkage process: stick-breaking, closed-form prior summaries
and prior simulation with an inverse-gamma slab.

Indicator values ``z`` are stored 1-based (``z_h = l`` means stick ``l``), so that
``z_h <= h`` reads exactly as "column ``h`` comes from the spike".
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import ParameterDomainError
from .prob_core import RngStream


@dataclass(frozen=True)
class CuspHyper:
    alpha: float = 5.0
    a_theta: float = 2.0
    b_theta: float = 2.0
    theta_inf: float = 0.05

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterDomainError(f"alpha must be positive, got {self.alpha}")
        if not (self.a_theta > 0 and self.b_theta > 0):
            raise ParameterDomainError("slab shape and rate must be positive")
        if not (self.theta_inf >= 0 and np.isfinite(self.theta_inf)):
            raise ParameterDomainError(f"theta_inf must be finite and >= 0, got {self.theta_inf}")
        if self.b_theta / self.a_theta <= self.theta_inf:
            warnings.warn(
                "b_theta/a_theta <= theta_inf: loadings are no longer stochastically "
                "more concentrated near zero as the column index grows",
                stacklevel=3,
            )

    @property
    def slab_mean(self) -> float:
        if self.a_theta <= 1:
            return np.inf
        return self.b_theta / (self.a_theta - 1.0)


@dataclass
class StickState:
    v: np.ndarray
    omega: np.ndarray
    pi: np.ndarray

    @property
    def H(self) -> int:
        return self.v.shape[0]


def stick_break(v) -> StickState:
    """Map stick proportions ``v`` to weights ``omega`` and cumulative ``pi``.

    ``pi_h`` is computed as ``1 - prod_{m<=h}(1 - v_m)`` so that a final
    ``v_H = 1`` gives ``pi_H == 1`` exactly.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ParameterDomainError("v must be a non-empty vector")
    if np.any(~(v > 0)) or np.any(v > 1):
        raise ParameterDomainError("stick proportions must lie in (0, 1]")
    remaining = np.cumprod(1.0 - v)
    before = np.concatenate(([1.0], remaining[:-1]))
    return StickState(v=v, omega=v * before, pi=1.0 - remaining)


def _ratio(alpha: float) -> float:
    if not alpha > 0:
        raise ParameterDomainError(f"alpha must be positive, got {alpha}")
    return alpha / (1.0 + alpha)


def _check_index(h, lo=1):
    if int(h) != h or h < lo:
        raise ParameterDomainError(f"index must be an integer >= {lo}, got {h}")


def expected_pi(alpha: float, h: int) -> float:
    _check_index(h)
    return 1.0 - _ratio(alpha) ** h


def expected_omega(alpha: float, h: int) -> float:
    _check_index(h)
    return alpha ** (h - 1) / (1.0 + alpha) ** h


def expected_theta(alpha: float, h: int, theta0: float, theta_inf: float) -> float:
    """Prior mean of theta_h given the slab mean ``theta0``."""
    _check_index(h)
    return theta_inf + _ratio(alpha) ** h * (theta0 - theta_inf)


def _check_mass(mass):
    if not 0.0 <= mass <= 1.0:
        raise ParameterDomainError(f"probability mass must lie in [0, 1], got {mass}")


def tail_prob(alpha: float, h: int, p0_outside_mass: float) -> float:
    """pr(|theta_h - theta_inf| > eps) given the slab mass outside the eps-ball."""
    _check_index(h)
    _check_mass(p0_outside_mass)
    return p0_outside_mass * _ratio(alpha) ** h


def truncation_bound(alpha: float, H: int, p0_outside_mass: float) -> float:
    """Upper bound on pr(sup_{h>H} |theta_h| > eps), valid for eps >= |theta_inf|."""
    _check_index(H, lo=0)
    _check_mass(p0_outside_mass)
    return p0_outside_mass * alpha * _ratio(alpha) ** H


def expected_active(alpha: float) -> float:
    """Prior mean of the number of slab-distributed terms, which equals alpha."""
    _ratio(alpha)
    return float(alpha)


def slab_outside_mass(a_theta: float, b_theta: float, center: float, eps: float) -> float:
    """InvGa(a, b) probability of falling outside [center - eps, center + eps]."""
    if not eps > 0:
        raise ParameterDomainError("eps must be positive")
    upper = center + eps
    lower = center - eps
    # InvGa cdf at x is Q(a, b/x), the regularized upper incomplete gamma
    above = 1.0 - gammaincc(a_theta, b_theta / upper) if upper > 0 else 1.0
    below = gammaincc(a_theta, b_theta / lower) if lower > 0 else 0.0
    return float(above + below)


@dataclass
class PriorSequenceDraw:
    sticks: StickState
    z: np.ndarray
    theta: np.ndarray

    @property
    def active_count(self) -> int:
        return int(np.sum(self.z > np.arange(1, self.z.size + 1)))


def draw_indicators(pi: np.ndarray, rng: RngStream, size=None) -> np.ndarray:
    """Sample 1-based indicators with pr(z = l) = pi_l - pi_{l-1} by inversion."""
    n = pi.shape[-1] if size is None else size
    u = rng.random(n)
    z = np.searchsorted(pi, u, side="right") + 1
    return np.minimum(z, pi.shape[-1])


def sample_prior_sequence(hyper: CuspHyper, H: int, rng: RngStream) -> PriorSequenceDraw:
    """One draw of (v, z, theta) from the CUSP prior truncated at H with v_H = 1."""
    _check_index(H)
    v = np.ones(H)
    if H > 1:
        v[:-1] = rng.beta(1.0, hyper.alpha, size=H - 1)
    sticks = stick_break(v)
    z = draw_indicators(sticks.pi, rng)
    theta = np.full(H, float(hyper.theta_inf))
    active = z > np.arange(1, H + 1)
    n_active = int(active.sum())
    if n_active:
        theta[active] = 1.0 / rng.gamma(hyper.a_theta, 1.0 / hyper.b_theta, size=n_active)
    return PriorSequenceDraw(sticks=sticks, z=z, theta=theta)


@dataclass
class PriorBatch:
    """Many independent prior sequences stacked row-wise."""

    pi: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    spike: np.ndarray

    @property
    def active_count(self) -> np.ndarray:
        return (~self.spike).sum(axis=1)


def sample_prior_batch(hyper: CuspHyper, H: int, n_draws: int, rng: RngStream) -> PriorBatch:
    """Vectorised version of :func:`sample_prior_sequence` for Monte Carlo checks."""
    _check_index(H)
    v = np.ones((n_draws, H))
    if H > 1:
        v[:, :-1] = rng.beta(1.0, hyper.alpha, size=(n_draws, H - 1))
    remaining = np.cumprod(1.0 - v, axis=1)
    pi = 1.0 - remaining
    u = rng.random((n_draws, H))
    z = np.empty((n_draws, H), dtype=np.int64)
    for r in range(n_draws):
        z[r] = np.searchsorted(pi[r], u[r], side="right")
    z = np.minimum(z + 1, H)
    spike = z <= np.arange(1, H + 1)
    theta = np.full((n_draws, H), float(hyper.theta_inf))
    slab = ~spike
    theta[slab] = 1.0 / rng.gamma(hyper.a_theta, 1.0 / hyper.b_theta, size=int(slab.sum()))
    return PriorBatch(pi=pi, z=z, theta=theta, spike=spike)
