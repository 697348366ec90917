"""Adaptive Gibbs sampler for the Gaussian factor model with a CUSP prior on the
column variances of the loadings matrix.

One iteration runs the six conditional updates in order (loadings, idiosyncratic
variances, factors, indicators, sticks, column variances) and then, from
iteration ``t_bar`` on, possibly resizes the truncation level ``H``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ._backend import BACKEND, kernels
from .cusp_prior import CuspHyper, StickState, expected_pi, sample_prior_sequence, stick_break
from .errors import ConfigError, ShapeError
from .prob_core import RngStream, make_rng
from .store import DrawStore

_c = np.ascontiguousarray

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny


@dataclass
class Dataset:
    """An n x p data matrix plus a record of how it was preprocessed."""

    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        if y.ndim != 2 or y.shape[1] < 1:
            raise ShapeError(f"data must be an n x p matrix with p >= 1, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ShapeError("data contain missing or non-finite values")
        self.y = y

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class FactorHyper:
    cusp: CuspHyper = field(default_factory=CuspHyper)
    a_sigma: float = 1.0
    b_sigma: float = 0.3
    # a_theta <= 1 gives the slab an infinite mean, so Omega need not have
    # finite prior moments; only sensitivity studies should switch this on.
    allow_heavy_slab: bool = False

    def __post_init__(self):
        if not (self.a_sigma > 0 and self.b_sigma > 0):
            raise ConfigError("a_sigma and b_sigma must be positive")
        if self.cusp.a_theta <= 1 and not self.allow_heavy_slab:
            raise ConfigError(
                f"a_theta={self.cusp.a_theta} must exceed 1: the slab mean E(theta_h) must be "
                "finite for Omega to have finite entries almost surely"
            )
        if not self.cusp.theta_inf > 0:
            raise ConfigError("the factor model needs a strictly positive spike variance theta_inf")

    def as_dict(self) -> dict:
        return {
            "alpha": self.cusp.alpha,
            "a_theta": self.cusp.a_theta,
            "b_theta": self.cusp.b_theta,
            "theta_inf": self.cusp.theta_inf,
            "a_sigma": self.a_sigma,
            "b_sigma": self.b_sigma,
        }


@dataclass(frozen=True)
class McmcSettings:
    n_iterations: int = 15000
    burn_in: int = 5000
    thin: int = 5
    t_bar: int = 500
    alpha0: float = -1.0
    alpha1: float = -5e-4
    seed: int = 0
    adapt: bool = True

    def __post_init__(self):
        if self.n_iterations < 1 or self.thin < 1:
            raise ConfigError("n_iterations and thin must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ConfigError("burn_in must be non-negative and smaller than n_iterations")
        if self.alpha0 > 0 or self.alpha1 >= 0:
            raise ConfigError("adaptation needs alpha0 <= 0 and alpha1 < 0 (diminishing adaptation)")
        if self.t_bar < 0:
            raise ConfigError("t_bar must be non-negative")

    @property
    def n_retained(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thin

    def adapt_probability(self, t: int) -> float:
        return float(np.exp(self.alpha0 + self.alpha1 * t))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChainState:
    lam: np.ndarray
    eta: np.ndarray
    sigma2: np.ndarray
    theta: np.ndarray
    sticks: StickState
    z: np.ndarray

    @property
    def H(self) -> int:
        return self.lam.shape[1]

    @property
    def h_star(self) -> int:
        return count_active(self.z)

    @property
    def spike(self) -> np.ndarray:
        return self.z <= np.arange(1, self.H + 1)

    def omega(self) -> np.ndarray:
        return self.lam @ self.lam.T + np.diag(self.sigma2)

    def copy(self) -> "ChainState":
        return ChainState(
            lam=self.lam.copy(),
            eta=self.eta.copy(),
            sigma2=self.sigma2.copy(),
            theta=self.theta.copy(),
            sticks=stick_break(self.sticks.v.copy()),
            z=self.z.copy(),
        )


def check_state(state: ChainState, hyper: FactorHyper, p: int, n: int) -> None:
    """Raise ``AssertionError`` if any structural invariant of the chain is broken."""
    H = state.H
    assert 1 <= H <= p + 1, f"H={H} outside [1, p+1]"
    assert state.lam.shape == (p, H) and state.eta.shape == (n, H)
    assert state.theta.shape == (H,) and state.z.shape == (H,) and state.sticks.H == H
    assert np.all(state.sigma2 > 0) and np.all(state.theta > 0)
    assert np.all((state.z >= 1) & (state.z <= H)), "indicator out of range"
    assert state.sticks.v[-1] == 1.0, "last stick must be 1"
    assert np.all(np.diff(state.sticks.pi) >= -1e-12)
    spike = state.spike
    assert np.all(state.theta[spike] == hyper.cusp.theta_inf)
    assert not np.any(state.theta[~spike] == hyper.cusp.theta_inf)


def count_active(z) -> int:
    """Number of columns whose indicator points beyond their own index (z_h > h)."""
    z = np.asarray(z)
    return int(np.sum(z > np.arange(1, z.size + 1)))


def init_chain(data: Dataset, hyper: FactorHyper, rng: RngStream, H_init: int | None = None) -> ChainState:
    """Draw a starting state from the prior; ``H_init`` defaults to p + 1."""
    p, n = data.p, data.n
    H = p + 1 if H_init is None else int(H_init)
    if not 1 <= H <= p + 1:
        raise ConfigError(f"initial truncation {H} must lie in [1, p+1={p + 1}]")
    prior = sample_prior_sequence(hyper.cusp, H, rng)
    lam = rng.standard_normal((p, H)) * np.sqrt(prior.theta)
    sigma2 = 1.0 / rng.gamma(hyper.a_sigma, 1.0 / hyper.b_sigma, size=p)
    eta = rng.standard_normal((n, H))
    return ChainState(lam=lam, eta=eta, sigma2=sigma2, theta=prior.theta,
                      sticks=prior.sticks, z=prior.z)


def update_loadings(state: ChainState, data: Dataset, rng: RngStream) -> ChainState:
    p, H = data.p, state.H
    prior_var = np.ascontiguousarray(np.broadcast_to(state.theta, (p, H)))
    noise = rng.standard_normal((p, H))
    state.lam = kernels.sample_loadings(data.y, _c(state.eta), _c(state.sigma2), prior_var, noise)
    return state


def update_idiosyncratic_variances(state: ChainState, data: Dataset, hyper: FactorHyper,
                                   rng: RngStream) -> ChainState:
    ss = kernels.residual_ss(data.y, _c(state.eta), _c(state.lam))
    shape = hyper.a_sigma + 0.5 * data.n
    rate = hyper.b_sigma + 0.5 * ss
    state.sigma2 = 1.0 / rng.gamma(shape, 1.0 / rate)
    return state


def update_factors(state: ChainState, data: Dataset, rng: RngStream) -> ChainState:
    noise = rng.standard_normal((data.n, state.H))
    state.eta = kernels.sample_factors(data.y, _c(state.lam), _c(state.sigma2), noise)
    return state


def update_z(state: ChainState, hyper: FactorHyper, rng: RngStream) -> ChainState:
    c = hyper.cusp
    with np.errstate(divide="ignore"):
        log_omega = np.log(state.sticks.omega)
    u = rng.random(state.H)
    state.z = kernels.sample_indicators(_c(state.lam), log_omega, c.theta_inf, c.a_theta, c.b_theta, u)
    return state


def indicator_probabilities(state: ChainState, hyper: FactorHyper) -> np.ndarray:
    """H x H matrix whose row h is the full conditional pr(z_h = l | -)."""
    c = hyper.cusp
    ln_spike, ln_slab = kernels.column_log_densities(_c(state.lam), c.theta_inf, c.a_theta, c.b_theta)
    ln_spike, ln_slab = np.asarray(ln_spike), np.asarray(ln_slab)
    H = state.H
    with np.errstate(divide="ignore"):
        log_omega = np.log(state.sticks.omega)
    below = np.arange(H)[None, :] <= np.arange(H)[:, None]
    logp = log_omega[None, :] + np.where(below, ln_spike[:, None], ln_slab[:, None])
    probs = np.exp(logp - logp.max(axis=1, keepdims=True))
    return probs / probs.sum(axis=1, keepdims=True)


def stick_posterior_params(z, H: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Beta parameters for sticks 1..H-1 given 1-based indicators."""
    z = np.asarray(z)
    counts = np.bincount(z, minlength=H + 1)[1:H + 1]
    at_least = counts[::-1].cumsum()[::-1]
    # greater[l - 1] = #{h : z_h > l}
    greater = np.append(at_least[1:], 0)
    return 1.0 + counts[:-1], alpha + greater[:-1]


def update_sticks(state: ChainState, hyper: FactorHyper, rng: RngStream) -> ChainState:
    H = state.H
    v = np.ones(H)
    if H > 1:
        a, b = stick_posterior_params(state.z, H, hyper.cusp.alpha)
        v[:-1] = np.clip(rng.beta(a, b), _TINY, 1.0)
    state.sticks = stick_break(v)
    return state


def update_thetas(state: ChainState, hyper: FactorHyper, rng: RngStream) -> ChainState:
    c = hyper.cusp
    p = state.lam.shape[0]
    active = ~state.spike
    theta = np.full(state.H, float(c.theta_inf))
    if active.any():
        rate = c.b_theta + 0.5 * np.einsum("jh,jh->h", state.lam[:, active], state.lam[:, active])
        theta[active] = 1.0 / rng.gamma(c.a_theta + 0.5 * p, 1.0 / rate)
    state.theta = theta
    return state


def gibbs_cycle(state: ChainState, data: Dataset, hyper: FactorHyper, rng: RngStream) -> ChainState:
    update_loadings(state, data, rng)
    update_idiosyncratic_variances(state, data, hyper, rng)
    update_factors(state, data, rng)
    update_z(state, hyper, rng)
    update_sticks(state, hyper, rng)
    update_thetas(state, hyper, rng)
    return state


def _append_spike_component(state: ChainState, hyper: FactorHyper, rng: RngStream,
                            v_prefix: np.ndarray) -> None:
    """Add a final column born in the spike; ``v_prefix`` are the sticks before it."""
    p, n = state.lam.shape[0], state.eta.shape[0]
    theta_inf = hyper.cusp.theta_inf
    state.lam = np.column_stack([state.lam, np.sqrt(theta_inf) * rng.standard_normal(p)])
    state.eta = np.column_stack([state.eta, rng.standard_normal(n)])
    state.theta = np.append(state.theta, theta_inf)
    state.sticks = stick_break(np.append(v_prefix, 1.0))
    H = state.H
    new_z = int(np.searchsorted(state.sticks.pi, rng.random(), side="right")) + 1
    state.z = np.append(np.minimum(state.z, H), min(new_z, H))


def adapt_truncation(state: ChainState, t: int, settings: McmcSettings, hyper: FactorHyper,
                     rng: RngStream) -> ChainState:
    """Possibly shrink H to H* + 1 or grow it by one, with probability exp(a0 + a1 t)."""
    if not settings.adapt or t < settings.t_bar:
        return state
    if rng.random() >= settings.adapt_probability(t):
        return state
    p = state.lam.shape[0]
    H = state.H
    active = ~state.spike
    h_star = int(active.sum())
    if h_star < H - 1:
        keep = np.flatnonzero(active)
        state.lam = state.lam[:, keep]
        state.eta = state.eta[:, keep]
        state.theta = state.theta[keep]
        state.z = state.z[keep]
        _append_spike_component(state, hyper, rng, state.sticks.v[keep])
    elif H < p + 1:
        v = state.sticks.v.copy()
        v[-1] = max(rng.beta(1.0, hyper.cusp.alpha), _TINY)
        _append_spike_component(state, hyper, rng, v)
    logger.debug("t=%d: H=%d, H*=%d, E(pi_H)=%.6f", t, state.H, state.h_star,
                 expected_pi(hyper.cusp.alpha, state.H))
    return state


def chain_manifest(method: str, data: Dataset, hyper_dict: dict, settings: McmcSettings) -> dict:
    manifest = {"method": method, "backend": BACKEND, "n": data.n, "p": data.p}
    manifest.update({f"settings.{k}": v for k, v in settings.as_dict().items()})
    manifest.update({f"hyper.{k}": v for k, v in hyper_dict.items()})
    manifest.update({f"data.{k}": v for k, v in data.provenance.items()})
    return manifest


def run_chain(data: Dataset, hyper: FactorHyper, settings: McmcSettings,
              rng: RngStream | None = None, H_init: int | None = None) -> DrawStore:
    """Run the adaptive sampler and keep every ``thin``-th post-burn-in draw of Omega.

    Draws are recorded after the full iteration, i.e. after any adaptation.
    """
    if rng is None:
        rng = make_rng(settings.seed)
    state = init_chain(data, hyper, rng, H_init)
    store = DrawStore(data.p, chain_manifest("cusp", data, hyper.as_dict(), settings))
    for t in range(1, settings.n_iterations + 1):
        gibbs_cycle(state, data, hyper, rng)
        adapt_truncation(state, t, settings, hyper, rng)
        if t > settings.burn_in and (t - settings.burn_in) % settings.thin == 0:
            store.append(t, state.lam, state.sigma2, state.h_star, state.H)
    return store
