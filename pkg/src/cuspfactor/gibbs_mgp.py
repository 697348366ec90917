"""Multiplicative gamma process (MGP) baseline for the same factor model.

Loadings are ``lambda_jh ~ N(0, phi_jh * theta_h)`` with local variances
``phi_jh ~ InvGa(nu/2, nu/2)`` and column precisions
``1/theta_h = prod_{l<=h} delta_l``, ``delta_1 ~ Ga(a1, 1)``, ``delta_l ~ Ga(a2, 1)``.
The full conditionals for ``phi`` and ``delta`` follow by conjugacy:

* ``1/phi_jh | - ~ Ga((nu + 1)/2, (nu + lambda_jh^2 / theta_h) / 2)``
* ``delta_l | - ~ Ga(a_l + p (H - l + 1)/2,
  1 + (1/2) sum_{h>=l} tau_h^{(-l)} sum_j lambda_jh^2 / phi_jh)``,
  where ``tau_h^{(-l)} = prod_{m<=h, m!=l} delta_m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import ConfigError
from .gibbs_cusp import Dataset, McmcSettings, chain_manifest
from .prob_core import RngStream, make_rng
from .store import DrawStore

_c = np.ascontiguousarray


@dataclass(frozen=True)
class MgpHyper:
    a1: float = 1.0
    a2: float = 2.0
    nu: float = 3.0
    a_sigma: float = 1.0
    b_sigma: float = 0.3
    eps_threshold: float = 1e-4

    def __post_init__(self):
        for name in ("a1", "a2", "nu", "a_sigma", "b_sigma", "eps_threshold"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("a1", "a2", "nu", "a_sigma", "b_sigma", "eps_threshold")}


@dataclass
class MgpChainState:
    lam: np.ndarray
    eta: np.ndarray
    sigma2: np.ndarray
    phi: np.ndarray
    delta: np.ndarray

    @property
    def H(self) -> int:
        return self.lam.shape[1]

    @property
    def theta(self) -> np.ndarray:
        return 1.0 / np.cumprod(self.delta)

    def active_columns(self, eps: float) -> np.ndarray:
        return np.max(np.abs(self.lam), axis=0) >= eps

    def h_star(self, eps: float) -> int:
        return int(self.active_columns(eps).sum())


def _delta_shapes(hyper: MgpHyper, H: int) -> np.ndarray:
    shapes = np.full(H, hyper.a2)
    shapes[0] = hyper.a1
    return shapes


def init_chain_mgp(data: Dataset, hyper: MgpHyper, rng: RngStream, H_init: int | None = None) -> MgpChainState:
    """Prior draw with H = p unless overridden."""
    p, n = data.p, data.n
    H = p if H_init is None else int(H_init)
    if not 1 <= H <= p:
        raise ConfigError(f"initial truncation {H} must lie in [1, p={p}]")
    delta = rng.gamma(_delta_shapes(hyper, H), 1.0)
    phi = 1.0 / rng.gamma(0.5 * hyper.nu, 2.0 / hyper.nu, size=(p, H))
    theta = 1.0 / np.cumprod(delta)
    lam = rng.standard_normal((p, H)) * np.sqrt(phi * theta)
    sigma2 = 1.0 / rng.gamma(hyper.a_sigma, 1.0 / hyper.b_sigma, size=p)
    eta = rng.standard_normal((n, H))
    return MgpChainState(lam=lam, eta=eta, sigma2=sigma2, phi=phi, delta=delta)


def update_local_scales(state: MgpChainState, hyper: MgpHyper, rng: RngStream) -> MgpChainState:
    rate = 0.5 * (hyper.nu + state.lam ** 2 / state.theta)
    state.phi = 1.0 / rng.gamma(0.5 * (hyper.nu + 1.0), 1.0 / rate)
    return state


def update_increments(state: MgpChainState, hyper: MgpHyper, rng: RngStream) -> MgpChainState:
    p, H = state.lam.shape
    weighted = np.sum(state.lam ** 2 / state.phi, axis=0)
    shapes = _delta_shapes(hyper, H)
    delta = state.delta.copy()
    for l in range(H):
        tau = np.cumprod(delta)
        tau_minus = tau[l:] / delta[l]
        rate = 1.0 + 0.5 * float(tau_minus @ weighted[l:])
        delta[l] = rng.gamma(shapes[l] + 0.5 * p * (H - l), 1.0 / rate)
    state.delta = delta
    return state


def mgp_gibbs_cycle(state: MgpChainState, data: Dataset, hyper: MgpHyper, rng: RngStream) -> MgpChainState:
    p, n, H = data.p, data.n, state.H
    prior_var = np.ascontiguousarray(state.phi * state.theta)
    state.lam = kernels.sample_loadings(data.y, _c(state.eta), _c(state.sigma2), prior_var,
                                        rng.standard_normal((p, H)))
    ss = kernels.residual_ss(data.y, _c(state.eta), _c(state.lam))
    state.sigma2 = 1.0 / rng.gamma(hyper.a_sigma + 0.5 * n, 1.0 / (hyper.b_sigma + 0.5 * ss))
    state.eta = kernels.sample_factors(data.y, _c(state.lam), _c(state.sigma2), rng.standard_normal((n, H)))
    update_local_scales(state, hyper, rng)
    update_increments(state, hyper, rng)
    return state


def mgp_adapt(state: MgpChainState, t: int, settings: McmcSettings, hyper: MgpHyper,
              rng: RngStream) -> MgpChainState:
    """Drop columns whose loadings are all below ``eps_threshold``; otherwise add one.

    H never exceeds p and never drops below 1.
    """
    if not settings.adapt or t < settings.t_bar:
        return state
    if rng.random() >= settings.adapt_probability(t):
        return state
    p, n = state.lam.shape[0], state.eta.shape[0]
    active = state.active_columns(hyper.eps_threshold)
    if not active.all():
        keep = np.flatnonzero(active)
        if keep.size == 0:
            keep = np.array([0])
        state.lam = state.lam[:, keep]
        state.eta = state.eta[:, keep]
        state.phi = state.phi[:, keep]
        state.delta = state.delta[keep]
    elif state.H < p:
        new_delta = rng.gamma(hyper.a2, 1.0)
        delta = np.append(state.delta, new_delta)
        phi_col = 1.0 / rng.gamma(0.5 * hyper.nu, 2.0 / hyper.nu, size=p)
        theta_new = 1.0 / np.prod(delta)
        state.delta = delta
        state.phi = np.column_stack([state.phi, phi_col])
        state.lam = np.column_stack([state.lam, rng.standard_normal(p) * np.sqrt(phi_col * theta_new)])
        state.eta = np.column_stack([state.eta, rng.standard_normal(n)])
    return state


def run_chain_mgp(data: Dataset, hyper: MgpHyper, settings: McmcSettings,
                  rng: RngStream | None = None, H_init: int | None = None) -> DrawStore:
    """Adaptive MGP sampler; H* is the number of columns above ``eps_threshold``."""
    if rng is None:
        rng = make_rng(settings.seed)
    state = init_chain_mgp(data, hyper, rng, H_init)
    store = DrawStore(data.p, chain_manifest("mgp", data, hyper.as_dict(), settings))
    eps = hyper.eps_threshold
    for t in range(1, settings.n_iterations + 1):
        mgp_gibbs_cycle(state, data, hyper, rng)
        mgp_adapt(state, t, settings, hyper, rng)
        if t > settings.burn_in and (t - settings.burn_in) % settings.thin == 0:
            store.append(t, state.lam, state.sigma2, state.h_star(eps), state.H)
    return store
