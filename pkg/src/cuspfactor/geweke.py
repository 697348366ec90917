"""Joint-distribution ("getting it right") tests for the Gibbs samplers.

Marginal-conditional draws come straight from the prior. Successive-conditional
draws alternate ``y | params`` with one Gibbs cycle ``params | y`` at a fixed
truncation. If every conditional is correct both chains target the same joint
law, so moments of any parameter function must agree. Monte Carlo error on the
successive side is scaled by its effective sample size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cusp_prior import CuspHyper, sample_prior_batch
from .diagnostics import ess_columns
from .gibbs_cusp import Dataset, FactorHyper, count_active, gibbs_cycle, init_chain
from .gibbs_mgp import MgpHyper, init_chain_mgp, mgp_gibbs_cycle
from .prob_core import RngStream

# Light-tailed settings so that the fourth moments needed for standard errors exist.
CUSP_TEST_HYPER = FactorHyper(cusp=CuspHyper(alpha=2.0, a_theta=6.0, b_theta=5.0, theta_inf=0.05),
                              a_sigma=6.0, b_sigma=5.0)
MGP_TEST_HYPER = MgpHyper(a1=6.0, a2=3.0, nu=12.0, a_sigma=6.0, b_sigma=5.0)


@dataclass
class GewekeResult:
    names: list[str]
    forward_mean: np.ndarray
    successive_mean: np.ndarray
    z: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    def passed(self, threshold: float = 4.0) -> bool:
        return self.max_abs_z < threshold

    def report(self) -> str:
        rows = [f"{n:>10s} fwd {f: .5f} succ {s: .5f} z {z: .2f}"
                for n, f, s, z in zip(self.names, self.forward_mean, self.successive_mean, self.z)]
        return "\n".join(rows)


def _with_squares(names, cols):
    names = list(names) + [f"{n}^2" for n in names]
    return names, np.column_stack(cols + [c * c for c in cols])


def _compare(names, forward: np.ndarray, successive: np.ndarray) -> GewekeResult:
    n_f, n_s = forward.shape[0], successive.shape[0]
    ess = ess_columns(successive)
    se2 = forward.var(axis=0, ddof=1) / n_f + successive.var(axis=0, ddof=1) / ess
    fm, sm = forward.mean(axis=0), successive.mean(axis=0)
    return GewekeResult(list(names), fm, sm, (fm - sm) / np.sqrt(se2))


def _regenerate(data: Dataset, lam, eta, sigma2, rng: RngStream) -> None:
    data.y = np.ascontiguousarray(eta @ lam.T + np.sqrt(sigma2) * rng.standard_normal(data.y.shape))


def geweke_cusp(rng: RngStream, n_draws: int = 200_000, p: int = 3, H: int = 3, n: int = 5,
                hyper: FactorHyper = CUSP_TEST_HYPER) -> GewekeResult:
    """Compare moments of (lambda_11, sigma^2_1, theta_1, H*) and their squares."""
    c = hyper.cusp
    batch = sample_prior_batch(c, H, n_draws, rng)
    theta1 = batch.theta[:, 0]
    lam11 = np.sqrt(theta1) * rng.standard_normal(n_draws)
    sig1 = 1.0 / rng.gamma(hyper.a_sigma, 1.0 / hyper.b_sigma, size=n_draws)
    names, forward = _with_squares(["lam11", "sigma2_1", "theta1", "H*"],
                                   [lam11, sig1, theta1, batch.active_count.astype(float)])

    data = Dataset(np.zeros((n, p)))
    state = init_chain(data, hyper, rng, H_init=H)
    succ = np.empty((n_draws, 4))
    for i in range(n_draws):
        _regenerate(data, state.lam, state.eta, state.sigma2, rng)
        gibbs_cycle(state, data, hyper, rng)
        succ[i] = (state.lam[0, 0], state.sigma2[0], state.theta[0], count_active(state.z))
    _, successive = _with_squares(names[:4], [succ[:, k] for k in range(4)])
    return _compare(names, forward, successive)


def geweke_mgp(rng: RngStream, n_draws: int = 200_000, p: int = 3, H: int = 3, n: int = 5,
               hyper: MgpHyper = MGP_TEST_HYPER) -> GewekeResult:
    """Compare moments of (lambda_11, sigma^2_1, delta_1, delta_2, 1/phi_11) and their squares."""
    delta1 = rng.gamma(hyper.a1, 1.0, size=n_draws)
    delta2 = rng.gamma(hyper.a2, 1.0, size=n_draws)
    prec11 = rng.gamma(0.5 * hyper.nu, 2.0 / hyper.nu, size=n_draws)
    lam11 = rng.standard_normal(n_draws) / np.sqrt(prec11 * delta1)
    sig1 = 1.0 / rng.gamma(hyper.a_sigma, 1.0 / hyper.b_sigma, size=n_draws)
    names, forward = _with_squares(["lam11", "sigma2_1", "delta1", "delta2", "1/phi11"],
                                   [lam11, sig1, delta1, delta2, prec11])

    data = Dataset(np.zeros((n, p)))
    state = init_chain_mgp(data, hyper, rng, H_init=H)
    succ = np.empty((n_draws, 5))
    for i in range(n_draws):
        _regenerate(data, state.lam, state.eta, state.sigma2, rng)
        mgp_gibbs_cycle(state, data, hyper, rng)
        succ[i] = (state.lam[0, 0], state.sigma2[0], state.delta[0], state.delta[1], 1.0 / state.phi[0, 0])
    _, successive = _with_squares(names[:5], [succ[:, k] for k in range(5)])
    return _compare(names, forward, successive)
