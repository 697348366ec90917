"""Pure numpy implementation of the Gibbs hot kernels.

Mirrors ``_ckernels.pyx`` argument for argument. All randomness arrives as
pre-drawn standard normals or uniforms, so both backends consume the random
stream identically and differ only by floating-point rounding.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .prob_core import LOG_2PI, cholesky_jitter


def _batched_cholesky(prec: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        return np.stack([cholesky_jitter(q) for q in prec])


def _precision_draw(chol: np.ndarray, rhs: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Solve L^T x = L^{-1} rhs + noise for a batch of (L, rhs, noise)."""
    w = np.linalg.solve(chol, rhs[..., None])[..., 0]
    return np.linalg.solve(np.swapaxes(chol, -1, -2), (w + noise)[..., None])[..., 0]


def sample_loadings(y, eta, sigma2, prior_var, noise):
    """Draw every row of the p x H loadings matrix from its Gaussian full conditional.

    Row j has precision diag(1 / prior_var[j]) + eta^T eta / sigma2[j] and
    precision-weighted mean eta^T y_j / sigma2[j].
    """
    p = y.shape[1]
    H = eta.shape[1]
    gram = eta.T @ eta
    prec = gram[None, :, :] / sigma2[:, None, None]
    idx = np.arange(H)
    prec[:, idx, idx] += 1.0 / prior_var
    rhs = (eta.T @ y).T / sigma2[:, None]
    chol = _batched_cholesky(prec)
    out = _precision_draw(chol, rhs, noise)
    return out.reshape(p, H)


def sample_factors(y, lam, sigma2, noise):
    """Draw the n x H latent factors; all rows share one posterior precision."""
    H = lam.shape[1]
    scaled = lam / sigma2[:, None]
    prec = np.eye(H) + lam.T @ scaled
    chol = cholesky_jitter(prec)
    rhs = y @ scaled
    w = np.linalg.solve(chol, rhs.T)
    return np.linalg.solve(chol.T, w + noise.T).T


def column_log_densities(lam, theta_inf, a_theta, b_theta):
    """Per-column spike (Gaussian) and slab (Student-t) log densities of lambda_h."""
    p = lam.shape[0]
    sq = np.einsum("jh,jh->h", lam, lam)
    half_p = 0.5 * p
    ln_spike = -half_p * (LOG_2PI + np.log(theta_inf)) - 0.5 * sq / theta_inf
    ln_slab = (
        -half_p * LOG_2PI
        + a_theta * np.log(b_theta)
        + gammaln(a_theta + half_p)
        - gammaln(a_theta)
        - (a_theta + half_p) * np.log(b_theta + 0.5 * sq)
    )
    return ln_spike, ln_slab


def indicator_log_probs(lam, log_omega, theta_inf, a_theta, b_theta):
    """H x H matrix of unnormalised log pr(z_h = l), row h, column l."""
    H = lam.shape[1]
    ln_spike, ln_slab = column_log_densities(lam, theta_inf, a_theta, b_theta)
    below = np.arange(H)[None, :] <= np.arange(H)[:, None]
    return log_omega[None, :] + np.where(below, ln_spike[:, None], ln_slab[:, None])


def sample_indicators(lam, log_omega, theta_inf, a_theta, b_theta, uniforms):
    """Draw 1-based indicators z_h by inverting each row's categorical cdf."""
    logp = indicator_log_probs(lam, log_omega, theta_inf, a_theta, b_theta)
    top = logp.max(axis=1, keepdims=True)
    cdf = np.cumsum(np.exp(logp - top), axis=1)
    target = uniforms * cdf[:, -1]
    z = (cdf <= target[:, None]).sum(axis=1)
    return np.minimum(z, lam.shape[1] - 1).astype(np.int64) + 1


def residual_ss(y, eta, lam):
    """Column sums of squared residuals of y - eta lam^T."""
    resid = y - eta @ lam.T
    return np.einsum("ij,ij->j", resid, resid)
