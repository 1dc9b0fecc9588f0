"""Variance schedule and the closed-form chain operations.

Arrays are indexed by timestep t = 1..T (index 0 is the t=0 convention
slot: alpha_bar[0] = 1). The forward marginal, the tractable posterior,
and the reverse update are pure functions over (arrays, schedule) and
work on numpy arrays and torch tensors alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step beta_t, alpha_t, alpha_bar_t, beta_tilde_t, sigma_t."""

    t_steps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray
    sigma: np.ndarray
    beta_start: float
    beta_end: float

    def check_t(self, t: int) -> None:
        if not 1 <= t <= self.t_steps:
            raise ConfigurationError(f"t={t} outside 1..{self.t_steps}")


def make_schedule(t_steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """Linear beta schedule with derived alpha products and posterior variance."""
    if t_steps < 1:
        raise ConfigurationError(f"t_steps must be >= 1, got {t_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigurationError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    beta = np.empty(t_steps + 1)
    beta[0] = np.nan  # no step 0
    if t_steps == 1:
        beta[1] = beta_start
    else:
        beta[1:] = np.linspace(beta_start, beta_end, t_steps)
    alpha = 1.0 - beta
    alpha_bar = np.empty(t_steps + 1)
    alpha_bar[0] = 1.0
    alpha_bar[1:] = np.cumprod(alpha[1:])
    beta_tilde = np.empty(t_steps + 1)
    beta_tilde[0] = np.nan
    beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
    sigma = np.sqrt(np.where(np.isnan(beta_tilde), np.nan, beta_tilde))
    return DiffusionSchedule(
        t_steps=t_steps,
        beta=beta,
        alpha=alpha,
        alpha_bar=alpha_bar,
        beta_tilde=beta_tilde,
        sigma=sigma,
        beta_start=float(beta_start),
        beta_end=float(beta_end),
    )


def forward_sample(x0, t: int, eps, schedule: DiffusionSchedule):
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps."""
    schedule.check_t(t)
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def posterior_params(x0, x_t, t: int, schedule: DiffusionSchedule):
    """Mean and variance of the exact posterior q(x_{t-1} | x_t, x_0)."""
    schedule.check_t(t)
    ab_t = schedule.alpha_bar[t]
    ab_prev = schedule.alpha_bar[t - 1]
    coef_xt = np.sqrt(schedule.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab_t)
    coef_x0 = np.sqrt(ab_prev) * schedule.beta[t] / (1.0 - ab_t)
    mu = coef_xt * x_t + coef_x0 * x0
    return mu, schedule.beta_tilde[t]


def reverse_step(x_t, eps_hat, t: int, schedule: DiffusionSchedule, z):
    """One reverse-chain update from x_t to x_{t-1}.

    x_{t-1} = (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat) / sqrt(alpha_t)
              + sigma_t * z

    sigma_1 = 0, so the final step is deterministic regardless of z.
    """
    schedule.check_t(t)
    a = schedule.alpha[t]
    ab = schedule.alpha_bar[t]
    mean = (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)
    sigma = schedule.sigma[t]
    if sigma == 0.0:
        return mean
    return mean + sigma * z
