"""Habit dynamics: exponential smoothing of past consumption.

The habit level follows dH_t = eta * (C_t - H_t) dt with H_0 equal to
the initial habit.  Along the optimal consumption rule (no pension) the
habit ODE is of Bernoulli type and admits a closed form: with
u = H^(1/gamma),

    u_s = exp(-eta (s - t0) / gamma) * (u_{t0} + (eta / gamma) * K_s),
    K_s = integral_{t0}^{s} exp(eta (q - t0) / gamma)
          * (alpha * zeta_q * exp(rho q) / p_q)^(-1/gamma) dq,

where p_q is the survival probability.  Anchoring the exponentials at
t0 keeps the integrand bounded, so the expression is overflow-safe on
long horizons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .market import GompertzParams, MarketParams, log_survival_probability

__all__ = ["HabitParams", "habit_euler_step", "habit_closed_form"]

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class HabitParams:
    """Habit-formation preferences.

    Parameters
    ----------
    eta : float
        Smoothing rate of the habit (>= 0); eta = 0 freezes the habit
        at its initial level and recovers time-separable utility.
    initial : float
        Initial habit level (must be positive).
    """

    eta: float = 0.1
    initial: float = 1.0

    def __post_init__(self) -> None:
        if self.eta < 0.0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if self.initial <= 0.0:
            raise ValueError(
                f"initial habit must be positive, got {self.initial}"
            )


def habit_euler_step(
    h: ArrayLike, c: ArrayLike, dt: float, eta: float
) -> ArrayLike:
    """One explicit Euler step of the habit ODE.

    h_{k+1} = h_k + eta * (c_k - h_k) * dt.  Requires eta * dt < 1 so
    the step preserves positivity and monotone tracking.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if eta < 0.0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    if eta * dt >= 1.0:
        raise ValueError(
            f"eta * dt = {eta * dt} >= 1: step too coarse for the habit ODE"
        )
    return h + eta * (np.asarray(c, dtype=float) - h) * dt


def bernoulli_kernel(
    habit: HabitParams,
    market: MarketParams,
    mortality: GompertzParams,
    times: np.ndarray,
    zeta: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Alpha-independent pieces of the closed-form habit solution.

    Returns ``(kernel, decay)`` where, for a given multiplier alpha with
    beta = alpha^(-1/gamma) and start habit h0 at times[0],

        u = decay * (h0^(1/gamma) + (eta / gamma) * beta * kernel)

    and H = u^gamma.  ``times`` are absolute (mortality and discounting
    are evaluated at them); the exponential anchor is times[0].

    Parameters
    ----------
    times : ndarray, shape (m,)
        Increasing absolute grid times.
    zeta : ndarray, shape (..., m)
        State-price-density values along the last axis (rebased so the
        conditioning value at times[0] is already divided out).
    """
    g = market.gamma
    eta = habit.eta
    tau = times - times[0]
    log_p = log_survival_probability(mortality, times)
    # integrand of K: exp(eta*tau/g) * (zeta * exp(rho t) / p)^(-1/g),
    # assembled in log space so deep density tails cannot overflow
    log_k = (eta * tau - market.rho * times + log_p) / g - np.log(zeta) / g
    k = np.exp(log_k)
    kernel = cumulative_trapezoid(k, times, axis=-1, initial=0.0)
    decay = np.exp(-eta * tau / g)
    return kernel, decay


def habit_closed_form(
    habit: HabitParams,
    market: MarketParams,
    mortality: GompertzParams,
    alpha: float,
    times: np.ndarray,
    zeta: np.ndarray,
    h_start: ArrayLike = None,
) -> np.ndarray:
    """Habit path along the optimal (no-pension) consumption rule.

    Evaluates the Bernoulli closed form on ``times`` given density
    values ``zeta`` (trapezoid rule for the inner integral, so the
    result is exact up to O(dt^2) quadrature error).

    Parameters
    ----------
    alpha : float
        Budget multiplier (positive).
    times : ndarray, shape (m,)
        Absolute grid times; the habit starts at times[0].
    zeta : ndarray, shape (m,) or (n_paths, m)
        Density values along the last axis.
    h_start : float or ndarray, optional
        Habit at times[0]; defaults to ``habit.initial``.

    Returns
    -------
    ndarray
        Habit values, same shape as ``zeta``.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if h_start is None:
        h_start = habit.initial
    h0 = np.asarray(h_start, dtype=float)
    if np.any(h0 <= 0.0):
        raise ValueError("start habit must be positive")
    g = market.gamma
    kernel, decay = bernoulli_kernel(habit, market, mortality, times, zeta)
    beta = alpha ** (-1.0 / g)
    if h0.ndim > 0:
        h0 = h0[..., np.newaxis]
    u = decay * (h0 ** (1.0 / g) + (habit.eta / g) * beta * kernel)
    return u**g
