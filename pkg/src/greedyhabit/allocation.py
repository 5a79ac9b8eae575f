"""Wealth representation and risky allocation via nested Monte Carlo.

Optimal wealth is the conditional expected cost of remaining funded
consumption.  Two reductions make this cheap to evaluate:

* without a pension the state collapses to z = zeta_t * H_t and

      X_t = F(t, z) / zeta_t,
      F(t, z) = E[ integral_t^T zeta~_s C~_s ds ],

  where zeta~ restarts at 1 at time t and the inner habit starts at z;
* with a pension the state is (zeta_t, H_t) and

      X_t = G(t, y, h) = E[ integral_t^T zeta~_s (C_s - pi)_+ ds ],

  with consumption driven by the absolute density y * zeta~_s and the
  habit stepped explicitly from h.

The risky fraction follows from the delta of these functionals,

    theta = (kappa / sigma) * (1 - z F_z / F)      (no pension),
    theta = -(kappa / sigma) * y G_y / G           (with pension),

estimated by central finite differences on common random numbers: the
same inner paths are reused for the base and both bumped evaluations,
so the difference is smooth path-by-path and the estimator variance
stays small even with modest inner sample sizes.  Near wealth
exhaustion F (or G) is of the same order as its standard error and the
ratio estimate degrades; such points are flagged unreliable instead of
raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .habit import bernoulli_kernel
from .market import DEFAULT_SEED, MarketParams, TimeGrid
from .solver import (
    BudgetEstimate,
    ModelParams,
    _estimate_from_samples,
    _log_shadow_factor,
    _trapezoid_weights,
    consumption_with_pension,
)

__all__ = [
    "NestedConfig",
    "ThetaEstimate",
    "PolicyPoint",
    "wealth_no_pension",
    "wealth_with_pension",
    "allocation_at",
    "policy_curve",
    "policy_surface",
    "default_zeta_grid",
]


@dataclass(frozen=True)
class NestedConfig:
    """Inner-simulation settings for wealth/allocation estimates.

    Parameters
    ----------
    n_inner : int
        Inner paths per state evaluation.
    bump : float
        Relative bump for the central difference (the estimate is also
        produced at bump/2 agreement levels in the test-suite).
    seed : int
        Master seed for inner streams (domain-separated from outer
        bundles by a spawn-key prefix).
    grid : TimeGrid
        Grid the inner integrals are discretised on; evaluation times
        must lie on it.
    antithetic : bool
        Mirror the second half of the inner paths (variance reduction;
        on by default since the inner estimates sit inside ratios).
    """

    n_inner: int = 5000
    bump: float = 1e-3
    seed: int = DEFAULT_SEED
    grid: TimeGrid = TimeGrid(60.0, 0.05)
    antithetic: bool = True

    def __post_init__(self) -> None:
        if self.n_inner < 2:
            raise ValueError("n_inner must be >= 2")
        if not 0.0 < self.bump < 0.5:
            raise ValueError(f"bump must be in (0, 0.5), got {self.bump}")
        if self.antithetic and self.n_inner % 2 != 0:
            raise ValueError("antithetic sampling requires an even n_inner")


class ThetaEstimate(NamedTuple):
    """Finite-difference allocation estimate at one state.

    ``value``/``std_error`` are NaN when ``reliable`` is False, which
    happens when the wealth estimate is within ten standard errors of
    zero (deep in the exhaustion region).
    """

    value: float
    std_error: float
    reliable: bool
    wealth: BudgetEstimate


@dataclass(frozen=True)
class PolicyPoint:
    """One row of the policy surface (CSV-shaped)."""

    t: float
    habit: float
    zeta: float
    wealth: float
    consumption: float
    theta: float
    wealth_se: float
    theta_reliable: bool


class _InnerPaths:
    """Reusable master increments for inner simulations.

    One standard-normal draw per (stream, step) is generated for the
    full grid; an evaluation anchored at grid index k0 consumes the
    leading n_steps - k0 columns.  Sharing the leading block across
    anchor times makes repeated estimates along a lifetime co-monotone
    (common random numbers in t as well as in the bump).
    """

    def __init__(self, market: MarketParams, config: NestedConfig):
        self.market = market
        self.config = config
        n_streams = (
            config.n_inner // 2 if config.antithetic else config.n_inner
        )
        n_steps = config.grid.n_steps
        dw = np.empty((n_streams, n_steps))
        for i in range(n_streams):
            ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(1, i))
            rng = np.random.Generator(np.random.PCG64(ss))
            dw[i] = rng.standard_normal(n_steps)
        self._dw = dw

    def zeta_from(self, t: float):
        """Density paths restarted at 1 at time t, and absolute times.

        Returns ``(times_abs, zeta)`` where ``times_abs`` runs from t
        to t_max on the config grid and zeta has shape (n_inner, m).
        """
        grid = self.config.grid
        k0 = grid.index_of(t)
        m = grid.n_steps - k0
        if m < 1:
            raise ValueError(f"t={t} leaves no horizon on the grid")
        tau = np.arange(m + 1) * grid.dt
        w = np.empty((self._dw.shape[0], m + 1))
        w[:, 0] = 0.0
        np.cumsum(self._dw[:, :m], axis=1, out=w[:, 1:])
        w[:, 1:] *= math.sqrt(grid.dt)
        kappa = self.market.kappa
        drift = -(self.market.r + 0.5 * kappa**2) * tau
        zeta = np.exp(drift - kappa * w)
        if self.config.antithetic:
            zeta = np.vstack([zeta, np.exp(drift + kappa * w)])
        return t + tau, zeta


class _NoPensionState:
    """F(t, z) evaluator with z-independent pieces precomputed.

    Per-path cost of the remaining stream is

        y_i(z) = beta * sum_k wz[i, k]
                 * (z^(1/g) + (eta/g) * beta * K[i, k])^(g - 1),

    so each z (base and bumps) costs two vector operations.
    """

    def __init__(
        self,
        params: ModelParams,
        alpha: float,
        t: float,
        inner: _InnerPaths,
    ):
        if params.pension != 0.0:
            raise ValueError("no-pension functional requires pension == 0")
        self.params = params
        self.market = params.market
        self.alpha = alpha
        self.antithetic = inner.config.antithetic
        times, zeta = inner.zeta_from(t)
        g = self.market.gamma
        shadow = np.exp(_log_shadow_factor(params, times))
        wgt = _trapezoid_weights(times)
        if params.habit.eta == 0.0:
            self._kernel = None
            self._wz = zeta ** (1.0 - 1.0 / g) * (shadow * wgt)
        else:
            kernel, decay = bernoulli_kernel(
                params.habit, self.market, params.mortality, times, zeta
            )
            self._kernel = kernel
            self._wz = zeta ** (1.0 - 1.0 / g) * (
                shadow * decay ** (g - 1.0) * wgt
            )
        self._beta = alpha ** (-1.0 / g)

    def per_path(self, z: float) -> np.ndarray:
        g = self.market.gamma
        eta = self.params.habit.eta
        u0 = z ** (1.0 / g)
        if eta == 0.0:
            inner = u0
        else:
            inner = u0 + (eta / g) * self._beta * self._kernel
        return self._beta * (inner ** (g - 1.0) * self._wz).sum(axis=-1)

    def estimate(self, z: float) -> BudgetEstimate:
        return _estimate_from_samples(self.per_path(z), self.antithetic)

    def theta(self, z: float, bump: float) -> ThetaEstimate:
        kappa_sig = self.market.kappa / self.market.sigma
        return _fd_theta(
            f0=self.per_path(z),
            f_up=self.per_path(z * (1.0 + bump)),
            f_dn=self.per_path(z * (1.0 - bump)),
            bump=bump,
            slope=lambda ratio: kappa_sig * (1.0 - ratio),
            slope_scale=kappa_sig,
            antithetic=self.antithetic,
        )


class _PensionState:
    """G(t, y, h) evaluator; explicit habit stepping per evaluation.

    The density power zeta~^(-1/g) and the deterministic shadow factor
    are precomputed, so a (y, h) evaluation costs one pass of the habit
    recursion over the remaining grid.
    """

    def __init__(
        self,
        params: ModelParams,
        alpha: float,
        t: float,
        inner: _InnerPaths,
    ):
        self.params = params
        self.market = params.market
        self.alpha = alpha
        self.antithetic = inner.config.antithetic
        times, zeta = inner.zeta_from(t)
        g = self.market.gamma
        dt = inner.config.grid.dt
        if params.habit.eta * dt >= 1.0:
            raise ValueError("eta * dt >= 1: inner grid too coarse")
        self._times = times
        self._zeta = zeta
        self._zpow = zeta ** (-1.0 / g)
        self._shadow = np.exp(_log_shadow_factor(params, times))
        self._wgt = _trapezoid_weights(times)
        self._beta = alpha ** (-1.0 / g)
        self._dt = dt

    def per_path(self, y: float, h0: float) -> np.ndarray:
        g = self.market.gamma
        eta = self.params.habit.eta
        pi = self.params.pension
        e = 1.0 - 1.0 / g
        fac = (self._beta * y ** (-1.0 / g)) * self._shadow
        n, m = self._zeta.shape
        h = np.full(n, float(h0))
        acc = np.zeros(n)
        for k in range(m):
            c = h**e * (fac[k] * self._zpow[:, k])
            np.maximum(c, pi, out=c)
            acc += (self._wgt[k] * self._zeta[:, k]) * (c - pi)
            if k < m - 1:
                h += eta * (c - h) * self._dt
        return acc

    def estimate(self, y: float, h0: float) -> BudgetEstimate:
        return _estimate_from_samples(self.per_path(y, h0), self.antithetic)

    def theta(self, y: float, h0: float, bump: float) -> ThetaEstimate:
        kappa_sig = self.market.kappa / self.market.sigma
        return _fd_theta(
            f0=self.per_path(y, h0),
            f_up=self.per_path(y * (1.0 + bump), h0),
            f_dn=self.per_path(y * (1.0 - bump), h0),
            bump=bump,
            slope=lambda ratio: -kappa_sig * ratio,
            slope_scale=kappa_sig,
            antithetic=self.antithetic,
        )


def _fd_theta(f0, f_up, f_dn, bump, slope, slope_scale, antithetic):
    """Central-difference ratio estimate with a delta-method error bar."""
    if antithetic:
        half = f0.shape[0] // 2
        f0 = 0.5 * (f0[:half] + f0[half:])
        f_up = 0.5 * (f_up[:half] + f_up[half:])
        f_dn = 0.5 * (f_dn[:half] + f_dn[half:])
    n = f0.shape[0]
    mean_f = f0.mean()
    se_f = f0.std(ddof=1) / math.sqrt(n)
    wealth = BudgetEstimate(float(mean_f), float(se_f))
    if not mean_f > 10.0 * se_f:
        return ThetaEstimate(math.nan, math.nan, False, wealth)
    # relative bumps make state * d/d(state) = central diff / (2 * bump)
    u = (f_up - f_dn) / (2.0 * bump)
    ratio = u.mean() / mean_f
    resid = u - ratio * f0
    var_ratio = resid.var(ddof=1) / (n * mean_f**2)
    return ThetaEstimate(
        float(slope(ratio)),
        float(slope_scale * math.sqrt(var_ratio)),
        True,
        wealth,
    )


def wealth_no_pension(
    t: float,
    z: float,
    alpha: float,
    params: ModelParams,
    config: NestedConfig = NestedConfig(),
    _inner: Optional[_InnerPaths] = None,
) -> BudgetEstimate:
    """F(t, z): expected remaining cost in the reduced state z = zeta*H.

    Satisfies F(0, initial habit) = budget(alpha) in expectation; the
    martingale wealth at (t, zeta, H) is F(t, zeta * H) / zeta.
    """
    if z <= 0.0:
        raise ValueError(f"z must be positive, got {z}")
    inner = _inner or _InnerPaths(params.market, config)
    return _NoPensionState(params, alpha, t, inner).estimate(z)


def wealth_with_pension(
    t: float,
    zeta: float,
    habit_level: float,
    alpha: float,
    params: ModelParams,
    config: NestedConfig = NestedConfig(),
    _inner: Optional[_InnerPaths] = None,
) -> BudgetEstimate:
    """G(t, zeta, H): wealth with a pension (valid for pension = 0 too)."""
    if zeta <= 0.0 or habit_level <= 0.0:
        raise ValueError("zeta and habit_level must be positive")
    inner = _inner or _InnerPaths(params.market, config)
    return _PensionState(params, alpha, t, inner).estimate(zeta, habit_level)


def allocation_at(
    t: float,
    zeta: float,
    habit_level: float,
    alpha: float,
    params: ModelParams,
    config: NestedConfig = NestedConfig(),
    _inner: Optional[_InnerPaths] = None,
) -> ThetaEstimate:
    """Risky fraction at state (t, zeta, H) with its wealth estimate."""
    if zeta <= 0.0 or habit_level <= 0.0:
        raise ValueError("zeta and habit_level must be positive")
    inner = _inner or _InnerPaths(params.market, config)
    if params.pension == 0.0:
        state = _NoPensionState(params, alpha, t, inner)
        est = state.theta(zeta * habit_level, config.bump)
        # state.theta prices F = zeta * wealth; rescale to wealth units
        wealth = BudgetEstimate(
            est.wealth.value / zeta, est.wealth.std_error / zeta
        )
        return ThetaEstimate(est.value, est.std_error, est.reliable, wealth)
    state = _PensionState(params, alpha, t, inner)
    return state.theta(zeta, habit_level, config.bump)


def default_zeta_grid(
    t: float,
    market: MarketParams,
    n: int = 41,
    spread: float = 4.0,
) -> np.ndarray:
    """Log-spaced density grid centred on the median of zeta_t.

    The median of the lognormal zeta_t is exp(-(r + kappa^2/2) t); the
    grid spans exp(+-spread) around it, which covers the wealth range
    plotted in the policy figures.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    center = math.exp(-(market.r + 0.5 * market.kappa**2) * t)
    return center * np.exp(np.linspace(-spread, spread, n))


def policy_surface(
    times: Sequence[float],
    habit_level: float,
    alpha: float,
    params: ModelParams,
    config: NestedConfig = NestedConfig(),
    zeta_grid: Optional[np.ndarray] = None,
    max_wealth: float = 20.0,
) -> List[PolicyPoint]:
    """Wealth/consumption/allocation rows over a (t, zeta) grid.

    For each time slice the rows are ordered by increasing wealth and
    clipped to (0, max_wealth].  One set of inner paths is shared by
    every state (and every bump) on the surface.
    """
    if habit_level <= 0.0:
        raise ValueError("habit_level must be positive")
    inner = _InnerPaths(params.market, config)
    rows: List[PolicyPoint] = []
    for t in times:
        grid_z = (
            default_zeta_grid(t, params.market)
            if zeta_grid is None
            else np.asarray(zeta_grid, dtype=float)
        )
        slice_rows = []
        for zeta in grid_z:
            est = allocation_at(
                t, float(zeta), habit_level, alpha, params, config, _inner=inner
            )
            wealth = est.wealth.value
            if not 0.0 < wealth <= max_wealth:
                continue
            consumption = consumption_with_pension(
                habit_level,
                float(zeta),
                t,
                alpha,
                params.pension,
                params.market,
                params.mortality,
            )
            slice_rows.append(
                PolicyPoint(
                    t=float(t),
                    habit=float(habit_level),
                    zeta=float(zeta),
                    wealth=wealth,
                    consumption=float(consumption),
                    theta=est.value,
                    wealth_se=est.wealth.std_error,
                    theta_reliable=est.reliable,
                )
            )
        slice_rows.sort(key=lambda row: row.wealth)
        rows.extend(slice_rows)
    return rows


def policy_curve(
    t: float,
    habit_level: float,
    alpha: float,
    params: ModelParams,
    config: NestedConfig = NestedConfig(),
    zeta_grid: Optional[np.ndarray] = None,
    max_wealth: float = 20.0,
) -> List[PolicyPoint]:
    """Single time slice of :func:`policy_surface`."""
    return policy_surface(
        [t], habit_level, alpha, params, config, zeta_grid, max_wealth
    )
