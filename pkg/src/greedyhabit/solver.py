"""Greedy consumption rule, budget pricing, and multiplier calibration.

The greedy rule maximises the expected discounted flow of habit-scaled
CRRA utility pointwise.  Without a pension the first-order condition
gives

    C_t = H_t^(1 - 1/gamma)
          * (alpha * exp(rho t) * zeta_t / p_t)^(-1/gamma),

with p_t the survival probability; with a pension pi the rule is
max(pi, same expression) and only the excess C_t - pi is funded from
wealth.  The multiplier alpha is calibrated so the expected
density-weighted cost of the funded consumption stream equals the
initial wealth ("budget identity").  Because the cost is strictly
decreasing in alpha, a bisection in log space converges globally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np

from .habit import HabitParams, bernoulli_kernel, habit_closed_form
from .market import (
    DEFAULT_SEED,
    GompertzParams,
    MarketParams,
    PathBundle,
    TimeGrid,
    generate_paths,
    log_survival_probability,
)

__all__ = [
    "ModelParams",
    "CalibrationConfig",
    "GreedySolution",
    "BudgetEstimate",
    "CalibrationError",
    "BudgetMonotonicityError",
    "consumption_no_pension",
    "consumption_with_pension",
    "solve_paths",
    "budget_value",
    "calibrate_alpha",
]

ArrayLike = Union[float, np.ndarray]


class CalibrationError(RuntimeError):
    """Raised when the budget equation cannot be solved for alpha."""


class BudgetMonotonicityError(CalibrationError):
    """Raised when evaluated budgets fail to decrease in alpha.

    The budget is strictly decreasing in alpha path-by-path, so a
    violation on the common path bundle signals a numerical defect
    (bad grid, overflow) rather than sampling noise.
    """


@dataclass(frozen=True)
class ModelParams:
    """Full model: market, mortality, habit, pension, initial wealth."""

    market: MarketParams = MarketParams()
    mortality: GompertzParams = GompertzParams()
    habit: HabitParams = HabitParams()
    pension: float = 0.0
    v: float = 10.0

    def __post_init__(self) -> None:
        if self.pension < 0.0:
            raise ValueError(f"pension must be non-negative, got {self.pension}")
        if self.v <= 0.0:
            raise ValueError(f"initial wealth v must be positive, got {self.v}")


@dataclass(frozen=True)
class CalibrationConfig:
    """Monte Carlo and root-finding settings for alpha calibration.

    ``tolerance`` is relative: the search stops once
    |budget(alpha) - v| / v <= tolerance on the common path bundle.
    """

    grid: TimeGrid = TimeGrid(60.0, 0.05)
    n_paths: int = 20000
    seed: int = DEFAULT_SEED
    tolerance: float = 5e-3
    max_iterations: int = 80
    bracket: Tuple[float, float] = (1e-6, 1e6)
    antithetic: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        lo, hi = self.bracket
        if not (0.0 < lo < hi):
            raise ValueError(f"invalid bracket {self.bracket}")


class BudgetEstimate(NamedTuple):
    value: float
    std_error: float


@dataclass
class GreedySolution:
    """Calibrated greedy solution on a path bundle.

    Attributes
    ----------
    alpha : float
        Calibrated budget multiplier.
    budget_residual : float
        Relative residual |budget(alpha) - v| / v at convergence.
    budget_se : float
        Standard error of the Monte Carlo budget at alpha.
    consumption, habit : ndarray, shape (n_paths, n_times)
        Optimal consumption and habit along the calibration bundle.
    pension : float
    v : float
    iterations : int
        Number of budget evaluations performed.
    """

    alpha: float
    budget_residual: float
    budget_se: float
    consumption: np.ndarray
    habit: np.ndarray
    pension: float
    v: float
    iterations: int


def _validate_positive(name: str, value: ArrayLike) -> None:
    if np.any(np.asarray(value) <= 0.0):
        raise ValueError(f"{name} must be positive")


def consumption_no_pension(
    h: ArrayLike,
    zeta: ArrayLike,
    t: ArrayLike,
    alpha: float,
    market: MarketParams,
    mortality: GompertzParams,
) -> ArrayLike:
    """Greedy consumption at state (h, zeta, t) without a pension.

    Increasing in habit for gamma > 1 (exponent 1 - 1/gamma > 0) and
    decreasing in both alpha and zeta.
    """
    _validate_positive("habit h", h)
    _validate_positive("zeta", zeta)
    _validate_positive("alpha", alpha)
    g = market.gamma
    log_p = log_survival_probability(mortality, t)
    shadow = np.exp(
        -(math.log(alpha) + market.rho * np.asarray(t, dtype=float) - log_p) / g
    ) * np.asarray(zeta, dtype=float) ** (-1.0 / g)
    out = np.asarray(h, dtype=float) ** (1.0 - 1.0 / g) * shadow
    return float(out) if np.isscalar(h) and np.isscalar(zeta) else out


def consumption_with_pension(
    h: ArrayLike,
    zeta: ArrayLike,
    t: ArrayLike,
    alpha: float,
    pension: float,
    market: MarketParams,
    mortality: GompertzParams,
) -> ArrayLike:
    """Greedy consumption with a pension floor: max(pension, unfloored)."""
    if pension < 0.0:
        raise ValueError(f"pension must be non-negative, got {pension}")
    base = consumption_no_pension(h, zeta, t, alpha, market, mortality)
    out = np.maximum(pension, base)
    return float(out) if np.isscalar(base) else out


def _log_shadow_factor(
    params: ModelParams, times: np.ndarray
) -> np.ndarray:
    """log of exp(-rho t / g) * p_t^(1/g): the deterministic part of the rule."""
    g = params.market.gamma
    log_p = log_survival_probability(params.mortality, times)
    return (-params.market.rho * times + log_p) / g


def solve_paths(
    alpha: float,
    params: ModelParams,
    paths: PathBundle,
    method: str = "auto",
) -> Tuple[np.ndarray, np.ndarray]:
    """Optimal consumption and habit along every path of a bundle.

    Parameters
    ----------
    method : {"auto", "closed_form", "euler"}
        ``closed_form`` evaluates the Bernoulli solution (pension must
        be zero); ``euler`` steps the habit ODE explicitly and supports
        any pension.  ``auto`` picks closed_form when pension == 0.

    Returns
    -------
    (consumption, habit) : ndarray pairs, shape (n_paths, n_times)
    """
    _validate_positive("alpha", alpha)
    if method == "auto":
        method = "closed_form" if params.pension == 0.0 else "euler"
    if method not in ("closed_form", "euler"):
        raise ValueError(f"unknown method {method!r}")
    times = paths.grid.times()
    zeta = paths.zeta
    g = params.market.gamma
    beta = alpha ** (-1.0 / g)

    if method == "closed_form":
        if params.pension != 0.0:
            raise ValueError("closed_form requires pension == 0")
        habit = habit_closed_form(
            params.habit, params.market, params.mortality, alpha, times, zeta
        )
        shadow = np.exp(_log_shadow_factor(params, times))
        consumption = habit ** (1.0 - 1.0 / g) * (
            beta * shadow * zeta ** (-1.0 / g)
        )
        return consumption, habit

    eta = params.habit.eta
    dt = paths.grid.dt
    if eta * dt >= 1.0:
        raise ValueError(f"eta * dt = {eta * dt} >= 1: grid too coarse")
    shadow = beta * np.exp(_log_shadow_factor(params, times))
    zpow = zeta ** (-1.0 / g)
    n_paths, n_times = zeta.shape
    consumption = np.empty_like(zeta)
    habit = np.empty_like(zeta)
    habit[:, 0] = params.habit.initial
    e = 1.0 - 1.0 / g
    for k in range(n_times - 1):
        c = habit[:, k] ** e * (shadow[k] * zpow[:, k])
        np.maximum(c, params.pension, out=c)
        consumption[:, k] = c
        habit[:, k + 1] = habit[:, k] + eta * (c - habit[:, k]) * dt
    c = habit[:, -1] ** e * (shadow[-1] * zpow[:, -1])
    np.maximum(c, params.pension, out=c)
    consumption[:, -1] = c
    return consumption, habit


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.empty_like(times)
    w[1:-1] = 0.5 * (times[2:] - times[:-2])
    w[0] = 0.5 * (times[1] - times[0])
    w[-1] = 0.5 * (times[-1] - times[-2])
    return w


def _estimate_from_samples(y: np.ndarray, antithetic: bool) -> BudgetEstimate:
    if antithetic:
        half = y.shape[0] // 2
        y = 0.5 * (y[:half] + y[half:])
    se = y.std(ddof=1) / math.sqrt(y.shape[0]) if y.shape[0] > 1 else 0.0
    return BudgetEstimate(float(y.mean()), float(se))


def _budget_evaluator(
    params: ModelParams, paths: PathBundle
) -> Callable[[float], Tuple[BudgetEstimate, np.ndarray]]:
    """Build a fast budget(alpha) evaluator on a fixed bundle.

    Precomputes every alpha-independent array so repeated evaluations
    inside the bisection cost only a handful of vector operations.
    Returns per-path discounted costs alongside the estimate.
    """
    times = paths.grid.times()
    zeta = paths.zeta
    g = params.market.gamma
    eta = params.habit.eta
    wgt = _trapezoid_weights(times)

    if params.pension == 0.0:
        # integrand zeta * C = beta * W * (h0^(1/g) + (eta/g) beta K)^(g-1)
        # with W = zeta^(1-1/g) * shadow * decay^(g-1)
        shadow = np.exp(_log_shadow_factor(params, times))
        u0 = params.habit.initial ** (1.0 / g)
        if eta == 0.0:
            # frozen habit: kernel drops out and the cost factorises
            wz = zeta ** (1.0 - 1.0 / g) * (shadow * wgt)
            base = wz.sum(axis=1) * u0 ** (g - 1.0)

            def evaluate(alpha: float):
                beta = alpha ** (-1.0 / g)
                y = beta * base
                return _estimate_from_samples(y, paths.antithetic), y

            return evaluate

        kernel, decay = bernoulli_kernel(
            params.habit, params.market, params.mortality, times, zeta
        )
        wz = zeta ** (1.0 - 1.0 / g) * (shadow * decay ** (g - 1.0)) * wgt

        def evaluate(alpha: float):
            beta = alpha ** (-1.0 / g)
            y = beta * ((u0 + (eta / g) * beta * kernel) ** (g - 1.0) * wz).sum(
                axis=1
            )
            return _estimate_from_samples(y, paths.antithetic), y

        return evaluate

    # pension case: explicit Euler, only the excess over the floor is priced
    dt = paths.grid.dt
    if eta * dt >= 1.0:
        raise ValueError(f"eta * dt = {eta * dt} >= 1: grid too coarse")
    shadow = np.exp(_log_shadow_factor(params, times))
    zpow = zeta ** (-1.0 / g)
    pi = params.pension
    e = 1.0 - 1.0 / g
    n_paths, n_times = zeta.shape

    def evaluate(alpha: float):
        beta = alpha ** (-1.0 / g)
        fac = beta * shadow
        h = np.full(n_paths, params.habit.initial)
        y = np.zeros(n_paths)
        for k in range(n_times):
            c = h**e * (fac[k] * zpow[:, k])
            np.maximum(c, pi, out=c)
            y += (wgt[k] * (c - pi)) * zeta[:, k]
            if k < n_times - 1:
                h += eta * (c - h) * dt
        return _estimate_from_samples(y, paths.antithetic), y

    return evaluate


def budget_value(
    alpha: float, params: ModelParams, paths: PathBundle
) -> BudgetEstimate:
    """Expected density-weighted cost of the funded consumption stream.

    E[ integral zeta_t * (C_t - pension)_+ dt ] by trapezoid rule over
    the bundle grid, averaged across paths.  The returned standard
    error accounts for antithetic pairing when the bundle uses it.
    """
    _validate_positive("alpha", alpha)
    est, _ = _budget_evaluator(params, paths)(alpha)
    return est


def calibrate_alpha(
    params: ModelParams,
    config: CalibrationConfig = CalibrationConfig(),
    paths: Optional[PathBundle] = None,
) -> GreedySolution:
    """Solve budget(alpha) = v by bisection on a common path bundle.

    All evaluations reuse one bundle (common random numbers), so the
    empirical budget is strictly decreasing in alpha and the bisection
    is deterministic given the seed.  Iterates are checked for that
    monotonicity; a violation raises :class:`BudgetMonotonicityError`.

    Parameters
    ----------
    paths : PathBundle, optional
        Reuse an existing bundle instead of generating one (its grid
        and size then take precedence over ``config``).

    Raises
    ------
    CalibrationError
        If the bracket cannot be expanded to straddle v or the
        iteration cap is hit before reaching tolerance.
    """
    if paths is None:
        paths = generate_paths(
            params.market,
            config.grid,
            config.n_paths,
            seed=config.seed,
            workers=config.workers,
            antithetic=config.antithetic,
        )
    evaluate = _budget_evaluator(params, paths)
    v = params.v
    history = {}

    def budget_at(alpha: float) -> BudgetEstimate:
        if alpha not in history:
            history[alpha] = evaluate(alpha)[0]
        return history[alpha]

    lo, hi = config.bracket
    for _ in range(6):
        if budget_at(lo).value >= v:
            break
        lo /= 10.0
    for _ in range(6):
        if budget_at(hi).value <= v:
            break
        hi *= 10.0
    b_lo, b_hi = budget_at(lo), budget_at(hi)
    if b_lo.value < v or b_hi.value > v:
        raise CalibrationError(
            f"could not bracket v={v}: budget({lo})={b_lo.value:.6g}, "
            f"budget({hi})={b_hi.value:.6g}"
        )

    alpha = None
    estimate = None
    for endpoint, est in ((lo, b_lo), (hi, b_hi)):
        if abs(est.value - v) / v <= config.tolerance:
            alpha, estimate = endpoint, est
            break
    while alpha is None:
        if len(history) >= config.max_iterations:
            raise CalibrationError(
                f"no convergence within {config.max_iterations} budget "
                f"evaluations (last bracket [{lo:.6g}, {hi:.6g}])"
            )
        mid = math.sqrt(lo * hi)
        est = budget_at(mid)
        if abs(est.value - v) / v <= config.tolerance:
            alpha, estimate = mid, est
        elif est.value > v:
            lo = mid
        else:
            hi = mid

    evaluated = sorted(history.items())
    values = [est.value for _, est in evaluated]
    if not all(a > b for a, b in zip(values[:-1], values[1:])):
        raise BudgetMonotonicityError(
            "budget iterates are not strictly decreasing in alpha; "
            "the Monte Carlo budget is numerically corrupt on this grid"
        )

    consumption, habit = solve_paths(alpha, params, paths)
    return GreedySolution(
        alpha=alpha,
        budget_residual=abs(estimate.value - v) / v,
        budget_se=estimate.std_error,
        consumption=consumption,
        habit=habit,
        pension=params.pension,
        v=v,
        iterations=len(history),
    )
