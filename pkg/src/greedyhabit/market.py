"""Market model, Gompertz mortality, and simulation grids.

The investment opportunity set is a constant-coefficient Black-Scholes
market (one risky asset, one riskless bond).  All pricing in the solver
runs through the state-price density

    zeta_t = exp(-r t) * exp(-kappa W_t - kappa^2 t / 2),

where kappa = (mu - r) / sigma is the market price of risk.  Mortality
follows a Gompertz law parameterised by modal age and dispersion.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "MarketParams",
    "GompertzParams",
    "TimeGrid",
    "PathBundle",
    "survival_probability",
    "hazard_rate",
    "generate_paths",
]

ArrayLike = Union[float, np.ndarray]

#: Default master seed used across the package when none is supplied.
DEFAULT_SEED = 20260814


@dataclass(frozen=True)
class MarketParams:
    """Constant Black-Scholes market coefficients and preferences.

    Parameters
    ----------
    mu : float
        Drift of the risky asset.
    sigma : float
        Volatility of the risky asset (must be positive).
    r : float
        Riskless rate.
    rho : float
        Subjective discount rate of the agent.
    gamma : float
        Relative risk aversion; must be positive and != 1.
    """

    mu: float = 0.08
    sigma: float = 0.16
    r: float = 0.02
    rho: float = 0.02
    gamma: float = 3.0

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.gamma <= 0.0 or self.gamma == 1.0:
            raise ValueError(
                f"gamma must be positive and != 1, got {self.gamma}"
            )

    @property
    def kappa(self) -> float:
        """Market price of risk (mu - r) / sigma."""
        return (self.mu - self.r) / self.sigma


@dataclass(frozen=True)
class GompertzParams:
    """Gompertz mortality law for an individual of a given age.

    Parameters
    ----------
    age : float
        Current age x of the individual.
    modal_age : float
        Modal age at death m of the Gompertz law.
    dispersion : float
        Dispersion coefficient b (must be positive).
    """

    age: float = 65.0
    modal_age: float = 89.335
    dispersion: float = 9.5

    def __post_init__(self) -> None:
        if self.dispersion <= 0.0:
            raise ValueError(
                f"dispersion must be positive, got {self.dispersion}"
            )
        if self.age < 0.0:
            raise ValueError(f"age must be non-negative, got {self.age}")


def survival_probability(mortality: GompertzParams, s: ArrayLike) -> ArrayLike:
    """Probability that an individual aged ``age`` survives ``s`` more years.

    Under the Gompertz law the conditional survival probability is

        p(s) = exp(-exp((age - modal_age) / b) * (exp(s / b) - 1)),

    which equals 1 at s = 0 and decreases to 0.

    Parameters
    ----------
    mortality : GompertzParams
        Mortality law.
    s : float or ndarray
        Horizon(s) in years; must be non-negative.

    Returns
    -------
    float or ndarray
        Survival probabilities, same shape as ``s``.
    """
    return np.exp(log_survival_probability(mortality, s))


def log_survival_probability(
    mortality: GompertzParams, s: ArrayLike
) -> ArrayLike:
    """Log of :func:`survival_probability`; exact for very small tails."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0):
        raise ValueError("survival horizon s must be non-negative")
    b = mortality.dispersion
    base = np.exp((mortality.age - mortality.modal_age) / b)
    out = -base * np.expm1(s_arr / b)
    return float(out) if np.isscalar(s) else out


def hazard_rate(mortality: GompertzParams, y: ArrayLike) -> ArrayLike:
    """Instantaneous Gompertz hazard (force of mortality) at age ``y``.

    lambda(y) = (1 / b) * exp((y - modal_age) / b).
    """
    y_arr = np.asarray(y, dtype=float)
    b = mortality.dispersion
    out = np.exp((y_arr - mortality.modal_age) / b) / b
    return float(out) if np.isscalar(y) else out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid [0, t_max] with step dt.

    ``t_max`` must be an integer multiple of ``dt`` (within float
    tolerance); grid times are ``k * dt`` for k = 0..n_steps.
    """

    t_max: float = 60.0
    dt: float = 0.05

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.t_max <= 0.0:
            raise ValueError("t_max and dt must be positive")
        n = round(self.t_max / self.dt)
        if n < 1 or abs(n * self.dt - self.t_max) > 1e-9 * max(1.0, self.t_max):
            raise ValueError(
                f"t_max={self.t_max} is not an integer multiple of dt={self.dt}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.t_max / self.dt)

    def times(self) -> np.ndarray:
        """Grid times as an array of length n_steps + 1."""
        return np.arange(self.n_steps + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Index of grid time ``t``; raises if ``t`` is not on the grid."""
        k = round(t / self.dt)
        if k < 0 or k > self.n_steps or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} does not lie on the grid (dt={self.dt})")
        return k


@dataclass
class PathBundle:
    """A bundle of simulated Brownian/state-price-density paths.

    Attributes
    ----------
    grid : TimeGrid
        Grid the paths are sampled on.
    n_paths : int
        Number of paths.
    seed : int
        Master seed the bundle was generated from.
    w : ndarray, shape (n_paths, n_steps + 1)
        Brownian motion paths, w[:, 0] = 0.
    zeta : ndarray, shape (n_paths, n_steps + 1)
        State-price density along each path, zeta[:, 0] = 1.
    antithetic : bool
        Whether the second half of the bundle mirrors the first.
    """

    grid: TimeGrid
    n_paths: int
    seed: int
    w: np.ndarray
    zeta: np.ndarray
    antithetic: bool = False


def _fill_increments(dw: np.ndarray, seed: int, lo: int, hi: int) -> None:
    # Each path owns an independent child stream keyed by its index, so the
    # bundle is identical no matter how the work is split across workers.
    n_steps = dw.shape[1]
    for i in range(lo, hi):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        rng = np.random.Generator(np.random.PCG64(ss))
        dw[i] = rng.standard_normal(n_steps)


def generate_paths(
    market: MarketParams,
    grid: TimeGrid,
    n_paths: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    antithetic: bool = False,
) -> PathBundle:
    """Simulate Brownian paths and the state-price density on a grid.

    The density is updated in log space,

        log zeta_k = -(r + kappa^2 / 2) * t_k - kappa * W_k,

    which is exact on grid points (no Euler error in zeta itself).

    Parameters
    ----------
    market : MarketParams
        Market coefficients (only r, kappa enter the density).
    grid : TimeGrid
        Simulation grid.
    n_paths : int
        Number of paths; must be even when ``antithetic`` is set.
    seed : int
        Master seed; per-path streams are spawned from it.
    workers : int
        Thread count for path generation.  The output is bit-identical
        for any value.
    antithetic : bool
        If set, paths [n/2:] use the negated increments of paths [:n/2].

    Returns
    -------
    PathBundle
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if antithetic and n_paths % 2 != 0:
        raise ValueError("antithetic sampling requires an even n_paths")
    n_steps = grid.n_steps
    n_streams = n_paths // 2 if antithetic else n_paths

    dw = np.empty((n_paths, n_steps))
    if workers > 1 and n_streams > 1:
        chunk = -(-n_streams // workers)
        bounds = [(j, min(j + chunk, n_streams)) for j in range(0, n_streams, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_fill_increments, dw, seed, lo, hi)
                for lo, hi in bounds
            ]
            for f in futures:
                f.result()
    else:
        _fill_increments(dw, seed, 0, n_streams)
    if antithetic:
        dw[n_streams:] = -dw[:n_streams]

    w = np.empty((n_paths, n_steps + 1))
    w[:, 0] = 0.0
    np.cumsum(dw, axis=1, out=w[:, 1:])
    w[:, 1:] *= np.sqrt(grid.dt)

    kappa = market.kappa
    times = grid.times()
    log_zeta = -(market.r + 0.5 * kappa**2) * times - kappa * w
    return PathBundle(
        grid=grid,
        n_paths=n_paths,
        seed=seed,
        w=w,
        zeta=np.exp(log_zeta),
        antithetic=antithetic,
    )
