"""Shared fixtures: default parameter sets and a session-wide calibration cache.

Calibrating the budget multiplier is the slow step of the pipeline (a
bisection whose every iterate is a Monte Carlo budget evaluation), and
several test modules want the same calibrated configurations.  The
``calibrated`` fixture memoizes solutions per parameter key so the full
suite pays for each configuration exactly once.
"""

import pytest

from greedyhabit import (
    CalibrationConfig,
    GompertzParams,
    HabitParams,
    MarketParams,
    ModelParams,
    TimeGrid,
    calibrate_alpha,
    generate_paths,
)

CAL_GRID = TimeGrid(60.0, 0.05)
CAL_SEED = 23


def make_params(eta=0.1, pension=0.0, v=10.0, c_bar=1.0):
    """Model parameters at the defaults, with the knobs tests sweep."""
    return ModelParams(
        market=MarketParams(),
        mortality=GompertzParams(),
        habit=HabitParams(eta=eta, initial=c_bar),
        pension=pension,
        v=v,
    )


@pytest.fixture(scope="session")
def market():
    return MarketParams()


@pytest.fixture(scope="session")
def mortality():
    return GompertzParams()


@pytest.fixture(scope="session")
def calibrated():
    """Memoized calibration: get(eta, pension, ...) -> (params, config, solution)."""
    cache = {}

    def get(eta, pension=0.0, v=10.0, c_bar=1.0, n_paths=20000, tolerance=5e-3):
        key = (eta, pension, v, c_bar, n_paths, tolerance)
        if key not in cache:
            params = make_params(eta, pension, v, c_bar)
            config = CalibrationConfig(
                grid=CAL_GRID,
                n_paths=n_paths,
                seed=CAL_SEED,
                tolerance=tolerance,
                antithetic=True,
            )
            solution = calibrate_alpha(params, config)
            # Keep only the scalars: a dozen cached solutions with their
            # per-path arrays would not fit in memory.
            solution.consumption = None
            solution.habit = None
            cache[key] = (params, config, solution)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def small_bundle(market):
    """4000 antithetic paths on the calibration grid, for cheap MC checks."""
    return generate_paths(market, CAL_GRID, 4000, seed=7, antithetic=True)
