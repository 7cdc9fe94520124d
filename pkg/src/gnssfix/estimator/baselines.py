"""Classic weighting schemes the learned estimator is compared against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyInput, LengthMismatch, MissingFit
from ..geometry import elevation_azimuth
from ..types import Epoch

# E[ln e^2] for e ~ N(0, s^2) is ln s^2 + E[ln chi2_1]; correcting by this
# constant makes the log-domain variance fit unbiased.
LOG_CHI2_MEAN = -(np.euler_gamma + np.log(2.0))
SQUARED_ERROR_FLOOR = 1e-12  # keeps exact zeros out of the log


@dataclass(frozen=True)
class ElevationWeightFit:
    """Variance law sigma^2(el) = a * exp(-el / b), elevation in radians."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a) and self.a > 0.0):
            raise ValueError(f"scale a must be positive and finite, got {self.a}")
        if not (np.isfinite(self.b) and self.b != 0.0):
            raise ValueError(f"decay b must be nonzero and finite, got {self.b}")

    def variance(self, elevation: np.ndarray) -> np.ndarray:
        return self.a * np.exp(-np.asarray(elevation, dtype=float) / self.b)


def fit_elevation_weights(elevations: np.ndarray, errors: np.ndarray) -> ElevationWeightFit:
    """Least-squares fit of the variance law on (elevation, error) pairs.

    The fit runs in the log domain: ln e^2 is linear in elevation with slope
    -1/b and intercept ln a + E[ln chi2_1], so the intercept is corrected by
    that constant before exponentiating.
    """
    el = np.asarray(elevations, dtype=float)
    err = np.asarray(errors, dtype=float)
    if el.size == 0:
        raise EmptyInput("no pairs to fit")
    if el.shape != err.shape:
        raise LengthMismatch(f"{el.shape} elevations vs {err.shape} errors")
    if np.ptp(el) == 0.0:
        raise ValueError("all elevations identical; slope is unidentifiable")
    log_sq = np.log(np.maximum(err**2, SQUARED_ERROR_FLOOR))
    slope, intercept = np.polyfit(el, log_sq, 1)
    if slope == 0.0:
        raise ValueError("flat variance trend; decay is unidentifiable")
    a = float(np.exp(intercept - LOG_CHI2_MEAN))
    b = float(-1.0 / slope)
    return ElevationWeightFit(a=a, b=b)


def fit_elevation_baseline(epochs: Sequence[Epoch]) -> ElevationWeightFit:
    """Fit the variance law on every labelled measurement of the epochs."""
    els, errs = [], []
    for ep in epochs:
        if not ep.has_truth_errors():
            continue
        for obs in ep.observations:
            els.append(elevation_azimuth(ep.initial_guess, obs.sat.pos)[0])
            errs.append(obs.truth_error)
    if not els:
        raise EmptyInput("no labelled measurements to fit on")
    return fit_elevation_weights(np.array(els), np.array(errs))


def heuristic_weights(method: str, epoch: Epoch, fit: ElevationWeightFit | None = None) -> np.ndarray:
    """Per-measurement weights for one of the classic schemes.

    unit: all ones.  cn0: proportional to 10^(cn0/10), normalised to mean
    one.  elevation: inverse of the fitted variance law, evaluated at each
    satellite's elevation from the initial guess.
    """
    if method == "unit":
        return np.ones(len(epoch))
    if method == "cn0":
        cn0 = np.array([obs.cn0 for obs in epoch.observations], dtype=float)
        w = 10.0 ** (cn0 / 10.0)
        return w / w.mean()
    if method == "elevation":
        if fit is None:
            raise MissingFit("elevation weighting requires a fitted variance law")
        el = np.array(
            [elevation_azimuth(epoch.initial_guess, obs.sat.pos)[0] for obs in epoch.observations]
        )
        return 1.0 / fit.variance(el)
    raise ValueError(f"unknown weighting method {method!r}")
