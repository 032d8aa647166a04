"""Point forecasts and the rolling out-of-sample evaluation protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..stats.pmad import pmad
from .garch import ArmaGarchFit, fit_arma_garch, forecast_arma_garch
from .sarima import SarimaFit, _forecast_from_state, fit_sarima, forecast_sarima, predicted_states

DEFAULT_HORIZONS = (1, 4, 7, 10)


def forecast(fit, history, h: int) -> np.ndarray:
    """Iterated conditional-expectation forecasts 1..h past the end of ``history``."""
    if isinstance(fit, SarimaFit):
        return forecast_sarima(fit, history, h)
    if isinstance(fit, ArmaGarchFit):
        return forecast_arma_garch(fit, history, h)
    raise TypeError(f"cannot forecast from {type(fit).__name__}")


def refit_like(fit, series, seed: int = 0):
    """Refit the same specification on new data."""
    if isinstance(fit, SarimaFit):
        return fit_sarima(series, fit.order, fit.seasonal_order, s=fit.s, include_mean=fit.mean is not None, seed=seed)
    return fit_arma_garch(series, ar_order=fit.ar_order, seed=seed, strict=False)


@dataclass
class RollingForecast:
    frame: pd.DataFrame
    pmad: dict[int, float]

    def to_csv(self, path) -> None:
        self.frame.to_csv(path, index=False, lineterminator="\n")


def rolling_forecast(
    series,
    fit,
    horizons=DEFAULT_HORIZONS,
    n_targets: int = 96,
    refit: bool = False,
    seed: int = 0,
    integrate: bool = False,
) -> RollingForecast:
    """Forecast each of the last ``n_targets`` values from origin ``t = target - h``.

    With ``refit`` the model is re-estimated on data through each origin;
    otherwise ``fit`` is reused and only the filtered state changes.  With
    ``integrate`` the model describes first differences of ``series`` and
    its forecasts are cumulated back to levels.
    """
    y = np.asarray(series, dtype=float)
    horizons = sorted({int(h) for h in horizons})
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be >= 1")
    T = len(y)
    first_origin = T - n_targets - horizons[-1]
    if n_targets < 1 or first_origin < 1:
        raise ValueError("series too short for the requested evaluation window")

    states = None
    n_diff = 0
    dy = np.diff(y)
    if integrate:
        if refit:
            raise ValueError("refit is not supported together with integrate")

        def path_from(t):
            if t not in cache:
                cache[t] = y[t] + np.cumsum(forecast(fit, dy[:t], horizons[-1]))
            return cache[t]
    elif isinstance(fit, SarimaFit) and not refit and not fit.degenerate:
        states = predicted_states(fit, y)
        n_diff = fit.order[1] + fit.seasonal_order[1] * fit.s
        if first_origin < n_diff:
            raise ValueError("history does not cover the differencing lags")

    cache: dict[int, np.ndarray] = {}

    def level_path(t):
        if t not in cache:
            if states is not None:
                cache[t] = _forecast_from_state(fit, states[t - n_diff], y[: t + 1], horizons[-1])
            else:
                model = refit_like(fit, y[: t + 1], seed) if refit else fit
                cache[t] = forecast(model, y[: t + 1], horizons[-1])
        return cache[t]

    if not integrate:
        path_from = level_path

    rows = []
    scores = {}
    for h in horizons:
        preds = np.empty(n_targets)
        for k, j in enumerate(range(T - n_targets, T)):
            t = j - h
            preds[k] = path_from(t)[h - 1]
            rows.append((t, h, preds[k], y[j]))
        scores[h] = pmad(y[T - n_targets:], preds)
    frame = pd.DataFrame(rows, columns=["origin_t", "h", "prediction", "actual"])
    return RollingForecast(frame, scores)
