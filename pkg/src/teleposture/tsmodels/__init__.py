"""Model fitting, selection and forecasting for posture series."""

from .forecast import DEFAULT_HORIZONS, RollingForecast, forecast, refit_like, rolling_forecast
from .garch import ArmaGarchFit, fit_arma_garch, forecast_arma_garch, simulate_arma_garch, simulate_from_fit
from .sarima import SarimaFit, fit_sarima, forecast_sarima, simulate_sarima
from .selection import FULL_GRID_SIZE, ModelSpec, Selection, select_model

__all__ = [
    "ArmaGarchFit",
    "DEFAULT_HORIZONS",
    "FULL_GRID_SIZE",
    "ModelSpec",
    "RollingForecast",
    "SarimaFit",
    "Selection",
    "fit_arma_garch",
    "fit_sarima",
    "forecast",
    "forecast_arma_garch",
    "forecast_sarima",
    "refit_like",
    "rolling_forecast",
    "select_model",
    "simulate_arma_garch",
    "simulate_from_fit",
    "simulate_sarima",
]
