"""Select a seasonal ARIMA for hourly attackers and score rolling forecasts.

Run with ``python demos/forecast_diurnal.py``.
"""

from teleposture.flows import extract_d1
from teleposture.posture import build_series
from teleposture.synth import generate, load_scenario
from teleposture.tsmodels import ModelSpec, rolling_forecast, select_model

sc = generate(load_scenario("diurnal"))
y = build_series(extract_d1(sc.flows, window_seconds=sc.manifest["window_seconds"]), "H").attackers.astype(float)

grid = (((1, 0, 0), (0, 1, 1)), ((1, 0, 1), (0, 1, 1)), ((2, 0, 0), (0, 1, 1)), ((1, 0, 0), (1, 1, 1)))
sel = select_model(y[: len(y) - 106], ModelSpec("Sarima", grid, s=24))
print(sel.table.to_string(index=False))

roll = rolling_forecast(y, sel.best, horizons=range(1, 11), n_targets=96)
for h, v in roll.pmad.items():
    print(f"h={h:2d}  PMAD {v:.4f}")
