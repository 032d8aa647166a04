"""AIC grid selection over either model family."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .._parallel import parallel_map
from ..errors import BudgetExceeded, DegenerateInputError, FitFailure
from .garch import fit_arma_garch
from .sarima import fit_sarima

FAMILIES = ("ArmaGarch", "Sarima")

# (p,d,q) in [0,5]x{0,1}x[0,5], same for the seasonal part
FULL_GRID_SIZE = 6 * 2 * 6 * 6 * 2 * 6


@dataclass(frozen=True)
class ModelSpec:
    """Candidate models for selection.

    For ``Sarima`` each grid entry is ``((p, d, q), (P, D, Q))``; for
    ``ArmaGarch`` each entry is an AR order.
    """

    family: str
    grid: tuple = ()
    s: int = 24
    criterion: str = "aic"
    budget: int = FULL_GRID_SIZE

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.grid:
            raise ValueError("model grid is empty")
        if self.criterion != "aic":
            raise ValueError("only AIC selection is supported")
        if self.s < 1:
            raise ValueError("seasonal period must be >= 1")
        if self.family == "Sarima":
            object.__setattr__(
                self, "grid", tuple((tuple(map(int, o)), tuple(map(int, so))) for o, so in self.grid)
            )
        else:
            object.__setattr__(self, "grid", tuple(int(p) for p in self.grid))

    @classmethod
    def sarima_grid(
        cls,
        p=range(6),
        d=(0, 1),
        q=range(6),
        P=range(6),
        D=(0, 1),
        Q=range(6),
        s: int = 24,
        budget: int = FULL_GRID_SIZE,
    ) -> "ModelSpec":
        grid = tuple(
            ((a, b, c), (e, f, g)) for a, b, c, e, f, g in itertools.product(p, d, q, P, D, Q)
        )
        return cls("Sarima", grid, s=s, budget=budget)

    @staticmethod
    def label(entry) -> str:
        if isinstance(entry, tuple):
            (p, d, q), (P, D, Q) = entry
            return f"({p},{d},{q})({P},{D},{Q})"
        return f"AR({entry})+GARCH(1,1)"


@dataclass
class Selection:
    best: object
    table: pd.DataFrame
    fits: dict = field(default_factory=dict, repr=False)

    def to_csv(self, path) -> None:
        self.table.to_csv(path, index=False, lineterminator="\n")


def _fit_one(series, spec: ModelSpec, entry, seed: int):
    if spec.family == "Sarima":
        order, seasonal = entry
        return fit_sarima(series, order, seasonal, s=spec.s, seed=seed)
    return fit_arma_garch(series, ar_order=entry, seed=seed, strict=False)


def select_model(series, spec: ModelSpec, threads: int | None = 1, seed: int = 0) -> Selection:
    """Fit every grid point and return the minimum-AIC converged fit with the ranking."""
    if len(spec.grid) > spec.budget:
        raise BudgetExceeded(f"grid has {len(spec.grid)} models, budget is {spec.budget}")
    y = np.asarray(series, dtype=float)

    def run(entry):
        try:
            fit = _fit_one(y, spec, entry, seed)
        except (ValueError, FitFailure, DegenerateInputError, np.linalg.LinAlgError) as exc:
            return entry, None, f"{type(exc).__name__}: {exc}"
        if not fit.converged:
            return entry, fit, "not converged"
        if not np.isfinite(fit.aic) and fit.aic != -np.inf:
            return entry, fit, "non-finite likelihood"
        return entry, fit, ""

    results = parallel_map(run, spec.grid, threads)
    rows = []
    fits = {}
    for entry, fit, status in results:
        label = ModelSpec.label(entry)
        fits[label] = fit
        rows.append(
            {
                "model": label,
                "aic": fit.aic if fit is not None else np.nan,
                "log_likelihood": fit.log_likelihood if fit is not None else np.nan,
                "n_params": fit.n_params if fit is not None else np.nan,
                "status": status or "ok",
            }
        )
    table = pd.DataFrame(rows)
    ok = table["status"] == "ok"
    if not ok.any():
        failures = "; ".join(f"{r.model}: {r.status}" for r in table.itertuples())
        raise FitFailure(f"every grid point failed: {failures}")
    table["_ok"] = ~ok
    table = table.sort_values(["_ok", "aic"], kind="stable").drop(columns="_ok").reset_index(drop=True)
    table.insert(0, "rank", np.arange(1, len(table) + 1))
    best = fits[table.loc[0, "model"]]
    return Selection(best=best, table=table, fits=fits)
