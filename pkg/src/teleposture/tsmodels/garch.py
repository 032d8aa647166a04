"""AR(p) + GARCH(1,1)-in-mean with skewed-t innovations.

Model, for observations ``y_t``::

    y_t - mu_t = sum_j phi_j (y_{t-j} - mu_{t-j}) + eps_t
    mu_t       = mu + xi * sigma_t
    sigma_t^2  = omega + alpha1 * eps_{t-1}^2 + beta1 * sigma_{t-1}^2
    eps_t      = sigma_t * z_t,   z_t ~ standardised skewed t(nu, lam)

Estimation is joint maximum likelihood: Nelder-Mead from several seeded
starts in a transformed space that enforces the constraints, then Newton
polishing on the natural parameters.  Standard errors come from the inverse
observed information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import optimize
from scipy.special import expit

from ..errors import DegenerateInputError, FitFailure
from . import skewt
from ._numdiff import gradient, hessian

MAX_PERSISTENCE = 0.9999
NU_MAX = 500.0


def param_names(ar_order: int) -> list[str]:
    return ["mu", "xi", *[f"phi{j + 1}" for j in range(ar_order)], "omega", "alpha1", "beta1", "nu", "lam"]


@nb.njit(cache=True, nogil=True)
def _filter(y, mu, xi, phi, omega, alpha, beta, nu, lam, backcast, sigma2, eps):
    n = y.shape[0]
    p = phi.shape[0]
    m, s, g, const = skewt._log_norm(nu, lam)
    dev = np.empty(n)
    ll = 0.0
    for t in range(n):
        if t < p:
            sigma2[t] = backcast
            dev[t] = y[t] - (mu + xi * math.sqrt(backcast))
            eps[t] = 0.0
            continue
        prev_e2 = backcast if t == p else eps[t - 1] * eps[t - 1]
        sigma2[t] = omega + alpha * prev_e2 + beta * sigma2[t - 1]
        sd = math.sqrt(sigma2[t])
        dev[t] = y[t] - (mu + xi * sd)
        e = dev[t]
        for j in range(p):
            e -= phi[j] * dev[t - 1 - j]
        eps[t] = e
        ll += skewt._logpdf_one(e / sd, nu, m, s, g, const) - math.log(sd)
    return ll


@dataclass
class ArmaGarchFit:
    ar_order: int
    params: dict[str, float]
    std_errors: dict[str, float]
    fitted: np.ndarray
    sigma: np.ndarray
    resid: np.ndarray
    log_likelihood: float
    aic: float
    converged: bool
    n_obs: int
    backcast: float
    scaled_gradient: np.ndarray = field(repr=False, default=None)
    family: str = "ArmaGarch"

    @property
    def phi(self) -> np.ndarray:
        return np.array([self.params[f"phi{j + 1}"] for j in range(self.ar_order)])

    @property
    def mu(self) -> float:
        return self.params["mu"]

    @property
    def xi(self) -> float:
        return self.params["xi"]

    @property
    def omega(self) -> float:
        return self.params["omega"]

    @property
    def alpha1(self) -> float:
        return self.params["alpha1"]

    @property
    def beta1(self) -> float:
        return self.params["beta1"]

    @property
    def skew_t(self) -> tuple[float, float]:
        return self.params["nu"], self.params["lam"]

    @property
    def n_params(self) -> int:
        return len(self.params)

    def vector(self) -> np.ndarray:
        return np.array([self.params[k] for k in param_names(self.ar_order)])

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "orders": {"ar": self.ar_order, "garch": [1, 1]},
            "coefficients": dict(self.params),
            "std_errors": dict(self.std_errors),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "backcast": self.backcast,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArmaGarchFit":
        """Rebuild a fit for forecasting; in-sample arrays are not stored."""
        p = int(d["orders"]["ar"])
        params = {k: float(d["coefficients"][k]) for k in param_names(p)}
        return cls(
            ar_order=p,
            params=params,
            std_errors=dict(d.get("std_errors", {})),
            fitted=np.zeros(0),
            sigma=np.zeros(0),
            resid=np.zeros(0),
            log_likelihood=float(d["log_likelihood"]),
            aic=float(d["aic"]),
            converged=bool(d["converged"]),
            n_obs=int(d["n_obs"]),
            backcast=float(d["backcast"]),
        )


def _unpack(theta, p):
    mu, xi = theta[0], theta[1]
    phi = np.ascontiguousarray(theta[2:2 + p])
    omega, alpha, beta, nu, lam = theta[2 + p:]
    return mu, xi, phi, omega, alpha, beta, nu, lam


def _feasible(theta, p) -> bool:
    _, _, _, omega, alpha, beta, nu, _ = _unpack(theta, p)
    return omega > 0 and alpha >= 0 and beta >= 0 and alpha + beta < 1 and 2 < nu <= NU_MAX


def loglikelihood(theta, y, p, backcast) -> float:
    """Log-likelihood at natural parameters ``theta`` (ordering of :func:`param_names`)."""
    if not _feasible(theta, p):
        return -np.inf
    mu, xi, phi, omega, alpha, beta, nu, lam = _unpack(theta, p)
    n = len(y)
    ll = _filter(y, mu, xi, phi, omega, alpha, beta, nu, lam, backcast, np.empty(n), np.empty(n))
    return ll if np.isfinite(ll) else -np.inf


def _to_natural(u, p):
    mu, xi = u[0], u[1]
    phi = u[2:2 + p]
    w, a, b, v, lam = u[2 + p:]
    persistence = MAX_PERSISTENCE * expit(a)
    share = expit(b)
    nu = 2.0 + min(math.exp(min(v, 50.0)), NU_MAX - 2.0 - 1e-9)
    return np.r_[mu, xi, phi, math.exp(min(w, 50.0)), persistence * share, persistence * (1 - share), nu, lam]


def _to_unconstrained(theta, p):
    mu, xi, phi, omega, alpha, beta, nu, lam = _unpack(theta, p)
    pers = alpha + beta
    share = alpha / pers
    a = math.log(pers / (MAX_PERSISTENCE - pers))
    b = math.log(share / (1 - share))
    return np.r_[mu, xi, phi, math.log(omega), a, b, math.log(nu - 2.0), lam]


def _ar_ols(y, p):
    n = len(y)
    X = np.column_stack([np.ones(n - p)] + [y[p - 1 - j:n - 1 - j] for j in range(p)])
    beta, *_ = np.linalg.lstsq(X, y[p:], rcond=None)
    resid = y[p:] - X @ beta
    return beta, resid


def fit_arma_garch(
    series,
    ar_order: int = 2,
    restarts: int = 5,
    seed: int = 0,
    strict: bool = True,
    maxiter: int = 20000,
) -> ArmaGarchFit:
    """Joint ML fit; raises :class:`FitFailure` (with the best fit attached) if it does not converge."""
    y = np.ascontiguousarray(series, dtype=float)
    p = int(ar_order)
    if len(y) < 200:
        raise ValueError("ARMA+GARCH fitting needs at least 200 observations")
    if np.all(y == y[0]):
        raise DegenerateInputError("constant series")

    beta_ols, resid = _ar_ols(y, p)
    backcast = float(resid.var())
    phi0 = np.clip(beta_ols[1:], -0.95, 0.95)
    mu0 = beta_ols[0] / max(1 - phi0.sum(), 0.05)
    start = np.r_[mu0, 0.0, phi0, 0.1 * backcast, 0.1, 0.8, 8.0, 0.0]
    u0 = _to_unconstrained(start, p)

    def objective(u):
        theta = _to_natural(u, p)
        ll = loglikelihood(theta, y, p, backcast)
        return -ll if np.isfinite(ll) else 1e300

    rng = np.random.default_rng(seed)
    scale = np.r_[np.sqrt(backcast), np.ones(len(u0) - 1)] * 0.5
    best = None
    for r in range(restarts):
        u_start = u0 if r == 0 else u0 + rng.normal(0, 1, len(u0)) * scale
        res = optimize.minimize(
            objective,
            u_start,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "maxfev": maxiter, "xatol": 1e-7, "fatol": 1e-9, "adaptive": True},
        )
        if best is None or res.fun < best.fun:
            best = res
    theta = _to_natural(best.x, p)
    theta, hess_ok = _newton_polish(theta, y, p, backcast)

    f = lambda th: loglikelihood(th, y, p, backcast)
    ll = f(theta)
    H = hessian(f, theta)
    try:
        cov = np.linalg.inv(-H)
        se = np.sqrt(np.diag(cov))
        se_ok = bool(np.all(np.isfinite(se)) and np.all(np.diag(cov) > 0))
    except np.linalg.LinAlgError:
        se = np.full(len(theta), np.nan)
        se_ok = False
    g = gradient(f, theta)
    scaled = g * np.where(np.isfinite(se), se, 1.0)

    n = len(y)
    sigma2 = np.empty(n)
    eps = np.empty(n)
    mu, xi, phi, omega, alpha, beta, nu, lam = _unpack(theta, p)
    _filter(y, mu, xi, phi, omega, alpha, beta, nu, lam, backcast, sigma2, eps)
    fitted = y - eps
    fitted[:p] = np.nan
    resid_out = eps.copy()
    resid_out[:p] = np.nan

    names = param_names(p)
    k = len(names)
    converged = bool(hess_ok and se_ok and np.all(np.abs(scaled) <= 1e-3))
    fit = ArmaGarchFit(
        ar_order=p,
        params=dict(zip(names, map(float, theta))),
        std_errors=dict(zip(names, map(float, se))),
        fitted=fitted,
        sigma=np.sqrt(sigma2),
        resid=resid_out,
        log_likelihood=float(ll),
        aic=float(2 * k - 2 * ll),
        converged=converged,
        n_obs=n,
        backcast=backcast,
        scaled_gradient=scaled,
    )
    if not _feasible(theta, p):
        raise FitFailure("optimum violates the GARCH constraints", best=fit)
    if strict and not converged:
        raise FitFailure("ARMA+GARCH fit did not converge", best=fit)
    return fit


def _newton_polish(theta, y, p, backcast, iters: int = 25):
    """Newton steps on the natural parameters; returns (theta, hessian_negative_definite)."""
    f = lambda th: loglikelihood(th, y, p, backcast)
    ok = False
    for _ in range(iters):
        H = hessian(f, theta)
        g = gradient(f, theta)
        try:
            np.linalg.cholesky(-H)
        except np.linalg.LinAlgError:
            return theta, False
        ok = True
        step = np.linalg.solve(-H, g)
        f0 = f(theta)
        t = 1.0
        while t > 1e-4:
            cand = theta + t * step
            if _feasible(cand, p) and f(cand) >= f0 - 1e-10:
                break
            t /= 2
        else:
            break
        theta = cand
        se = np.sqrt(np.diag(np.linalg.inv(-H)))
        if np.max(np.abs(g * se)) < 1e-6 and np.max(np.abs(t * step) / se) < 1e-6:
            break
    return theta, ok


def simulate_arma_garch(
    n: int,
    phi=(0.5, 0.2),
    omega: float = 0.1,
    alpha1: float = 0.1,
    beta1: float = 0.8,
    mu: float = 0.0,
    xi: float = 0.0,
    nu: float = 8.0,
    lam: float = 0.0,
    seed: int = 0,
    burn: int = 1000,
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phi = np.asarray(phi, dtype=float)
    p = len(phi)
    total = n + burn
    z = skewt.sample(rng, total, nu, lam)
    s2 = omega / max(1 - alpha1 - beta1, 1e-6)
    dev = np.zeros(total)
    y = np.zeros(total)
    e_prev = 0.0
    for t in range(total):
        s2 = omega + alpha1 * e_prev**2 + beta1 * s2 if t > 0 else s2
        sd = math.sqrt(s2)
        e = sd * z[t]
        ar = sum(phi[j] * dev[t - 1 - j] for j in range(p) if t - 1 - j >= 0)
        dev[t] = ar + e
        y[t] = mu + xi * sd + dev[t]
        e_prev = e
    return y[burn:]


def simulate_from_fit(fit: ArmaGarchFit, n: int, seed: int = 0, burn: int = 1000) -> np.ndarray:
    nu, lam = fit.skew_t
    return simulate_arma_garch(
        n, fit.phi, fit.omega, fit.alpha1, fit.beta1, fit.mu, fit.xi, nu, lam, seed=seed, burn=burn
    )


def forecast_arma_garch(fit: ArmaGarchFit, history, h: int) -> np.ndarray:
    """Conditional-mean forecasts 1..h steps past the end of ``history``."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    y = np.ascontiguousarray(history, dtype=float)
    p = fit.ar_order
    if len(y) < p + 1:
        raise ValueError("history too short for the AR order")
    mu, xi, phi, omega, alpha, beta, nu, lam = _unpack(fit.vector(), p)
    n = len(y)
    sigma2 = np.empty(n)
    eps = np.empty(n)
    _filter(y, mu, xi, phi, omega, alpha, beta, nu, lam, fit.backcast, sigma2, eps)
    dev = list(y - (mu + xi * np.sqrt(sigma2)))
    s2 = omega + alpha * eps[-1] ** 2 + beta * sigma2[-1]
    out = np.empty(h)
    for k in range(h):
        if k > 0:
            s2 = omega + (alpha + beta) * s2
        d = sum(phi[j] * dev[-1 - j] for j in range(p))
        out[k] = mu + xi * math.sqrt(s2) + d
        dev.append(d)
    return out
