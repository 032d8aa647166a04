"""Multiplicative seasonal ARIMA (p,d,q)(P,D,Q)_s.

With ``w = (1-B)^d (1-B^s)^D y``::

    (1 - phi(B)) (1 - Phi(B^s)) (w_t - c) = (1 + theta(B)) (1 + Theta(B^s)) e_t

so AR coefficients enter with a minus sign and MA coefficients with a plus
sign.  The mean ``c`` is estimated only when no differencing is applied.

Estimation: conditional sum of squares from several seeded starts, then
exact Gaussian likelihood (Kalman filter, stationary initialisation) from
the most promising CSS optima, then Newton polishing.  Coefficients are
optimised through the Jones/Durbin-Levinson map, so every iterate is
stationary and invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import linalg, optimize, signal

from ..errors import DegenerateInputError, FitFailure
from ._numdiff import gradient, hessian


# --------------------------------------------------------------------------- polynomials

def difference(y, d: int = 0, D: int = 0, s: int = 1) -> np.ndarray:
    w = np.asarray(y, dtype=float)
    for _ in range(d):
        w = w[1:] - w[:-1]
    for _ in range(D):
        w = w[s:] - w[:-s]
    return w


def difference_poly(d: int, D: int, s: int) -> np.ndarray:
    """Coefficients (increasing powers of B) of (1-B)^d (1-B^s)^D."""
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    seas = np.zeros(s + 1)
    seas[0], seas[s] = 1.0, -1.0
    for _ in range(D):
        poly = np.convolve(poly, seas)
    return poly


def _seasonal(coefs, s, sign):
    out = np.zeros(len(coefs) * s + 1)
    out[0] = 1.0
    for k, c in enumerate(coefs):
        out[(k + 1) * s] = sign * c
    return out


def ar_polynomial(phi, Phi, s) -> np.ndarray:
    """1 - sum a_k B^k in increasing powers of B."""
    return np.convolve(np.r_[1.0, -np.asarray(phi, dtype=float)], _seasonal(Phi, s, -1.0))


def ma_polynomial(theta, Theta, s) -> np.ndarray:
    return np.convolve(np.r_[1.0, np.asarray(theta, dtype=float)], _seasonal(Theta, s, 1.0))


def _trim(coefs_increasing) -> np.ndarray:
    """Drop negligible top coefficients; they only add roots far outside the unit circle."""
    c = np.asarray(coefs_increasing, dtype=float)
    keep = np.flatnonzero(np.abs(c) > 1e-12 * np.abs(c).max())
    return c[: keep[-1] + 1] if len(keep) else c[:1]


def _min_root_modulus(coefs_increasing) -> float:
    c = _trim(coefs_increasing)
    if len(c) <= 1:
        return np.inf
    return float(np.min(np.abs(np.roots(c[::-1]))))


def is_stationary(phi) -> bool:
    return _min_root_modulus(np.r_[1.0, -np.asarray(phi, dtype=float)]) > 1.0


def is_invertible(theta) -> bool:
    return _min_root_modulus(np.r_[1.0, np.asarray(theta, dtype=float)]) > 1.0


def constrain(x) -> np.ndarray:
    """Unconstrained reals -> coefficients a of a stationary 1 - sum a_k z^k."""
    x = np.asarray(x, dtype=float)
    r = x / np.sqrt(1.0 + x * x)
    a = np.zeros(0)
    for k, rk in enumerate(r):
        a = np.r_[a - rk * a[::-1], rk] if k else np.array([rk])
    return a


def unconstrain(a) -> np.ndarray:
    a = np.asarray(a, dtype=float).copy()
    k = len(a)
    r = np.zeros(k)
    for j in range(k - 1, -1, -1):
        rk = a[j]
        r[j] = rk
        if j:
            a = (a[:j] + rk * a[:j][::-1]) / (1.0 - rk * rk)
    r = np.clip(r, -1 + 1e-12, 1 - 1e-12)
    return r / np.sqrt(1.0 - r * r)


# --------------------------------------------------------------------------- Kalman filter

@nb.njit(cache=True, nogil=True)
def _kalman(w, phi_full, theta_full, P0, store):
    """Concentrated-likelihood pieces for a zero-mean ARMA in Harvey form.

    Returns (sum v^2/F, sum log F, innovations v, F, predicted states).
    """
    n = w.shape[0]
    r = P0.shape[0]
    p = phi_full.shape[0]
    R = np.zeros(r)
    R[0] = 1.0
    for i in range(theta_full.shape[0]):
        R[i + 1] = theta_full[i]
    a = np.zeros(r)
    P = P0.copy()
    M = np.empty((r, r))
    v_out = np.empty(n)
    F_out = np.empty(n)
    states = np.zeros((n if store else 1, r))
    ssq = 0.0
    logdet = 0.0
    for t in range(n):
        F = P[0, 0]
        v = w[t] - a[0]
        v_out[t] = v
        F_out[t] = F
        ssq += v * v / F
        logdet += math.log(F)
        # update
        for i in range(r):
            a[i] += P[i, 0] * v / F
        col = P[:, 0].copy()
        for i in range(r):
            ci = col[i] / F
            for j in range(r):
                P[i, j] -= ci * col[j]
        # predict: a <- T a ; P <- T P T' + R R'
        a0 = a[0]
        for i in range(r - 1):
            a[i] = a[i + 1] + (phi_full[i] * a0 if i < p else 0.0)
        a[r - 1] = phi_full[r - 1] * a0 if r - 1 < p else 0.0
        for i in range(r):
            fi = phi_full[i] if i < p else 0.0
            for j in range(r):
                M[i, j] = fi * P[0, j] + (P[i + 1, j] if i + 1 < r else 0.0)
        for i in range(r):
            m0 = M[i, 0]
            for j in range(r):
                fj = phi_full[j] if j < p else 0.0
                P[i, j] = fj * m0 + (M[i, j + 1] if j + 1 < r else 0.0) + R[i] * R[j]
        if store:
            for i in range(r):
                states[t, i] = a[i]
    return ssq, logdet, v_out, F_out, states


def _state_space(ar_full, ma_full):
    phi_full = -np.asarray(ar_full[1:], dtype=float)
    theta_full = np.asarray(ma_full[1:], dtype=float)
    r = max(len(phi_full), len(theta_full) + 1, 1)
    T = np.zeros((r, r))
    T[: len(phi_full), 0] = phi_full
    T[np.arange(r - 1), np.arange(1, r)] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    R[1:len(theta_full) + 1] = theta_full
    P0 = linalg.solve_discrete_lyapunov(T, np.outer(R, R))
    P0 = 0.5 * (P0 + P0.T)
    return np.ascontiguousarray(phi_full), np.ascontiguousarray(theta_full), np.ascontiguousarray(P0)


def exact_loglike(w, ar_full, ma_full, store_states: bool = False):
    """Concentrated exact Gaussian log-likelihood of zero-mean ``w``.

    Returns (loglike, sigma2, innovations, F, states).
    """
    w = np.ascontiguousarray(w, dtype=float)
    n = len(w)
    phi_full, theta_full, P0 = _state_space(ar_full, ma_full)
    ssq, logdet, v, F, states = _kalman(w, phi_full, theta_full, P0, store_states)
    sigma2 = ssq / n
    if not sigma2 > 0:
        return np.inf, 0.0, v, F, states
    ll = -0.5 * n * (math.log(2 * math.pi) + 1.0 + math.log(sigma2)) - 0.5 * logdet
    return ll, sigma2, v, F, states


# --------------------------------------------------------------------------- fit object

@dataclass
class SarimaFit:
    order: tuple[int, int, int]
    seasonal_order: tuple[int, int, int]
    s: int
    phi: np.ndarray
    theta: np.ndarray
    Phi: np.ndarray
    Theta: np.ndarray
    mean: float | None
    sigma2: float
    residuals: np.ndarray
    log_likelihood: float
    aic: float
    converged: bool
    invertible: bool
    n_obs: int
    std_errors: dict[str, float] = field(default_factory=dict)
    scaled_gradient: np.ndarray | None = field(default=None, repr=False)
    fitted: np.ndarray | None = field(default=None, repr=False)
    degenerate: bool = False
    family: str = "Sarima"

    @property
    def n_params(self) -> int:
        p, _, q = self.order
        P, _, Q = self.seasonal_order
        return p + q + P + Q + (self.mean is not None) + 1

    @property
    def coefficient_names(self) -> list[str]:
        p, _, q = self.order
        P, _, Q = self.seasonal_order
        names = ["mean"] if self.mean is not None else []
        names += [f"phi{i + 1}" for i in range(p)] + [f"theta{i + 1}" for i in range(q)]
        names += [f"Phi{i + 1}" for i in range(P)] + [f"Theta{i + 1}" for i in range(Q)]
        return names

    def coefficients(self) -> dict[str, float]:
        vals = ([self.mean] if self.mean is not None else []) + [
            *self.phi, *self.theta, *self.Phi, *self.Theta
        ]
        return dict(zip(self.coefficient_names, map(float, vals)))

    def vector(self) -> np.ndarray:
        return np.array(list(self.coefficients().values()), dtype=float)

    @property
    def ar_full(self) -> np.ndarray:
        return ar_polynomial(self.phi, self.Phi, self.s)

    @property
    def ma_full(self) -> np.ndarray:
        return ma_polynomial(self.theta, self.Theta, self.s)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "orders": {"order": list(self.order), "seasonal_order": list(self.seasonal_order), "s": self.s},
            "coefficients": self.coefficients(),
            "std_errors": dict(self.std_errors),
            "sigma2": self.sigma2,
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "converged": self.converged,
            "invertible": self.invertible,
            "n_obs": self.n_obs,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SarimaFit":
        """Rebuild a fit for forecasting; residuals are not stored."""
        o = d["orders"]
        p, dd, q = o["order"]
        P, D, Q = o["seasonal_order"]
        c = d["coefficients"]
        pick = lambda stem, n: np.array([float(c[f"{stem}{i + 1}"]) for i in range(n)])
        return cls(
            order=(p, dd, q),
            seasonal_order=(P, D, Q),
            s=int(o["s"]),
            phi=pick("phi", p),
            theta=pick("theta", q),
            Phi=pick("Phi", P),
            Theta=pick("Theta", Q),
            mean=float(c["mean"]) if "mean" in c else None,
            sigma2=float(d["sigma2"]),
            residuals=np.zeros(0),
            log_likelihood=float(d["log_likelihood"]),
            aic=float(d["aic"]),
            converged=bool(d["converged"]),
            invertible=bool(d["invertible"]),
            n_obs=int(d["n_obs"]),
            std_errors=dict(d.get("std_errors", {})),
            degenerate=bool(d.get("degenerate", False)),
        )


class _Layout:
    """Maps between the packed parameter vector and model coefficients."""

    def __init__(self, order, seasonal_order, s, include_mean):
        self.p, self.d, self.q = order
        self.P, self.D, self.Q = seasonal_order
        self.s = s
        self.include_mean = include_mean
        self.k = self.p + self.q + self.P + self.Q + int(include_mean)

    def split(self, vec):
        i = 0
        mean = 0.0
        if self.include_mean:
            mean = vec[0]
            i = 1
        parts = []
        for n in (self.p, self.q, self.P, self.Q):
            parts.append(np.asarray(vec[i:i + n], dtype=float))
            i += n
        return mean, parts

    def natural_from_free(self, x):
        mean, (a, b, A, Bq) = self.split(x)
        return np.r_[[mean] if self.include_mean else [], constrain(a), -constrain(b), constrain(A), -constrain(Bq)]

    def free_from_natural(self, theta):
        mean, (a, b, A, Bq) = self.split(theta)
        return np.r_[[mean] if self.include_mean else [], unconstrain(a), unconstrain(-b), unconstrain(A), unconstrain(-Bq)]

    def polys(self, theta):
        mean, (phi, th, Phi, Th) = self.split(theta)
        return mean, ar_polynomial(phi, Phi, self.s), ma_polynomial(th, Th, self.s)

    def admissible(self, theta, invertible: bool = True) -> bool:
        if not np.all(np.isfinite(theta)):
            return False
        _, (phi, th, Phi, Th) = self.split(theta)
        if not (is_stationary(phi) and is_stationary(Phi)):
            return False
        return not invertible or (is_invertible(th) and is_invertible(Th))

    def pull_inside(self, theta, margin: float = 1.01, factor: float = 1.02):
        """Scale AR roots outward for any AR factor with a root modulus below ``margin``."""
        theta = np.array(theta, dtype=float)
        i = int(self.include_mean)
        for n, kind in ((self.p, "ar"), (self.q, "ma"), (self.P, "ar"), (self.Q, "ma")):
            if kind == "ar" and n and _min_root_modulus(np.r_[1.0, -theta[i:i + n]]) < margin:
                theta[i:i + n] /= factor ** np.arange(1, n + 1)
            i += n
        return theta

    def flip_ma(self, theta):
        """Reflect MA roots inside the unit circle; the Gaussian likelihood is unchanged."""
        theta = np.array(theta, dtype=float)
        i = int(self.include_mean) + self.p
        for n in (self.q, None, self.Q):
            if n is None:
                i += self.P
                continue
            if n:
                theta[i:i + n] = flip_inside_roots(theta[i:i + n])
            i += n
        return theta


def flip_inside_roots(theta) -> np.ndarray:
    """Coefficients of 1 + sum theta_k z^k with roots inside the unit circle reflected out."""
    theta = np.asarray(theta, dtype=float)
    roots = np.roots(_trim(np.r_[1.0, theta])[::-1])
    inside = np.abs(roots) < 1.0
    if not inside.any():
        return theta
    roots[inside] = 1.0 / np.conj(roots[inside])
    out = np.zeros(len(theta))
    flipped = np.real(np.poly(1.0 / roots))[1:]
    out[: len(flipped)] = flipped
    return out


def _css(w, mean, ar_full, ma_full):
    e = signal.lfilter(ar_full, ma_full, w - mean)
    start = len(ar_full) - 1
    return float(e[start:] @ e[start:])


def fit_sarima(
    series,
    order=(0, 0, 0),
    seasonal_order=(0, 0, 0),
    s: int = 24,
    include_mean: bool | None = None,
    n_starts: int = 12,
    n_refine: int = 3,
    seed: int = 0,
    strict: bool = False,
    start=None,
) -> SarimaFit:
    """Fit a multiplicative seasonal ARIMA by CSS then exact maximum likelihood."""
    p, d, q = map(int, order)
    P, D, Q = map(int, seasonal_order)
    if min(p, q, P, Q) < 0 or d not in (0, 1) or D not in (0, 1) or s < 1:
        raise ValueError(f"invalid orders {order}x{seasonal_order}_{s}")
    y = np.asarray(series, dtype=float)
    w = difference(y, d, D, s)
    n_diff = d + D * s
    if include_mean is None:
        include_mean = d == 0 and D == 0
    need = max(3 * s if (P or Q or D) else 0, p + s * P + q + s * Q + 2, 3)
    if len(w) < need:
        raise ValueError(f"series too short: {len(w)} differenced points, need {need}")

    layout = _Layout((p, d, q), (P, D, Q), s, include_mean)
    centre = float(w.mean()) if include_mean else 0.0

    if np.all(w == (w[0] if include_mean else 0.0)):
        return _degenerate_fit(layout, w, y, n_diff, centre)

    def css_objective(x):
        mean, ar, ma = layout.polys(layout.natural_from_free(x))
        return _css(w, mean, ar, ma) / len(w)

    def nll_natural(theta, invertible=True):
        if not layout.admissible(theta, invertible):
            return np.inf
        mean, ar, ma = layout.polys(theta)
        ll = exact_loglike(w - mean, ar, ma)[0]
        return -ll if np.isfinite(ll) else np.inf

    def nll_free(x):
        v = nll_natural(layout.natural_from_free(x))
        return v if np.isfinite(v) else 1e300

    nll_open = lambda th: nll_natural(th, invertible=False)
    if layout.k == 0:
        theta, newton_ok = np.zeros(0), True
    else:
        rng = np.random.default_rng(seed)
        n_coef = layout.k - int(include_mean)
        starts = [np.zeros(n_coef)] + [rng.normal(0.0, 1.0, n_coef) for _ in range(max(n_starts - 1, 0))]
        if start is not None:
            given = layout.free_from_natural(np.r_[[centre] if include_mean else [], np.asarray(start, dtype=float)])
            starts.insert(0, given[int(include_mean):])
        css_points = []
        for x0 in starts:
            x0 = np.r_[[centre] if include_mean else [], x0]
            res = optimize.minimize(css_objective, x0, method="L-BFGS-B", options={"maxiter": 500})
            css_points.append((res.fun, res.x))

        # CSS is biased near unit roots, so the exact likelihood at a CSS optimum
        # can rank the right basin poorly: refine the best by either criterion.
        by_css = [x for _, x in sorted(css_points, key=lambda t: t[0])]
        by_exact = [x for _, _, x in sorted(((nll_free(x), i, x) for i, (_, x) in enumerate(css_points)),
                                            key=lambda t: (t[0], t[1]))]
        chosen = []
        for ranking in (by_css, by_exact):
            taken = 0
            for x in ranking:
                if taken >= max(n_refine, 1):
                    break
                if all(np.max(np.abs(layout.natural_from_free(x) - layout.natural_from_free(c))) > 1e-3 for c in chosen):
                    chosen.append(x)
                    taken += 1

        refined = []
        for x0 in chosen:
            res = optimize.minimize(nll_free, x0, method="L-BFGS-B", options={"maxiter": 1000})
            refined.append((res.fun, len(refined), layout.natural_from_free(res.x)))
        refined.sort(key=lambda t: (t[0], t[1]))

        # The likelihood is smooth across the MA unit circle, so polish and
        # differentiate without the invertibility constraint and reflect after.
        polished = []
        for _, _, th0 in refined[:2]:
            # the transform is flat near the stationarity boundary; restart
            # inside it and walk in natural coordinates
            th0 = layout.pull_inside(th0)
            nm = optimize.minimize(
                nll_open, th0, method="Nelder-Mead",
                options={"maxiter": 400 * max(len(th0), 1), "xatol": 1e-7, "fatol": 1e-8, "adaptive": True},
            )
            th, ok = _newton(nll_open, nm.x if nm.fun <= nll_open(th0) else th0)
            polished.append((nll_open(th), len(polished), th, ok))
        _, _, theta, newton_ok = min(polished, key=lambda t: (t[0], t[1]))
        theta = layout.flip_ma(theta)

    ll = -nll_open(theta)
    f = lambda th: -nll_open(th)
    se = np.full(len(theta), np.nan)
    scaled = np.full(len(theta), np.nan)
    if len(theta):
        H = hessian(f, theta)
        try:
            cov = np.linalg.inv(-H)
            if np.all(np.diag(cov) > 0):
                se = np.sqrt(np.diag(cov))
        except np.linalg.LinAlgError:
            pass
        scaled = gradient(f, theta) * np.where(np.isfinite(se), se, 1.0)

    mean, ar, ma = layout.polys(theta)
    _, sigma2, v, _, _ = exact_loglike(w - mean, ar, ma)
    _, (phi, th, Phi, Th) = layout.split(theta)
    fitted = np.full(len(y), np.nan)
    fitted[n_diff:] = y[n_diff:] - v
    converged = bool(np.isfinite(ll) and newton_ok and np.all(np.isfinite(se)) and np.all(np.abs(scaled) <= 1e-3))
    fit = SarimaFit(
        order=(p, d, q),
        seasonal_order=(P, D, Q),
        s=s,
        phi=phi,
        theta=th,
        Phi=Phi,
        Theta=Th,
        mean=float(mean) if include_mean else None,
        sigma2=float(sigma2),
        residuals=v,
        log_likelihood=float(ll),
        aic=float(2 * (layout.k + 1) - 2 * ll),
        converged=converged,
        invertible=bool(is_invertible(th) and is_invertible(Th)),
        n_obs=len(w),
        scaled_gradient=scaled,
        fitted=fitted,
    )
    names = fit.coefficient_names
    fit.std_errors = dict(zip(names, map(float, se)))
    if strict and not converged:
        raise FitFailure("seasonal ARIMA fit did not converge", best=fit)
    return fit


def _newton(nll, theta, iters: int = 50):
    """Damped Newton ascent on natural coefficients.

    Returns the final point and whether the Hessian there is negative definite.
    """
    if len(theta) == 0:
        return theta, True
    f = lambda th: -nll(th)
    eye = np.eye(len(theta))
    for _ in range(iters):
        H = hessian(f, theta)
        g = gradient(f, theta)
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
            return theta, False
        f0 = f(theta)
        moved = False
        damping = 0.0
        while damping < 1e8:
            try:
                np.linalg.cholesky(-H + damping * eye)
                step = np.linalg.solve(-H + damping * eye, g)
            except np.linalg.LinAlgError:
                damping = max(10 * damping, 1e-3 * np.max(np.abs(np.diag(H))) + 1e-8)
                continue
            t = 1.0
            while t > 1e-4:
                cand = theta + t * step
                if f(cand) > f0:
                    moved = True
                    break
                t /= 2
            if moved:
                break
            damping = max(10 * damping, 1e-3 * np.max(np.abs(np.diag(H))) + 1e-8)
        if not moved:
            break
        theta = cand
        if damping == 0.0:
            se = np.sqrt(np.diag(np.linalg.inv(-H)))
            if np.max(np.abs(g * se)) < 1e-7:
                break
    H = hessian(f, theta)
    try:
        np.linalg.cholesky(-H)
        return theta, True
    except np.linalg.LinAlgError:
        return theta, False


def _degenerate_fit(layout, w, y, n_diff, centre) -> SarimaFit:
    z = lambda n: np.zeros(n)
    fitted = np.full(len(y), np.nan)
    fitted[n_diff:] = y[n_diff:]
    return SarimaFit(
        order=(layout.p, layout.d, layout.q),
        seasonal_order=(layout.P, layout.D, layout.Q),
        s=layout.s,
        phi=z(layout.p),
        theta=z(layout.q),
        Phi=z(layout.P),
        Theta=z(layout.Q),
        mean=centre if layout.include_mean else None,
        sigma2=0.0,
        residuals=np.zeros(len(w)),
        log_likelihood=np.inf,
        aic=-np.inf,
        converged=True,
        invertible=True,
        n_obs=len(w),
        fitted=fitted,
        degenerate=True,
    )


# --------------------------------------------------------------------------- simulation / forecasting

def simulate_sarima(
    n: int,
    phi=(),
    theta=(),
    Phi=(),
    Theta=(),
    d: int = 0,
    D: int = 0,
    s: int = 24,
    sigma: float = 1.0,
    mean: float = 0.0,
    seed: int = 0,
    burn: int = 2000,
    initial=None,
) -> np.ndarray:
    """Simulate y of length n; the first d + sD values are ``initial`` (default zeros + noise)."""
    rng = np.random.default_rng(seed)
    ar = ar_polynomial(phi, Phi, s)
    ma = ma_polynomial(theta, Theta, s)
    n_diff = d + D * s
    e = rng.standard_normal(n - n_diff + burn) * sigma
    w = signal.lfilter(ma, ar, e)[burn:] + mean
    if n_diff == 0:
        return w
    init = np.asarray(initial, dtype=float) if initial is not None else rng.standard_normal(n_diff)
    delta = -difference_poly(d, D, s)[1:]
    y = np.empty(n)
    y[:n_diff] = init[:n_diff]
    for t in range(n_diff, n):
        y[t] = w[t - n_diff] + sum(delta[k] * y[t - 1 - k] for k in range(len(delta)) if delta[k] != 0)
    return y


def _undifference(y_hist, w_future, d, D, s):
    delta = -difference_poly(d, D, s)[1:]
    nz = np.flatnonzero(delta)
    ext = list(y_hist)
    out = []
    for wf in w_future:
        val = wf + sum(delta[k] * ext[-1 - k] for k in nz)
        ext.append(val)
        out.append(val)
    return np.array(out)


def forecast_sarima(fit: SarimaFit, history, h: int) -> np.ndarray:
    """Conditional-expectation forecasts 1..h steps past the end of ``history``."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    y = np.asarray(history, dtype=float)
    d, D, s = fit.order[1], fit.seasonal_order[1], fit.s
    n_diff = d + D * s
    if len(y) < n_diff + 1:
        raise ValueError("history does not cover the differencing lags")
    if fit.degenerate:
        w_future = np.full(h, fit.mean if fit.mean is not None else 0.0)
        return _undifference(y, w_future, d, D, s)
    w = difference(y, d, D, s)
    mean = fit.mean or 0.0
    _, _, _, _, states = exact_loglike(w - mean, fit.ar_full, fit.ma_full, store_states=True)
    return _forecast_from_state(fit, states[-1], y, h)


def _forecast_from_state(fit, state, y_hist, h):
    phi_full = -fit.ar_full[1:]
    a = state.copy()
    r = len(a)
    w_future = np.empty(h)
    for k in range(h):
        if k:
            a0 = a[0]
            nxt = np.zeros(r)
            nxt[:-1] = a[1:]
            nxt[: len(phi_full)] += phi_full * a0
            a = nxt
        w_future[k] = a[0]
    w_future += fit.mean or 0.0
    return _undifference(y_hist, w_future, fit.order[1], fit.seasonal_order[1], fit.s)


def predicted_states(fit: SarimaFit, series) -> np.ndarray:
    """State predictions a_{t+1|t} after each differenced observation (row t)."""
    w = difference(series, fit.order[1], fit.seasonal_order[1], fit.s)
    return exact_loglike(w - (fit.mean or 0.0), fit.ar_full, fit.ma_full, store_states=True)[4]
