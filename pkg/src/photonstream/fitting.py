"""Weighted least-squares fits of the saturation, linear-power and wandering models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emitter import SaturationParams
from .interference import temporal_visibility

XTOL = 1e-9
MAX_ITER = 200

WANDERING_BOUNDS = {"v0": (0.0, 1.0), "domega_r": (0.0, 5.0), "tau_c": (1.0, 1e4)}


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, message: str = ""):
        self.iterations = iterations
        super().__init__(message or f"fit did not converge after {iterations} iterations")


class DegenerateDataError(ValueError):
    pass


@dataclass
class DataSeries:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not (self.x.shape == self.y.shape == self.sigma.shape) or self.x.ndim != 1:
            raise ValueError("x, y and sigma must be 1-d arrays of equal length")
        if np.any(~(self.sigma > 0)):
            raise ValueError("sigma_y must be > 0")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise ValueError("non-finite data")

    def __len__(self) -> int:
        return len(self.x)

    @classmethod
    def from_points(cls, points) -> "DataSeries":
        pts = np.asarray(list(points), dtype=float).reshape(-1, 3)
        return cls(pts[:, 0], pts[:, 1], pts[:, 2])


@dataclass
class FitResult:
    model: str
    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    iterations: int
    data: DataSeries
    fixed: dict = field(default_factory=dict)
    at_bounds: tuple = ()
    identifiable: bool = True

    def __getitem__(self, name: str) -> float:
        if name in self.fixed:
            return self.fixed[name]
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        if name in self.fixed:
            return 0.0
        i = self.names.index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))

    def predict(self, x) -> np.ndarray:
        return MODELS[self.model](np.asarray(x, dtype=float), {**self.fixed, **dict(zip(self.names, self.values))})

    @property
    def residuals(self) -> np.ndarray:
        return self.data.y - self.predict(self.data.x)


@dataclass
class SaturationFit(FitResult):
    @property
    def params(self) -> SaturationParams:
        return SaturationParams(self["R0"], self["P0"])


@dataclass
class LinearFit(FitResult):
    @property
    def vmax(self) -> float:
        return self["vmax"]

    @property
    def slope(self) -> float:
        return self["slope"]


@dataclass
class WanderingFit(FitResult):
    @property
    def v0(self) -> float:
        return self["v0"]

    @property
    def domega_r(self) -> float:
        return self["domega_r"]

    @property
    def tau_c(self) -> float:
        return self["tau_c"]

    @property
    def tau_c_fixed(self) -> bool:
        return "tau_c" in self.fixed


def _saturation(x, p):
    return p["R0"] * -np.expm1(-x / p["P0"])


def _linear(x, p):
    return p["vmax"] + p["slope"] * x


def _wandering(x, p):
    return temporal_visibility(p["v0"], p["domega_r"], p["tau_c"], x)


MODELS = {"saturation": _saturation, "power-linear": _linear, "wandering": _wandering}


def levenberg_marquardt(fun, jac, p0, lower, upper, x, y, sigma, max_iter=MAX_ITER, xtol=XTOL):
    """Minimise sum(((y - fun(x, p)) / sigma)^2) with projected damped Gauss-Newton steps.

    ``jac(x, p)`` returns d fun / d p with shape (n, k). Converges when every
    accepted or trial step satisfies |dp_i| < xtol * (|p_i| + xtol).
    Returns ``(p, J_weighted, iterations)``.
    """
    p = np.clip(np.asarray(p0, dtype=float), lower, upper)
    w = 1.0 / sigma
    r = (y - fun(x, p)) * w
    cost = r @ r
    lam, nu = 1e-3, 2.0
    for it in range(1, max_iter + 1):
        J = jac(x, p) * w[:, None]
        g = J.T @ r
        # parameters pinned at a bound with the descent direction pointing outward stay put
        free = ~(((p <= lower) & (g < 0)) | ((p >= upper) & (g > 0)))
        step = np.zeros_like(p)
        damp = np.zeros_like(p)
        if free.any():
            Jf = J[:, free]
            A = Jf.T @ Jf
            diag = np.diag(A).copy()
            damp[free] = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
            step[free] = np.linalg.lstsq(A + lam * np.diag(damp[free]), g[free], rcond=None)[0]
        trial = np.clip(p + step, lower, upper)
        dp = trial - p
        r_new = (y - fun(x, trial)) * w
        cost_new = r_new @ r_new
        small = np.all(np.abs(dp) <= xtol * (np.abs(p) + xtol))
        predicted = step @ (g + lam * damp * step)
        if cost_new <= cost:
            # gain-ratio damping update (Nielsen)
            rho = (cost - cost_new) / predicted if predicted > 0 else 0.0
            p, r, cost = trial, r_new, cost_new
            lam *= max(1 / 3, 1 - (2 * rho - 1) ** 3)
            lam = max(lam, 1e-15)
            nu = 2.0
        else:
            lam *= nu
            nu *= 2
        if small:
            return p, jac(x, p) * w[:, None], it
    raise ConvergenceError(max_iter)


def _covariance(Jw: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(Jw.T @ Jw)


def _flag_bounds(p, lower, upper, names):
    out = []
    for name, v, lo, hi in zip(names, p, lower, upper):
        tol = 1e-8 * max(1.0, abs(v))
        if v - lo <= tol or hi - v <= tol:
            out.append(name)
    return tuple(out)


def fit_saturation(data: DataSeries) -> SaturationFit:
    """Fit R0 (1 - exp(-P/P0)) to detected rate versus pump power."""
    x, y, s = data.x, data.y, data.sigma
    if len(data) < 3:
        raise ValueError("saturation fit needs at least 3 points")
    if np.any(x < 0):
        raise ValueError("power must be >= 0")
    if np.ptp(x) == 0:
        raise DegenerateDataError("all powers are equal")
    R0 = float(y.max())
    if not R0 > 0:
        raise DegenerateDataError("no positive rates")
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    above = np.flatnonzero(ys >= R0 / 2)
    P0 = float(xs[above[0]]) if len(above) and xs[above[0]] > 0 else float(np.median(xs[xs > 0]))

    def jac(x, p):
        e = np.exp(-x / p[1])
        return np.column_stack([1 - e, -p[0] * e * x / p[1] ** 2])

    f = lambda x, p: _saturation(x, {"R0": p[0], "P0": p[1]})  # noqa: E731
    lower = np.array([1e-300, 1e-300])
    upper = np.array([np.inf, np.inf])
    p, Jw, it = levenberg_marquardt(f, jac, [R0, P0], lower, upper, x, y, s)
    r = (y - f(x, p)) / s
    names = ("R0", "P0")
    return SaturationFit("saturation", names, p, _covariance(Jw), float(r @ r), len(data) - 2, it, data,
                         at_bounds=_flag_bounds(p, lower, upper, list(names)))


def fit_visibility_power(data: DataSeries) -> LinearFit:
    """Closed-form weighted straight line vmax + slope * P."""
    x, y, s = data.x, data.y, data.sigma
    if len(data) < 2:
        raise ValueError("linear fit needs at least 2 points")
    if np.ptp(x) == 0:
        raise DegenerateDataError("all powers are equal")
    w = 1.0 / s**2
    S, Sx, Sy = w.sum(), w @ x, w @ y
    Sxx, Sxy = w @ (x * x), w @ (x * y)
    delta = S * Sxx - Sx * Sx
    slope = (S * Sxy - Sx * Sy) / delta
    vmax = (Sxx * Sy - Sx * Sxy) / delta
    cov = np.array([[Sxx, -Sx], [-Sx, S]]) / delta
    r = (y - vmax - slope * x) / s
    return LinearFit("power-linear", ("vmax", "slope"), np.array([vmax, slope]), cov, float(r @ r),
                     len(data) - 2, 0, data)


def _wandering_jac(x, v0, d, tau):
    e = np.exp(-x / tau)
    D = 1 + 2 * d * d * (1 - e)
    return np.column_stack([
        1 / D,
        -v0 * 4 * d * (1 - e) / D**2,
        v0 * 2 * d * d * e * x / (tau * tau * D**2),
    ])


def wandering_initial_guess(data: DataSeries) -> tuple[float, float, float]:
    x, y = data.x, data.y
    v0 = float(y[np.argmin(x)])
    plateau = float(y[np.argmax(x)])
    ratio = v0 / plateau if plateau > 0 else 1.0
    d = math.sqrt(max(ratio - 1, 0.0) / 2)
    # the model gradient in domega_r vanishes at 0, so never start exactly there
    d = max(d, 0.05)
    tau = float(np.median(x))
    lo, hi = WANDERING_BOUNDS["v0"], WANDERING_BOUNDS["tau_c"]
    return min(max(v0, lo[0]), lo[1]), d, min(max(tau, hi[0]), hi[1])


def fit_wandering(data: DataSeries, fixed_tau_c: float | None = None) -> WanderingFit:
    """Fit the temporal visibility model to visibility versus emission delay.

    With ``fixed_tau_c`` only v0 and domega_r float. The result is flagged
    non-identifiable when the wandering amplitude collapses (tau_c then has
    no effect on the curve) or tau_c is left essentially unconstrained.
    """
    x, y, s = data.x, data.y, data.sigma
    need = 2 if fixed_tau_c is not None else 3
    if len(data) < need:
        raise ValueError(f"wandering fit needs at least {need} points")
    if np.any(x <= 0):
        raise ValueError("delays must be positive")
    v0, d, tau = wandering_initial_guess(data)
    b = WANDERING_BOUNDS
    if fixed_tau_c is not None:
        if not fixed_tau_c > 0:
            raise ValueError("fixed tau_c must be positive")
        names = ("v0", "domega_r")
        f = lambda x, p: temporal_visibility(p[0], p[1], fixed_tau_c, x)  # noqa: E731
        jac = lambda x, p: _wandering_jac(x, p[0], p[1], fixed_tau_c)[:, :2]  # noqa: E731
        p0 = [v0, d]
        fixed = {"tau_c": float(fixed_tau_c)}
    else:
        names = ("v0", "domega_r", "tau_c")
        f = lambda x, p: temporal_visibility(p[0], p[1], p[2], x)  # noqa: E731
        jac = lambda x, p: _wandering_jac(x, *p)  # noqa: E731
        p0 = [v0, d, tau]
        fixed = {}
    lower = np.array([b[n][0] for n in names])
    upper = np.array([b[n][1] for n in names])
    p, Jw, it = levenberg_marquardt(f, jac, p0, lower, upper, x, y, s)
    r = (y - f(x, p)) / s
    cov = _covariance(Jw)
    at_bounds = _flag_bounds(p, lower, upper, list(names))
    identifiable = True
    if fixed_tau_c is None:
        tau_err = math.sqrt(max(cov[2, 2], 0.0))
        if p[1] < 1e-3 or "tau_c" in at_bounds or tau_err > 10 * p[2]:
            identifiable = False
    return WanderingFit("wandering", names, p, cov, float(r @ r), len(data) - len(names), it, data,
                        fixed=fixed, at_bounds=at_bounds, identifiable=identifiable)


def chi2_gradient(fit: FitResult) -> np.ndarray:
    """Analytic gradient of chi^2/2 with respect to the free parameters."""
    data = fit.data
    w = 1 / data.sigma
    r = (data.y - fit.predict(data.x)) * w
    J = _jacobian(fit) * w[:, None]
    return -(J.T @ r)


def _jacobian(fit: FitResult) -> np.ndarray:
    x = fit.data.x
    if fit.model == "saturation":
        R0, P0 = fit.values
        e = np.exp(-x / P0)
        return np.column_stack([1 - e, -R0 * e * x / P0**2])
    if fit.model == "power-linear":
        return np.column_stack([np.ones_like(x), x])
    J = _wandering_jac(x, fit["v0"], fit["domega_r"], fit["tau_c"])
    return J[:, : len(fit.names)]
