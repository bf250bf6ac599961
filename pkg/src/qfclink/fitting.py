"""
Least-squares fits of converter characterisation curves.

``fit_conversion_curve`` fits ``eta_max * sin^2(L sqrt(alpha P))`` for
``(eta_max, alpha)`` with the waveguide length held fixed. The solver is a
damped Gauss-Newton iteration (Levenberg-Marquardt damping schedule) on the
logarithms of both parameters, which keeps them positive.

``fit_noise_linear`` fits a through-origin line to noise rate versus pump.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import DomainError

MAX_ITERATIONS = 200
GRADIENT_TOL = 1e-10
# condition number of J^T J beyond which a parameter direction is called flat
FLAT_CONDITION = 1e10


@dataclass(frozen=True)
class CurvePoint:
    x: float
    y: float
    weight: float | None = None

    def __post_init__(self):
        if self.x < 0:
            raise DomainError(f"pump power must be >= 0 W, got {self.x}")
        if self.weight is not None and not self.weight > 0:
            raise DomainError(f"weight must be > 0, got {self.weight}")


@dataclass
class FitResult:
    model: str
    parameters: dict
    standard_errors: dict
    covariance: np.ndarray
    residual_sum_squares: float
    iterations: int
    converged: bool
    gradient_norm: float = 0.0
    flat_direction: bool = False
    fixed: dict = field(default_factory=dict)
    rss_history: list = field(default_factory=list)

    def report(self) -> str:
        """Key-value text report, one ``key = value`` per line."""
        lines = [f"model = {self.model}"]
        for k, v in self.fixed.items():
            lines.append(f"fixed.{k} = {v!r}")
        for k, v in self.parameters.items():
            lines.append(f"{k} = {v!r}")
            lines.append(f"{k}.stderr = {self.standard_errors[k]!r}")
        lines += [
            f"residual_sum_squares = {self.residual_sum_squares!r}",
            f"iterations = {self.iterations}",
            f"converged = {str(self.converged).lower()}",
            f"gradient_norm = {self.gradient_norm!r}",
            f"flat_direction = {str(self.flat_direction).lower()}",
        ]
        return "\n".join(lines) + "\n"


def points_from_arrays(x, y, weights=None) -> list[CurvePoint]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DomainError("x and y must have the same length")
    if weights is None:
        return [CurvePoint(float(a), float(b)) for a, b in zip(x, y)]
    return [CurvePoint(float(a), float(b), float(w)) for a, b, w in zip(x, y, weights)]


def read_curve_csv(path) -> list[CurvePoint]:
    """Read ``pump_w,value[,weight]`` rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header not in (["pump_w", "value"], ["pump_w", "value", "weight"]):
            raise ValueError(f"{path}: header must be 'pump_w,value[,weight]', got {','.join(header)!r}")
        points = []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            vals = [float(v) for v in row]
            points.append(CurvePoint(*vals))
    return points


def _arrays(points: Iterable[CurvePoint]):
    points = list(points)
    x = np.array([p.x for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    w = np.array([1.0 if p.weight is None else p.weight for p in points], dtype=float)
    return x, y, w


def conversion_model(x, eta_max: float, alpha: float, length: float):
    return eta_max * np.sin(length * np.sqrt(alpha * np.asarray(x, dtype=float))) ** 2


def conversion_jacobian(x, eta_max: float, alpha: float, length: float) -> np.ndarray:
    """Partial derivatives w.r.t. ``(eta_max, alpha)``, shape ``(n, 2)``."""
    x = np.asarray(x, dtype=float)
    u = length * np.sqrt(alpha * x)
    d_eta = np.sin(u) ** 2
    # d/dalpha sin^2(u) = sin(2u) * du/dalpha, du/dalpha = u / (2 alpha)
    d_alpha = eta_max * np.sin(2 * u) * u / (2.0 * alpha)
    return np.column_stack([d_eta, d_alpha])


def _initial_guess(x, y, length):
    eta0 = float(np.max(y))
    if eta0 <= 0:
        raise DomainError("efficiency data has no positive values")
    pos = x > 0
    xs, ys = x[pos], y[pos]
    order = np.argsort(xs)
    k = max(2, len(xs) // 3)
    xs, ys = xs[order][:k], ys[order][:k]
    slope = float(np.dot(xs, ys) / np.dot(xs, xs))
    if slope > 0:
        alpha0 = slope / (eta0 * length**2)
    else:
        alpha0 = (math.pi / (2 * length)) ** 2 / float(np.max(x))
    return eta0, alpha0


def fit_conversion_curve(points: Sequence[CurvePoint], waveguide_length: float,
                         init: tuple[float, float] | None = None,
                         max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """Fit ``(eta_max, alpha_qfc)`` of the sin^2 efficiency curve.

    Unweighted unless points carry weights. Non-convergence is reported in
    the result, not raised.
    """
    if not waveguide_length > 0:
        raise DomainError("waveguide length must be > 0")
    x, y, w = _arrays(points)
    if len(np.unique(x)) < 3:
        raise DomainError("need at least 3 points with distinct pump powers")
    L = waveguide_length
    eta0, alpha0 = init if init is not None else _initial_guess(x, y, L)
    if not (eta0 > 0 and alpha0 > 0):
        raise DomainError("initial parameters must be positive")

    sw = np.sqrt(w)
    y_scale = max(float(np.linalg.norm(sw * y)), np.finfo(float).tiny)

    def evaluate(theta):
        eta, alpha = np.exp(theta)
        r = sw * (y - conversion_model(x, eta, alpha, L))
        # chain rule to log-parameters
        J = sw[:, None] * conversion_jacobian(x, eta, alpha, L) * np.array([eta, alpha])
        return r, J

    def grad_norm(r, J):
        g = J.T @ r
        scale = max(float(np.linalg.norm(J)), np.finfo(float).tiny) * y_scale
        return float(np.max(np.abs(g))) / scale

    theta = np.log([eta0, alpha0])
    r, J = evaluate(theta)
    rss = float(r @ r)
    history = [rss]
    lam = 1e-3
    gnorm = grad_norm(r, J)
    converged = gnorm <= GRADIENT_TOL or rss == 0.0
    it = 0
    while not converged and it < max_iterations:
        it += 1
        A = J.T @ J
        g = J.T @ r
        diag = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new, J_new = evaluate(theta + step)
            rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new < rss:
                theta, r, J, rss = theta + step, r_new, J_new, rss_new
                history.append(rss)
                lam = max(lam / 10.0, 1e-15)
                accepted = True
                break
            lam *= 10.0
        gnorm = grad_norm(r, J)
        converged = gnorm <= GRADIENT_TOL or rss == 0.0
        if not accepted:
            # no descent direction left at machine precision
            break

    eta, alpha = np.exp(theta)
    A = J.T @ J
    cond = np.linalg.cond(A) if np.all(np.isfinite(A)) else np.inf
    # a constant response carries no information about the pump dependence
    constant = float(np.ptp(y)) <= 1e-12 * float(np.max(np.abs(y)))
    flat = bool(cond > FLAT_CONDITION or constant)
    if flat:
        warnings.warn("conversion fit has a flat parameter direction; alpha_qfc may be unidentifiable",
                      RuntimeWarning, stacklevel=2)
    dof = len(x) - 2
    sigma2 = rss / dof if dof > 0 else 0.0
    try:
        cov_log = sigma2 * np.linalg.inv(A)
    except np.linalg.LinAlgError:
        cov_log = np.full((2, 2), np.inf)
    D = np.diag([eta, alpha])
    cov = D @ cov_log @ D
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        model="conversion",
        parameters={"eta_max": float(eta), "alpha_qfc": float(alpha)},
        standard_errors={"eta_max": float(se[0]), "alpha_qfc": float(se[1])},
        covariance=cov,
        residual_sum_squares=rss,
        iterations=it,
        converged=bool(converged),
        gradient_norm=gnorm,
        flat_direction=flat,
        fixed={"waveguide_length": float(L)},
        rss_history=history,
    )


def fit_noise_linear(points: Sequence[CurvePoint]) -> FitResult:
    """Through-origin slope ``sum(w x y) / sum(w x^2)`` in Hz/W."""
    x, y, w = _arrays(points)
    sxx = float(np.sum(w * x * x))
    if x.size == 0 or sxx == 0:
        raise DomainError("noise fit needs at least one point with pump power > 0")
    beta = float(np.sum(w * x * y)) / sxx
    resid = y - beta * x
    rss = float(np.sum(w * resid**2))
    dof = len(x) - 1
    var = rss / dof / sxx if dof > 0 else 0.0
    return FitResult(
        model="linear",
        parameters={"slope_hz_per_w": beta},
        standard_errors={"slope_hz_per_w": math.sqrt(var)},
        covariance=np.array([[var]]),
        residual_sum_squares=rss,
        iterations=0,
        converged=True,
        rss_history=[rss],
    )


def _model_and_gradient(fit: FitResult, x: np.ndarray):
    if fit.model == "conversion":
        eta, alpha = fit.parameters["eta_max"], fit.parameters["alpha_qfc"]
        L = fit.fixed["waveguide_length"]
        return conversion_model(x, eta, alpha, L), conversion_jacobian(x, eta, alpha, L)
    if fit.model == "linear":
        return fit.parameters["slope_hz_per_w"] * x, x[:, None]
    raise DomainError(f"unknown model {fit.model!r}")


def predict_with_band(fit: FitResult, x_grid):
    """Model values and first-order propagated 1-sigma errors.

    Returns ``(x, y_hat, y_err)`` arrays.
    """
    if not fit.converged:
        raise DomainError("cannot predict from an unconverged fit")
    x = np.asarray(x_grid, dtype=float)
    y_hat, G = _model_and_gradient(fit, x)
    var = np.einsum("ij,jk,ik->i", G, fit.covariance, G)
    return x, y_hat, np.sqrt(np.clip(var, 0.0, None))
