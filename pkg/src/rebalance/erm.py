"""Weighted cross-entropy ERM over affine logistic models, and Monte Carlo risk.

Training minimizes

    F(w, b) = sum_i a_i * softplus(-s_i * (w . x_i + b)) + (ridge / 2) * |w|^2,

with ``s_i = 2 y_i - 1`` and normalized weights ``a_i = weight_i / sum(weight)``.
The softplus form is the cross-entropy of the unclipped sigmoid; clipping
only enters at prediction time, where it keeps losses bounded.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit

from .distributions import BALANCED, MixtureSpec, TargetSpec, sample_target
from .errors import ConfigurationError, ConvergenceError, DegenerateSeparationError
from .model import CLIP_EPS, LogisticModel, cross_entropy

__all__ = [
    "OptimizerOptions",
    "WeightedObjective",
    "RiskReport",
    "erm_train",
    "evaluate_risk",
    "risk_on_sample",
    "linearly_separable",
]


@dataclass(frozen=True)
class OptimizerOptions:
    """Full-batch gradient descent with Armijo backtracking."""

    grad_tol: float = 1e-8
    max_iters: int = 10_000
    ridge_lambda: float = 0.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if self.grad_tol <= 0 or self.max_iters < 1:
            raise ConfigurationError("grad_tol must be positive and max_iters >= 1")
        if self.ridge_lambda < 0:
            raise ConfigurationError("ridge_lambda must be nonnegative")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo_c < 1:
            raise ConfigurationError("armijo_c and backtrack must lie in (0, 1)")

    @classmethod
    def from_dict(cls, obj: dict | None) -> "OptimizerOptions":
        obj = dict(obj or {})
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


class WeightedObjective:
    """Normalized weighted logistic loss with optional ridge on ``w``.

    Parameters are packed as ``theta = [w_1, ..., w_d, b]``.
    """

    def __init__(self, X, y, weights=None, ridge_lambda: float = 0.0):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ConfigurationError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if weights is None:
            weights = np.ones(y.shape[0])
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if weights.shape != y.shape:
            raise ConfigurationError("weights must have one entry per sample")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ConfigurationError("weights must be finite and nonnegative")
        total = weights.sum()
        if not total > 0:
            raise ConfigurationError("weights are all zero")
        self.X = X
        self.y = y.astype(float)
        self.sign = 2.0 * self.y - 1.0
        self.a = weights / total
        self.ridge = float(ridge_lambda)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def margins(self, theta) -> np.ndarray:
        return self.X @ theta[:-1] + theta[-1]

    def value(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        z = self.margins(theta)
        w = theta[:-1]
        return float(self.a @ np.logaddexp(0.0, -self.sign * z) + 0.5 * self.ridge * (w @ w))

    def gradient(self, theta, z=None) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if z is None:
            z = self.margins(theta)
        r = self.a * (expit(z) - self.y)
        g = np.empty_like(theta)
        g[:-1] = self.X.T @ r + self.ridge * theta[:-1]
        g[-1] = r.sum()
        return g

    def change(self, theta, z, step) -> float:
        """``F(theta + step) - F(theta)`` without cancellation.

        Each loss term changes by ``log1p(sigmoid(u) * expm1(du))``, which
        stays accurate when the step is tiny relative to ``F``.
        """
        u = -self.sign * z
        du = -self.sign * (self.X @ step[:-1] + step[-1])
        with np.errstate(over="ignore", invalid="ignore"):
            terms = np.log1p(expit(u) * np.expm1(du))
        w, dw = theta[:-1], step[:-1]
        out = float(self.a @ terms) + self.ridge * (w @ dw + 0.5 * (dw @ dw))
        return out if math.isfinite(out) else math.inf


def linearly_separable(X, y) -> bool:
    """True if some ``(w, b)`` puts every sample strictly on its own side."""
    X = np.asarray(X, dtype=float)
    s = 2.0 * np.asarray(y, dtype=float) - 1.0
    A = -s[:, None] * np.hstack([X, np.ones((X.shape[0], 1))])
    res = linprog(
        c=np.zeros(X.shape[1] + 1),
        A_ub=A,
        b_ub=-np.ones(X.shape[0]),
        bounds=[(None, None)] * (X.shape[1] + 1),
        method="highs",
    )
    return res.status == 0


def _initial_theta(obj: WeightedObjective, init: LogisticModel | None) -> np.ndarray:
    if init is not None:
        if init.dim != obj.dim:
            raise ConfigurationError(f"init has dim {init.dim}, data has dim {obj.dim}")
        return np.append(init.w, init.b)
    p1 = float(obj.a @ obj.y)
    theta = np.zeros(obj.dim + 1)
    theta[-1] = math.log(p1) - math.log1p(-p1)
    return theta


def erm_train(
    X,
    y,
    weights=None,
    *,
    init: LogisticModel | None = None,
    options: OptimizerOptions | None = None,
    clip_eps: float = CLIP_EPS,
) -> LogisticModel:
    """Minimize the weighted empirical cross-entropy over affine logistic models.

    Parameters
    ----------
    X : array of shape (n, d)
    y : array of shape (n,) with values in {0, 1}
    weights : array of shape (n,), optional
        Nonnegative sample weights; only their ratios matter.  Uniform if
        omitted.
    init : LogisticModel, optional
        Starting point.  Defaults to ``w = 0`` and the intercept-only
        optimum ``b = log(p1 / p0)`` under the weighted class frequencies.
    options : OptimizerOptions, optional

    Returns
    -------
    LogisticModel
        A point whose objective gradient has norm at most ``grad_tol``.

    Raises
    ------
    DegenerateSeparationError
        Only one label carries positive weight, or (without ridge) the
        positive-weight samples are linearly separable.
    ConvergenceError
        ``max_iters`` reached first; carries the last iterate.
    """
    opts = options or OptimizerOptions()
    obj = WeightedObjective(X, y, weights, opts.ridge_lambda)
    active = obj.a > 0
    labels = np.unique(obj.y[active])
    if labels.size < 2:
        raise DegenerateSeparationError(
            "every positive-weight sample has the same label; the minimizer is at infinity"
        )

    theta = _initial_theta(obj, init)
    z = obj.margins(theta)
    g = obj.gradient(theta, z)
    t = 1.0
    converged = False
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        gnorm2 = float(g @ g)
        if math.sqrt(gnorm2) <= opts.grad_tol:
            converged = True
            break
        while True:
            step = -t * g
            if obj.change(theta, z, step) <= -opts.armijo_c * t * gnorm2:
                break
            t *= opts.backtrack
            if t < 1e-300:
                break
        if t < 1e-300:
            break
        theta = theta + step
        z = obj.margins(theta)
        g = obj.gradient(theta, z)
        t *= 2.0
    else:
        converged = math.sqrt(float(g @ g)) <= opts.grad_tol

    model = LogisticModel(theta[:-1].copy(), float(theta[-1]), clip_eps)
    if opts.ridge_lambda == 0.0:
        separated = bool(np.all(obj.sign[active] * z[active] > 0))
        if separated or (not converged and linearly_separable(obj.X[active], obj.y[active])):
            raise DegenerateSeparationError(
                "training data are linearly separable; the minimizer is at infinity"
            )
    if not converged:
        gnorm = math.sqrt(float(g @ g))
        raise ConvergenceError(
            f"gradient norm {gnorm:.3e} above tolerance {opts.grad_tol:.1e} "
            f"after {iters} iterations",
            model=model,
            grad_norm=gnorm,
        )
    return model


@dataclass(frozen=True)
class RiskReport:
    """Monte Carlo summary of a model against the target conditional.

    ``excess_risk`` is the mean paired loss difference on target draws and
    ``excess_risk_se`` its standard error; ``est_error_q`` is the root mean
    squared gap to the target conditional; ``type2_error`` is the fraction
    of class-1 draws predicted below 1/2.
    """

    excess_risk: float
    excess_risk_se: float
    est_error_q: float
    type2_error: float
    n_eval: int

    def to_dict(self) -> dict:
        return asdict(self)


def risk_on_sample(model, fstar, X, y) -> RiskReport:
    """Risk summary on a fixed evaluation sample."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    p_hat = model.predict(X)
    p_star = fstar.predict(X)
    diff = cross_entropy(y, p_hat) - cross_entropy(y, p_star)
    n = diff.size
    se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    pos = y == 1
    type2 = float(np.mean(p_hat[pos] < 0.5)) if pos.any() else math.nan
    return RiskReport(
        excess_risk=float(diff.mean()),
        excess_risk_se=se,
        est_error_q=float(np.sqrt(np.mean((p_hat - p_star) ** 2))),
        type2_error=type2,
        n_eval=n,
    )


def evaluate_risk(
    model,
    fstar,
    spec: MixtureSpec,
    target: TargetSpec = BALANCED,
    n_eval: int = 100_000,
    seed=0,
) -> RiskReport:
    """Estimate excess risk and estimation error on fresh target draws.

    ``model`` may be any object with ``predict(X) -> probabilities``, so
    plug-in models are evaluated the same way as logistic ones.
    """
    if n_eval < 1000:
        raise ConfigurationError(f"n_eval must be at least 1000, got {n_eval}")
    data = sample_target(spec, target, n_eval, seed)
    return risk_on_sample(model, fstar, data.X, data.y)
