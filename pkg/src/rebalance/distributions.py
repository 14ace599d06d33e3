"""Source and target Gaussian mixtures, seeded samplers and Bayes quantities.

The observed (source) distribution draws ``y ~ Bernoulli(pi1)`` and then
``x | y ~ N(mu_y, sigma^2 I)``.  A target keeps the class-conditionals and
swaps in different priors; the balanced target has ``pi1* = 1/2``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, DomainError
from .model import LogisticModel
from .rng import make_rng

__all__ = [
    "MixtureSpec",
    "TargetSpec",
    "Dataset",
    "BALANCED",
    "sample_observed",
    "sample_target",
    "sample_class_conditional",
    "class_pdf",
    "fstar_gaussian",
    "gstar_gaussian",
    "normal_cdf",
    "bayes_type2_error_observed",
    "bayes_type2_error_balanced",
]


def _as_vector(v, name):
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ConfigurationError(f"{name} must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MixtureSpec:
    """Two-class isotropic Gaussian mixture.

    Parameters
    ----------
    pi0 : float
        Majority prior, strictly inside (0, 1).  ``pi1`` is derived.
    mu0, mu1 : array-like of shape (d,)
        Class-conditional means.
    sigma : float
        Shared isotropic standard deviation.
    """

    pi0: float
    mu0: np.ndarray
    mu1: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        pi0 = float(self.pi0)
        if not 0.0 < pi0 < 1.0:
            raise ConfigurationError(f"pi0 must lie strictly inside (0, 1), got {pi0}")
        sigma = float(self.sigma)
        if not (sigma > 0.0 and math.isfinite(sigma)):
            raise ConfigurationError(f"sigma must be positive, got {sigma}")
        mu0 = _as_vector(self.mu0, "mu0")
        mu1 = _as_vector(self.mu1, "mu1")
        if mu0.shape != mu1.shape:
            raise ConfigurationError(
                f"mu0 and mu1 differ in dimension ({mu0.size} vs {mu1.size})"
            )
        object.__setattr__(self, "pi0", pi0)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)

    @property
    def pi1(self) -> float:
        return 1.0 - self.pi0

    @property
    def dim(self) -> int:
        return int(self.mu0.size)

    def mean(self, label: int) -> np.ndarray:
        return self.mu1 if label == 1 else self.mu0

    @classmethod
    def scaled(cls, dim: int, pi0: float = 0.9, signal: float = 1.0, sigma: float = 1.0):
        """Mixture with ``mu0 = 0`` and ``mu1 = (signal / sqrt(d)) * 1_d``.

        The mean gap has norm ``signal`` in every dimension, so the
        signal-to-noise ratio does not drift as ``dim`` grows.
        """
        if dim < 1:
            raise ConfigurationError(f"dim must be positive, got {dim}")
        return cls(
            pi0=pi0,
            mu0=np.zeros(dim),
            mu1=np.full(dim, signal / math.sqrt(dim)),
            sigma=sigma,
        )

    def to_dict(self) -> dict:
        return {
            "pi0": self.pi0,
            "mu0": self.mu0.tolist(),
            "mu1": self.mu1.tolist(),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MixtureSpec":
        try:
            return cls(
                pi0=obj["pi0"], mu0=obj["mu0"], mu1=obj["mu1"], sigma=obj.get("sigma", 1.0)
            )
        except KeyError as exc:
            raise ConfigurationError(f"mixture spec missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MixtureSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TargetSpec:
    """Class priors of a target distribution sharing the source conditionals."""

    pi0_star: float = 0.5

    def __post_init__(self):
        p = float(self.pi0_star)
        if not 0.0 < p < 1.0:
            raise ConfigurationError(f"pi0_star must lie strictly inside (0, 1), got {p}")
        object.__setattr__(self, "pi0_star", p)

    @property
    def pi1_star(self) -> float:
        return 1.0 - self.pi0_star

    @property
    def is_balanced(self) -> bool:
        return self.pi0_star == 0.5

    @classmethod
    def from_pi1(cls, pi1_star: float) -> "TargetSpec":
        return cls(1.0 - float(pi1_star))


BALANCED = TargetSpec(0.5)


class Dataset:
    """Labeled samples stored as an ``(n, d)`` feature matrix and 0/1 labels.

    Both arrays are read-only copies, so a dataset can be shared across
    threads and pipelines without defensive copying.
    """

    __slots__ = ("X", "y")

    def __init__(self, X, y):
        X = np.array(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[1] == 0:
            raise ConfigurationError(f"features must be a 2-d array, got shape {X.shape}")
        y = np.array(y).reshape(-1)
        if y.shape[0] != X.shape[0]:
            raise ConfigurationError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if y.size and not np.isin(y, (0, 1)).all():
            raise ConfigurationError("labels must be 0 or 1")
        y = y.astype(np.int64)
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        return zip(self.X, self.y)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)

    def __repr__(self):
        return f"Dataset(n={self.n}, dim={self.dim}, n0={self.n0}, n1={self.n1})"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def idx0(self) -> np.ndarray:
        return np.flatnonzero(self.y == 0)

    @property
    def idx1(self) -> np.ndarray:
        return np.flatnonzero(self.y == 1)

    @property
    def n0(self) -> int:
        return int(self.n - self.y.sum())

    @property
    def n1(self) -> int:
        return int(self.y.sum())

    def minority(self) -> np.ndarray:
        """Covariates of the ``y = 1`` samples, in dataset order."""
        return self.X[self.y == 1]

    def to_csv(self, path) -> None:
        """Write to a path or an open text stream."""
        if hasattr(path, "write"):
            self._write_csv(path)
            return
        with open(path, "w", newline="") as fh:
            self._write_csv(fh)

    def _write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(self.dim)] + ["y"])
        for x, label in zip(self.X, self.y):
            writer.writerow([repr(float(v)) for v in x] + [int(label)])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "y":
                raise ConfigurationError(f"{path}: last column must be 'y'")
            expected = [f"x{j}" for j in range(len(header) - 1)]
            if header[:-1] != expected:
                raise ConfigurationError(f"{path}: header must be x0,...,x{{d-1}},y")
            rows = [r for r in reader if r]
        if not rows:
            return cls(np.empty((0, len(header) - 1)), np.empty(0, dtype=int))
        data = np.array(rows, dtype=float)
        return cls(data[:, :-1], data[:, -1].astype(int))


def _draw(spec: MixtureSpec, pi1: float, n: int, seed) -> Dataset:
    if n < 1:
        raise ConfigurationError(f"sample size must be positive, got {n}")
    rng = make_rng(seed)
    y = (rng.random(n) < pi1).astype(np.int64)
    means = np.where(y[:, None] == 1, spec.mu1, spec.mu0)
    X = means + spec.sigma * rng.standard_normal((n, spec.dim))
    return Dataset(X, y)


def sample_observed(spec: MixtureSpec, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. samples from the source mixture."""
    return _draw(spec, spec.pi1, n, seed)


def sample_target(spec: MixtureSpec, target: TargetSpec, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. samples from the target with priors ``target``."""
    return _draw(spec, target.pi1_star, n, seed)


def sample_class_conditional(spec: MixtureSpec, label: int, n: int, seed) -> np.ndarray:
    """Draw ``n`` covariates from ``N(mu_label, sigma^2 I)``."""
    if label not in (0, 1):
        raise ConfigurationError(f"label must be 0 or 1, got {label}")
    rng = make_rng(seed)
    return spec.mean(label) + spec.sigma * rng.standard_normal((n, spec.dim))


def class_pdf(spec: MixtureSpec, label: int, X) -> np.ndarray:
    """Density of ``N(mu_label, sigma^2 I)`` at each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = spec.dim
    sq = np.sum((X - spec.mean(label)) ** 2, axis=1)
    log_norm = -0.5 * d * math.log(2.0 * math.pi * spec.sigma**2)
    return np.exp(log_norm - sq / (2.0 * spec.sigma**2))


def fstar_gaussian(spec: MixtureSpec, target: TargetSpec = BALANCED) -> LogisticModel:
    """Bayes conditional ``Q*(Y = 1 | X = x)`` as an affine logistic model.

    With the default balanced target this is ``dP1 / (dP0 + dP1)``.
    """
    s2 = spec.sigma**2
    w = (spec.mu1 - spec.mu0) / s2
    b = (spec.mu0 @ spec.mu0 - spec.mu1 @ spec.mu1) / (2.0 * s2)
    b += math.log(target.pi1_star / target.pi0_star)
    return LogisticModel(w=w, b=float(b))


def gstar_gaussian(spec: MixtureSpec) -> LogisticModel:
    """Source conditional ``P(Y = 1 | X = x)``."""
    return fstar_gaussian(spec, TargetSpec(spec.pi0))


def normal_cdf(z):
    """Standard normal CDF."""
    return ndtr(z)


def _gap(spec: MixtureSpec) -> float:
    if spec.dim != 1:
        raise DomainError(f"closed-form type-II error needs d = 1, got d = {spec.dim}")
    gap = float(spec.mu1[0] - spec.mu0[0])
    if gap <= 0.0:
        raise DomainError(f"closed-form type-II error needs mu1 > mu0, got gap {gap}")
    return gap


def bayes_type2_error_observed(spec: MixtureSpec) -> float:
    """Type-II error of the source Bayes classifier ``1{g*(x) >= 1/2}``.

    For unit variance this is ``Phi(-gap/2 + log(pi0/pi1)/gap)``; other
    ``sigma`` values are handled by rescaling.
    """
    gap = _gap(spec) / spec.sigma
    return float(normal_cdf(-gap / 2.0 + math.log(spec.pi0 / spec.pi1) / gap))


def bayes_type2_error_balanced(spec: MixtureSpec) -> float:
    """Type-II error of the balanced Bayes classifier, ``Phi(-gap/2)``."""
    gap = _gap(spec) / spec.sigma
    return float(normal_cdf(-gap / 2.0))
