"""Synthetic minority generators: bootstrap, SMOTE and Gaussian-KDE sampling.

Each sampler draws ``j`` points from a distribution built on the minority
covariates and is a pure function of ``(minority, parameters, j, seed)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InsufficientDataError
from .knn import KnnIndex
from .rng import make_rng

__all__ = [
    "GeneratorSpec",
    "SyntheticBatch",
    "choose_j",
    "bootstrap_sample",
    "smote_sample",
    "kde_sample",
    "silverman_bandwidth",
    "generate",
]

AUTO = "auto"
_KINDS = ("bootstrap", "smote", "kde")


@dataclass(frozen=True)
class GeneratorSpec:
    """Which synthetic sampler to use and its parameter.

    ``k`` applies to SMOTE, ``bandwidth`` (a positive float or ``"auto"``)
    to KDE.  Config strings: ``"bootstrap"``, ``"smote:k=5"``,
    ``"kde:h=auto"``, ``"kde:h=0.3"``.
    """

    kind: str
    k: int | None = None
    bandwidth: float | str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}")
        if self.kind == "smote":
            if self.k is None or int(self.k) != self.k or self.k < 1:
                raise ConfigurationError(f"SMOTE needs an integer k >= 1, got {self.k!r}")
            object.__setattr__(self, "k", int(self.k))
        if self.kind == "kde":
            h = AUTO if self.bandwidth is None else self.bandwidth
            if h != AUTO:
                h = float(h)
                if not (h > 0 and math.isfinite(h)):
                    raise ConfigurationError(f"KDE bandwidth must be positive, got {h}")
            object.__setattr__(self, "bandwidth", h)

    @classmethod
    def bootstrap(cls) -> "GeneratorSpec":
        return cls("bootstrap")

    @classmethod
    def smote(cls, k: int = 5) -> "GeneratorSpec":
        return cls("smote", k=k)

    @classmethod
    def kde(cls, bandwidth: float | str = AUTO) -> "GeneratorSpec":
        return cls("kde", bandwidth=bandwidth)

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        text = text.strip().lower()
        if text == "bootstrap":
            return cls.bootstrap()
        m = re.fullmatch(r"smote(?::k=(\d+))?", text)
        if m:
            return cls.smote(int(m.group(1)) if m.group(1) else 5)
        m = re.fullmatch(r"kde(?::h=([^\s]+))?", text)
        if m:
            h = m.group(1) or AUTO
            if h != AUTO:
                try:
                    h = float(h)
                except ValueError:
                    raise ConfigurationError(f"bad KDE bandwidth in {text!r}") from None
            return cls.kde(h)
        raise ConfigurationError(f"cannot parse generator {text!r}")

    def __str__(self) -> str:
        if self.kind == "smote":
            return f"smote:k={self.k}"
        if self.kind == "kde":
            return f"kde:h={self.bandwidth}"
        return "bootstrap"


@dataclass(frozen=True)
class SyntheticBatch:
    """``j`` synthetic minority points with the trace that produced them.

    For SMOTE, ``points[t] = (1 - lam[t]) * X[source_index[t]] +
    lam[t] * X[partner_index[t]]``; bootstrap and KDE leave ``partner_index``
    and ``lam`` as ``None``.
    """

    points: np.ndarray
    generator: GeneratorSpec
    source_size: int
    source_index: np.ndarray
    partner_index: np.ndarray | None = None
    lam: np.ndarray | None = None
    bandwidth: float | None = None

    def __len__(self):
        return self.points.shape[0]


def choose_j(n: int, n0: int, n1: int, mode: str = "estimated", pi0: float | None = None) -> int:
    """Number of synthetic minority samples for a balanced augmented set.

    ``"estimated"`` plugs in ``pi0_hat = n0 / n`` and returns
    ``max(0, n0 - n1)``; ``"exact"`` uses the known ``pi0`` and returns
    ``ceil((2 pi0 - 1) n)``.
    """
    if n != n0 + n1:
        raise ConfigurationError(f"n = {n} but n0 + n1 = {n0 + n1}")
    if mode == "estimated":
        return max(0, n0 - n1)
    if mode == "exact":
        if pi0 is None:
            raise ConfigurationError("exact J needs the true majority prior pi0")
        # round() first so 800.0000000000001 does not ceil to 801
        return max(0, math.ceil(round((2.0 * pi0 - 1.0) * n, 9)))
    raise ConfigurationError(f"unknown J mode {mode!r}")


def _minority_array(minority) -> np.ndarray:
    X = np.asarray(minority, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if X.size else X.reshape(0, 1)
    return X


def _check_j(j: int) -> int:
    j = int(j)
    if j < 0:
        raise ConfigurationError(f"j must be nonnegative, got {j}")
    return j


def bootstrap_sample(minority, j: int, seed) -> SyntheticBatch:
    """Draw ``j`` minority points uniformly with replacement."""
    X = _minority_array(minority)
    j = _check_j(j)
    n1 = X.shape[0]
    if j > 0 and n1 == 0:
        raise InsufficientDataError("bootstrap needs at least one minority point")
    rng = make_rng(seed)
    src = rng.integers(n1, size=j) if j else np.zeros(0, dtype=np.int64)
    return SyntheticBatch(X[src], GeneratorSpec.bootstrap(), n1, src)


def smote_sample(minority, k: int, j: int, seed) -> SyntheticBatch:
    """SMOTE: a uniform point on the segment from a random minority point
    to one of its ``k`` nearest minority neighbors.

    Each synthetic point draws its anchor (with replacement), its neighbor
    and its interpolation weight independently.
    """
    X = _minority_array(minority)
    j = _check_j(j)
    spec = GeneratorSpec.smote(k)
    n1 = X.shape[0]
    if j == 0:
        empty = np.zeros(0, dtype=np.int64)
        return SyntheticBatch(X[:0], spec, n1, empty, empty, np.zeros(0))
    if n1 <= k:
        raise InsufficientDataError(
            f"SMOTE with k = {k} needs at least {k + 1} minority points, have {n1}"
        )
    nbrs, _ = KnnIndex(X).neighbors(k)
    rng = make_rng(seed)
    src = rng.integers(n1, size=j)
    partner = nbrs[src, rng.integers(k, size=j)]
    lam = rng.random(j)
    points = X[src] + lam[:, None] * (X[partner] - X[src])
    return SyntheticBatch(points, spec, n1, src, partner, lam)


def silverman_bandwidth(minority) -> float:
    """``1.06 * sigma_hat * n1^(-1/(4 + d))``, ``sigma_hat`` the mean
    per-coordinate sample standard deviation."""
    X = _minority_array(minority)
    n1, d = X.shape
    if n1 < 2:
        raise InsufficientDataError("automatic bandwidth needs at least two minority points")
    sigma_hat = float(np.mean(X.std(axis=0, ddof=1)))
    if sigma_hat == 0.0:
        raise InsufficientDataError("automatic bandwidth is zero: minority points coincide")
    return 1.06 * sigma_hat * n1 ** (-1.0 / (4 + d))


def kde_sample(minority, bandwidth, j: int, seed) -> SyntheticBatch:
    """Sample the Gaussian-kernel KDE: a random minority point plus ``h * Z``."""
    X = _minority_array(minority)
    j = _check_j(j)
    spec = GeneratorSpec.kde(bandwidth)
    n1, d = X.shape
    if j > 0 and n1 == 0:
        raise InsufficientDataError("KDE needs at least one minority point")
    if j == 0:
        return SyntheticBatch(X[:0], spec, n1, np.zeros(0, dtype=np.int64))
    h = silverman_bandwidth(X) if spec.bandwidth == AUTO else spec.bandwidth
    rng = make_rng(seed)
    src = rng.integers(n1, size=j)
    points = X[src] + h * rng.standard_normal((j, d))
    return SyntheticBatch(points, spec, n1, src, bandwidth=h)


def generate(spec: GeneratorSpec, minority, j: int, seed) -> SyntheticBatch:
    """Dispatch on ``spec.kind``."""
    if spec.kind == "bootstrap":
        return bootstrap_sample(minority, j, seed)
    if spec.kind == "smote":
        return smote_sample(minority, spec.k, j, seed)
    return kde_sample(minority, spec.bandwidth, j, seed)
