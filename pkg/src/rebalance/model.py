"""Clipped affine logistic model and the cross-entropy loss."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, DomainError

CLIP_EPS = 1e-6


def cross_entropy(y, p):
    """``-y log p - (1 - y) log(1 - p)``, elementwise.

    Raises
    ------
    DomainError
        If any ``p`` is outside the open interval (0, 1).
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0.0)) or np.any(~(p < 1.0)):
        raise DomainError("cross-entropy needs probabilities strictly inside (0, 1)")
    out = -y * np.log(p) - (1.0 - y) * np.log1p(-p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LogisticModel:
    """``f(x) = clip(sigmoid(w . x + b), clip_eps, 1 - clip_eps)``."""

    w: np.ndarray
    b: float = 0.0
    clip_eps: float = CLIP_EPS

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        w.flags.writeable = False
        if not 0.0 < self.clip_eps < 0.5:
            raise ConfigurationError(f"clip_eps must be in (0, 1/2), got {self.clip_eps}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "clip_eps", float(self.clip_eps))

    @property
    def dim(self) -> int:
        return int(self.w.size)

    def logit(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim)
        return X @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        p = expit(self.logit(X))
        return np.clip(p, self.clip_eps, 1.0 - self.clip_eps)

    def to_dict(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b, "clip_eps": self.clip_eps}

    @classmethod
    def from_dict(cls, obj: dict) -> "LogisticModel":
        return cls(w=obj["w"], b=obj["b"], clip_eps=obj.get("clip_eps", CLIP_EPS))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LogisticModel":
        return cls.from_dict(json.loads(text))

    def with_intercept_shift(self, delta: float) -> "LogisticModel":
        return LogisticModel(self.w, self.b + delta, self.clip_eps)
