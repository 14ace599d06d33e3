"""End-to-end estimators of the target conditional ``Q*(Y = 1 | X)``.

* rebalance: augment the data with ``J`` synthetic minority points, then ERM.
* undersample: keep ``K`` random majority points and every minority point, then ERM.
* plugin: ERM under the source, then reweight ``g_hat`` by the class priors.
* erm-raw: plain ERM under the source (the baseline that ignores the shift).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import BALANCED, Dataset, MixtureSpec, TargetSpec
from .erm import OptimizerOptions, erm_train
from .errors import (
    ConfigurationError,
    DegeneratePriorError,
    DegenerateSeparationError,
    InsufficientDataError,
    PipelineError,
    RebalanceError,
)
from .generators import GeneratorSpec, SyntheticBatch, choose_j, generate
from .model import LogisticModel
from .rng import derive_seed, make_rng

__all__ = [
    "METHODS",
    "PipelineConfig",
    "PluginModel",
    "PipelineRun",
    "estimated_j",
    "run_pipeline",
    "rebalance_train",
    "undersample_train",
    "plugin_train",
    "train_general_target",
]

METHODS = ("rebalance", "undersample", "plugin", "erm-raw")
SEPARATION_RIDGE = 1e-8


@dataclass(frozen=True)
class PipelineConfig:
    """One estimator and its settings.

    Parameters
    ----------
    method : {"rebalance", "undersample", "plugin", "erm-raw"}
    generator : GeneratorSpec
        Synthetic sampler, rebalance only.
    j_rule : "estimated", "exact" or int
        Number of synthetic points; an int fixes ``J``.
    k_rule : "match" or int
        Majority subsample size for undersampling; ``"match"`` uses ``n1``.
    prior_source : {"estimated", "known"}
        Where the plug-in gets ``(pi0, pi1)``.
    target : TargetSpec
    optimizer : OptimizerOptions
    label : str, optional
        Row name in experiment output.  Defaults to the generator string for
        rebalance and to the method name otherwise.
    """

    method: str
    generator: GeneratorSpec | None = None
    j_rule: str | int = "estimated"
    k_rule: str | int = "match"
    prior_source: str = "estimated"
    target: TargetSpec = BALANCED
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    label: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "rebalance" and self.generator is None:
            raise ConfigurationError("rebalance needs a generator")
        if isinstance(self.j_rule, str):
            if self.j_rule not in ("estimated", "exact"):
                raise ConfigurationError(f"unknown J rule {self.j_rule!r}")
        elif int(self.j_rule) != self.j_rule or self.j_rule < 0:
            raise ConfigurationError(f"fixed J must be a nonnegative integer, got {self.j_rule}")
        if isinstance(self.k_rule, str):
            if self.k_rule != "match":
                raise ConfigurationError(f"unknown K rule {self.k_rule!r}")
        elif int(self.k_rule) != self.k_rule or self.k_rule < 1:
            raise ConfigurationError(f"fixed K must be a positive integer, got {self.k_rule}")
        if self.prior_source not in ("estimated", "known"):
            raise ConfigurationError(f"unknown prior source {self.prior_source!r}")
        if self.method == "undersample" and not self.target.is_balanced:
            raise ConfigurationError("undersampling targets the balanced distribution only")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.method == "rebalance":
            return str(self.generator)
        return self.method

    @classmethod
    def parse(cls, obj, optimizer: OptimizerOptions | None = None) -> "PipelineConfig":
        """Build from a config entry.

        A bare generator string (``"smote:k=5"``, ``"bootstrap"``) means
        rebalancing with that generator; a bare method name uses defaults.
        A dict may carry ``method``, ``generator``, ``j``, ``k``, ``prior``,
        ``pi1_star``, ``optimizer`` and ``label``.
        """
        opt = optimizer or OptimizerOptions()
        if isinstance(obj, str):
            if obj in METHODS:
                obj = {"method": obj}
            else:
                obj = {"method": "rebalance", "generator": obj}
        if not isinstance(obj, dict):
            raise ConfigurationError(f"cannot parse pipeline entry {obj!r}")
        known = {"method", "generator", "j", "k", "prior", "pi1_star", "optimizer", "label"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown pipeline fields {sorted(unknown)}")
        method = obj.get("method", "rebalance" if "generator" in obj else None)
        gen = obj.get("generator")
        if "optimizer" in obj:
            opt = OptimizerOptions.from_dict({**opt.to_dict(), **obj["optimizer"]})
        target = TargetSpec.from_pi1(obj["pi1_star"]) if "pi1_star" in obj else BALANCED
        return cls(
            method=method,
            generator=GeneratorSpec.parse(gen) if isinstance(gen, str) else gen,
            j_rule=obj.get("j", "estimated"),
            k_rule=obj.get("k", "match"),
            prior_source=obj.get("prior", "estimated"),
            target=target,
            optimizer=opt,
            label=obj.get("label"),
        )

    def to_dict(self) -> dict:
        out = {"method": self.method, "label": self.name}
        if self.method == "rebalance":
            out.update(generator=str(self.generator), j=self.j_rule)
        elif self.method == "undersample":
            out["k"] = self.k_rule
        elif self.method == "plugin":
            out["prior"] = self.prior_source
        if not self.target.is_balanced:
            out["pi1_star"] = self.target.pi1_star
        out["optimizer"] = self.optimizer.to_dict()
        return out


@dataclass(frozen=True)
class PluginModel:
    """Prior-reweighted source conditional.

    For the balanced target, ``predict(x) = pi0 / (pi0 + pi1 * (1/g_hat(x) - 1))``.
    ``g_hat`` is clipped away from 0 and 1, so the division is always defined.
    """

    g_hat: LogisticModel
    pi0: float
    target: TargetSpec = BALANCED

    def __post_init__(self):
        if not 0.0 < self.pi0 < 1.0:
            raise DegeneratePriorError(f"pi0 must lie strictly inside (0, 1), got {self.pi0}")

    @property
    def pi1(self) -> float:
        return 1.0 - self.pi0

    def predict(self, X) -> np.ndarray:
        g = self.g_hat.predict(X)
        if self.target.is_balanced:
            return self.pi0 / (self.pi0 + self.pi1 * (1.0 / g - 1.0))
        num = self.pi0 * self.target.pi1_star * g
        return num / (num + self.pi1 * self.target.pi0_star * (1.0 - g))

    def to_dict(self) -> dict:
        return {
            "kind": "plugin",
            "g_hat": self.g_hat.to_dict(),
            "pi0": self.pi0,
            "pi1_star": self.target.pi1_star,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PluginModel":
        return cls(
            LogisticModel.from_dict(obj["g_hat"]),
            obj["pi0"],
            TargetSpec.from_pi1(obj.get("pi1_star", 0.5)),
        )


@dataclass(frozen=True)
class PipelineRun:
    """A trained model and the provenance the experiment harness records."""

    model: LogisticModel | PluginModel
    manifest: dict
    batch: SyntheticBatch | None = None


def estimated_j(n0: int, n1: int, target: TargetSpec = BALANCED) -> int:
    """``J`` that brings the augmented class ratio to ``pi1* / pi0*``.

    Balanced target: ``n0 - n1``.  Otherwise
    ``max(0, round(n0 * pi1* / pi0* - n1))`` with halves rounded up.
    """
    if target.is_balanced:
        return choose_j(n0 + n1, n0, n1, "estimated")
    raw = n0 * target.pi1_star / target.pi0_star - n1
    return max(0, math.floor(round(raw, 9) + 0.5))


def _exact_j(data: Dataset, spec: MixtureSpec | None, target: TargetSpec) -> int:
    if spec is None:
        raise ConfigurationError("the exact J rule needs the true mixture spec")
    if target.is_balanced:
        return choose_j(data.n, data.n0, data.n1, "exact", pi0=spec.pi0)
    raw = data.n * (spec.pi0 * target.pi1_star / target.pi0_star - spec.pi1)
    return max(0, math.ceil(round(raw, 9)))


def _fit(X, y, cfg: PipelineConfig, manifest: dict) -> LogisticModel:
    try:
        model = erm_train(X, y, options=cfg.optimizer)
        manifest["optimizer_status"] = "converged"
        return model
    except DegenerateSeparationError:
        if cfg.optimizer.ridge_lambda > 0 or np.unique(y).size < 2:
            raise
    model = erm_train(X, y, options=replace(cfg.optimizer, ridge_lambda=SEPARATION_RIDGE))
    manifest["optimizer_status"] = "ridge-rerun"
    return model


def _rebalance(data, cfg, seed, spec):
    n1 = data.n1
    if n1 < 1:
        raise InsufficientDataError("rebalancing needs at least one minority sample")
    if isinstance(cfg.j_rule, str):
        j = (
            estimated_j(data.n0, n1, cfg.target)
            if cfg.j_rule == "estimated"
            else _exact_j(data, spec, cfg.target)
        )
    else:
        j = int(cfg.j_rule)
    batch = generate(cfg.generator, data.minority(), j, derive_seed(seed, "generate"))
    X = np.concatenate([data.X, batch.points]) if j else data.X
    y = np.concatenate([data.y, np.ones(j, dtype=np.int64)]) if j else data.y
    manifest = {"J": j, "generator": str(cfg.generator)}
    if batch.bandwidth is not None:
        manifest["bandwidth"] = batch.bandwidth
    return _fit(X, y, cfg, manifest), manifest, batch


def _undersample(data, cfg, seed):
    n0, n1 = data.n0, data.n1
    if n1 < 1:
        raise InsufficientDataError("undersampling needs at least one minority sample")
    k = n1 if cfg.k_rule == "match" else int(cfg.k_rule)
    if k > n0:
        raise ConfigurationError(f"cannot subsample K = {k} from n0 = {n0} majority points")
    rng = make_rng(derive_seed(seed, "undersample"))
    keep = rng.permutation(data.idx0)[:k]
    X = np.concatenate([data.X[keep], data.X[data.idx1]])
    y = np.concatenate([np.zeros(k, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    manifest = {"J": 0, "K": k}
    return _fit(X, y, cfg, manifest), manifest


def _plugin(data, cfg, spec):
    if cfg.prior_source == "known":
        if spec is None:
            raise ConfigurationError("known priors need the mixture spec")
        pi0 = spec.pi0
    else:
        if data.n0 == 0 or data.n1 == 0:
            raise DegeneratePriorError(
                f"empirical priors undefined with n0 = {data.n0}, n1 = {data.n1}"
            )
        pi0 = data.n0 / data.n
    manifest = {"J": 0, "pi0": pi0}
    g_hat = _fit(data.X, data.y, cfg, manifest)
    return PluginModel(g_hat, pi0, cfg.target), manifest


def run_pipeline(
    data: Dataset, cfg: PipelineConfig, seed, spec: MixtureSpec | None = None
) -> PipelineRun:
    """Train ``cfg`` on ``data`` and return the model with its manifest.

    Raises
    ------
    PipelineError
        Wraps any generator or ERM failure; ``cause`` holds the original.
    ConfigurationError
        Settings incompatible with the data (e.g. ``K > n0``).
    """
    batch = None
    try:
        if cfg.method == "rebalance":
            model, manifest, batch = _rebalance(data, cfg, seed, spec)
        elif cfg.method == "undersample":
            model, manifest = _undersample(data, cfg, seed)
        elif cfg.method == "plugin":
            model, manifest = _plugin(data, cfg, spec)
        else:
            manifest = {"J": 0}
            model = _fit(data.X, data.y, cfg, manifest)
    except ConfigurationError:
        raise
    except RebalanceError as exc:
        raise PipelineError(f"{cfg.name} (seed {seed}): {exc}", exc) from exc
    manifest.update(method=cfg.method, label=cfg.name, seed=seed)
    manifest.setdefault("generator", "")
    return PipelineRun(model, manifest, batch)


def rebalance_train(data: Dataset, cfg: PipelineConfig, seed, spec=None) -> LogisticModel:
    """Rebalancing: ERM on the data plus ``J`` synthetic minority points."""
    if cfg.method != "rebalance":
        raise ConfigurationError(f"expected a rebalance config, got {cfg.method!r}")
    return run_pipeline(data, cfg, seed, spec).model


def undersample_train(data: Dataset, cfg: PipelineConfig, seed) -> LogisticModel:
    """Undersampling: ERM on ``K`` random majority points and all minority points."""
    if cfg.method != "undersample":
        raise ConfigurationError(f"expected an undersample config, got {cfg.method!r}")
    return run_pipeline(data, cfg, seed).model


def plugin_train(data: Dataset, cfg: PipelineConfig, spec=None, seed=0) -> PluginModel:
    """Plug-in: source ERM followed by prior reweighting."""
    if cfg.method != "plugin":
        raise ConfigurationError(f"expected a plugin config, got {cfg.method!r}")
    return run_pipeline(data, cfg, seed, spec).model


def train_general_target(
    data: Dataset, target: TargetSpec, cfg: PipelineConfig, seed, spec=None
) -> LogisticModel:
    """Rebalance toward an arbitrary target prior ``pi1*``."""
    if cfg.method != "rebalance":
        raise ConfigurationError(f"expected a rebalance config, got {cfg.method!r}")
    return run_pipeline(data, replace(cfg, target=target), seed, spec).model
