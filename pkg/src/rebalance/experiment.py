"""Monte Carlo sweep over (dimension, sample size, seed, method).

Every cell samples observed data and trains one pipeline.  It then scores the
excess risk under the balanced target against the Gaussian Bayes
conditional.  Cell seeds come from ``derive_seed`` applied to the master
seed and the cell identifiers:

* data:  ``derive_seed(master, "data", d, n, seed)``
* train: ``derive_seed(master, "train", d, n, seed, method)``
* eval:  ``derive_seed(master, "eval", d, n, seed)``

Data and evaluation streams do not depend on the method, so methods within
a (d, n, seed) cell see the same training set and the same evaluation set.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import BALANCED, MixtureSpec, fstar_gaussian, sample_observed
from .erm import OptimizerOptions, RiskReport, evaluate_risk
from .errors import ConfigurationError, PipelineError
from .pipelines import PipelineConfig, run_pipeline
from .rng import derive_seed

log = logging.getLogger(__name__)

__all__ = [
    "RESULTS_HEADER",
    "ExperimentConfig",
    "CellResult",
    "RatioSummary",
    "run_cell",
    "run_experiment",
    "summarize_ratio",
    "read_results",
    "resolve_workers",
]

RESULTS_HEADER = (
    "d,n,seed,method,generator,J,excess_risk,excess_risk_se,est_error_q,type2_error,status"
).split(",")
SUMMARY_HEADER = "d,n,numerator,denominator,median_ratio,q25,q75,pairs,floored,missing".split(",")


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition, loadable from JSON with the same field names.

    ``spec_template`` holds ``pi0``, ``sigma`` and either ``scaled: true``
    (``mu0 = 0``, ``mu1 = signal / sqrt(d) * 1_d``) or explicit ``mu0`` and
    ``mu1`` whose length fixes the only admissible dimension.
    """

    spec_template: dict
    dims: tuple
    train_sizes: tuple
    seeds: tuple
    methods: tuple
    n_eval: int = 100_000
    output_dir: str = "results"
    master_seed: int = 0
    workers: int = 1
    ratio: tuple | None = None
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)

    def __post_init__(self):
        for name in ("dims", "train_sizes", "seeds", "methods"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must be nonempty")
        if any(int(d) < 1 for d in self.dims) or any(int(n) < 1 for n in self.train_sizes):
            raise ConfigurationError("dims and train_sizes must be positive integers")
        if self.n_eval < 10_000:
            raise ConfigurationError(f"n_eval must be at least 10^4, got {self.n_eval}")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"method labels must be unique, got {names}")
        for d in self.dims:
            self.spec_for(d)

    def spec_for(self, d: int) -> MixtureSpec:
        t = self.spec_template
        if t.get("scaled", "mu1" not in t):
            return MixtureSpec.scaled(
                int(d),
                pi0=t.get("pi0", 0.9),
                signal=t.get("signal", 1.0),
                sigma=t.get("sigma", 1.0),
            )
        spec = MixtureSpec.from_dict(t)
        if spec.dim != d:
            raise ConfigurationError(f"explicit means have dimension {spec.dim}, sweep asks {d}")
        return spec

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigurationError(f"unknown experiment fields {sorted(unknown)}")
        missing = {"spec_template", "dims", "train_sizes", "seeds", "methods"} - set(obj)
        if missing:
            raise ConfigurationError(f"experiment config missing {sorted(missing)}")
        opt = OptimizerOptions.from_dict(obj.pop("optimizer", None))
        methods = tuple(PipelineConfig.parse(m, opt) for m in obj.pop("methods"))
        ratio = obj.pop("ratio", None)
        if ratio is not None:
            if isinstance(ratio, dict):
                ratio = (ratio["numerator"], ratio["denominator"])
            ratio = tuple(ratio)
        return cls(
            spec_template=dict(obj.pop("spec_template")),
            dims=tuple(int(v) for v in obj.pop("dims")),
            train_sizes=tuple(int(v) for v in obj.pop("train_sizes")),
            seeds=tuple(int(v) for v in obj.pop("seeds")),
            methods=methods,
            ratio=ratio,
            optimizer=opt,
            **obj,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None

    def to_dict(self) -> dict:
        out = {
            "spec_template": self.spec_template,
            "dims": list(self.dims),
            "train_sizes": list(self.train_sizes),
            "seeds": list(self.seeds),
            "methods": [m.to_dict() for m in self.methods],
            "n_eval": self.n_eval,
            "output_dir": self.output_dir,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "optimizer": self.optimizer.to_dict(),
        }
        if self.ratio:
            out["ratio"] = list(self.ratio)
        return out

    def cells(self):
        """Cell keys ``(d, n, seed, method_index)`` in canonical order."""
        for d in self.dims:
            for n in self.train_sizes:
                for s in self.seeds:
                    for m in range(len(self.methods)):
                        yield d, n, s, m


@dataclass(frozen=True)
class CellResult:
    """One (d, n, seed, method) row of results.csv."""

    d: int
    n: int
    seed: int
    method: str
    generator: str
    J: int | None
    risk: RiskReport | None
    status: str
    manifest: dict = field(default_factory=dict, compare=False)

    @property
    def key(self):
        return self.d, self.n, self.seed, self.method

    @property
    def ok(self) -> bool:
        return self.status.startswith("ok")

    def to_row(self) -> list[str]:
        def fmt(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))

        r = self.risk
        return [
            str(self.d),
            str(self.n),
            str(self.seed),
            self.method,
            self.generator,
            "" if self.J is None else str(self.J),
            fmt(r.excess_risk if r else None),
            fmt(r.excess_risk_se if r else None),
            fmt(r.est_error_q if r else None),
            fmt(r.type2_error if r else None),
            self.status,
        ]

    @classmethod
    def from_row(cls, row: dict, n_eval: int = 0) -> "CellResult":
        risk = None
        if row["excess_risk"] != "":
            risk = RiskReport(
                excess_risk=float(row["excess_risk"]),
                excess_risk_se=float(row["excess_risk_se"]),
                est_error_q=float(row["est_error_q"]),
                type2_error=float(row["type2_error"]) if row["type2_error"] else math.nan,
                n_eval=n_eval,
            )
        return cls(
            d=int(row["d"]),
            n=int(row["n"]),
            seed=int(row["seed"]),
            method=row["method"],
            generator=row["generator"],
            J=int(row["J"]) if row["J"] != "" else None,
            risk=risk,
            status=row["status"],
        )


def run_cell(cfg: ExperimentConfig, d: int, n: int, seed: int, method: int) -> CellResult:
    """Run one cell; pipeline failures become an ``error:<Type>`` status."""
    mcfg = cfg.methods[method]
    spec = cfg.spec_for(d)
    data = sample_observed(spec, n, derive_seed(cfg.master_seed, "data", d, n, seed))
    generator = str(mcfg.generator) if mcfg.generator else ""
    train_seed = derive_seed(cfg.master_seed, "train", d, n, seed, mcfg.name)
    try:
        run = run_pipeline(data, mcfg, train_seed, spec)
    except (PipelineError, ConfigurationError) as exc:
        cause = getattr(exc, "cause", exc)
        log.warning("cell d=%s n=%s seed=%s %s failed: %s", d, n, seed, mcfg.name, exc)
        return CellResult(
            d, n, seed, mcfg.name, generator, None, None,
            f"error:{type(cause).__name__}", {"error": str(exc)},
        )
    risk = evaluate_risk(
        run.model,
        fstar_gaussian(spec),
        spec,
        BALANCED,
        cfg.n_eval,
        derive_seed(cfg.master_seed, "eval", d, n, seed),
    )
    status = "ok" if run.manifest["optimizer_status"] == "converged" else "ok:ridge-rerun"
    return CellResult(
        d, n, seed, mcfg.name, generator, int(run.manifest["J"]), risk, status, run.manifest
    )


def _run_cell_star(args):
    return run_cell(*args)


def resolve_workers(cfg_workers: int = 1, flag: int | None = None) -> int:
    """Worker count: explicit flag, else ``RL_WORKERS``, else the config."""
    if flag is not None:
        value = flag
    elif os.environ.get("RL_WORKERS"):
        try:
            value = int(os.environ["RL_WORKERS"])
        except ValueError:
            raise ConfigurationError("RL_WORKERS must be an integer") from None
    else:
        value = cfg_workers
    if value < 1:
        raise ConfigurationError(f"worker count must be positive, got {value}")
    return value


def read_results(path, n_eval: int = 0) -> list[CellResult]:
    """Parse results.csv, skipping malformed (e.g. truncated) rows."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise ConfigurationError(f"{path}: unexpected header {header}")
        for row in reader:
            if len(row) != len(RESULTS_HEADER):
                continue
            try:
                out.append(CellResult.from_row(dict(zip(RESULTS_HEADER, row)), n_eval))
            except ValueError:
                continue
    return out


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(buf.getvalue())
    os.replace(tmp, path)


def run_experiment(
    cfg: ExperimentConfig,
    output_dir=None,
    *,
    resume: bool = False,
    workers: int | None = None,
) -> list[CellResult]:
    """Run every cell and write ``results.csv``, ``summary.csv`` and
    ``ratios.csv`` under the output directory.

    Rows are appended to results.csv as cells finish; the file is then
    rewritten in canonical cell order, so the final bytes do not depend on
    worker count or completion order.  With ``resume=True`` cells already
    present in results.csv are kept and not recomputed.
    """
    out_dir = Path(output_dir or cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output dir {out_dir}: {exc}") from None
    results_path = out_dir / "results.csv"
    n_workers = resolve_workers(cfg.workers, workers)

    keys = list(cfg.cells())
    names = [m.name for m in cfg.methods]
    done: dict[tuple, CellResult] = {}
    if resume and results_path.exists():
        wanted = {(d, n, s, names[m]) for d, n, s, m in keys}
        for row in read_results(results_path, cfg.n_eval):
            if row.key in wanted:
                done[row.key] = row
    todo = [k for k in keys if (k[0], k[1], k[2], names[k[3]]) not in done]
    log.info("%d cells, %d cached, %d to run with %d workers",
             len(keys), len(done), len(todo), n_workers)

    # Incremental append; the canonical rewrite below replaces it.
    _write_csv(results_path, RESULTS_HEADER, [done[k].to_row() for k in sorted(done)])
    with open(results_path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")

        def record(res: CellResult):
            done[res.key] = res
            writer.writerow(res.to_row())
            fh.flush()

        if n_workers == 1 or len(todo) <= 1:
            for k in todo:
                record(run_cell(cfg, *k))
        else:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                futures = [pool.submit(_run_cell_star, (cfg, *k)) for k in todo]
                for fut in as_completed(futures):
                    record(fut.result())

    results = [done[(d, n, s, names[m])] for d, n, s, m in keys]
    _write_csv(results_path, RESULTS_HEADER, [r.to_row() for r in results])

    num, den = cfg.ratio or _default_ratio(cfg)
    summaries = summarize_ratio(results, num, den) if num and den else []
    _write_csv(
        out_dir / "summary.csv",
        SUMMARY_HEADER,
        [s.to_row() for s in summaries],
    )
    _write_csv(
        out_dir / "ratios.csv",
        ["d", "n", "seed", "ratio", "floored"],
        [
            [s.d, s.n, seed, repr(r), int(fl)]
            for s in summaries
            for seed, r, fl in zip(s.seeds, s.ratios, s.floored_flags)
        ],
    )
    (out_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return results


def _default_ratio(cfg: ExperimentConfig):
    num = next((m.name for m in cfg.methods if m.generator and m.generator.kind == "smote"), None)
    den = next((m.name for m in cfg.methods if m.generator and m.generator.kind == "bootstrap"), None)
    return num, den


@dataclass(frozen=True)
class RatioSummary:
    """Per-(d, n) distribution over seeds of paired excess-risk ratios."""

    d: int
    n: int
    numerator: str
    denominator: str
    median: float
    q25: float
    q75: float
    seeds: tuple
    ratios: tuple
    floored_flags: tuple
    missing: int

    @property
    def pairs(self) -> int:
        return len(self.ratios)

    @property
    def floored(self) -> int:
        return int(sum(self.floored_flags))

    def to_row(self) -> list[str]:
        def fmt(v):
            return "" if math.isnan(v) else repr(v)

        return [
            str(self.d), str(self.n), self.numerator, self.denominator,
            fmt(self.median), fmt(self.q25), fmt(self.q75),
            str(self.pairs), str(self.floored), str(self.missing),
        ]


def _floored(risk: RiskReport) -> tuple[float, bool]:
    if risk.excess_risk > 0:
        return risk.excess_risk, False
    return risk.excess_risk_se, True


def summarize_ratio(
    results: list[CellResult], numerator: str, denominator: str
) -> list[RatioSummary]:
    """Median and interquartile range of ``ER(numerator) / ER(denominator)``.

    Ratios are paired by seed within each (d, n).  A nonpositive excess
    risk is replaced by its standard error before dividing and the pair is
    flagged.  Seeds lacking a successful row for either method are counted
    in ``missing`` and never imputed.
    """
    by_key = {r.key: r for r in results}
    grid: dict[tuple, set] = {}
    for r in results:
        if r.method in (numerator, denominator):
            grid.setdefault((r.d, r.n), set()).add(r.seed)
    out = []
    for (d, n) in sorted(grid, key=lambda k: (k[0], k[1])):
        seeds, ratios, flags = [], [], []
        missing = 0
        for s in sorted(grid[(d, n)]):
            a = by_key.get((d, n, s, numerator))
            b = by_key.get((d, n, s, denominator))
            if a is None or b is None or a.risk is None or b.risk is None:
                missing += 1
                continue
            ra, fa = _floored(a.risk)
            rb, fb = _floored(b.risk)
            seeds.append(s)
            ratios.append(ra / rb)
            flags.append(fa or fb)
        if ratios:
            q25, med, q75 = (float(v) for v in np.percentile(ratios, [25, 50, 75]))
        else:
            q25 = med = q75 = math.nan
        out.append(
            RatioSummary(d, n, numerator, denominator, med, q25, q75,
                         tuple(seeds), tuple(ratios), tuple(flags), missing)
        )
    return out
