"""Command-line entry point.

Subcommands: ``generate``, ``train``, ``evaluate``, ``experiment``, ``diag``.
Exit status is 0 on success, 1 on configuration or input errors, and 2 when
a diagnostic suite has a failing row.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .diagnostics import SUITES, run_diagnostics
from .distributions import BALANCED, Dataset, MixtureSpec, TargetSpec, fstar_gaussian
from .distributions import sample_observed, sample_target
from .erm import OptimizerOptions, evaluate_risk
from .errors import ConfigurationError, RebalanceError
from .experiment import ExperimentConfig, run_experiment
from .model import LogisticModel
from .pipelines import PipelineConfig, PluginModel, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_DIAG = 0, 1, 2

log = logging.getLogger("rebalance")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None


def _load_spec(path) -> MixtureSpec:
    try:
        return MixtureSpec.from_dict(_load_json(path))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{path}: bad mixture spec ({exc})") from None


def _target(pi1_star) -> TargetSpec:
    return BALANCED if pi1_star is None else TargetSpec.from_pi1(pi1_star)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    spec = _load_spec(args.spec)
    if args.n < 1:
        raise ConfigurationError("--n must be positive")
    if args.pi1_star is None:
        data = sample_observed(spec, args.n, args.seed)
    else:
        data = sample_target(spec, _target(args.pi1_star), args.n, args.seed)
    if args.out:
        data.to_csv(args.out)
    else:
        data.to_csv(sys.stdout)
    return EXIT_OK


def _method_arg(text: str):
    text = text.strip()
    return json.loads(text) if text.startswith("{") else text


def cmd_train(args) -> int:
    try:
        data = Dataset.from_csv(args.data)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {args.data}: {exc}") from None
    spec = _load_spec(args.spec) if args.spec else None
    opt = OptimizerOptions.from_dict(_load_json(args.optimizer)) if args.optimizer else None
    try:
        cfg = PipelineConfig.parse(_method_arg(args.method), opt)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"--method: invalid JSON ({exc})") from None
    run = run_pipeline(data, cfg, args.seed, spec)
    model = run.model.to_dict()
    if isinstance(run.model, LogisticModel):
        model = {"kind": "logistic", **model}
    payload = {"model": model, "manifest": run.manifest}
    _emit(json.dumps(payload, indent=2, default=str) + "\n", args.out)
    return EXIT_OK


def _load_model(path):
    obj = _load_json(path)
    obj = obj.get("model", obj)
    if obj.get("kind") == "plugin":
        return PluginModel.from_dict(obj)
    return LogisticModel.from_dict(obj)


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    spec = _load_spec(args.spec)
    target = _target(args.pi1_star)
    report = evaluate_risk(model, fstar_gaussian(spec, target), spec, target, args.n_eval, args.seed)
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    results = run_experiment(cfg, args.output_dir, resume=args.resume, workers=args.workers)
    failed = sum(not r.ok for r in results)
    out = Path(args.output_dir or cfg.output_dir)
    log.info("wrote %d rows (%d failed cells) to %s", len(results), failed, out)
    print((out / "summary.csv").read_text(), end="")
    return EXIT_OK


def cmd_diag(args) -> int:
    status = EXIT_OK
    chunks = []
    for suite in args.suite:
        rep = run_diagnostics(suite, seed=args.seed, quick=args.quick)
        text = rep.to_csv()
        chunks.append(text if not chunks else text.split("\n", 1)[1])
        for row in rep.failures:
            print(f"FAILED {row.suite}: {row.check} measured={row.measured!r} "
                  f"threshold={row.threshold!r}", file=sys.stderr)
            status = EXIT_DIAG
    _emit("".join(chunks), args.out)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rebalance", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a dataset CSV from a mixture spec")
    g.add_argument("--spec", required=True, help="mixture spec JSON")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--pi1-star", type=float, help="sample a target mixture with this class-1 prior")
    g.add_argument("--out", help="output CSV (default stdout)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one pipeline and write the model JSON")
    t.add_argument("--data", required=True, help="dataset CSV")
    t.add_argument("--method", default="bootstrap",
                   help="generator string, method name, or JSON pipeline object")
    t.add_argument("--spec", help="mixture spec JSON (for known priors or exact J)")
    t.add_argument("--optimizer", help="optimizer options JSON")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", help="output JSON (default stdout)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="Monte Carlo risk report for a trained model")
    e.add_argument("--model", required=True)
    e.add_argument("--spec", required=True)
    e.add_argument("--pi1-star", type=float)
    e.add_argument("--n-eval", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="run a sweep from a JSON config")
    x.add_argument("--config", required=True)
    x.add_argument("--output-dir", help="override the config's output_dir")
    x.add_argument("--workers", type=int, help="process count (overrides RL_WORKERS)")
    x.add_argument("--resume", action="store_true", help="keep rows already in results.csv")
    x.set_defaults(func=cmd_experiment)

    d = sub.add_parser("diag", help="run diagnostic suites and print CSV")
    d.add_argument("--suite", nargs="+", default=list(SUITES), metavar="SUITE",
                   help=f"one or more of {', '.join(SUITES)}")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--quick", action="store_true", help="smaller samples")
    d.add_argument("--out")
    d.set_defaults(func=cmd_diag)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except RebalanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
