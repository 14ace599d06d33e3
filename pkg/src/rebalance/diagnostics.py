"""Batch property checks with measured values, emitted as CSV rows.

Suites:

``formulas``
    Closed-form type-II errors against Monte Carlo, as z-scores.
``coupling``
    Maximal-coupling mismatch against TV, u2 goodness of fit, and the
    TV / chi-square inequality on random discrete triples.
``geometry``
    1-NN in-degree against kissing numbers, the ``k * 5^d`` bound, and the
    log-log slope of the mean k-th neighbor distance.
``pluginbound``
    The plug-in identity and the plug-in estimation-error bound under
    random logit perturbations.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .distributions import (
    BALANCED,
    MixtureSpec,
    bayes_type2_error_balanced,
    bayes_type2_error_observed,
    fstar_gaussian,
    gstar_gaussian,
    sample_class_conditional,
    sample_observed,
    sample_target,
)
from .divergences import DiscreteDist, chi2_discrete, maximal_coupling_sample, tv_discrete
from .errors import ConfigurationError
from .knn import KnnIndex, max_indegree, rk_stats
from .model import LogisticModel
from .pipelines import PluginModel
from .rng import derive_seed, make_rng

__all__ = ["SUITES", "DiagRow", "DiagReport", "run_diagnostics", "KISSING"]

SUITES = ("formulas", "coupling", "geometry", "pluginbound")
KISSING = {1: 2, 2: 6, 3: 12}
_ALIASES = {"plugin": "pluginbound", "plugin-bound": "pluginbound"}


@dataclass(frozen=True)
class DiagRow:
    suite: str
    check: str
    measured: float
    threshold: float
    passed: bool

    def to_row(self) -> list[str]:
        return [self.suite, self.check, repr(float(self.measured)),
                repr(float(self.threshold)), "pass" if self.passed else "FAIL"]


@dataclass
class DiagReport:
    suite: str
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]

    def add(self, check, measured, threshold, passed):
        self.rows.append(DiagRow(self.suite, check, float(measured), float(threshold), bool(passed)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "check", "measured", "threshold", "status"])
        w.writerows(r.to_row() for r in self.rows)
        return buf.getvalue()


def _formulas(rep: DiagReport, seed, quick):
    n = 100_000 if quick else 1_000_000
    for gap in (1.0, 2.0, 3.0):
        for pi0 in (0.5, 0.9, 0.99):
            spec = MixtureSpec(pi0, [0.0], [gap])
            x1 = sample_class_conditional(spec, 1, n, derive_seed(seed, "formulas", gap, pi0))
            for name, formula, model in (
                ("observed", bayes_type2_error_observed(spec), gstar_gaussian(spec)),
                ("balanced", bayes_type2_error_balanced(spec), fstar_gaussian(spec)),
            ):
                mc = float(np.mean(model.predict(x1) < 0.5))
                se = math.sqrt(max(formula * (1 - formula), 1e-300) / n)
                z = (mc - formula) / se
                rep.add(f"type2_{name} gap={gap:g} pi0={pi0:g} |z|", abs(z), 3.0, abs(z) <= 3.0)


def _random_pair(rng, max_atoms=10):
    """Two distributions on partially overlapping integer atoms."""
    m = int(rng.integers(2, max_atoms + 1))
    universe = np.arange(max_atoms + 3, dtype=float)
    a = np.sort(rng.choice(universe, size=m, replace=False))
    b = np.sort(rng.choice(universe, size=int(rng.integers(2, max_atoms + 1)), replace=False))
    return (DiscreteDist(a, rng.dirichlet(np.ones(a.size))),
            DiscreteDist(b, rng.dirichlet(np.ones(b.size))))


def _coupling(rep: DiagReport, seed, quick):
    rng = make_rng(derive_seed(seed, "coupling"))
    n = 20_000 if quick else 100_000
    for t in range(20):
        p1, p2 = _random_pair(rng)
        tv = tv_discrete(p1, p2)
        trace = maximal_coupling_sample(p1, p2, n, derive_seed(seed, "coupling", t))
        mis = trace.mismatch_fraction
        sd = math.sqrt(tv * (1 - tv) / n)
        ok = abs(mis - tv) <= 4 * sd if sd > 0 else mis == tv
        rep.add(f"pair {t} mismatch-tv (tv={tv:.4f}) |dev|/sd",
                abs(mis - tv) / sd if sd > 0 else abs(mis - tv), 4.0, ok)
        # u2 marginal against p2 on the aligned atoms
        index = {tuple(a): i for i, a in enumerate(trace.atoms)}
        expected = np.zeros(len(index))
        for pt, m in zip(p2.points, p2.masses):
            expected[index[tuple(pt)]] = m
        counts = np.bincount(trace.u2_index, minlength=expected.size)
        stray = counts[expected == 0].sum()
        live = expected > 0
        pval = stats.chisquare(counts[live], n * expected[live]).pvalue if live.sum() > 1 else 1.0
        rep.add(f"pair {t} u2 goodness-of-fit p-value", pval, 1e-3, stray == 0 and pval >= 1e-3)
    worst = -math.inf
    for _ in range(100):
        q_pts = np.arange(8, dtype=float)
        q = DiscreteDist(q_pts, rng.dirichlet(np.ones(8)))
        pt = DiscreteDist(q_pts, rng.dirichlet(np.ones(8)))
        p1 = DiscreteDist(q_pts, rng.dirichlet(np.ones(8)))
        gap = tv_discrete(pt, p1) - 0.5 * math.sqrt(chi2_discrete(pt, p1, q))
        worst = max(worst, gap)
    rep.add("max tv - sqrt(chi2)/2 over 100 triples", worst, 0.0, worst <= 1e-12)


def _slope(d, ns, reps, seed):
    means = []
    for n in ns:
        vals = []
        for r in range(reps):
            rng = make_rng(derive_seed(seed, "slope", d, n, r))
            if d == 1:
                pts = rng.random((n, 1))
            else:
                g = rng.standard_normal((n, d))
                g /= np.linalg.norm(g, axis=1, keepdims=True)
                pts = g * rng.random((n, 1)) ** (1.0 / d)
            vals.append(rk_stats(KnnIndex(pts), 1)[0])
        means.append(np.mean(vals))
    return float(np.polyfit(np.log(ns), np.log(means), 1)[0])


def _geometry(rep: DiagReport, seed, quick):
    configs = 100 if quick else 1000
    for d, tau in KISSING.items():
        worst = 0
        rng = make_rng(derive_seed(seed, "indegree", d))
        for _ in range(configs):
            pts = rng.random((200, d))
            pts += 1e-9 * rng.standard_normal(pts.shape)
            worst = max(worst, max_indegree(KnnIndex(pts), 1))
        rep.add(f"d={d} max 1-NN in-degree over {configs} sets", worst, tau, worst <= tau)
    rng = make_rng(derive_seed(seed, "indegree-soft"))
    pts = rng.random((300, 4))
    idx = KnnIndex(pts)
    prev = 0
    for k in (1, 2, 3, 5, 8):
        m = max_indegree(idx, k)
        rep.add(f"d=4 k={k} max in-degree vs k*5^d", m, k * 5 ** 4, m <= k * 5 ** 4 and m >= prev)
        prev = m
    ns = [2 ** p for p in range(7, 12 if quick else 14)]
    for d in (1, 2, 4):
        s = _slope(d, ns, 2 if quick else 3, seed)
        rep.add(f"d={d} log-log slope of mean r_1 (target {-1 / d:.3f}) |dev|",
                abs(s + 1.0 / d), 0.2, abs(s + 1.0 / d) <= 0.2)


def _l2(a, b):
    """Root mean square of ``a - b`` and its delta-method standard error."""
    sq = (a - b) ** 2
    m = sq.mean()
    if m == 0:
        return 0.0, 0.0
    se_m = sq.std(ddof=1) / math.sqrt(sq.size)
    return math.sqrt(m), se_m / (2 * math.sqrt(m))


def _pluginbound(rep: DiagReport, seed, quick):
    spec = MixtureSpec.scaled(2, pi0=0.9)
    fstar, gstar = fstar_gaussian(spec), gstar_gaussian(spec)
    grid = np.stack(np.meshgrid(np.linspace(-4, 5, 40), np.linspace(-4, 5, 25)), -1).reshape(-1, 2)
    exact = PluginModel(gstar, spec.pi0).predict(grid)
    dev = float(np.max(np.abs(exact - fstar.predict(grid))))
    rep.add("plug-in of exact (g*, pi) vs f* max |diff| on 1000 points", dev, 1e-12, dev <= 1e-12)

    n = 100_000 if quick else 1_000_000
    xq = sample_target(spec, BALANCED, n, derive_seed(seed, "plugin", "q")).X
    xp = sample_observed(spec, n, derive_seed(seed, "plugin", "p")).X
    const = math.sqrt(spec.pi0 / 2) / spec.pi1
    rng = make_rng(derive_seed(seed, "plugin", "perturb"))
    worst = -math.inf
    violations = 0
    for _ in range(20 if quick else 100):
        scale = 10 ** rng.uniform(-2, 0)
        g_hat = LogisticModel(gstar.w + scale * rng.standard_normal(2),
                              gstar.b + scale * rng.standard_normal())
        lhs, se_l = _l2(PluginModel(g_hat, spec.pi0).predict(xq), fstar.predict(xq))
        rhs, se_r = _l2(g_hat.predict(xp), gstar.predict(xp))
        rhs *= const
        se_r *= const
        slack = (lhs - rhs) / max(math.hypot(se_l, se_r), 1e-300)
        worst = max(worst, slack)
        violations += slack > 3
    rep.add("plug-in bound: max (lhs - rhs) / combined se", worst, 3.0, violations == 0)


_RUNNERS = {
    "formulas": _formulas,
    "coupling": _coupling,
    "geometry": _geometry,
    "pluginbound": _pluginbound,
}


def run_diagnostics(suite: str, seed: int = 0, quick: bool = False) -> DiagReport:
    """Run one suite.  ``quick`` shrinks sample sizes for smoke tests."""
    key = _ALIASES.get(suite.lower(), suite.lower())
    if key not in _RUNNERS:
        raise ConfigurationError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    rep = DiagReport(key)
    _RUNNERS[key](rep, seed, quick)
    return rep
