"""Divergences between minority and synthetic distributions, a maximal
coupling sampler, and the population minimizer of the rebalanced risk.

Discrete distributions are finite sets of atoms in R^d.  Two atoms are the
same only when every coordinate is exactly equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .distributions import MixtureSpec, class_pdf
from .errors import AbsoluteContinuityError, ConfigurationError, DomainError, FormulaDomainError
from .rng import make_rng

__all__ = [
    "DiscreteDist",
    "CouplingTrace",
    "tv_discrete",
    "chi2_discrete",
    "maximal_coupling_sample",
    "population_minimizer",
    "tv_gaussian_1d",
    "chi2_gaussian_1d",
]


class DiscreteDist:
    """Finite distribution: distinct atoms ``points[i]`` with ``masses[i]``."""

    def __init__(self, points, masses):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        m = np.array(masses, dtype=float).reshape(-1)
        if pts.shape[0] != m.size or m.size == 0:
            raise ConfigurationError("need one mass per atom and at least one atom")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ConfigurationError("masses must be finite and nonnegative")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"masses sum to {m.sum()!r}, not 1")
        if len({tuple(p) for p in pts}) != pts.shape[0]:
            raise ConfigurationError("atoms must be distinct")
        pts.flags.writeable = False
        m.flags.writeable = False
        self.points = pts
        self.masses = m

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteDist":
        """From an iterable of ``(point, mass)`` pairs."""
        atoms = list(atoms)
        return cls([np.atleast_1d(p) for p, _ in atoms], [m for _, m in atoms])

    @classmethod
    def empirical(cls, samples) -> "DiscreteDist":
        """Uniform mass on the samples, merging exact duplicates."""
        X = np.asarray(samples, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        uniq, counts = np.unique(X, axis=0, return_counts=True)
        return cls(uniq, counts / counts.sum())

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.masses.size

    def __repr__(self):
        return f"DiscreteDist(atoms={len(self)}, dim={self.dim})"


def _align(*dists: DiscreteDist):
    """Union of atoms and each distribution's masses on that union."""
    dims = {d.dim for d in dists}
    if len(dims) != 1:
        raise ConfigurationError(f"distributions live in different dimensions {sorted(dims)}")
    index: dict[tuple, int] = {}
    points = []
    for d in dists:
        for p in d.points:
            key = tuple(p)
            if key not in index:
                index[key] = len(points)
                points.append(p)
    masses = []
    for d in dists:
        v = np.zeros(len(points))
        for p, m in zip(d.points, d.masses):
            v[index[tuple(p)]] += m
        masses.append(v)
    return np.array(points), masses


def tv_discrete(p: DiscreteDist, q: DiscreteDist) -> float:
    """``(1/2) * sum_a |p(a) - q(a)|`` over the union of atoms."""
    _, (pv, qv) = _align(p, q)
    return float(min(1.0, 0.5 * np.abs(pv - qv).sum()))


def chi2_discrete(p_tilde: DiscreteDist, p1: DiscreteDist, q: DiscreteDist) -> float:
    """Chi-square divergence of ``p_tilde`` from ``p1`` with densities taken
    relative to ``q``.

    Sums ``q(a) * (r_tilde(a) - r1(a))^2 / r1(a)`` with ``r = mass / q(a)``,
    using ``0/0 = 0``.  Returns ``inf`` when some atom has ``p1 = 0 < q`` but
    ``p_tilde != p1``.

    Raises
    ------
    AbsoluteContinuityError
        ``p_tilde`` or ``p1`` has mass on an atom where ``q`` has none.
    """
    _, (pt, pv, qv) = _align(p_tilde, p1, q)
    off = qv == 0
    if np.any(pt[off] > 0) or np.any(pv[off] > 0):
        raise AbsoluteContinuityError("distribution has mass outside the support of q")
    on = ~off
    rt, r1, qq = pt[on] / qv[on], pv[on] / qv[on], qv[on]
    gap = rt - r1
    if np.any((r1 == 0) & (gap != 0)):
        return math.inf
    live = r1 > 0
    return float(np.sum(qq[live] * gap[live] ** 2 / r1[live]))


@dataclass(frozen=True)
class CouplingTrace:
    """Draws ``(u1, u2)`` from a maximal coupling, as indices into ``atoms``."""

    atoms: np.ndarray
    u1_index: np.ndarray
    u2_index: np.ndarray

    @property
    def u1(self) -> np.ndarray:
        return self.atoms[self.u1_index]

    @property
    def u2(self) -> np.ndarray:
        return self.atoms[self.u2_index]

    @property
    def matched(self) -> np.ndarray:
        return self.u1_index == self.u2_index

    @property
    def mismatch_fraction(self) -> float:
        return float(np.mean(~self.matched))

    def __len__(self):
        return self.u1_index.size


def maximal_coupling_sample(p1: DiscreteDist, p2: DiscreteDist, n: int, seed) -> CouplingTrace:
    """Draw ``n`` pairs whose mismatch probability equals ``tv(p1, p2)``.

    ``U1 ~ p1``; keep ``U2 = U1`` with probability ``min(p1, p2)(U1) / p1(U1)``,
    otherwise draw ``U2`` from the normalized excess ``(p2 - min(p1, p2))``.
    """
    if n < 1:
        raise ConfigurationError(f"n must be positive, got {n}")
    atoms, (a, b) = _align(p1, p2)
    overlap = np.minimum(a, b)
    excess = b - overlap
    rng = make_rng(seed)
    u1 = rng.choice(a.size, size=n, p=a / a.sum())
    v = rng.random(n)
    keep = v <= overlap[u1] / a[u1]
    u2 = u1.copy()
    total = excess.sum()
    if total > 0:
        w = rng.choice(b.size, size=n, p=excess / total)
        u2[~keep] = w[~keep]
    return CouplingTrace(atoms, u1, u2)


def population_minimizer(spec: MixtureSpec, syn_density, x) -> np.ndarray:
    """Pointwise minimizer of the population rebalanced cross-entropy risk.

    Assumes ``J = (2 pi0 - 1) N`` synthetic points from the density
    ``syn_density``.  With ``p0, p1`` the class densities and
    ``c = 1 - 1/(2 pi0)``::

        (p1/2 + c (p_syn - p1)) / (p0/2 + p1/2 + c (p_syn - p1))

    Parameters
    ----------
    syn_density : callable
        Maps an ``(m, d)`` array to ``m`` density values.
    x : array of shape (d,) or (m, d)

    Raises
    ------
    DomainError
        ``pi0 < 1/2`` (no nonnegative ideal ``J``).
    FormulaDomainError
        The denominator is not positive at some point.
    """
    if spec.pi0 < 0.5:
        raise DomainError(f"the ideal J needs pi0 >= 1/2, got {spec.pi0}")
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[1] != spec.dim:
        X = X.reshape(-1, spec.dim)
    p0 = class_pdf(spec, 0, X)
    p1 = class_pdf(spec, 1, X)
    ps = np.asarray(syn_density(X), dtype=float).reshape(-1)
    c = 1.0 - 1.0 / (2.0 * spec.pi0)
    num = 0.5 * p1 + c * (ps - p1)
    den = 0.5 * p0 + num
    if np.any(~(den > 0)):
        raise FormulaDomainError("population minimizer denominator is not positive")
    out = num / den
    return out if np.ndim(x) > 1 else out.reshape(-1)


def _window(m1, s1, m2, s2):
    s = max(s1, s2)
    return min(m1, m2) - 10.0 * s, max(m1, m2) + 10.0 * s


def tv_gaussian_1d(m1: float, s1: float, m2: float, s2: float, tol: float = 1e-8) -> float:
    """TV distance between ``N(m1, s1^2)`` and ``N(m2, s2^2)`` by quadrature."""
    if s1 <= 0 or s2 <= 0:
        raise ConfigurationError("standard deviations must be positive")
    lo, hi = _window(m1, s1, m2, s2)
    val, _ = integrate.quad(
        lambda t: abs(norm.pdf(t, m1, s1) - norm.pdf(t, m2, s2)),
        lo, hi, epsabs=tol, epsrel=0.0, limit=500, points=[m1, m2],
    )
    return 0.5 * val


def chi2_gaussian_1d(m_syn: float, s_syn: float, m1: float, s1: float, tol: float = 1e-8) -> float:
    """Chi-square divergence of ``N(m_syn, s_syn^2)`` from ``N(m1, s1^2)``.

    The reference density cancels, so this is ``int (p_syn - p1)^2 / p1``,
    integrated over the mean range widened by ten standard deviations.
    """
    if s_syn <= 0 or s1 <= 0:
        raise ConfigurationError("standard deviations must be positive")
    lo, hi = _window(m_syn, s_syn, m1, s1)

    def integrand(t):
        log1 = norm.logpdf(t, m1, s1)
        return math.exp(log1) * math.expm1(norm.logpdf(t, m_syn, s_syn) - log1) ** 2

    val, _ = integrate.quad(
        integrand, lo, hi, epsabs=tol, epsrel=0.0, limit=500, points=[m_syn, m1]
    )
    return val
