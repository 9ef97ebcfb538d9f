"""Brute-force ground truth over all k**n component allocations.

The oracle computes every posterior quantity by the defining sums, one
allocation vector at a time, and is the verification target for the
lattice engine. It also covers the normal family, where no lattice is
available; there, allocations are grouped by partition structure (the
multiset of observations in each component slot) so no floating-point
statistic ever serves as a map key.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import integrate, stats
from scipy.special import logsumexp

from . import families, posterior
from .errors import OracleCapError
from .families import GroupStat
from .posterior import MixturePrior, PosteriorSummary

DEFAULT_ORACLE_CAP = 2**24


def enumerate_allocations(n: int, k: int, cap: int = DEFAULT_ORACLE_CAP) -> Iterator[tuple[int, ...]]:
    """All k**n allocation vectors with entries in 1..k, lexicographic."""
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if k**n > cap:
        raise OracleCapError(f"k^n = {k}^{n} = {k**n} exceeds the oracle cap {cap}")
    return itertools.product(range(1, k + 1), repeat=n)


def _group_key_discrete(data: Sequence, z: tuple[int, ...], k: int, family: str) -> tuple[int, ...]:
    width = families.statistic_width(family, len(data[0]) if family == "multinomial" else None)
    counts = [0] * k
    sums = [[0] * width for _ in range(k)]
    for x, zi in zip(data, z):
        j = zi - 1
        counts[j] += 1
        r = families.observation_statistic(family, x).total
        for u in range(width):
            sums[j][u] += r[u]
    key: list[int] = []
    for j in range(k):
        key.append(counts[j])
        key.extend(sums[j])
    return tuple(key)


def _group_key_normal(data: Sequence, z: tuple[int, ...], k: int) -> tuple:
    groups: list[list[float]] = [[] for _ in range(k)]
    for x, zi in zip(data, z):
        groups[zi - 1].append(float(x))
    # sort values, never sums: distinct statistics correspond exactly to
    # distinct per-component multisets, no float arithmetic in the key
    return tuple(tuple(sorted(g)) for g in groups)


def _normal_stats(key: tuple) -> list[GroupStat]:
    out = []
    for group in key:
        total = math.fsum(group)
        total_sq = math.fsum(x * x for x in group)
        out.append(GroupStat(len(group), (total, total_sq) if group else (0, 0)))
    return out


def _infer_family(obs) -> str:
    if isinstance(obs, tuple):
        return "multinomial"
    if isinstance(obs, bool):
        raise ValueError(f"not a supported observation: {obs!r}")
    if isinstance(obs, int):
        return "poisson"
    return "normal"


def _grouped(data: Sequence, k: int, family: str, cap: int) -> dict:
    grouped: dict = {}
    for z in enumerate_allocations(len(data), k, cap):
        if family == "normal":
            key = _group_key_normal(data, z, k)
        else:
            key = _group_key_discrete(data, z, k, family)
        grouped[key] = grouped.get(key, 0) + 1
    return grouped


@dataclass(frozen=True)
class OracleResult:
    """Grouped brute-force posterior: one row per distinct statistic."""

    prior: MixturePrior
    n: int
    keys: tuple
    multiplicities: tuple[int, ...]
    group_stats: tuple[tuple[GroupStat, ...], ...]
    log_weights: np.ndarray
    weights: np.ndarray
    log_evidence: float

    @property
    def family(self) -> str:
        return self.prior.family

    @property
    def k(self) -> int:
        return self.prior.k

    def component_posteriors(self, i: int) -> tuple:
        return tuple(
            c.updated(s) for c, s in zip(self.prior.components, self.group_stats[i])
        )

    def expected_weights(self) -> np.ndarray:
        alpha = np.asarray(self.prior.alpha)
        counts = np.array([[s.count for s in row] for row in self.group_stats], dtype=float)
        return self.weights @ ((counts + alpha) / (self.n + alpha.sum()))

    def expected_means(self) -> np.ndarray:
        rows = []
        for i in range(len(self.keys)):
            rows.append([p.posterior_mean() for p in self.component_posteriors(i)])
        means = np.asarray(rows, dtype=float)  # (E, k, m)
        return np.einsum("e,ejm->jm", self.weights, means)

    def mass_concentration(self, threshold: float = 0.99) -> int:
        if not (0 < threshold <= 1):
            raise ValueError(f"threshold must be in (0, 1], got {threshold}")
        order = sorted(range(len(self.keys)), key=lambda i: (-self.weights[i], self.keys[i]))
        acc = 0.0
        for rank, i in enumerate(order, start=1):
            acc += float(self.weights[i])
            if acc >= threshold:
                return rank
        return len(order)

    def component_density(self, j: int, grid, category: int | None = None) -> posterior.DensityGrid:
        """Mean-parameter marginal by the defining sum over grouped terms."""
        grid = np.asarray(grid, dtype=float)
        dens = np.zeros(grid.size)
        param = f"lambda{j + 1}" if self.family == "poisson" else f"mu{j + 1}"
        for i in range(len(self.keys)):
            post = self.component_posteriors(i)[j]
            if self.family == "poisson":
                logpdf = post.mean_logpdf(grid)
            elif self.family == "multinomial":
                if category is None:
                    raise ValueError("multinomial density needs a category index")
                logpdf = post.category_logpdf(grid, category)
                param = f"q{j + 1},{category + 1}"
            else:
                logpdf = post.location_logpdf(grid)
            dens += float(self.weights[i]) * np.exp(logpdf)
        return posterior.DensityGrid(param, grid, dens)

    def weight_density(self, j: int, grid) -> posterior.DensityGrid:
        grid = np.asarray(grid, dtype=float)
        alpha = self.prior.alpha
        rest = sum(alpha) - alpha[j]
        dens = np.zeros(grid.size)
        for i in range(len(self.keys)):
            n_j = self.group_stats[i][j].count
            dens += float(self.weights[i]) * np.exp(
                stats.beta.logpdf(grid, n_j + alpha[j], self.n - n_j + rest)
            )
        return posterior.DensityGrid(f"p{j + 1}", grid, dens)

    def summary(self) -> PosteriorSummary:
        means = self.expected_means()
        return PosteriorSummary(
            family=self.family,
            k=self.k,
            n=self.n,
            distinct=len(self.keys),
            mass99=self.mass_concentration(0.99),
            log_evidence=self.log_evidence,
            expected_weights=tuple(float(w) for w in self.expected_weights()),
            expected_means=tuple(tuple(float(x) for x in row) for row in means),
        )


def oracle_posterior(data: Sequence, prior: MixturePrior, cap: int = DEFAULT_ORACLE_CAP) -> OracleResult:
    """Posterior by direct summation over every allocation vector."""
    family = prior.family
    categories = prior.components[0].categories if family == "multinomial" else None
    for obs in data:
        families.check_observation(family, obs, categories)
    n, k = len(data), prior.k
    grouped = _grouped(data, k, family, cap)
    keys = sorted(grouped)
    mults = [grouped[key] for key in keys]

    group_stats = []
    width = families.statistic_width(family, categories)
    for key in keys:
        if family == "normal":
            group_stats.append(tuple(_normal_stats(key)))
        else:
            group_stats.append(
                tuple(
                    GroupStat(key[j * (width + 1)], key[j * (width + 1) + 1 : (j + 1) * (width + 1)])
                    for j in range(k)
                )
            )

    logw = np.array(
        [
            posterior.log_unnormalized_weight(stats_row, mult, prior)
            for stats_row, mult in zip(group_stats, mults)
        ]
    )
    shifted = np.exp(logw - logw.max())
    weights = shifted / shifted.sum()
    log_base = sum(families.log_base_measure(family, obs) for obs in data)
    log_m = float(logsumexp(logw) + prior.log_dirichlet_constant() + log_base)
    return OracleResult(
        prior=prior,
        n=n,
        keys=tuple(keys),
        multiplicities=tuple(mults),
        group_stats=tuple(group_stats),
        log_weights=logw,
        weights=weights,
        log_evidence=log_m,
    )


def oracle_distinct_statistics(data: Sequence, k: int, cap: int = DEFAULT_ORACLE_CAP) -> int:
    """Number of distinct canonical statistics over all k**n allocations."""
    family = _infer_family(data[0])
    return len(_grouped(data, k, family, cap))


def weight_table_csv(data: Sequence, prior: MixturePrior, cap: int = DEFAULT_ORACLE_CAP) -> str:
    """Per-allocation debug table: allocation string, statistic, log weight."""
    family = prior.family
    k = prior.k
    lines = ["allocation,statistic,log_weight"]
    for z in enumerate_allocations(len(data), k, cap):
        if family == "normal":
            key = _group_key_normal(data, z, k)
            stats_row = _normal_stats(key)
            stat_text = " ".join(
                f"{s.count}:{s.total[0]!r}:{s.total[1]!r}" for s in stats_row
            )
        else:
            key = _group_key_discrete(data, z, k, family)
            stats_row = [
                GroupStat(
                    key[j * (len(key) // k)],
                    key[j * (len(key) // k) + 1 : (j + 1) * (len(key) // k)],
                )
                for j in range(k)
            ]
            stat_text = " ".join(str(v) for v in key)
        logw = posterior.log_unnormalized_weight(stats_row, 1, prior)
        lines.append(f"{''.join(str(zi) for zi in z)},{stat_text},{logw!r}")
    return "\n".join(lines) + "\n"


def compare_report(wp: posterior.WeightedPosterior, oracle_result: OracleResult) -> tuple[bool, float, str]:
    """Engine-vs-oracle comparison over keys, weights, moments, evidence."""
    if wp.family != oracle_result.family or wp.k != oracle_result.k:
        return False, math.inf, "MISMATCH different model"
    if tuple(wp.keys) != tuple(oracle_result.keys):
        return False, math.inf, "MISMATCH statistic keys differ"
    if tuple(wp.multiplicities) != tuple(oracle_result.multiplicities):
        return False, math.inf, "MISMATCH multiplicities differ"

    def rel(a: np.ndarray, b: np.ndarray) -> float:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
        return float(np.max(np.abs(a - b) / scale))

    deviations = [
        rel(wp.weights, oracle_result.weights),
        rel(posterior.expected_weights(wp), oracle_result.expected_weights()),
        rel(
            posterior.expected_component_means(wp).reshape(-1),
            oracle_result.expected_means().reshape(-1),
        ),
        rel(wp.log_evidence, oracle_result.log_evidence),
    ]
    worst = max(deviations)
    ok = worst <= 1e-10
    verdict = "MATCH" if ok else "MISMATCH"
    return ok, worst, f"{verdict} entries={len(wp.keys)} max_rel={worst:.3e}"


def quadrature_evidence(data: Sequence, prior: MixturePrior, cap: int = DEFAULT_ORACLE_CAP) -> float:
    """Evidence with every K constant replaced by numerical integration.

    Independent check of the closed-form normalizers: for each allocation,
    each component's complete-data integral is evaluated by quadrature
    (1-D for Poisson means, 2-D for normal mean/variance). Deliberately
    slow; refuse datasets beyond desk scale.
    """
    if len(data) > 4:
        raise ValueError("quadrature check is limited to n <= 4")
    family = prior.family
    if family not in ("poisson", "normal"):
        raise ValueError(f"quadrature check supports poisson and normal, got {family!r}")
    k = prior.k
    n = len(data)

    def component_integral(comp, stat: GroupStat) -> float:
        post = comp.updated(stat)
        if family == "poisson":
            shape, rate = post.shape, post.rate
            upper = float(stats.gamma.isf(1e-16, shape, scale=1.0 / rate))
            value, _ = integrate.quad(
                lambda t: t ** (shape - 1.0) * math.exp(-rate * t),
                0.0,
                upper,
                epsabs=0.0,
                epsrel=1e-12,
                limit=200,
            )
            return value
        # nested quadrature over the precision tau = 1/sigma^2 (outer) and
        # the mean (inner). Given tau the mean integrand is Gaussian, so
        # both axes have exponential tails; integrating the mean first
        # would leave polynomial Student-t tails that truncate badly
        loc, c, a, b = post.location, post.precision_scale, post.shape, post.scale
        tau_hi = 1.2 * float(stats.gamma.isf(1e-16, 0.5 * a, scale=2.0 / b))

        def inner(tau: float) -> float:
            sd = 1.0 / math.sqrt(tau * c)
            gauss, _ = integrate.quad(
                lambda mu: math.exp(-0.5 * tau * c * (mu - loc) ** 2),
                loc - 12.0 * sd,
                loc + 12.0 * sd,
                epsabs=0.0,
                epsrel=1e-12,
            )
            return tau ** (0.5 * (a - 1.0)) * math.exp(-0.5 * tau * b) * gauss

        value, _ = integrate.quad(inner, 0.0, tau_hi, epsabs=0.0, epsrel=1e-11, limit=300)
        return value

    alpha = prior.alpha
    log_terms = []
    for z in enumerate_allocations(n, k, cap):
        if family == "normal":
            stats_row = _normal_stats(_group_key_normal(data, z, k))
        else:
            key = _group_key_discrete(data, z, k, family)
            stats_row = [GroupStat(key[2 * j], (key[2 * j + 1],)) for j in range(k)]
        term = sum(
            math.lgamma(s.count + a_j) for s, a_j in zip(stats_row, alpha)
        ) - math.lgamma(n + sum(alpha))
        for comp, s in zip(prior.components, stats_row):
            term += math.log(component_integral(comp, s)) - comp.log_partition()
        log_terms.append(term)
    log_base = sum(families.log_base_measure(family, obs) for obs in data)
    return float(logsumexp(np.array(log_terms)) + prior.log_dirichlet_constant() + log_base)
