"""Exponential-family components and their conjugate priors.

Three observation families are supported: Poisson counts with Gamma priors
on the mean, multinomial count vectors with Dirichlet priors on the cell
probabilities, and real observations with Normal-Inverse-Gamma priors on
(mean, variance). Each prior knows how to absorb a group statistic, report
its log normalizing constant, and evaluate posterior quantities for the
mean-value parameters. All Gamma-heavy arithmetic stays in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, Sequence, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln

FAMILIES = ("poisson", "multinomial", "normal")

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GroupStat:
    """Sufficient statistic of one allocated group: size and summed R(x)."""

    count: int
    total: tuple[float, ...]

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"group count must be nonnegative, got {self.count}")
        if self.count == 0 and any(t != 0 for t in self.total):
            raise ValueError("empty group must carry the zero aggregate")

    def merged(self, other: "GroupStat") -> "GroupStat":
        if len(self.total) != len(other.total):
            raise ValueError("aggregate widths differ")
        total = tuple(a + b for a, b in zip(self.total, other.total))
        return GroupStat(self.count + other.count, total)


@dataclass(frozen=True)
class PoissonGamma:
    """Gamma(shape, rate) prior on a Poisson mean."""

    shape: float
    rate: float

    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"Gamma shape must be positive, got {self.shape}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"Gamma rate must be positive, got {self.rate}")

    def updated(self, stat: GroupStat) -> "PoissonGamma":
        if stat.count == 0:
            return self
        return PoissonGamma(self.shape + stat.total[0], self.rate + stat.count)

    def log_partition(self) -> float:
        return float(gammaln(self.shape) - self.shape * math.log(self.rate))

    def posterior_mean(self) -> tuple[float, ...]:
        return (self.shape / self.rate,)

    def mean_logpdf(self, t):
        return stats.gamma.logpdf(t, self.shape, scale=1.0 / self.rate)

    def mean_ppf(self, u):
        return stats.gamma.ppf(u, self.shape, scale=1.0 / self.rate)


@dataclass(frozen=True)
class DirichletMultinomial:
    """Dirichlet prior on the cell probabilities of a multinomial component."""

    concentration: tuple[float, ...]

    family: ClassVar[str] = "multinomial"

    def __post_init__(self):
        object.__setattr__(self, "concentration", tuple(float(b) for b in self.concentration))
        if len(self.concentration) < 2:
            raise ValueError("multinomial components need at least two categories")
        if not all(b > 0 and math.isfinite(b) for b in self.concentration):
            raise ValueError(f"Dirichlet concentration must be positive, got {self.concentration}")

    @property
    def categories(self) -> int:
        return len(self.concentration)

    def updated(self, stat: GroupStat) -> "DirichletMultinomial":
        if stat.count == 0:
            return self
        if len(stat.total) != self.categories:
            raise ValueError("statistic width does not match category count")
        return DirichletMultinomial(tuple(b + s for b, s in zip(self.concentration, stat.total)))

    def log_partition(self) -> float:
        return float(sum(gammaln(b) for b in self.concentration) - gammaln(sum(self.concentration)))

    def posterior_mean(self) -> tuple[float, ...]:
        total = sum(self.concentration)
        return tuple(b / total for b in self.concentration)

    def category_logpdf(self, t, category: int):
        # marginal of one Dirichlet coordinate is Beta(b_u, sum(b) - b_u)
        b_u = self.concentration[category]
        rest = sum(self.concentration) - b_u
        return stats.beta.logpdf(t, b_u, rest)

    def category_ppf(self, u, category: int):
        b_u = self.concentration[category]
        rest = sum(self.concentration) - b_u
        return stats.beta.ppf(u, b_u, rest)


@dataclass(frozen=True)
class NormalInverseGamma:
    """Conjugate prior for a normal component with unknown mean and variance.

    mu | sigma^2 ~ N(location, sigma^2 / precision_scale)
    sigma^(-2)   ~ Gamma(shape / 2, scale / 2)
    """

    location: float
    precision_scale: float
    shape: float
    scale: float

    family: ClassVar[str] = "normal"

    def __post_init__(self):
        if not math.isfinite(self.location):
            raise ValueError(f"location must be finite, got {self.location}")
        for name in ("precision_scale", "shape", "scale"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value}")

    def updated(self, stat: GroupStat) -> "NormalInverseGamma":
        n = stat.count
        if n == 0:
            return self
        t1, t2 = stat.total
        xbar = t1 / n
        c_new = self.precision_scale + n
        loc_new = (self.precision_scale * self.location + t1) / c_new
        # n * sigma-hat^2; clamped at 0 against float cancellation
        ss = max(t2 - t1 * t1 / n, 0.0)
        shift = self.precision_scale * n / c_new * (xbar - self.location) ** 2
        return NormalInverseGamma(loc_new, c_new, self.shape + n, self.scale + ss + shift)

    def log_partition(self) -> float:
        half_shape = 0.5 * self.shape
        return float(
            0.5 * LOG_2PI
            - 0.5 * math.log(self.precision_scale)
            + gammaln(half_shape)
            - half_shape * math.log(0.5 * self.scale)
        )

    def posterior_mean(self) -> tuple[float, ...]:
        return (self.location,)

    def location_scale(self) -> float:
        return math.sqrt(self.scale / (self.shape * self.precision_scale))

    def location_logpdf(self, t):
        # marginal of mu is Student-t with df = shape
        return stats.t.logpdf(t, self.shape, loc=self.location, scale=self.location_scale())

    def location_ppf(self, u):
        return stats.t.ppf(u, self.shape, loc=self.location, scale=self.location_scale())

    def variance_logpdf(self, t):
        return stats.invgamma.logpdf(t, 0.5 * self.shape, scale=0.5 * self.scale)

    def variance_ppf(self, u):
        return stats.invgamma.ppf(u, 0.5 * self.shape, scale=0.5 * self.scale)


ComponentPrior = Union[PoissonGamma, DirichletMultinomial, NormalInverseGamma]

Observation = Union[int, float, tuple]


def conjugate_update(prior: ComponentPrior, stat: GroupStat) -> ComponentPrior:
    """Absorb a group statistic into a conjugate prior."""
    return prior.updated(stat)


def log_partition_constant(prior: ComponentPrior) -> float:
    """log K of the conjugate distribution with the prior's hyperparameters."""
    return prior.log_partition()


def component_posterior_mean(post: ComponentPrior) -> tuple[float, ...]:
    """Posterior mean of the component's mean-value parameters."""
    return post.posterior_mean()


def component_posterior_density(post: ComponentPrior, point: float, category: int | None = None) -> float:
    """Density of the updated conjugate distribution at one point.

    Poisson: density of the mean. Multinomial: Beta marginal of the
    requested category. Normal: marginal density of the mean. Points
    outside the support yield 0.
    """
    if isinstance(post, PoissonGamma):
        logpdf = post.mean_logpdf(point)
    elif isinstance(post, DirichletMultinomial):
        if category is None:
            raise ValueError("multinomial density needs a category index")
        logpdf = post.category_logpdf(point, category)
    elif isinstance(post, NormalInverseGamma):
        logpdf = post.location_logpdf(point)
    else:
        raise ValueError(f"unknown component prior {type(post).__name__}")
    return float(np.exp(logpdf))


def check_observation(family: str, obs: Observation, categories: int | None = None) -> None:
    """Raise ValueError unless obs is a valid observation of the family."""
    if family == "poisson":
        if not isinstance(obs, (int, np.integer)) or isinstance(obs, bool) or obs < 0:
            raise ValueError(f"Poisson observation must be a nonnegative integer, got {obs!r}")
    elif family == "multinomial":
        if not isinstance(obs, tuple) or len(obs) < 2:
            raise ValueError(f"multinomial observation must be a tuple of >= 2 counts, got {obs!r}")
        if categories is not None and len(obs) != categories:
            raise ValueError(f"expected {categories} categories, got {len(obs)}")
        if not all(isinstance(c, (int, np.integer)) and not isinstance(c, bool) and c >= 0 for c in obs):
            raise ValueError(f"multinomial counts must be nonnegative integers, got {obs!r}")
        if sum(obs) < 1:
            raise ValueError(f"multinomial observation must have a positive total, got {obs!r}")
    elif family == "normal":
        if isinstance(obs, bool) or not isinstance(obs, (int, float, np.floating, np.integer)):
            raise ValueError(f"normal observation must be a finite real, got {obs!r}")
        if not math.isfinite(float(obs)):
            raise ValueError(f"normal observation must be finite, got {obs!r}")
    else:
        raise ValueError(f"unknown family {family!r}")


def statistic_width(family: str, categories: int | None = None) -> int:
    """Number of aggregate slots per component for the family."""
    if family == "poisson":
        return 1
    if family == "multinomial":
        if categories is None:
            raise ValueError("multinomial width needs the category count")
        return categories
    if family == "normal":
        return 2
    raise ValueError(f"unknown family {family!r}")


def observation_statistic(family: str, obs: Observation) -> GroupStat:
    """Single-observation group statistic (1, R(x))."""
    if family == "poisson":
        return GroupStat(1, (int(obs),))
    if family == "multinomial":
        return GroupStat(1, tuple(int(c) for c in obs))
    if family == "normal":
        x = float(obs)
        return GroupStat(1, (x, x * x))
    raise ValueError(f"unknown family {family!r}")


def zero_statistic(family: str, categories: int | None = None) -> GroupStat:
    return GroupStat(0, (0,) * statistic_width(family, categories))


def log_base_measure(family: str, obs: Observation) -> float:
    """log h(x): the allocation-free data factor of the likelihood."""
    if family == "poisson":
        return float(-gammaln(obs + 1))
    if family == "multinomial":
        d = sum(obs)
        return float(gammaln(d + 1) - sum(gammaln(c + 1) for c in obs))
    if family == "normal":
        return -0.5 * LOG_2PI
    raise ValueError(f"unknown family {family!r}")
