"""Large-sample behaviour of the closed-form Bayes factor.

Three regimes are covered: r grows with p fixed, p grows with r fixed, and
both grow.  This module provides the inconsistency boundary h(r), the
probability limits of the sums-of-squares ratios, and Stirling-based
approximations to log BF10 in each regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .bayes_factor import Model, ModelParams, check_closed_form_alpha
from .core_math import LOG_SQRT_2PI, log_gamma
from .data import BalancedDesign, SufficientStats
from .errors import DomainError


class ScenarioKind(Enum):
    R_GROWS = 1
    P_GROWS = 2
    BOTH_GROW = 3


@dataclass(frozen=True)
class Scenario:
    """An asymptotic regime; ``fixed`` is p for R_GROWS, r for P_GROWS, None otherwise."""

    kind: ScenarioKind
    fixed: int | None = None

    def __post_init__(self):
        if self.kind is ScenarioKind.BOTH_GROW:
            if self.fixed is not None:
                raise DomainError("BOTH_GROW carries no fixed dimension")
        elif self.fixed is None or int(self.fixed) != self.fixed or self.fixed < 2:
            raise DomainError(f"{self.kind.name} needs a fixed dimension >= 2, got {self.fixed!r}")

    @classmethod
    def r_grows(cls, p: int) -> "Scenario":
        return cls(ScenarioKind.R_GROWS, p)

    @classmethod
    def p_grows(cls, r: int) -> "Scenario":
        return cls(ScenarioKind.P_GROWS, r)

    @classmethod
    def both_grow(cls) -> "Scenario":
        return cls(ScenarioKind.BOTH_GROW)

    @classmethod
    def from_number(cls, number: int, fixed: int | None = None) -> "Scenario":
        kind = ScenarioKind(int(number))
        return cls(kind, None if kind is ScenarioKind.BOTH_GROW else fixed)

    def design(self, size: int) -> BalancedDesign:
        """Design at growth index ``size``."""
        if self.kind is ScenarioKind.R_GROWS:
            return BalancedDesign(self.fixed, size)
        if self.kind is ScenarioKind.P_GROWS:
            return BalancedDesign(size, self.fixed)
        return BalancedDesign(size, size)


@dataclass(frozen=True)
class ConsistencyVerdict:
    scenario: Scenario
    true_model: Model
    variance_ratio: float
    consistent: bool
    indeterminate: bool = False
    boundary_value: float | None = None


def h(r) -> float:
    """Inconsistency boundary r^(1/(r-1)) - 1 for fixed r as p grows."""
    if int(r) != r or r < 2:
        raise DomainError(f"h(r) needs an integer r >= 2, got {r!r}")
    return math.expm1(math.log(r) / (r - 1))


def _check_truth(true_model: Model, variance_ratio: float) -> Model:
    true_model = Model(true_model)
    if not variance_ratio >= 0:
        raise DomainError(f"variance ratio must be non-negative, got {variance_ratio}")
    if true_model is Model.M1 and variance_ratio == 0:
        raise DomainError("M1 requires a positive variance ratio sigma_a^2 / sigma^2")
    if true_model is Model.M0 and variance_ratio != 0:
        raise DomainError("M0 means sigma_a^2 = 0; got a positive variance ratio")
    return true_model


def consistency_verdict(scenario: Scenario, true_model: Model, variance_ratio: float) -> ConsistencyVerdict:
    """Whether BF10 selects the true model with probability tending to one.

    Always consistent under M0.  Under M1 the only failure is p growing with
    r fixed and sigma_a^2 / sigma^2 < h(r); equality is reported as
    indeterminate.
    """
    true_model = _check_truth(true_model, variance_ratio)
    if true_model is Model.M0 or scenario.kind is not ScenarioKind.P_GROWS:
        return ConsistencyVerdict(scenario, true_model, variance_ratio, True)
    bound = h(scenario.fixed)
    if variance_ratio == bound:
        return ConsistencyVerdict(scenario, true_model, variance_ratio, False, True, bound)
    return ConsistencyVerdict(scenario, true_model, variance_ratio, variance_ratio > bound, False, bound)


def ratio_limit(scenario: Scenario, true_model: Model, params: ModelParams, aux: float | None = None) -> float:
    """Probability limit of the regime's sums-of-squares statistic.

    * R_GROWS, M1: W_E / W_T -> (1 + v c1 / p)^-1 where ``aux`` is the
      realized chi-square(p - 1) variable c1 = lim W_H / (sigma^2 + r sigma_a^2).
      There is no deterministic limit under M0.
    * P_GROWS: (W_H / W_E)(n - p)/(p - 1) -> 1 under M0, 1 + r v under M1.
    * BOTH_GROW: (W_E / W_T) r / (r - 1) -> 1 under M0, 1 / (1 + v) under M1.

    Here v = sigma_a^2 / sigma^2.
    """
    v = params.variance_ratio
    true_model = _check_truth(true_model, v)
    if scenario.kind is ScenarioKind.R_GROWS:
        if true_model is Model.M0:
            raise DomainError(
                "with p fixed and M0 true, W_E/W_T has no deterministic limit "
                "(W_H stays random); compare realized statistics empirically instead"
            )
        if aux is None or not aux >= 0:
            raise DomainError("R_GROWS under M1 needs aux = realized c1 >= 0")
        return 1.0 / (1.0 + v * aux / scenario.fixed)
    if scenario.kind is ScenarioKind.P_GROWS:
        return 1.0 if true_model is Model.M0 else 1.0 + scenario.fixed * v
    return 1.0 if true_model is Model.M0 else 1.0 / (1.0 + v)


def limit_statistic(scenario: Scenario, stats: SufficientStats) -> float:
    """The realized statistic whose limit :func:`ratio_limit` gives."""
    d = stats.design
    if scenario.kind is ScenarioKind.R_GROWS:
        return stats.w_e / stats.w_t
    if scenario.kind is ScenarioKind.P_GROWS:
        return (stats.w_h / stats.w_e) * (d.n - d.p) / (d.p - 1)
    return (stats.w_e / stats.w_t) * d.r / (d.r - 1)


def realized_c1(stats: SufficientStats, params: ModelParams) -> float:
    """W_H / (sigma^2 + r sigma_a^2), which is chi-square(p - 1) for every r."""
    return stats.w_h / (params.sigma2 + stats.design.r * params.sigma_a2)


def pinned_ratio(
    scenario: Scenario, true_model: Model, design: BalancedDesign, params: ModelParams, aux: float | None = None
) -> float:
    """W_E / W_T implied by the regime's limit at a finite design.

    For R_GROWS, W_E is set to its mean p (r - 1) sigma^2 and W_H comes from
    ``aux``: the realized W_H under M0, or c1 (so W_H = (sigma^2 + r sigma_a^2) c1)
    under M1.
    """
    v = params.variance_ratio
    true_model = _check_truth(true_model, v)
    p, r, n = design.p, design.r, design.n
    if scenario.kind is ScenarioKind.R_GROWS:
        if aux is None:
            raise DomainError("R_GROWS needs aux (W_H under M0, c1 under M1)")
        w_e = p * (r - 1) * params.sigma2
        w_h = aux if true_model is Model.M0 else (params.sigma2 + r * params.sigma_a2) * aux
        return w_e / (w_e + w_h)
    if scenario.kind is ScenarioKind.P_GROWS:
        limit = 1.0 if true_model is Model.M0 else 1.0 + r * v
        return 1.0 / (1.0 + limit * (p - 1) / (n - p))
    limit = 1.0 if true_model is Model.M0 else 1.0 / (1.0 + v)
    return limit * (r - 1) / r


def asymptotic_log_bf(
    scenario: Scenario,
    true_model: Model,
    design: BalancedDesign,
    alpha: float,
    params: ModelParams,
    aux: float | None = None,
) -> float:
    """Stirling approximation to the closed-form log BF10 in a given regime.

    The sums-of-squares ratio is replaced by its limit, so in the P_GROWS
    and BOTH_GROW regimes the result is a deterministic function of the
    design.  With p fixed the limit is random and ``aux`` must carry the
    realized W_H (M0) or c1 (M1).  Accuracy needs the Stirling arguments
    (n - p)/2 and, outside R_GROWS, p/2 to be large (about 20 or more).
    """
    check_closed_form_alpha(design, alpha)
    v = params.variance_ratio
    true_model = _check_truth(true_model, v)
    a = alpha
    p, r, n = design.p, design.r, design.n
    lg_a1 = log_gamma(a + 1.0)

    if scenario.kind is ScenarioKind.R_GROWS:
        if aux is None or not aux >= 0:
            raise DomainError("R_GROWS needs aux: realized W_H under M0, c1 under M1")
        head = log_gamma(p / 2.0 + a + 0.5) - lg_a1 - (p - 1) / 2.0 * math.log(n / 2.0)
        if true_model is Model.M0:
            return head + aux / (2.0 * params.sigma2)
        return head + (r * p / 2.0) * math.log1p(aux * v / p)

    if scenario.kind is ScenarioKind.P_GROWS:
        log_c2 = LOG_SQRT_2PI + math.log(r) - 0.5 * math.log(r - 1) - lg_a1
        return (
            log_c2
            + (a + 0.5) * math.log(p / 2.0)
            + (1.0 + a) * math.log((r - 1) / (r * (1.0 + v)))
            + (p / 2.0) * ((r - 1) * math.log1p(v) - math.log(r))
            - (1.0 + r * v) * (r - 1) / (2.0 * r * (1.0 + v))
        )

    log_c3 = LOG_SQRT_2PI - (a + 0.5) * math.log(2.0) - lg_a1
    out = log_c3 + (a + 0.5) * math.log(p) + (a + 0.5) * math.log1p(-1.0 / r)
    if true_model is Model.M0:
        return out - (p - 1) / 2.0 * math.log(r)
    return (
        out
        + (0.5 - (1.0 + a) / (r - 1)) * math.log(r)
        + ((n - p) / 2.0 - (1.0 + a)) * (math.log1p(v) - math.log(r) / (r - 1))
    )
