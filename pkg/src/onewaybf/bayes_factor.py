"""Bayes factors for H0: sigma_a^2 = 0 in the balanced one-way random effects model.

The variance ratio tau = sigma_a^2 / sigma^2 gets a Pearson type VI prior.
For the special choice kappa = r, beta = (n - p)/2 - alpha - 2 the Bayes
factor has a closed form; any other prior goes through one-dimensional
quadrature.  Both routes depend on the data only through W_E / W_T.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .core_math import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    integrate_unit_interval,
    log_beta,
    log_gamma,
)
from .data import BalancedDesign, SufficientStats
from .errors import DegenerateData, DomainError, HyperparameterOutOfRange


class Model(str, Enum):
    M0 = "M0"
    M1 = "M1"


class Method(str, Enum):
    CLOSED_FORM = "ClosedForm"
    QUADRATURE = "Quadrature"


@dataclass(frozen=True)
class PearsonTypeVI:
    """Scaled beta-prime prior on tau with density

        kappa (kappa tau)^beta (1 + kappa tau)^(-alpha - beta - 2) / B(alpha + 1, beta + 1).

    ``kappa=1, alpha=beta=0`` gives pi(tau) = (1 + tau)^-2.
    """

    alpha: float
    beta: float
    kappa: float

    def __post_init__(self):
        if not self.alpha > -1:
            raise HyperparameterOutOfRange(f"alpha must exceed -1, got alpha={self.alpha}")
        if not self.beta > -1:
            raise HyperparameterOutOfRange(f"beta must exceed -1, got beta={self.beta}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise HyperparameterOutOfRange(f"kappa must be positive, got kappa={self.kappa}")

    @classmethod
    def closed_form(cls, design: BalancedDesign, alpha: float) -> "PearsonTypeVI":
        """The prior (kappa = r, beta = (n-p)/2 - alpha - 2) that yields the closed form."""
        check_closed_form_alpha(design, alpha)
        return cls(alpha, closed_form_beta(design, alpha), float(design.r))

    def mode(self) -> float:
        """Mode of the density in tau (0 when beta <= 0)."""
        return max(self.beta, 0.0) / ((self.alpha + 2.0) * self.kappa)


@dataclass(frozen=True)
class ModelParams:
    mu: float = 0.0
    sigma2: float = 1.0
    sigma_a2: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.sigma_a2 >= 0:
            raise DomainError(f"sigma_a2 must be non-negative, got {self.sigma_a2}")

    @property
    def variance_ratio(self) -> float:
        return self.sigma_a2 / self.sigma2

    @property
    def true_model(self) -> Model:
        return Model.M0 if self.sigma_a2 == 0 else Model.M1


@dataclass(frozen=True)
class BayesFactorResult:
    log_bf10: float
    bf10: float
    posterior_prob_m1: float
    method: Method
    decision: Model
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["decision"] = self.decision.value
        return d


def decide(log_bf10: float) -> Model:
    """Select M1 iff BF10 > 1; a tie goes to M0."""
    return Model.M1 if log_bf10 > 0 else Model.M0


def posterior_prob_m1(log_bf10: float, prior_prob_m1: float = 0.5) -> float:
    """p(M1 | Y) = pi1 BF / (pi0 + pi1 BF), evaluated as a logistic in log odds."""
    if not 0.0 < prior_prob_m1 < 1.0:
        raise DomainError(f"prior probability of M1 must lie in (0, 1), got {prior_prob_m1}")
    if math.isnan(log_bf10):
        raise DomainError("log_bf10 is NaN")
    log_prior_odds = math.log(prior_prob_m1) - math.log1p(-prior_prob_m1)
    return float(expit(log_bf10 + log_prior_odds))


def _result(log_bf10: float, method: Method, degenerate: bool, prior_prob_m1: float):
    bf = math.inf if log_bf10 > 709.78 else math.exp(log_bf10)
    return BayesFactorResult(
        log_bf10=float(log_bf10),
        bf10=bf,
        posterior_prob_m1=posterior_prob_m1(log_bf10, prior_prob_m1),
        method=method,
        decision=decide(log_bf10),
        degenerate=degenerate,
    )


def closed_form_beta(design: BalancedDesign, alpha: float) -> float:
    return (design.n - design.p) / 2.0 - alpha - 2.0


def check_closed_form_alpha(design: BalancedDesign, alpha: float) -> None:
    if not alpha > -1:
        raise HyperparameterOutOfRange(f"alpha must exceed -1, got alpha={alpha}")
    beta = closed_form_beta(design, alpha)
    if not beta > -1:
        raise HyperparameterOutOfRange(
            f"alpha={alpha} gives beta={beta:g} <= -1 for p={design.p}, r={design.r}; "
            f"the closed form needs alpha < {(design.n - design.p) / 2.0 - 1.0:g}"
        )


def closed_form_log_bf_ratio(design: BalancedDesign, alpha: float, ratio):
    """Closed-form log BF10 as a function of W_E / W_T (scalar or array).

    ``ratio == 0`` maps to ``+inf``.
    """
    check_closed_form_alpha(design, alpha)
    n, p = design.n, design.p
    const = (
        log_gamma(p / 2.0 + alpha + 0.5)
        + log_gamma((n - p) / 2.0)
        - log_gamma((n - 1) / 2.0)
        - log_gamma(alpha + 1.0)
    )
    exponent = -(n - p - 2) / 2.0 + alpha  # strictly negative when beta > -1
    ratio = np.asarray(ratio, dtype=float)
    with np.errstate(divide="ignore"):
        out = const + exponent * np.log(ratio)
    return float(out) if out.ndim == 0 else out


def _check_stats(stats: SufficientStats) -> None:
    if not stats.w_t > 0:
        raise DegenerateData("W_T = 0 (all observations identical); BF10 is undefined")


def closed_form_log_bf(
    stats: SufficientStats, alpha: float = -0.5, prior_prob_m1: float = 0.5
) -> BayesFactorResult:
    """Closed-form Bayes factor under the kappa = r, beta = (n-p)/2 - alpha - 2 prior.

    log BF10 = lgamma(p/2 + alpha + 1/2) + lgamma((n-p)/2) - lgamma((n-1)/2)
               - lgamma(alpha + 1) + (alpha - (n-p-2)/2) log(W_E / W_T)
    """
    check_closed_form_alpha(stats.design, alpha)
    _check_stats(stats)
    ratio = stats.w_e / stats.w_t
    log_bf = closed_form_log_bf_ratio(stats.design, alpha, ratio)
    return _result(log_bf, Method.CLOSED_FORM, ratio == 0.0, prior_prob_m1)


def pearson_vi_log_pdf(tau, prior: PearsonTypeVI):
    """Log density of the Pearson type VI prior at ``tau > 0``."""
    t = np.asarray(tau, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError(f"tau must be positive, got {tau!r}")
    kt = prior.kappa * t
    out = (
        math.log(prior.kappa)
        + prior.beta * np.log(kt)
        - (prior.alpha + prior.beta + 2.0) * np.log1p(kt)
        - log_beta(prior.alpha + 1.0, prior.beta + 1.0)
    )
    return float(out) if out.ndim == 0 else out


def bf_log_integrand(design: BalancedDesign, prior: PearsonTypeVI, ratio: float):
    """Log integrand of BF10 over u = kappa tau / (1 + kappa tau) in (0, 1).

    The returned function takes ``(u, v)`` with ``v = 1 - u``.

    Starting from

        BF10 = int (1 + r tau)^((n-p)/2) (1 + r tau W_E/W_T)^(-(n-1)/2) pi(tau) dtau,

    the substitution turns pi(tau) dtau into a Beta(beta + 1, alpha + 1)
    density in u, and with c = r / kappa both likelihood factors become
    log1p terms in u.
    """
    n, p = design.n, design.p
    a, b = prior.alpha, prior.beta
    half_np = (n - p) / 2.0
    half_n1 = (n - 1) / 2.0
    c = design.r / prior.kappa
    cr = c * ratio
    lead = a + (p - 1) / 2.0
    norm = log_beta(a + 1.0, b + 1.0)

    def logf(u, v):
        return (
            b * np.log(u)
            + lead * np.log(v)
            + half_np * np.log1p((c - 1.0) * u)
            - half_n1 * np.log1p((cr - 1.0) * u)
            - norm
        )

    return logf


_COARSE = np.arange(-60.0, 36.0, 0.25)
_FINE = np.linspace(-0.25, 0.25, 51)
_SPREAD = np.array([-24.0, -12.0, -6.0, -3.0, -1.5, 0.0, 1.5, 3.0, 6.0, 12.0, 24.0])


def _peak_breakpoints(logf) -> np.ndarray:
    """Locate the integrand's peak on the logit scale and return nearby u-breakpoints."""

    def g(s):
        u = expit(s)
        # Jacobian du/ds = u (1 - u)
        return logf(u, expit(-s)) - np.logaddexp(0.0, -s) - np.logaddexp(0.0, s)

    with np.errstate(divide="ignore", invalid="ignore"):
        coarse = g(_COARSE)
        coarse = np.where(np.isnan(coarse), -np.inf, coarse)
        i = int(np.argmax(coarse))
        fine_s = _COARSE[i] + _FINE
        fine = g(fine_s)
        fine = np.where(np.isnan(fine), -np.inf, fine)
    j = int(np.argmax(fine))
    s_star, width = fine_s[j], 1.0
    if 0 < j < fine.size - 1 and np.isfinite(fine[j - 1:j + 2]).all():
        h = _FINE[1] - _FINE[0]
        d2 = (fine[j - 1] - 2 * fine[j] + fine[j + 1]) / h**2
        d1 = (fine[j + 1] - fine[j - 1]) / (2 * h)
        if d2 < 0:
            s_star = s_star - d1 / d2
            width = min(max(1.0 / math.sqrt(-d2), 1e-3), 5.0)
    return expit(s_star + width * _SPREAD)


def quadrature_log_bf_ratio(
    design: BalancedDesign,
    prior: PearsonTypeVI,
    ratio: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """log BF10 by numerical integration, as a function of W_E / W_T.

    Returns ``+inf`` when ``ratio == 0`` and the integral diverges.
    """
    if not 0.0 <= ratio <= 1.0:
        raise DomainError(f"W_E/W_T must lie in [0, 1], got {ratio}")
    if ratio == 0.0 and prior.alpha - (design.n - design.p) / 2.0 <= -1.0:
        return math.inf
    logf = bf_log_integrand(design, prior, ratio)
    with np.errstate(divide="ignore"):
        breaks = _peak_breakpoints(logf)
        if prior.beta >= 0:
            return integrate_unit_interval(logf, spec, breaks, two_sided=True).log_magnitude
        # u^beta blows up at 0; u = w^m with m = 1/(beta + 1) makes the integrand
        # bounded there, which saves many splits toward the endpoint.
        m = 1.0 / (prior.beta + 1.0)
        log_m = math.log(m)

        def logg(w, w_c):
            log_w = np.log(w)
            return logf(w**m, -np.expm1(m * np.log1p(-w_c))) + log_m + (m - 1.0) * log_w

        breaks = breaks ** (prior.beta + 1.0)
        return integrate_unit_interval(logg, spec, breaks, two_sided=True).log_magnitude


def quadrature_log_bf(
    stats: SufficientStats,
    prior: PearsonTypeVI,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
    prior_prob_m1: float = 0.5,
) -> BayesFactorResult:
    """Bayes factor for an arbitrary Pearson type VI prior by adaptive quadrature."""
    _check_stats(stats)
    ratio = stats.w_e / stats.w_t
    log_bf = quadrature_log_bf_ratio(stats.design, prior, ratio, spec)
    return _result(log_bf, Method.QUADRATURE, ratio == 0.0, prior_prob_m1)
