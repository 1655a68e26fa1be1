"""Deterministic Monte Carlo harness for the relative-frequency tables.

Random streams
--------------
Each table cell has a 64-bit *cell id*: the first 8 bytes (big-endian) of
the SHA-256 digest of the UTF-8 string

    onewaybf-cell-v1|table=<t>|p=<p>|r=<r>|rule=<method>:<params>|sigma_a2=<s>

where ``<s>`` is ``format(sigma_a2, ".17g")`` and ``<params>`` is the rule's
``params`` label.  The cell key is the 128-bit state generated by
``numpy.random.SeedSequence([seed, cell_id])``.  Replicate ``k`` draws from
a Philox4x64 generator with that key and counter ``(0, k, 0, 0)``, taking
all ``p`` unit effects first and then the ``p x r`` errors in row-major
order.  Streams therefore depend only on (seed, cell, k): adding cells or
changing the number of workers never changes any replicate's data.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .bayes_factor import (
    ModelParams,
    PearsonTypeVI,
    check_closed_form_alpha,
    closed_form_log_bf_ratio,
    quadrature_log_bf_ratio,
)
from .core_math import DEFAULT_QUADRATURE, QuadratureSpec
from .data import BalancedDesign, DataMatrix, ratio_batch
from .errors import DomainError, HyperparameterOutOfRange

CHUNK = 256
SIGMA_A2_COLUMNS = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0)
ALPHAS = (-0.5, -0.25, -0.2, -0.1)


def fmt_num(x: float) -> str:
    """Short, exact-enough label for a hyperparameter value."""
    return format(float(x), ".12g")


def parse_kappa(text) -> Union[float, str]:
    """Accept a positive number or one of the design-relative scales ``r`` and ``1/n``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().replace(" ", "")
    if s in ("r", "1/n"):
        return s
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise DomainError(f"kappa must be a positive number, 'r' or '1/n', got {text!r}") from None


def resolve_kappa(kappa, design: BalancedDesign) -> float:
    if kappa == "r":
        return float(design.r)
    if kappa == "1/n":
        return 1.0 / design.n
    return float(kappa)


@dataclass(frozen=True)
class ClosedFormRule:
    alpha: float = -0.5
    method = "closed_form"

    @property
    def params(self) -> str:
        return f"alpha={fmt_num(self.alpha)}"

    def validate(self, design: BalancedDesign) -> None:
        check_closed_form_alpha(design, self.alpha)

    def log_bf(self, design: BalancedDesign, ratios: np.ndarray) -> np.ndarray:
        return np.asarray(closed_form_log_bf_ratio(design, self.alpha, ratios), dtype=float)


@dataclass(frozen=True)
class QuadratureRule:
    alpha: float
    beta: float
    kappa: Union[float, str] = 1.0
    spec: QuadratureSpec = DEFAULT_QUADRATURE
    method = "quadrature"

    @property
    def params(self) -> str:
        k = self.kappa if isinstance(self.kappa, str) else fmt_num(self.kappa)
        return f"alpha={fmt_num(self.alpha)};beta={fmt_num(self.beta)};kappa={k}"

    def prior(self, design: BalancedDesign) -> PearsonTypeVI:
        return PearsonTypeVI(self.alpha, self.beta, resolve_kappa(self.kappa, design))

    def validate(self, design: BalancedDesign) -> None:
        self.prior(design)

    def log_bf(self, design: BalancedDesign, ratios: np.ndarray) -> np.ndarray:
        prior = self.prior(design)
        return np.array([quadrature_log_bf_ratio(design, prior, float(x), self.spec) for x in ratios])


Rule = Union[ClosedFormRule, QuadratureRule]


def cell_id(table, design: BalancedDesign, rule: Rule, sigma_a2: float) -> int:
    text = (
        f"onewaybf-cell-v1|table={table}|p={design.p}|r={design.r}"
        f"|rule={rule.method}:{rule.params}|sigma_a2={format(float(sigma_a2), '.17g')}"
    )
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def cell_key(seed: int, cid: int) -> np.ndarray:
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.SeedSequence([int(seed), int(cid)]).generate_state(2, np.uint64)


def replicate_rng(key: np.ndarray, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=key, counter=[0, k, 0, 0]))


def _draw(design: BalancedDesign, params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal(design.p)
    e = rng.standard_normal((design.p, design.r))
    return params.mu + math.sqrt(params.sigma_a2) * a[:, None] + math.sqrt(params.sigma2) * e


def simulate_dataset(
    design: BalancedDesign, params: ModelParams, rng: np.random.Generator
) -> DataMatrix:
    """y_ij = mu + a_i + e_ij with a_i ~ N(0, sigma_a2), e_ij ~ N(0, sigma2).

    Draw order is fixed: the p unit effects, then the errors row by row.
    """
    return DataMatrix(design, _draw(design, params, rng))


@dataclass(frozen=True)
class FrequencyRow:
    p: int
    r: int
    rule_params: str
    sigma_a2: float
    frequency: float | None
    se: float | None
    replicates: int
    degenerate: int
    correct: int = 0
    method: str = "closed_form"
    valid: bool = True
    note: str = ""

    CSV_COLUMNS = ("p", "r", "rule_params", "sigma_a2", "frequency", "se", "replicates", "degenerate")

    def csv_fields(self) -> list[str]:
        if not self.valid:
            freq, se = "invalid", ""
        else:
            freq, se = fmt_num(self.frequency), fmt_num(self.se)
        return [str(self.p), str(self.r), self.rule_params, fmt_num(self.sigma_a2),
                freq, se, str(self.replicates), str(self.degenerate)]


def _chunk_task(args):
    design, params, rule, key, start, stop, log_prior_odds = args
    ys = np.stack([_draw(design, params, replicate_rng(key, k)) for k in range(start, stop)])
    ratios = ratio_batch(ys)
    ok = ~np.isnan(ratios)
    log_bf = rule.log_bf(design, ratios[ok])
    chose_m1 = (log_bf + log_prior_odds) > 0
    truth_m1 = params.sigma_a2 > 0
    correct = int(np.count_nonzero(chose_m1 == truth_m1))
    return correct, int(ok.sum()), int((~ok).sum())


def _chunks(replicates: int):
    return [(s, min(s + CHUNK, replicates)) for s in range(0, replicates, CHUNK)]


def run_cell(
    design: BalancedDesign,
    sigma_a2: float,
    rule: Rule,
    replicates: int = 10000,
    seed: int = 0,
    *,
    mu: float = 0.0,
    sigma2: float = 1.0,
    prior_prob_m1: float = 0.5,
    table=0,
    workers: int = 1,
    executor=None,
) -> FrequencyRow:
    """Relative frequency with which ``rule`` picks the true model in one cell.

    The decision is M1 iff the posterior probability of M1 exceeds 1/2, which
    is BF10 > 1 at the default equal prior odds.  Replicates with W_T = 0
    are counted in ``degenerate`` and left out of the denominator.
    """
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if not 0.0 < prior_prob_m1 < 1.0:
        raise DomainError(f"prior_prob_m1 must lie in (0, 1), got {prior_prob_m1}")
    rule.validate(design)
    params = ModelParams(mu=mu, sigma2=sigma2, sigma_a2=sigma_a2)
    key = cell_key(seed, cell_id(table, design, rule, sigma_a2))
    log_prior_odds = math.log(prior_prob_m1) - math.log1p(-prior_prob_m1)
    tasks = [(design, params, rule, key, a, b, log_prior_odds) for a, b in _chunks(replicates)]
    if executor is not None:
        results = list(executor.map(_chunk_task, tasks))
    elif workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]
    correct = sum(c for c, _, _ in results)
    used = sum(u for _, u, _ in results)
    degenerate = sum(d for _, _, d in results)
    freq = correct / used if used else math.nan
    se = math.sqrt(freq * (1.0 - freq) / used) if used else math.nan
    return FrequencyRow(
        p=design.p, r=design.r, rule_params=rule.params, sigma_a2=float(sigma_a2),
        frequency=freq, se=se, replicates=used, degenerate=degenerate,
        correct=correct, method=rule.method,
    )


def _invalid_row(design, rule, sigma_a2, reason) -> FrequencyRow:
    return FrequencyRow(
        p=design.p, r=design.r, rule_params=rule.params, sigma_a2=float(sigma_a2),
        frequency=None, se=None, replicates=0, degenerate=0, method=rule.method,
        valid=False, note=reason,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    design_grid: Sequence[tuple[int, int]]
    rules: Sequence[Rule]
    truth_grid: Sequence[float] = SIGMA_A2_COLUMNS
    mu: float = 0.0
    sigma2: float = 1.0
    replicates: int = 10000
    seed: int = 0
    prior_prob_m1: float = 0.5
    table: int = 0

    def __post_init__(self):
        if self.replicates < 1:
            raise DomainError(f"replicates must be >= 1, got {self.replicates}")
        for p, r in self.design_grid:
            BalancedDesign(p, r)
        if any(not s >= 0 for s in self.truth_grid):
            raise DomainError("sigma_a2 values must be non-negative")
        if isinstance(self.rules, (ClosedFormRule, QuadratureRule)):
            object.__setattr__(self, "rules", (self.rules,))


@dataclass
class FrequencyTable:
    rows: list[FrequencyRow]
    table_id: int = 0
    replicates: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = [",".join(FrequencyRow.CSV_COLUMNS)]
        lines.extend(",".join(row.csv_fields()) for row in self.rows)
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "table_id": self.table_id,
            "replicates": self.replicates,
            "seed": self.seed,
            "columns": list(FrequencyRow.CSV_COLUMNS),
            "rows": [asdict(r) for r in self.rows],
        }
        return json.dumps(doc, indent=2)

    def lookup(self, p: int, r: int, rule_params: str, sigma_a2: float) -> FrequencyRow:
        for row in self.rows:
            if (row.p, row.r, row.rule_params, row.sigma_a2) == (p, r, rule_params, float(sigma_a2)):
                return row
        raise KeyError((p, r, rule_params, sigma_a2))


def run_experiment(config: ExperimentConfig, workers: int = 1, progress=None) -> FrequencyTable:
    """Run every (design, rule, sigma_a2) cell of ``config``.

    Cells whose hyperparameters are invalid for a design are kept as rows
    marked ``valid=False``.
    """
    rows = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for p, r in config.design_grid:
            design = BalancedDesign(p, r)
            for rule in config.rules:
                for s in config.truth_grid:
                    try:
                        rule.validate(design)
                    except HyperparameterOutOfRange as exc:
                        rows.append(_invalid_row(design, rule, s, str(exc)))
                        continue
                    row = run_cell(
                        design, s, rule, config.replicates, config.seed,
                        mu=config.mu, sigma2=config.sigma2,
                        prior_prob_m1=config.prior_prob_m1, table=config.table,
                        executor=pool,
                    )
                    rows.append(row)
                    if progress is not None:
                        progress(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return FrequencyTable(rows, table_id=config.table, replicates=config.replicates, seed=config.seed)


TABLE_DESIGNS = {
    1: ((2, 5), (2, 10), (2, 50), (2, 100), (2, 500)),
    2: ((5, 2), (10, 2), (50, 2), (100, 2), (500, 2)),
    3: ((2, 2), (10, 5), (5, 10), (10, 10), (50, 25), (25, 50)),
    4: ((2, 5), (2, 10), (2, 50), (2, 100), (2, 500)),
    5: ((5, 2), (10, 2), (50, 2), (100, 2), (500, 2)),
    6: ((2, 2), (10, 5), (5, 10), (10, 10), (25, 50), (50, 25)),
}

QUADRATURE_PRIORS = ((-0.5, 0.0, 1.0), (-0.5, 0.0, "1/n"), (0.0, -0.5, 1.0), (0.0, 0.0, "r"))


def table_rules(table_id: int, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> tuple:
    if table_id in (1, 2, 3):
        return tuple(ClosedFormRule(a) for a in ALPHAS)
    if table_id in (4, 5, 6):
        return tuple(QuadratureRule(a, b, k, spec) for a, b, k in QUADRATURE_PRIORS)
    raise DomainError(f"table id must be 1..6, got {table_id}")


def table_config(table_id: int, replicates: int = 10000, seed: int = 0, designs=None) -> ExperimentConfig:
    """Grid of one of the six published tables, optionally restricted to some designs."""
    rules = table_rules(table_id)
    grid = TABLE_DESIGNS[table_id]
    if designs is not None:
        wanted = {tuple(d) for d in designs}
        grid = tuple(d for d in grid if d in wanted)
    return ExperimentConfig(design_grid=grid, rules=rules, replicates=replicates, seed=seed, table=table_id)


def reproduce_table(
    table_id: int, replicates: int = 10000, seed: int = 0, workers: int = 1, designs=None, progress=None
) -> FrequencyTable:
    return run_experiment(table_config(table_id, replicates, seed, designs), workers, progress)
