import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onewaybf.bayes_factor import ModelParams
from onewaybf.data import BalancedDesign, sufficient_stats
from onewaybf.errors import DomainError
from onewaybf.montecarlo import (
    ClosedFormRule,
    ExperimentConfig,
    QuadratureRule,
    cell_id,
    cell_key,
    parse_kappa,
    replicate_rng,
    resolve_kappa,
    run_cell,
    run_experiment,
    simulate_dataset,
    table_config,
)


def test_simulation_moments_under_m0():
    d = BalancedDesign(1000, 1000)
    y = simulate_dataset(d, ModelParams(), replicate_rng(cell_key(7, 1), 0)).values
    assert abs(y.mean()) < 4e-3
    assert y.var() == pytest.approx(1.0, rel=0.01)


def test_simulation_between_group_expectation():
    d = BalancedDesign(10**4, 2)
    s = sufficient_stats(simulate_dataset(d, ModelParams(sigma_a2=3.0), replicate_rng(cell_key(7, 2), 0)))
    assert s.w_h / (d.p - 1) == pytest.approx(7.0, rel=0.03)


def test_simulation_location_and_scale():
    d = BalancedDesign(3, 4)
    key = cell_key(1, 5)
    base = simulate_dataset(d, ModelParams(), replicate_rng(key, 3)).values
    moved = simulate_dataset(d, ModelParams(mu=10.0, sigma2=4.0), replicate_rng(key, 3)).values
    np.testing.assert_allclose(moved, 10.0 + 2.0 * base, rtol=1e-15)


def test_simulation_deterministic_and_streams_distinct():
    d = BalancedDesign(4, 5)
    key = cell_key(42, 123)
    a = simulate_dataset(d, ModelParams(sigma_a2=1.0), replicate_rng(key, 0)).values
    b = simulate_dataset(d, ModelParams(sigma_a2=1.0), replicate_rng(key, 0)).values
    c = simulate_dataset(d, ModelParams(sigma_a2=1.0), replicate_rng(key, 1)).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_cell_id_encoding_is_stable():
    d = BalancedDesign(2, 5)
    cid = cell_id(1, d, ClosedFormRule(-0.5), 0.5)
    assert cid == int.from_bytes(
        __import__("hashlib").sha256(
            b"onewaybf-cell-v1|table=1|p=2|r=5|rule=closed_form:alpha=-0.5|sigma_a2=0.5"
        ).digest()[:8],
        "big",
    )
    assert cid != cell_id(1, d, ClosedFormRule(-0.25), 0.5)
    assert cid != cell_id(2, d, ClosedFormRule(-0.5), 0.5)


def test_kappa_parsing():
    assert parse_kappa("r") == "r" and parse_kappa("1/n") == "1/n"
    assert parse_kappa("1/10") == 0.1 and parse_kappa(2) == 2.0
    assert resolve_kappa("1/n", BalancedDesign(2, 5)) == 0.1
    assert resolve_kappa("r", BalancedDesign(2, 5)) == 5.0
    with pytest.raises(DomainError):
        parse_kappa("abc")


def test_rule_labels():
    assert ClosedFormRule(-0.2).params == "alpha=-0.2"
    assert QuadratureRule(-0.5, 0.0, "1/n").params == "alpha=-0.5;beta=0;kappa=1/n"


def test_table_layouts():
    cfg = table_config(2, replicates=10)
    assert list(cfg.design_grid) == [(5, 2), (10, 2), (50, 2), (100, 2), (500, 2)]
    assert [r.alpha for r in cfg.rules] == [-0.5, -0.25, -0.2, -0.1]
    assert list(cfg.truth_grid) == [0.0, 0.5, 1.0, 2.0, 3.0, 5.0]
    cfg4 = table_config(4, replicates=10)
    hg = [r for r in cfg4.rules if r.kappa == "1/n"][0]
    assert hg.prior(BalancedDesign(2, 5)).kappa == pytest.approx(0.1)
    with pytest.raises(DomainError):
        table_config(7)


@pytest.mark.parametrize(
    "design, alpha, sigma_a2, check",
    [
        ((2, 500), -0.5, 0.0, lambda f: abs(f - 0.993) <= 0.01),
        ((500, 2), -0.5, 0.5, lambda f: f <= 0.005),
        ((50, 25), -0.25, 1.0, lambda f: f >= 0.999),
    ],
)
def test_published_cells(design, alpha, sigma_a2, check):
    row = run_cell(BalancedDesign(*design), sigma_a2, ClosedFormRule(alpha), 10000, seed=3, table=1)
    assert check(row.frequency), row.frequency


def test_determinism_across_workers_and_runs():
    cfg = ExperimentConfig(design_grid=((2, 5), (5, 2)), rules=(ClosedFormRule(-0.5),),
                           truth_grid=(0.0, 1.0), replicates=700, seed=9)
    t1 = run_experiment(cfg, workers=1)
    t4 = run_experiment(cfg, workers=4)
    assert t1.to_csv() == t4.to_csv() == run_experiment(cfg).to_csv()
    for a, b in zip(t1.rows, t4.rows):
        assert a.frequency == b.frequency


def test_adding_cells_does_not_perturb_existing():
    small = ExperimentConfig(design_grid=((2, 5),), rules=(ClosedFormRule(-0.5),), truth_grid=(1.0,), replicates=300)
    big = ExperimentConfig(design_grid=((2, 10), (2, 5)), rules=(ClosedFormRule(-0.25), ClosedFormRule(-0.5)),
                           truth_grid=(0.0, 1.0), replicates=300)
    a = run_experiment(small).rows[0]
    b = run_experiment(big).lookup(2, 5, "alpha=-0.5", 1.0)
    assert a.frequency == b.frequency


def test_replicate_prefix_stability():
    # Replicate k's data depend only on (seed, cell, k), so a longer run extends a shorter one.
    d, rule = BalancedDesign(3, 3), ClosedFormRule(-0.5)
    short = run_cell(d, 1.0, rule, 256, seed=1)
    long = run_cell(d, 1.0, rule, 512, seed=1)
    assert long.correct >= short.correct


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.sampled_from([0.0, 0.5, 3.0]), st.integers(1, 300))
def test_frequency_bounds_and_se(p, r, s, reps):
    row = run_cell(BalancedDesign(p, r), s, ClosedFormRule(-0.5), reps, seed=2)
    assert 0.0 <= row.frequency <= 1.0
    assert row.frequency == row.correct / row.replicates
    assert row.se == pytest.approx(math.sqrt(row.frequency * (1 - row.frequency) / row.replicates))


def test_consistency_trend_inconsistency_region():
    rule = ClosedFormRule(-0.5)
    rows = [run_cell(BalancedDesign(p, 2), 0.5, rule, 4000, seed=4) for p in (5, 50, 500)]
    for a, b in zip(rows, rows[1:]):
        assert b.frequency <= a.frequency + 2 * math.hypot(a.se, b.se)


def test_null_trend_along_grid():
    rule = ClosedFormRule(-0.5)
    rows = [run_cell(BalancedDesign(2, r), 0.0, rule, 4000, seed=4) for r in (5, 10, 50, 100, 500)]
    for a, b in zip(rows, rows[1:]):
        assert b.frequency >= a.frequency - 2 * math.hypot(a.se, b.se)


def test_prior_odds_shift_decisions():
    d, rule = BalancedDesign(4, 4), ClosedFormRule(-0.5)
    even = run_cell(d, 0.0, rule, 1000, seed=1)
    favor_m0 = run_cell(d, 0.0, rule, 1000, seed=1, prior_prob_m1=0.1)
    assert favor_m0.frequency >= even.frequency


def test_invalid_cells_are_marked():
    cfg = ExperimentConfig(design_grid=((2, 2),), rules=(ClosedFormRule(0.0),), truth_grid=(0.0,), replicates=10)
    row = run_experiment(cfg).rows[0]
    assert not row.valid and "beta" in row.note
    assert "invalid" in run_experiment(cfg).to_csv()


def test_quadrature_rule_cell_runs():
    row = run_cell(BalancedDesign(2, 5), 0.0, QuadratureRule(0.0, 0.0, "r"), 300, seed=1, table=4)
    assert 0.5 < row.frequency <= 1.0


def test_table_json_round_trip():
    cfg = ExperimentConfig(design_grid=((2, 5),), rules=(ClosedFormRule(-0.5),), truth_grid=(0.0,), replicates=50)
    text = run_experiment(cfg).to_json()
    doc = json.loads(text)
    assert json.dumps(doc, indent=2) == text
    assert doc["rows"][0]["replicates"] == 50


def test_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig(design_grid=((1, 5),), rules=(ClosedFormRule(),))
    with pytest.raises(DomainError):
        ExperimentConfig(design_grid=((2, 5),), rules=(ClosedFormRule(),), replicates=0)
    with pytest.raises(DomainError):
        ExperimentConfig(design_grid=((2, 5),), rules=(ClosedFormRule(),), truth_grid=(-1.0,))
