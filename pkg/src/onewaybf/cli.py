"""Command-line front end.

Exit codes: 0 success, 2 input or I/O problem, 3 hyperparameter or other
domain problem.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np
from scipy.stats import beta as beta_dist

from . import __version__
from .asymptotics import (
    Scenario,
    ScenarioKind,
    asymptotic_log_bf,
    h,
    limit_statistic,
    ratio_limit,
    realized_c1,
)
from .bayes_factor import (
    Model,
    ModelParams,
    PearsonTypeVI,
    closed_form_beta,
    closed_form_log_bf,
    closed_form_log_bf_ratio,
    pearson_vi_log_pdf,
    quadrature_log_bf,
)
from .core_math import DEFAULT_QUADRATURE
from .data import BalancedDesign, ingest_csv, sufficient_stats
from .errors import DomainError, InputError, OneWayBFError
from .montecarlo import (
    ClosedFormRule,
    ExperimentConfig,
    QuadratureRule,
    cell_key,
    parse_kappa,
    replicate_rng,
    resolve_kappa,
    run_experiment,
    simulate_dataset,
    table_config,
)
from .reference import compare_with_published

EXIT_INPUT = 2
EXIT_DOMAIN = 3
TAIL = 1e-10  # prior mass left outside the prior-shape grid on each side


class CliInputError(InputError):
    kind = "InvalidArguments"


def fmt12(x: float) -> str:
    """12 significant digits; integral values keep a trailing '.0'."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    s = format(float(x), ".12g")
    if s.lstrip("-").isdigit():
        s += ".0"
    return s


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt12(v) if not isinstance(v, str) else v for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliInputError(f"cannot write {path}: {exc}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliInputError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliInputError(f"expected a comma-separated list of integers, got {text!r}") from None


def _designs(text: str) -> list[tuple[int, int]]:
    out = []
    for item in str(text).split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            p, r = (int(v) for v in item.split("x"))
        except ValueError:
            raise CliInputError(f"designs are written PxR, e.g. 2x5; got {item!r}") from None
        out.append((p, r))
    return out


def _model(text: str) -> Model:
    try:
        return Model(str(text).upper())
    except ValueError:
        raise CliInputError(f"model must be M0 or M1, got {text!r}") from None


# -- subcommands -------------------------------------------------------------

def cmd_bf(args) -> int:
    try:
        if args.csv == "-":
            data = ingest_csv(sys.stdin.read())
        else:
            with open(args.csv, encoding="utf-8", newline="") as fh:
                data = ingest_csv(fh.read())
    except OSError as exc:
        raise CliInputError(f"cannot read {args.csv}: {exc}") from None
    stats = sufficient_stats(data)
    d = data.design
    use_quad = args.quadrature or args.beta is not None or args.kappa is not None
    if use_quad:
        beta = closed_form_beta(d, args.alpha) if args.beta is None else args.beta
        kappa = resolve_kappa(parse_kappa(args.kappa if args.kappa is not None else "r"), d)
        result = quadrature_log_bf(stats, PearsonTypeVI(args.alpha, beta, kappa), DEFAULT_QUADRATURE, args.prior_m1)
    else:
        result = closed_form_log_bf(stats, args.alpha, args.prior_m1)
    out = result.to_dict()
    doc = {
        "log_bf10": out["log_bf10"],
        "bf10": out["bf10"],
        "posterior_prob_m1": out["posterior_prob_m1"],
        "decision": out["decision"],
        "method": out["method"],
        "p": d.p,
        "r": d.r,
        "w_h": stats.w_h,
        "w_e": stats.w_e,
        "w_t": stats.w_t,
        "degenerate": out["degenerate"],
    }
    _write(json.dumps(doc) + "\n", args.out)
    return 0


def _emit_table(table, args) -> None:
    if args.format == "json":
        _write(table.to_json() + "\n", args.out)
    else:
        _write(table.to_csv(), args.out)


def cmd_table(args) -> int:
    if args.table not in range(1, 7):
        raise CliInputError(f"--table must be 1..6, got {args.table}")
    designs = _designs(args.designs) if args.designs else None
    cfg = table_config(args.table, args.replicates, args.seed, designs)
    table = run_experiment(cfg, workers=args.workers)
    _emit_table(table, args)
    devs = compare_with_published(table)
    if devs:
        worst = max(devs, key=lambda d: abs(d["deviation"]))
        sys.stderr.write(
            f"table {args.table}: {len(devs)} cells compared with published values; "
            f"max |observed - published| = {abs(worst['deviation']):.4f} at "
            f"(p={worst['p']}, r={worst['r']}, {worst['rule_params']}, sigma_a2={fmt12(worst['sigma_a2'])})\n"
        )
    return 0


def cmd_simulate(args) -> int:
    if args.quadrature or args.beta is not None or args.kappa is not None:
        if args.beta is None:
            raise CliInputError("--quadrature needs --beta (and optionally --kappa, default 1)")
        rule = QuadratureRule(args.alpha, args.beta, parse_kappa(args.kappa if args.kappa is not None else 1))
    else:
        rule = ClosedFormRule(args.alpha)
    cfg = ExperimentConfig(
        design_grid=tuple(_designs(args.designs)),
        rules=(rule,),
        truth_grid=tuple(_float_list(args.sigma_a2)),
        replicates=args.replicates,
        seed=args.seed,
        prior_prob_m1=args.prior_m1,
    )
    _emit_table(run_experiment(cfg, workers=args.workers), args)
    return 0


def cmd_region(args) -> int:
    if args.r_max < 2:
        raise CliInputError(f"--r-max must be >= 2, got {args.r_max}")
    rows = [(r, h(r)) for r in range(2, args.r_max + 1)]
    _write(_csv(rows, ("r", "h")), args.out)
    return 0


def cmd_prior_shape(args) -> int:
    design = BalancedDesign(args.p, args.r)
    prior = PearsonTypeVI.closed_form(design, args.alpha)
    if args.grid < 2:
        raise CliInputError(f"--grid must be >= 2, got {args.grid}")
    # u = kappa tau / (1 + kappa tau) is Beta(beta + 1, alpha + 1); span its bulk.
    # 1 - u is Beta(alpha + 1, beta + 1), which keeps both tails accurate.
    u = beta_dist(prior.beta + 1.0, prior.alpha + 1.0)
    one_minus_u = beta_dist(prior.alpha + 1.0, prior.beta + 1.0)
    t_lo = u.ppf(TAIL) / one_minus_u.isf(TAIL)
    t_hi = u.isf(TAIL) / one_minus_u.ppf(TAIL)
    tau = np.geomspace(t_lo / prior.kappa, t_hi / prior.kappa, args.grid)
    dens = np.exp(pearson_vi_log_pdf(tau, prior))
    _write(_csv(zip(tau, dens), ("tau", "density")), args.out)
    return 0


def cmd_asymptotics(args) -> int:
    try:
        kind = ScenarioKind(args.scenario)
    except ValueError:
        raise CliInputError(f"--scenario must be 1, 2 or 3, got {args.scenario}") from None
    model = _model(args.model)
    scenario = Scenario.from_number(kind.value, args.fixed)
    if model is Model.M0 and args.sigma_a2 not in (None, 0.0):
        raise CliInputError("--model M0 requires --sigma-a2 0")
    sigma_a2 = 0.0 if model is Model.M0 else args.sigma_a2
    if model is Model.M1 and not (sigma_a2 and sigma_a2 > 0):
        raise CliInputError("--model M1 requires a positive --sigma-a2")
    if kind is ScenarioKind.R_GROWS and model is Model.M0:
        raise CliInputError(
            "scenario 1 under M0 has no deterministic limit for W_E/W_T; "
            "use scenario 2 or 3, or model M1"
        )
    params = ModelParams(sigma_a2=sigma_a2)
    rows = []
    for size in _int_list(args.sizes):
        design = scenario.design(size)
        tag = f"asymptotics|scenario={kind.value}|fixed={scenario.fixed}|model={model.value}|sigma_a2={sigma_a2!r}|size={size}"
        cid = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "big")
        stats = sufficient_stats(simulate_dataset(design, params, replicate_rng(cell_key(args.seed, cid), 0)))
        aux = realized_c1(stats, params) if kind is ScenarioKind.R_GROWS else None
        rows.append((
            size,
            limit_statistic(scenario, stats),
            ratio_limit(scenario, model, params, aux),
            closed_form_log_bf_ratio(design, args.alpha, stats.w_e / stats.w_t),
            asymptotic_log_bf(scenario, model, design, args.alpha, params, aux),
        ))
    header = ("size", "empirical_ratio", "theoretical_limit", "exact_log_bf", "asymptotic_log_bf")
    _write(_csv(rows, header), args.out)
    return 0


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliInputError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onewaybf", description="Bayes factors for random effects in balanced one-way ANOVA.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=False, out=True):
        sp.add_argument("--config", help="JSON file of flag values; explicit flags win")
        if out:
            sp.add_argument("--out", help="output path (default: stdout)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    def prior_flags(sp):
        sp.add_argument("--alpha", type=float, default=-0.5)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--kappa", help="positive number, 'r' or '1/n'")
        sp.add_argument("--quadrature", action="store_true", help="integrate numerically")
        sp.add_argument("--prior-m1", type=float, default=0.5, dest="prior_m1")

    sp = sub.add_parser("bf", help="Bayes factor for a group,value CSV file")
    sp.add_argument("csv", help="input CSV path, or - for stdin")
    prior_flags(sp)
    common(sp)
    sp.set_defaults(func=cmd_bf)

    sp = sub.add_parser("simulate", help="Monte Carlo frequencies for a custom grid")
    sp.add_argument("--designs", required=True, help="comma-separated PxR list, e.g. 2x5,5x2")
    sp.add_argument("--sigma-a2", default="0,0.5,1,2,3,5", dest="sigma_a2")
    sp.add_argument("--replicates", type=int, default=10000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    prior_flags(sp)
    common(sp, seed=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("table", help="reproduce one of the six published tables")
    sp.add_argument("--table", type=int, required=True)
    sp.add_argument("--replicates", type=int, default=10000)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--designs", help="restrict to these PxR designs")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    common(sp, seed=True)
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("region", help="the inconsistency boundary h(r)")
    sp.add_argument("--r-max", type=int, required=True, dest="r_max")
    common(sp)
    sp.set_defaults(func=cmd_region)

    sp = sub.add_parser("prior-shape", help="closed-form prior density on a tau grid")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=-0.25)
    sp.add_argument("--grid", type=int, default=2000)
    common(sp)
    sp.set_defaults(func=cmd_prior_shape)

    sp = sub.add_parser("asymptotics", help="sums-of-squares ratios and exact vs asymptotic log BF")
    sp.add_argument("--scenario", type=int, required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--sigma-a2", type=float, dest="sigma_a2")
    sp.add_argument("--sizes", required=True, help="comma-separated growth sizes")
    sp.add_argument("--fixed", type=int, default=2, help="fixed p (scenario 1) or r (scenario 2)")
    sp.add_argument("--alpha", type=float, default=-0.5)
    common(sp, seed=True)
    sp.set_defaults(func=cmd_asymptotics)
    return parser


def _apply_config(parser, argv):
    """Parse argv, taking defaults from --config so explicit flags take precedence."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    found, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((tok for tok in argv if tok in subparsers), None)
    if not found.config or command is None:
        return parser.parse_args(argv)
    try:
        with open(found.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliInputError(f"cannot load config {found.config}: {exc}") from None
    if not isinstance(conf, dict):
        raise CliInputError("config file must hold a flat JSON object")
    sub = subparsers[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in conf.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            raise CliInputError(f"unknown config key {key!r}")
        action = known[dest]
        if action.type is not None and value is not None and not isinstance(value, bool):
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise CliInputError(f"bad value for config key {key!r}: {value!r}") from None
        action.required = False
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _report(exc: OneWayBFError) -> None:
    sys.stderr.write(json.dumps({"error": exc.kind, "message": str(exc)}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except InputError as exc:
        _report(exc)
        return EXIT_INPUT
    except OneWayBFError as exc:
        _report(exc)
        return EXIT_DOMAIN
    except (ValueError, ArithmeticError) as exc:
        _report(DomainError(str(exc)))
        return EXIT_DOMAIN


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
