"""Command-line front end.

Every subcommand reads its inputs, validates them, writes its artifacts and
exits 0; on the first failure it prints one ``code: message`` line to stderr
and exits 2 (validation), 3 (numeric) or 4 (infeasible).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .annealing import SweepConfig, anneal
from .chain import NcdSpec, generate_ncd, random_chain_from_limit, stationary, validate
from .distortion import ENTROPY, MUTUAL_INFORMATION
from .errors import VoiError
from .ncd import stationary_error_experiment
from .oracle import best_binary, rank_partitions
from .partition import ProbabilisticPartition, harden
from .solver import SolverConfig, solve

VARIANTS = {"mi": MUTUAL_INFORMATION, "entropy": ENTROPY}
DEFAULT_EPSILONS = (0.1, 0.05, 0.02, 0.01, 0.005)


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _floats(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_validate(args) -> int:
    model = io.read_chain(args.input, check=False)
    report = validate(model, raise_on_error=True)
    print(
        f"ok n={report.n} classes={report.n_classes} period={report.period} "
        f"max_row_deviation={report.max_row_deviation:.3e}"
    )
    return 0


def cmd_stationary(args) -> int:
    model = io.read_chain(args.input)
    gamma = stationary(model).gamma
    if args.output_dir:
        out = _outdir(args)
        io.write_matrix(gamma[None, :], out / f"gamma.{args.format}", args.format)
    else:
        print(",".join(io.fmt(x) for x in gamma))
    return 0


def cmd_generate(args) -> int:
    if args.kind == "ncd":
        sizes = _ints(args.blocks)
        model = generate_ncd(NcdSpec(tuple(sizes), args.epsilon, concentration=args.concentration), args.seed)
    else:
        if args.gamma is None:
            raise ValueError("from-limit needs --gamma")
        model = random_chain_from_limit(np.array(_floats(args.gamma)), args.sparsity, args.seed)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_chain(model, out, args.format)
    return 0


def _sweep_config(args, max_groups=None) -> SweepConfig:
    return SweepConfig(seed=args.seed, max_groups=max_groups)


def cmd_aggregate(args) -> int:
    model = io.read_chain(args.input)
    gamma = stationary(model)
    out = _outdir(args)
    variant = VARIANTS[args.variant]
    if args.m == "auto":
        beta_max = args.beta_max if args.beta_max is not None else 2.0 * model.n
        sw = anneal(model, gamma, beta_max, _sweep_config(args))
        report = sw.corrected.report
        extra = {
            "mode": "auto",
            "corrected_beta": sw.corrected.corrected_beta,
            "solver_beta": sw.corrected.solver_beta,
            "knee_m": sw.knee_m,
            "critical_betas": sw.critical_betas(),
        }
    else:
        m = int(args.m)
        if args.beta is None:
            raise ValueError("--beta is required unless --m auto")
        if args.init:
            init = io.read_partition(args.init)
        elif m == 1:
            init = ProbabilisticPartition.ones(model.n)
        else:
            init = ProbabilisticPartition.random(model.n, m, np.random.default_rng(args.seed))
        cfg = SolverConfig(beta=args.beta, max_iters=args.max_iters, variant=variant, seed=args.seed, on_empty="drop")
        report = solve(model, gamma, init, cfg)
        extra = {"mode": "fixed", "requested_m": m}
    extra["hardened_assignment"] = harden(report.final_partition).assignment.tolist()
    io.write_solve_report(report, out, args.format, extra)
    return 0


def cmd_sweep(args) -> int:
    model = io.read_chain(args.input)
    gamma = stationary(model)
    beta_max = args.beta_max if args.beta_max is not None else 2.0 * model.n
    sw = anneal(model, gamma, beta_max, _sweep_config(args))
    out = _outdir(args)
    io.write_sweep(sw, out)
    c = sw.corrected
    io.write_json(
        {
            "seed": args.seed,
            "beta_max": beta_max,
            "corrected_beta": c.corrected_beta,
            "solver_beta": c.solver_beta,
            "knee_m": sw.knee_m,
            "corrected_objective": c.objective,
            "rescaled_slope_bound": c.slope_bound,
            "fixed_point_rounds": c.rounds,
        },
        out / "meta.json",
    )
    return 0


def cmd_oracle(args) -> int:
    model = io.read_chain(args.input)
    gamma = stationary(model)
    m = int(args.m)
    part, value = best_binary(model, gamma, m)
    out = _outdir(args)
    io.write_assignment(part, out / "best.csv")
    ranked = rank_partitions(model, gamma, m, limit=args.limit)
    io.write_table(
        [(k, "-".join(map(str, bp.assignment)), v) for k, (bp, v) in enumerate(ranked)],
        ["rank", "assignment", "total_distortion"],
        out / "ranking.csv",
    )
    io.write_json({"m": m, "n": model.n, "total_distortion": value, "assignment": part.assignment}, out / "meta.json")
    return 0


def cmd_ncd_scaling(args) -> int:
    sizes = tuple(_ints(args.blocks))
    eps = _floats(args.epsilons)
    seeds = range(args.seed, args.seed + args.n_seeds)
    rep = stationary_error_experiment(NcdSpec(sizes, 0.0, concentration=args.concentration), eps, seeds)
    io.write_scaling(rep, _outdir(args))
    print(f"slope={rep.slope:.4f} r2={rep.r2:.4f} phi_slope={rep.phi_slope:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voiagg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, output=True):
        sp.add_argument("--input", required=True)
        if output:
            sp.add_argument("--output-dir", required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("validate", help="check that a chain is stochastic, irreducible and aperiodic")
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("stationary", help="stationary distribution of a chain")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output-dir")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_stationary)

    sp = sub.add_parser("generate", help="draw a random chain")
    sp.add_argument("kind", choices=("ncd", "from-limit"))
    sp.add_argument("--output", required=True, help="chain file to write")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--blocks", default="3,2,2,2", help="block sizes (ncd)")
    sp.add_argument("--epsilon", type=float, default=0.03, help="coupling strength (ncd)")
    sp.add_argument("--concentration", type=float, default=5.0, help="Dirichlet parameter of block rows (ncd)")
    sp.add_argument("--gamma", help="comma-separated stationary law (from-limit)")
    sp.add_argument("--sparsity", type=float, default=0.0, help="fraction of dropped proposal pairs (from-limit)")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("aggregate", help="solve for a partition at fixed beta, or pick beta automatically")
    common(sp)
    sp.add_argument("--m", default="auto", help="number of groups or 'auto'")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--beta-max", type=float)
    sp.add_argument("--variant", choices=tuple(VARIANTS), default="mi")
    sp.add_argument("--init", help="initial partition file")
    sp.add_argument("--max-iters", type=int, default=10_000)
    sp.set_defaults(func=cmd_aggregate)

    sp = sub.add_parser("sweep", help="anneal over beta, recording every split")
    common(sp)
    sp.add_argument("--beta-max", type=float, help="default 2n")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="exhaustive best hard partition")
    common(sp)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--limit", type=int, help="keep only the best LIMIT rows of the ranking")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("ncd-scaling", help="stationary error of the approximate block aggregate versus epsilon")
    sp.add_argument("--output-dir", required=True)
    sp.add_argument("--blocks", default="3,3,3")
    sp.add_argument("--epsilons", default=",".join(map(str, DEFAULT_EPSILONS)))
    sp.add_argument("--n-seeds", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--concentration", type=float, default=5.0)
    sp.set_defaults(func=cmd_ncd_scaling)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except VoiError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"{'io' if isinstance(exc, OSError) else 'invalid_argument'}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
