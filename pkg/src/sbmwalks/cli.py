"""Command-line interface.

Subcommands: ``generate`` (sample a graph to an edge list), ``spectrum``
(eigenvalues and envelope checks), ``hitting`` (exact/spectral/Monte-Carlo
hitting times), ``check-conditions`` (asymptotic-condition report), and
``experiment`` (replicate sweeps).  Exit codes: 0 success, 1 validation
error, 2 numerical failure.  All randomness derives from the single
``--seed`` value (or the seed in the config file).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments, hitting, spectral
from .graph import (
    GraphConnectivityError,
    read_edge_list,
    replicate_seed,
    sample,
    write_edge_list,
)
from .model import BlockModelConfig, check_conditions, derive, load_config
from .spectral import NumericalError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract reserves 2 for
    # numerical failures, so route usage errors to 1.
    def error(self, message):
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file with keys n, m, p, q, allow_loops, seed")
    p.add_argument("--n", type=int, help="vertex count (override)")
    p.add_argument("--m", type=int, help="block count (override)")
    p.add_argument("--p", help="comma-separated intra-block probabilities, length m, descending")
    p.add_argument("--q", type=float, help="inter-block probability (override)")
    p.add_argument("--seed", type=int, help="RNG seed (override)")
    p.add_argument("--loops", action=argparse.BooleanOptionalAction, default=None, help="sample loops")


def _resolve_config(args) -> BlockModelConfig:
    if args.config:
        base = load_config(args.config)
        fields = {
            "n": base.n,
            "m": base.m,
            "p": base.p,
            "q": base.q,
            "allow_loops": base.allow_loops,
            "seed": base.seed,
        }
    else:
        fields = {"n": None, "m": None, "p": None, "q": None, "allow_loops": True, "seed": 0}
    if args.n is not None:
        fields["n"] = args.n
    if args.m is not None:
        fields["m"] = args.m
    if args.p is not None:
        try:
            fields["p"] = tuple(float(x) for x in args.p.split(","))
        except ValueError as exc:
            raise ValueError(f"--p must be a comma-separated list of numbers, got {args.p!r}") from exc
    if args.q is not None:
        fields["q"] = args.q
    if args.seed is not None:
        fields["seed"] = args.seed
    if args.loops is not None:
        fields["allow_loops"] = args.loops
    missing = [k for k in ("n", "m", "p", "q") if fields[k] is None]
    if missing:
        raise ValueError(f"missing configuration values {missing}; pass --config or the corresponding flags")
    if len(fields["p"]) != fields["m"]:
        raise ValueError(f"--p lists {len(fields['p'])} probabilities but m={fields['m']}")
    return BlockModelConfig(**fields)


def _cmd_generate(args) -> int:
    config = _resolve_config(args)
    g = sample(config)
    write_edge_list(g, args.out)
    print(f"wrote {args.out}: n={g.n} blocks={g.n_blocks} edges={g.edge_count} loops={g.loop_count}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    config = _resolve_config(args)
    params = derive(config)
    g = read_edge_list(args.input) if args.input else sample(config)
    mats = spectral.build_rescaled(g, params)
    dec = spectral.decompose(mats.normalized, "normalized")
    spectral.write_spectrum_csv(dec, args.out, include_vectors=args.vectors)
    print(f"wrote {args.out}: {g.n} eigenvalues, residual {dec.residual:.3e}")
    if args.bounds_out:
        reports = spectral.norm_bounds(g, params, c=args.c, slack=args.slack, matrices=mats)
        with open(args.bounds_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("bound,empirical,envelope,satisfied\n")
            for r in reports:
                fh.write(f"{r.name},{r.empirical!r},{r.envelope!r},{r.satisfied}\n")
        print(f"wrote {args.bounds_out}: {sum(r.satisfied for r in reports)}/{len(reports)} bounds hold")
    return EXIT_OK


def _cmd_hitting(args) -> int:
    if args.input:
        g = read_edge_list(args.input)
        seed = args.seed if args.seed is not None else 0
    else:
        config = _resolve_config(args)
        g = sample(config)
        seed = config.seed
    if args.all_targets:
        targets = list(range(g.n))
    elif args.target:
        bad = [t for t in args.target if not 0 <= t < g.n]
        if bad:
            raise ValueError(f"targets {bad} out of range 0..{g.n - 1}")
        targets = args.target
    else:
        raise ValueError("pass --target (repeatable) or --all-targets")
    exact = hitting.exact_hitting(g, compute_matrix=False)
    dec = spectral.decompose(
        g.adjacency / np.sqrt(np.outer(g.degrees, g.degrees)), "normalized"
    )
    spectral_values = {w: hitting.spectral_target_hitting(dec, g, w) for w in targets}
    mc = None
    if args.walks > 0:
        mc = {
            w: hitting.mc_hitting(
                g, args.start, w, n_walks=args.walks, max_steps=args.max_steps, seed=replicate_seed(seed, w)
            )
            for w in targets
        }
    hitting.write_hitting_csv(g, targets, exact, spectral_values, mc, args.out)
    print(f"wrote {args.out}: {len(targets)} targets, start average {exact.start_averaged[0]!r}")
    return EXIT_OK


def _cmd_check_conditions(args) -> int:
    config = _resolve_config(args)
    report = check_conditions(config, args.mode, threshold=args.threshold)
    csv = report.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv)
        print(f"wrote {args.out}: {sum(c.satisfied for c in report.checks)}/{len(report.checks)} conditions hold")
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = _resolve_config(args)
    targets = args.targets
    if targets not in ("blocks", "first_of_block"):
        targets = tuple(int(x) for x in targets.split(","))
    plan = experiments.ExperimentPlan(
        config=config,
        replicates=args.replicates,
        mode=args.mode,
        targets=targets,
        target_block=args.target_block,
        base_seed=args.base_seed,
        output=args.out,
        clt_scaling=args.scaling,
        bound_c=args.c,
        bound_slack=args.slack,
        threads=args.threads,
    )
    if plan.mode in ("lln_start", "lln_target"):
        res = experiments.run_lln(plan)
        print(f"{plan.mode}: {len(res.records)} records, max |ratio-1| = {res.max_abs_deviation!r}")
    elif plan.mode == "clt_target":
        res = experiments.run_clt_target(plan)
        s = res.summary
        print(
            f"clt_target: n={s.n} mean={s.mean:.4f} variance={s.variance:.4f} "
            f"ks={s.ks_distance:.4f} target_variance={s.target_variance:.4f}"
        )
    elif plan.mode == "clt_edges":
        res = experiments.run_clt_edges(plan)
        s = res.summary
        print(f"clt_edges: n={s.n} mean={s.mean:.4f} variance={s.variance:.4f} ks={s.ks_distance:.4f}")
    else:
        res = experiments.run_bounds(plan)
        for name, frac in res.pass_fraction.items():
            extra = f" calibrated_c={res.calibrated_c[name]!r}" if name in res.calibrated_c else ""
            print(f"bounds: {name} pass_fraction={frac:.3f}{extra}")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbmwalks", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a graph and write an edge list")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="edge-list output path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("spectrum", help="eigenvalues of the normalized adjacency and envelope checks")
    _add_config_flags(p)
    p.add_argument("--in", dest="input", help="edge-list input (default: sample from the config)")
    p.add_argument("--out", required=True, help="eigenvalue CSV output path")
    p.add_argument("--bounds-out", help="also write envelope-check CSV here")
    p.add_argument("--vectors", action="store_true", help="include eigenvector columns")
    p.add_argument("--c", type=float, default=1.0, help="envelope constant (default 1)")
    p.add_argument("--slack", type=float, default=1.5, help="envelope slack factor (default 1.5)")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("hitting", help="exact, spectral, and Monte Carlo hitting times")
    _add_config_flags(p)
    p.add_argument("--in", dest="input", help="edge-list input (default: sample from the config)")
    p.add_argument("--target", type=int, action="append", help="target vertex (repeatable)")
    p.add_argument("--all-targets", action="store_true", help="use every vertex as a target")
    p.add_argument("--start", type=int, default=0, help="start vertex for Monte Carlo (default 0)")
    p.add_argument("--walks", type=int, default=0, help="Monte Carlo walks per target (0 disables)")
    p.add_argument("--max-steps", type=int, default=None, help="walk truncation cap")
    p.add_argument("--out", required=True, help="hitting CSV output path")
    p.set_defaults(func=_cmd_hitting)

    p = sub.add_parser("check-conditions", help="evaluate the asymptotic conditions at this n")
    _add_config_flags(p)
    p.add_argument("--mode", required=True, choices=["lln", "clt", "identical_p"])
    p.add_argument("--threshold", type=float, default=0.1, help="ratio threshold (default 0.1)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=_cmd_check_conditions)

    p = sub.add_parser("experiment", help="run a replicate sweep")
    _add_config_flags(p)
    p.add_argument("--mode", required=True, choices=list(experiments.MODES))
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--targets", default="blocks", help="'blocks', 'first_of_block', or comma-separated ids")
    p.add_argument("--target-block", type=int, default=0, help="designated block for clt_target (0-based)")
    p.add_argument("--base-seed", type=int, default=None, help="replicate seed base (default: config seed)")
    p.add_argument("--scaling", default="auto", choices=["auto", "general", "identical"])
    p.add_argument("--c", type=float, default=1.0, help="envelope constant for bounds mode")
    p.add_argument("--slack", type=float, default=1.5, help="envelope slack for bounds mode")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="parallel replicate workers")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError, GraphConnectivityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
