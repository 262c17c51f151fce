"""Command line entry point ``rpca``.

Usage::

    rpca <experiment> [--config PATH] [--out DIR] [--seeds K] [--prox MODE] [--threads N]
    rpca generate --out DIR [--m M --n N --r R --s-pct S --sigma SIG --missing F --seed SEED]
    rpca solve --data D.txt [--mask MASK.txt] --algorithm apg --p 30 ... --out DIR

Exit status: 0 on success, 1 for configuration or input errors, 2 when a
solver fails numerically.  Without ``--out`` the output directory comes from
the experiment file, then ``$RPCA_OUT_DIR``, then ``./results``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, NonFiniteError, SingularGram
from .experiments import ALGORITHMS, KINDS, OUT_ENV, default_config, load_config, run_experiment, run_solver
from .matrix import MeasurementOperator, read_mask, read_matrix, write_matrix
from .prox import GnSettings
from .solvers import PROX_MODES, SolverConfig
from .synth import SyntheticSpec, make_problem

log = logging.getLogger("rankrpca")


def _experiment_parser(sub, kind):
    p = sub.add_parser(kind, help=f"run the {kind} experiment")
    p.add_argument("--config", help="experiment file overriding the built-in defaults")
    p.add_argument("--out", help=f"output directory (default: config, ${OUT_ENV}, ./results)")
    p.add_argument("--seeds", type=int, help="number of repetitions (seeds)")
    p.add_argument("--prox", choices=PROX_MODES, help="prox implementation for every run")
    p.add_argument("--threads", type=int, help="worker processes for independent runs")
    p.set_defaults(kind=kind)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpca", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        _experiment_parser(sub, kind)

    g = sub.add_parser("generate", help="write a synthetic problem instance")
    g.add_argument("--out", required=True)
    g.add_argument("--m", type=int, default=500)
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--r", type=int, default=25)
    g.add_argument("--s-pct", type=float, default=20.0)
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--missing", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve one problem given as matrix text files")
    s.add_argument("--data", required=True, help="data matrix D")
    s.add_argument("--mask", help="observation mask (1 = observed)")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="apg")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--lam", type=float, default=0.04)
    s.add_argument("--mu", type=float, default=0.6)
    s.add_argument("--t", type=float)
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--max-iters", type=int, default=5000)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--inner-tol", type=float, default=1e-9)
    s.add_argument("--prox", choices=PROX_MODES, default="gauss-newton")
    s.add_argument("--out", required=True)
    return parser


def _run_experiment(args) -> None:
    if args.config:
        cfg = load_config(args.config, kind=args.kind, out_dir=args.out)
    else:
        cfg = default_config(args.kind, args.out)
    if args.seeds is not None:
        cfg.repetitions = args.seeds
    if args.prox is not None:
        cfg.prox = args.prox
    if args.threads is not None:
        cfg.threads = args.threads
    cfg.__post_init__()
    log.info("running %s into %s", cfg.kind, cfg.out_dir)
    _, paths = run_experiment(cfg)
    for label, path in paths.items():
        print(f"{label}: {path}")


def _run_generate(args) -> None:
    try:
        spec = SyntheticSpec(args.m, args.n, args.r, args.s_pct, args.sigma, args.missing, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    make_problem(spec).save(args.out)
    print(f"instance: {args.out}")


def _run_solve(args) -> None:
    try:
        D = read_matrix(args.data)
        op = MeasurementOperator.entry_mask(read_mask(args.mask)) if args.mask else None
        cfg = SolverConfig(lam=args.lam, mu=args.mu, p=args.p, t=args.t, eps=args.eps,
                           max_iters=args.max_iters, alpha=args.alpha,
                           gn=GnSettings(inner_tol=args.inner_tol), prox=args.prox)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = run_solver(args.algorithm, D, op, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "L.txt", report.L)
    write_matrix(out / "S.txt", report.S)
    print(f"iterations: {report.iterations} converged: {report.converged} "
          f"objective: {report.objective_trace[-1][1]:.17g}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            _run_generate(args)
        elif args.command == "solve":
            _run_solve(args)
        else:
            _run_experiment(args)
    except ConfigError as exc:
        print(f"rpca: configuration error: {exc}", file=sys.stderr)
        return 1
    except (NonFiniteError, SingularGram, FloatingPointError) as exc:
        print(f"rpca: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
