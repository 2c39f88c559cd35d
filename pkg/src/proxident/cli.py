"""Experiment harness: gen / solve / replicate / screen.

Exit codes: 0 success, 1 usage or data error, 2 solver hit max_iter without
converging. The default seed comes from --seed, then a --config file, then
the PROXIDENT_SEED environment variable, then 0.
"""

import argparse
import os
import sys

from .asynchronous import DelayModel
from .bundles import BundleError, read_bundle, read_vector, write_bundle
from .exploit import SubspaceSamplerConfig
from .identification import analyze_trace, report_text, safe_screen_l1
from .problems import gen_lasso, gen_lowrank_matrix_problem, gen_qc_lasso
from .registry import SOLVERS, run_solver
from .replicate import replicate_fig1, replicate_fig2, replicate_fig3
from .solvers import SolverConfig, trace_to_csv


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 (argparse defaults to 2, which we reserve for
    # non-convergence)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config(path):
    conf = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line {line!r}")
            key, _, value = line.partition("=")
            conf[key.strip()] = value.strip()
    return conf


def _setting(args, conf, name, cast, fallback):
    """Flag value if given, else config-file value, else fallback."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in conf:
        return cast(conf[name])
    return fallback


def _resolve_seed(args, conf):
    seed = _setting(args, conf, "seed", int, None)
    if seed is not None:
        return seed
    env = os.environ.get("PROXIDENT_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"PROXIDENT_SEED={env!r} is not an integer")
    return 0


def build_parser():
    parser = _Parser(prog="proxident",
                     description="structure-aware proximal optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[], help="generate an instance bundle")
    gen_sub = gen.add_subparsers(dest="kind", required=True)

    lasso = gen_sub.add_parser("lasso")
    lasso.add_argument("--m", type=int, default=200)
    lasso.add_argument("--n", type=int, default=100)
    lasso.add_argument("--lam", type=float)
    lasso.add_argument("--density", type=float, default=0.1)
    lasso.add_argument("--noise", type=float, default=0.1)
    lasso.add_argument("--components", type=int, default=10)

    qc = gen_sub.add_parser("qc-lasso")
    qc.add_argument("--n", type=int, default=20)
    qc.add_argument("--m", type=int)
    qc.add_argument("--s", type=int, default=3)
    qc.add_argument("--delta", type=float, default=0.5)
    qc.add_argument("--lam", type=float, default=1.0)
    qc.add_argument("--components", type=int, default=10)
    qc.add_argument("--degenerate", action="store_true")

    lowrank = gen_sub.add_parser("lowrank")
    lowrank.add_argument("--size", type=int, default=20)
    lowrank.add_argument("--rank", type=int, default=4)
    lowrank.add_argument("--lam", type=float, default=1.0)
    lowrank.add_argument("--degenerate", action="store_true")

    for p in (lasso, qc, lowrank):
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="bundle directory (default kind-seed)")
        p.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="run a solver on a bundle")
    solve.add_argument("solver", choices=sorted(SOLVERS))
    solve.add_argument("bundle")
    solve.add_argument("--gamma", type=float)
    solve.add_argument("--max-iter", type=int)
    solve.add_argument("--stop-tol", type=float)
    solve.add_argument("--trace-every", type=int)
    solve.add_argument("--seed", type=int)
    solve.add_argument("--workers", type=int)
    solve.add_argument("--delay", help="constant:d | uniform:lo:hi | geometric:q")
    solve.add_argument("--encoding", choices=["dense", "sparse"])
    solve.add_argument("--full-step-every", type=int)
    solve.add_argument("--keep-prob", type=float)
    solve.add_argument("--refresh-wait", type=int)
    solve.add_argument("--out", help="output directory (default: bundle dir)")
    solve.add_argument("--config", help="key=value defaults file")
    solve.set_defaults(func=cmd_solve)

    rep = sub.add_parser("replicate", help="run a canned figure experiment")
    rep.add_argument("figure", choices=["fig1", "fig2", "fig3"])
    rep.add_argument("--seed", type=int)
    rep.add_argument("--outdir", default=".")
    rep.add_argument("--instances", type=int)
    rep.add_argument("--config", help="key=value defaults file")
    rep.set_defaults(func=cmd_replicate)

    screen = sub.add_parser(
        "screen", help="certified zero coordinates from a region"
    )
    screen.add_argument("bundle")
    screen.add_argument("--center-file", required=True,
                        help="vector file: region center")
    screen.add_argument("--radius", type=float, required=True)
    screen.add_argument("--gamma", type=float,
                        help="prox step (default 1/L)")
    screen.set_defaults(func=cmd_screen)
    return parser


def cmd_gen(args):
    seed = _resolve_seed(args, {})
    if args.kind == "lasso":
        problem = gen_lasso(args.m, args.n, seed=seed, lam=args.lam,
                            density=args.density, noise=args.noise,
                            components=args.components)
    elif args.kind == "qc-lasso":
        problem = gen_qc_lasso(args.n, s=args.s, delta=args.delta, seed=seed,
                               m=args.m, lam=args.lam,
                               components=args.components,
                               degenerate=args.degenerate)
    else:
        problem = gen_lowrank_matrix_problem(size=args.size, rank=args.rank,
                                             degenerate=args.degenerate,
                                             seed=seed, lam=args.lam)
    out = args.out or f"{args.kind}-{seed}"
    write_bundle(out, problem)
    print(out)
    return 0


def cmd_solve(args):
    conf = _read_config(args.config) if args.config else {}
    seed = _resolve_seed(args, conf)
    config = SolverConfig(
        gamma=_setting(args, conf, "gamma", float, None),
        max_iter=_setting(args, conf, "max-iter", int, 100_000),
        stop_tol=_setting(args, conf, "stop-tol", float, 1e-10),
        seed=seed,
        trace_every=_setting(args, conf, "trace-every", int, 1),
    )
    problem = read_bundle(args.bundle)
    kwargs = {}
    if args.solver == "dave-pg":
        workers = _setting(args, conf, "workers", int, None)
        if workers is not None:
            kwargs["workers"] = workers
        delay = _setting(args, conf, "delay", str, None)
        if delay is not None:
            kwargs["delay_model"] = DelayModel.parse(delay)
        encoding = _setting(args, conf, "encoding", str, None)
        if encoding is not None:
            kwargs["encoding"] = encoding
    elif args.solver == "predictor-corrector":
        every = _setting(args, conf, "full-step-every", int, None)
        if every is not None:
            kwargs["full_step_every"] = every
    elif args.solver == "random-subspace":
        kwargs["sampler"] = SubspaceSamplerConfig(
            keep_probability=_setting(args, conf, "keep-prob", float, 0.5),
            refresh_wait=_setting(args, conf, "refresh-wait", int, 10),
            seed=seed,
        )
    point, trace = run_solver(args.solver, problem, config, **kwargs)
    out = args.out or args.bundle
    os.makedirs(out, exist_ok=True)
    trace_to_csv(trace, os.path.join(out, "trace.csv"))
    report = analyze_trace(trace)
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(report_text(report))
        fh.write(f"converged={int(trace.converged)}\n")
        fh.write(f"iterations={trace.iterations}\n")
        fh.write(f"gamma={trace.gamma!r}\n")
        fh.write(f"objective={problem.objective(point.point)!r}\n")
    print(os.path.join(out, "trace.csv"))
    print(os.path.join(out, "report.txt"))
    return 0 if trace.converged else 2


def cmd_replicate(args):
    conf = _read_config(args.config) if args.config else {}
    seed = _resolve_seed(args, conf)
    os.makedirs(args.outdir, exist_ok=True)
    if args.figure == "fig1":
        result = replicate_fig1(seed=seed, outdir=args.outdir)
        print(f"shared_axis={int(result['shared_axis'])}")
        print(f"ls_relative_change={result['ls_relative_change']!r}")
    elif args.figure == "fig2":
        instances = _setting(args, conf, "instances", int, 50)
        result = replicate_fig2(seed=seed, outdir=args.outdir,
                                instances=instances)
        for group, mean in result["means"].items():
            print(f"mean_final_rank[{group}]={mean!r}")
    else:
        result = replicate_fig3(seed=seed, outdir=args.outdir)
        print(f"comm_dense_at_gap={result['comm_at_gap']['dense']}")
        print(f"comm_sparse_at_gap={result['comm_at_gap']['sparse']}")
        print(f"ratio={result['ratio']!r}")
    return 0


def cmd_screen(args):
    problem = read_bundle(args.bundle)
    if problem.reg.kind != "l1":
        raise ValueError("screening is defined for l1 bundles")
    center = read_vector(args.center_file)
    gamma = args.gamma if args.gamma else 1.0 / problem.smooth.lipschitz
    screened = safe_screen_l1(center, args.radius, gamma * problem.reg.lam)
    for idx in sorted(screened):
        print(idx)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BundleError as exc:
        print(f"proxident: bundle error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"proxident: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
