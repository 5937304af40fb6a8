"""Command-line entry point.

Exit codes: 0 on success, 2 for bad input (arguments, spec files, paths),
3 for numerical failures or failed oracle checks.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import theory
from .containers import instance_from_json, instance_to_json, load_dictionary, save_dictionary
from .core import mutual_coherence, random_dictionary
from .harness import DEFAULT_BUDGETS, SweepSpec, run_few_iteration_study, run_sweep
from .imaging import center_crop, make_phantom, read_pgm, reconstruct_image, write_pgm
from .solvers import DEFAULT_MAX_ITERS, KINDS, SolverConfig, solve
from .synthetic import InstanceSpec, gen_instance, recovery_success, relative_error

EXIT_OK, EXIT_SPEC, EXIT_NUMERIC = 0, 2, 3


def _gen_triple(text):
    try:
        seed, m, p = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected SEED,M,P") from None
    return seed, m, p


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def _print_json(doc):
    # json renders inf as Infinity; keep the output strict JSON
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, list):
            return [clean(x) for x in v]
        return v

    print(json.dumps(clean(doc), indent=2, default=_json_default))


def cmd_coherence(args):
    if args.gen:
        A = random_dictionary(*args.gen)
    elif args.matrix:
        A = load_dictionary(args.matrix)
    else:
        raise ValueError("give a matrix file or --gen SEED,M,P")
    mu = mutual_coherence(A)
    doc = {
        "m": A.m,
        "p": A.p,
        "mu": mu,
        "uniqueness_bound": theory.uniqueness_bound(mu),
        "msaa_rhs": theory.msaa_condition_rhs(mu, A.m, A.p),
        "certified_K": theory.max_certified_sparsity(mu, A.m, A.p),
    }
    if A.p == 2:
        doc["tsaa_rhs"] = theory.tsaa_condition_rhs(mu, A.m)
    _print_json(doc)
    return EXIT_OK


def cmd_matrix(args):
    save_dictionary(args.out, random_dictionary(*args.gen))
    return EXIT_OK


def cmd_instance(args):
    seed, m, p = args.gen
    inst = gen_instance(InstanceSpec(seed, m, p, args.K, args.noise))
    _emit(instance_to_json(inst), args.out)
    return EXIT_OK


def cmd_solve(args):
    if args.instance:
        with open(args.instance) as fh:
            inst = instance_from_json(fh.read())
    elif args.gen:
        seed, m, p = args.gen
        if args.K is None:
            raise ValueError("--gen needs --K")
        inst = gen_instance(InstanceSpec(seed, m, p, args.K, args.noise))
    else:
        raise ValueError("give --instance FILE or --gen SEED,M,P")
    K = args.K if args.K is not None else int(np.count_nonzero(inst.x_star))
    max_iters = args.max_iters or DEFAULT_MAX_ITERS.get(args.solver, 100)
    cfg = SolverConfig(K=K, tau=args.tau, max_iters=max_iters, record_trace=args.trace)
    res = solve(args.solver, inst.A, inst.y, cfg, truth=inst.x_star)
    doc = res.to_dict()
    if not args.full:
        doc.pop("x_hat")
    if np.any(inst.x_star):
        doc["relative_error"] = relative_error(res.x_hat, inst.x_star)
        doc["success"] = recovery_success(res.x_hat, inst.x_star)
    _print_json(doc)
    return EXIT_OK


def cmd_sweep(args):
    spec = SweepSpec.from_json(args.spec)
    if args.workers:
        spec.workers = args.workers
    if args.timing:
        spec.timing = True
    _emit(run_sweep(spec).to_csv(), args.out)
    return EXIT_OK


def cmd_few_it(args):
    with open(args.spec) as fh:
        budgets = json.load(fh).get("budgets", list(DEFAULT_BUDGETS))
    spec = SweepSpec.from_json(args.spec)
    if args.workers:
        spec.workers = args.workers
    if args.timing:
        spec.timing = True
    _emit(run_few_iteration_study(spec, budgets).to_csv(), args.out)
    return EXIT_OK


def cmd_verify_lemmas(args):
    n = args.trials
    reports = [
        theory.check_hk_bound(n, 32, 5, args.seed),
        theory.check_row_bound(n, 7, 11, 0.3, args.seed),
    ]
    reports += [theory.check_offdiag_bound(n, 16, p, 5, args.seed) for p in (2, 3, 5)]
    reports += [theory.check_ls_error_bound(n, 16, p, 1, args.seed) for p in (2, 3)]
    ok = True
    for rep in reports:
        ok &= rep.ok
        print(f"{rep.name:16s} trials={rep.trials:6d} skipped={rep.skipped:6d} "
              f"violations={rep.violations} max_ratio={rep.max_ratio:.6f}")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_bounds(args):
    rep = theory.bound_report(args.mu, args.m, args.p, args.K, args.variant)
    _print_json(rep.to_dict())
    return EXIT_OK


def cmd_image(args):
    img = read_pgm(args.input)
    if args.crop:
        img = center_crop(img, args.levels)
    iters = args.iters or [1, 4, 9]
    recon, trace = reconstruct_image(img, record_iters=iters, levels=args.levels,
                                     solver=args.solver, seed=args.seed)
    write_pgm(args.output, recon)
    lines = ["iteration,psnr_db\n"] + [
        f"{k},{'inf' if math.isinf(v) else repr(v)}\n" for k, v in trace
    ]
    _emit("".join(lines), args.csv)
    return EXIT_OK


def cmd_phantom(args):
    write_pgm(args.out, make_phantom(args.size))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="splitsparse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coherence", help="coherence and sparsity bounds of a dictionary")
    p.add_argument("matrix", nargs="?", help="binary matrix container")
    p.add_argument("--gen", type=_gen_triple, metavar="SEED,M,P")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("matrix", help="write a seeded dictionary as a matrix container")
    p.add_argument("out")
    p.add_argument("--gen", type=_gen_triple, metavar="SEED,M,P", required=True)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("instance", help="write a seeded problem instance as JSON")
    p.add_argument("--gen", type=_gen_triple, metavar="SEED,M,P", required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_instance)

    p = sub.add_parser("solve", help="run one solver on one instance")
    p.add_argument("--solver", choices=KINDS, default="TSAA")
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--gen", type=_gen_triple, metavar="SEED,M,P")
    p.add_argument("--K", type=int)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--tau", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--trace", action="store_true", help="include the per-iteration trace")
    p.add_argument("--full", action="store_true", help="include the recovered vector")
    p.set_defaults(func=cmd_solve)

    for name, func, helptext in (
        ("sweep", cmd_sweep, "success-rate sweep from a JSON spec, CSV out"),
        ("few-it", cmd_few_it, "success rate under fixed iteration budgets, CSV out"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("spec")
        p.add_argument("-o", "--out")
        p.add_argument("--workers", type=int)
        p.add_argument("--timing", action="store_true",
                       help="fill mean_time_s (the CSV is then no longer byte-reproducible)")
        p.set_defaults(func=func)

    p = sub.add_parser("verify-lemmas", help="run the randomized inequality oracles")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify_lemmas)

    p = sub.add_parser("bounds", help="evaluate convergence bounds for given parameters")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--variant", choices=("proof", "statement"), default="proof")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("image", help="compressive reconstruction of a PGM image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--iters", type=_int_list, help="iterations to score, e.g. 1,4,9")
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=KINDS, default="TSAA")
    p.add_argument("--crop", action="store_true", help="center-crop to a valid size first")
    p.add_argument("--csv", help="PSNR trace CSV path (default: stdout)")
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("phantom", help="write the synthetic test image")
    p.add_argument("out")
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
