"""Command-line driver: validation, dimension, measure, uniqueness CSVs,
level-n variational estimates, rendering, box counting, and epsilon sweeps.

Exit codes: 0 success, 1 validation/hypothesis failure, 2 numeric
non-convergence, 3 I/O or parse error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .carpet import perturb_carpet, read_carpet, validate_carpet
from .coding import parse_full_word
from .errors import (BracketFailure, CarpetError, InvalidCarpet,
                     IterationLimit, MalformedSpec, NoConvergence,
                     PerturbationTooLarge, TooDeep)
from .fulldim import measure_cylinder, solve_full_dimension, uniqueness_certificate
from .geometry import box_count, regions_to_csv, render_regions
from .transfer import DEFAULT_K
from .variational import optimize_level_n

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CARPETDIM_THREADS", "1")))
    except ValueError:
        return 1


def _meta_lines(**kv) -> str:
    parts = [f"# carpetdim {__version__}"] + [f"# {k}={v}" for k, v in kv.items()]
    return "\n".join(parts) + "\n"


def _load(path: str):
    # OSError / MalformedSpec propagate to main's handler (exit code 3)
    return read_carpet(path)


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_validate(args) -> int:
    spec = _load(args.file)
    rep = validate_carpet(spec, grid_points=args.grid_points)
    print(rep.summary())
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_dim(args) -> int:
    spec = _load(args.file)
    sol = solve_full_dimension(spec, tol=args.tol, K=args.K)
    lines = [f"D={sol.D!r}", f"t_star={sol.t_star!r}", f"beta_star={sol.beta_star!r}",
             f"rho_star={sol.rho_star!r}",
             f"t_range=({sol.t_range.t_lower!r}, {sol.t_range.t_upper!r})",
             f"P_residual={sol.P_at_star!r}", f"dPdt_residual={sol.dPdt_at_star!r}",
             f"degenerate={sol.degenerate}"]
    print("\n".join(lines))
    if args.out:
        with open(args.out, "w") as f:
            f.write(_meta_lines(K=args.K, tol=args.tol) + "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_measure(args) -> int:
    spec = _load(args.file)
    try:
        words = [parse_full_word(w.strip()) for w in args.words.split(",")]
    except MalformedSpec as e:
        return _fail(EXIT_IO, f"bad word list: {e}")
    sol = solve_full_dimension(spec, tol=args.tol, K=args.K)
    for text, word in zip(args.words.split(","), words):
        print(f"{text.strip()}\t{measure_cylinder(sol, word)!r}")
    return EXIT_OK


def cmd_uniqueness(args) -> int:
    spec = _load(args.file)
    rep = uniqueness_certificate(spec, epsilon=args.eps, grid=args.grid,
                                 tol=args.tol, K=args.K, threads=_threads())
    print(f"unique={'true' if rep.unique else 'false'}")
    print(f"concavity_ok={rep.concavity_ok} h_eps_ok={rep.h_eps_ok} "
          f"degenerate={rep.degenerate}")
    print(f"t_range=({rep.t_lower!r}, {rep.t_upper!r}) eps={rep.eps!r}")
    if not rep.degenerate:
        print(f"max_d2Pdt2={float(np.max(rep.d2Pdt2))!r}")
    print(f"gamma_witness={rep.gamma_witness!r}")
    print(f"phi_seminorm={rep.phi_seminorm!r} psi_seminorm={rep.psi_seminorm!r}")
    if args.csv:
        rows = ["t,P,dPdt,d2Pdt2,beta,rho"]
        for k in range(len(rep.ts)):
            rows.append(",".join(repr(float(v)) for v in
                                 (rep.ts[k], rep.P[k], rep.dPdt[k],
                                  rep.d2Pdt2[k], rep.beta[k], rep.rho[k])))
        with open(args.csv, "w") as f:
            f.write(_meta_lines(K=args.K, grid=args.grid, eps=rep.eps,
                                tol=args.tol) + "\n".join(rows) + "\n")
    return EXIT_OK if rep.unique else EXIT_INVALID


def cmd_variational(args) -> int:
    spec = _load(args.file)
    value, p_star, t_star = optimize_level_n(spec, args.n, tol=args.tol)
    print(f"value={value!r}")
    print(f"t_n={t_star!r}")
    print("p_star=" + " ".join(repr(float(x)) for x in p_star))
    return EXIT_OK


def cmd_render(args) -> int:
    spec = _load(args.file)
    regions = render_regions(spec, args.depth)
    csv = _meta_lines(depth=args.depth) + regions_to_csv(regions)
    if args.out:
        with open(args.out, "w") as f:
            f.write(csv)
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def cmd_boxcount(args) -> int:
    spec = _load(args.file)
    scales = [2.0 ** -k for k in range(args.scale_min, args.scale_max + 1)]
    est, counts = box_count(spec, args.samples, args.depth, scales, args.seed)
    print(f"estimate={est!r}")
    if args.out:
        rows = ["scale,count"] + [f"{s!r},{c}" for s, c in counts]
        with open(args.out, "w") as f:
            f.write(_meta_lines(samples=args.samples, depth=args.depth,
                                seed=args.seed) + "\n".join(rows) + "\n")
    else:
        for s, c in counts:
            print(f"{s!r}\t{c}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.param != "epsilon":
        return _fail(EXIT_IO, f"unknown sweep parameter {args.param!r}")
    spec = _load(args.file)
    eps_values = np.linspace(args.start, args.stop, args.steps)
    letters = spec.alphabet()
    rows = ["epsilon,D," + ",".join(f"mass_{i}.{j}" for i, j in letters) + ",unique"]
    for eps in eps_values:
        cur = spec if eps == 0.0 else perturb_carpet(spec, float(eps), args.seed).spec
        rep = uniqueness_certificate(cur, grid=args.grid, K=args.K,
                                     threads=_threads())
        sol = rep.solution
        masses = [measure_cylinder(sol, ((i, j),)) for i, j in letters]
        rows.append(",".join([repr(float(eps)), repr(sol.D)]
                             + [repr(m) for m in masses]
                             + ["true" if rep.unique else "false"]))
        print(rows[-1])
    if args.out:
        with open(args.out, "w") as f:
            f.write(_meta_lines(seed=args.seed, K=args.K, grid=args.grid,
                                steps=args.steps) + "\n".join(rows) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carpetdim")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file")
        p.add_argument("--K", type=int, default=DEFAULT_K)
        p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("validate", help="check the carpet hypotheses")
    p.add_argument("file")
    p.add_argument("--grid-points", type=int, default=256)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dim", help="solve for the dimension")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dim, tol_default=1e-10)

    p = sub.add_parser("measure", help="cylinder masses of the optimal measure")
    common(p)
    p.add_argument("--words", required=True,
                   help="comma-separated full words, e.g. '1.1 2.2,1.3'")
    p.set_defaults(func=cmd_measure, tol_default=1e-10)

    p = sub.add_parser("uniqueness", help="strict-concavity certificate")
    common(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_uniqueness, tol_default=1e-8)

    p = sub.add_parser("variational", help="level-n variational estimate")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_variational, tol_default=1e-8)

    p = sub.add_parser("render", help="depth-n region cover as CSV")
    p.add_argument("file")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("boxcount", help="Monte-Carlo box-counting dimension")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=10 ** 6)
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-min", type=int, default=3)
    p.add_argument("--scale-max", type=int, default=9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_boxcount)

    p = sub.add_parser("sweep", help="dimension and uniqueness vs perturbation size")
    p.add_argument("file")
    p.add_argument("--param", default="epsilon")
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="stop", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--K", type=int, default=DEFAULT_K)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "tol", None) is None and hasattr(args, "tol_default"):
        args.tol = args.tol_default
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (InvalidCarpet, PerturbationTooLarge) as e:
        return _fail(EXIT_INVALID, str(e))
    except (NoConvergence, BracketFailure, IterationLimit) as e:
        return _fail(EXIT_NUMERIC, str(e))
    except (MalformedSpec, TooDeep, OSError) as e:
        return _fail(EXIT_IO, str(e))
    except CarpetError as e:
        return _fail(EXIT_NUMERIC, str(e))


if __name__ == "__main__":
    sys.exit(main())
