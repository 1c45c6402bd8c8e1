"""Command-line interface.

Exit status: 0 on success (or a verified identity), 1 when the identity is
violated or the check is inconclusive, 2 on input errors and failed
assumptions.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as pio
from .errors import SympIndexError
from .forms import DEFAULT_TOL

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--mesh", type=int, default=256, help="finite-element mesh size N")
    p.add_argument("--grid", type=int, default=None, help="integration grid steps")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative inertia tolerance")
    p.add_argument("--symp-tol", type=float, default=None, help="symplecticity tolerance")
    p.add_argument("--perturb", type=float, default=None, metavar="MAG",
                   help="retry degenerate crossings on perturbed problems")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json-out", default=None, metavar="PATH",
                   help="write a machine-readable report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sympindex",
                                     description="Index theory of symplectic systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("validate", "check a problem file"),
        ("integrate", "CSV of det of the position block and symplecticity residual"),
        ("focal", "table of focal instants"),
        ("maslov", "Maslov and focal index"),
        ("reduce", "reduced system and its no-focal-instant verdict"),
        ("index", "negative index of the discrete index form on K"),
        ("morse-sturm", "export an isomorphic problem in normal form"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file")
        _common(p)
        if name == "integrate":
            p.add_argument("--csv-out", default=None, metavar="PATH")
        if name == "morse-sturm":
            p.add_argument("--stage", choices=["kill_A", "constant_B"], default="constant_B")
            p.add_argument("--out", default=None, metavar="PATH")
        if name == "index":
            p.add_argument("--variable", action="store_true",
                           help="use the endpoint block of the file")
    p = sub.add_parser("verify", help="check the index identity")
    p.add_argument("file", nargs="?")
    p.add_argument("--all-catalog", action="store_true")
    p.add_argument("--variant", default="fixed",
                   choices=["fixed", "variable", "opposite", "b-focal", "b_focal"])
    p.add_argument("--no-refine", action="store_true", help="skip the refined-mesh check")
    p.add_argument("--jobs", type=int, default=1, help="parallel catalog entries")
    _common(p)
    p = sub.add_parser("catalog", help="list or dump builtin problems")
    p.add_argument("--dump", default=None, metavar="NAME")
    p.add_argument("--list", action="store_true")
    return parser


def _write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_json(args, doc):
    settings = {"mesh": getattr(args, "mesh", None), "grid": getattr(args, "grid", None),
                "tol": getattr(args, "tol", None), "symp_tol": getattr(args, "symp_tol", None),
                "perturb": getattr(args, "perturb", None), "seed": getattr(args, "seed", None)}
    doc = dict(doc, settings=settings)
    if args.json_out:
        _write_atomic(args.json_out, pio.dumps(doc))


def _load(args):
    return pio.load_problem(args.file, args.grid, args.symp_tol)


def _settings_line(problem, args):
    return (f"grid={problem.grid_steps} symp_tol={problem.symp_tol:g} "
            f"tol={args.tol:g} mesh={args.mesh}")


def cmd_validate(args, out):
    from .system import validate

    lp = _load(args)
    d = validate(lp.problem.coefficients, lp.problem.grid_steps, args.tol)
    print(f"n = {lp.problem.n}, interval = {list(lp.problem.interval)}", file=out)
    print(f"max asymmetry B = {d.max_asymmetry_B:.3e}, C = {d.max_asymmetry_C:.3e}", file=out)
    print(f"min normalized singular value of B = {d.min_normalized_sigma_B:.3e}", file=out)
    print(f"inertia of B(a) = {d.inertia_B[0]}", file=out)
    if lp.distribution is not None:
        print(f"distribution rank = {lp.distribution.k}", file=out)
    print("valid" if d.passed else "invalid: " + "; ".join(d.messages), file=out)
    _emit_json(args, {"passed": d.passed, "messages": list(d.messages)})
    return EXIT_OK if d.passed else EXIT_INPUT


def cmd_integrate(args, out):
    from .lagrangian import evolve
    from .system import fundamental_matrix

    lp = _load(args)
    psi = fundamental_matrix(lp.problem, check=False)
    path = evolve(lp.problem, psi)
    n = lp.problem.n
    dets = np.linalg.det(path.frames[:, :n, :])
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "det_d", "symp_residual"])
    for t, d, r in zip(psi.times, dets, psi.residuals):
        w.writerow([repr(float(t)), repr(float(d)), repr(float(r))])
    if args.csv_out:
        _write_atomic(args.csv_out, buf.getvalue())
    else:
        out.write(buf.getvalue())
    _emit_json(args, {"max_symp_residual": psi.max_residual})
    return EXIT_OK if psi.max_residual <= lp.problem.symp_tol else EXIT_FAIL


def _maslov(problem, args):
    from .maslov import maslov_index, maslov_index_robust

    if args.perturb:
        rep, _ = maslov_index_robust(problem, args.perturb, args.seed)
        return rep
    return maslov_index(problem)


def cmd_focal(args, out):
    lp = _load(args)
    rep = _maslov(lp.problem, args)
    print(f"{'t':>20} {'mul':>4} {'sgn':>4} {'nondegenerate':>14}", file=out)
    for c in rep.crossings:
        print(f"{c.t:20.15f} {c.multiplicity:4d} {c.signature:4d} {str(c.nondegenerate):>14}",
              file=out)
    _emit_json(args, rep.as_dict())
    return EXIT_OK


def cmd_maslov(args, out):
    lp = _load(args)
    rep = _maslov(lp.problem, args)
    print(f"i_maslov = {rep.maslov_index}", file=out)
    print(f"focal index = {rep.focal_index}", file=out)
    print(f"crossings = {len(rep.crossings)}, initial gap = {rep.initial_gap:.3e}, "
          f"b focal = {rep.b_is_focal}", file=out)
    if rep.perturbation:
        print(f"computed after a perturbation of size {rep.perturbation:g}", file=out)
    _emit_json(args, rep.as_dict())
    return EXIT_OK


def cmd_reduce(args, out):
    from .reduced import build_reduced, check_assumption

    lp = _load(args)
    if lp.distribution is None or lp.distribution.k == 0:
        print("no distribution of positive rank: nothing to reduce", file=out)
        return EXIT_OK
    red = build_reduced(lp.problem, lp.distribution)
    v = check_assumption(red, alternative=True)
    bB, bC, bI = red.blocks(lp.problem.interval[0])
    print(f"reduced dimension k = {red.k}", file=out)
    print(f"calB(a) = {np.array2string(bB, precision=6)}", file=out)
    print(f"calC(a) = {np.array2string(bC, precision=6)}", file=out)
    print(f"calI(a) = {np.array2string(bI, precision=6)}", file=out)
    print(f"no focal instants: {v.holds}" +
          ("" if v.holds else " (fails at " + ", ".join(f"{t:.9g}" for t in v.fails_at) + ")"),
          file=out)
    print(f"alternative system agrees: {v.alternative_holds == v.holds}", file=out)
    print(f"sufficient condition C_red <= 0: {v.sufficient_condition}", file=out)
    print(f"sufficient condition calI - calC^T calB^-1 calC <= 0: "
          f"{v.sufficient_condition_alt}", file=out)
    _emit_json(args, v.as_dict())
    return EXIT_OK if v.holds else EXIT_INPUT


def cmd_index(args, out):
    from .indexform import index_on_K

    lp = _load(args)
    endpoint = lp.endpoint if args.variable else None
    idx = index_on_K(lp.problem, lp.distribution, args.mesh, endpoint, args.tol)
    print(f"n_-(I|K) = {idx.n_minus}", file=out)
    print(f"n_-(I) - n_-(I|S) = {idx.cross_check}", file=out)
    print(f"inertia on K = {idx.inertia_K.as_tuple()}, on S = {idx.inertia_S.as_tuple()}, "
          f"full = {idx.inertia_full.as_tuple()}", file=out)
    print(f"K and S intersect trivially: {idx.intersection_trivial}", file=out)
    print(_settings_line(lp.problem, args), file=out)
    _emit_json(args, idx.as_dict())
    return EXIT_OK if idx.cross_check == idx.n_minus else EXIT_FAIL


def _verdict_code(verdict):
    return {"verified": EXIT_OK, "violated": EXIT_FAIL, "inconclusive": EXIT_FAIL}.get(
        verdict, EXIT_INPUT)


def _verify(problem, D, endpoint, args):
    from .indexform import verify_index_theorem

    return verify_index_theorem(problem, D, args.mesh, args.variant, endpoint,
                                refine=not args.no_refine, perturb_magnitude=args.perturb,
                                seed=args.seed, tol=args.tol)


def _verify_catalog_entry(name, args):
    from .frontends import catalog

    e = catalog(name)
    p = e.problem
    if args.grid:
        p = p.replace(grid_steps=args.grid)
    variant = "variable" if e.endpoint is not None else "fixed"
    ns = argparse.Namespace(**vars(args))
    ns.variant = variant
    rep = _verify(p, e.distribution, e.endpoint, ns)
    ok = rep.verdict == "verified" and rep.lhs == e.expected["n_minus_K"]
    return name, rep.as_dict(), ok


def cmd_verify(args, out):
    from .frontends import CATALOG

    if args.all_catalog:
        names = sorted(CATALOG)
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as ex:
                results = list(ex.map(_verify_catalog_entry, names, [args] * len(names)))
        else:
            results = [_verify_catalog_entry(nm, args) for nm in names]
        code = EXIT_OK
        for name, rep, ok in results:
            print(f"{name:16s} {rep['verdict']:13s} {rep['equation']}", file=out)
            if not ok:
                code = EXIT_FAIL
            if args.json_out:
                base, ext = os.path.splitext(args.json_out)
                _write_atomic(f"{base}.{name}{ext or '.json'}", pio.dumps(rep))
        return code
    if not args.file:
        print("verify needs a problem file or --all-catalog", file=sys.stderr)
        return EXIT_INPUT
    lp = _load(args)
    rep = _verify(lp.problem, lp.distribution, lp.endpoint, args)
    print(f"variant: {rep.variant}", file=out)
    print(f"verdict: {rep.verdict}", file=out)
    print(f"report: {rep.equation}", file=out)
    for k, v in rep.terms.items():
        print(f"  {k} = {v}", file=out)
    if rep.lhs_refined is not None:
        print(f"  left side at mesh {rep.refined_mesh} = {rep.lhs_refined}", file=out)
    for note in rep.notes:
        print(f"note: {note}", file=out)
    print(_settings_line(lp.problem, args), file=out)
    _emit_json(args, rep.as_dict())
    return _verdict_code(rep.verdict)


def cmd_morse_sturm(args, out):
    from .maslov import maslov_index
    from .system import to_morse_sturm

    lp = _load(args)
    new, iso = to_morse_sturm(lp.problem, args.stage)
    times = new.times
    A0 = max(np.abs(new.coefficients(t)[0]).max() for t in times[:: max(1, len(times) // 64)])
    doc = pio.problem_to_dict(new, None, None, lp.name)
    text = pio.dumps(doc)
    if args.out:
        _write_atomic(args.out, text)
        print(f"max |A| = {A0:.3e}", file=out)
        print(f"B(a) = {np.array2string(new.coefficients(times[0])[1], precision=9)}", file=out)
    else:
        out.write(text)
    _emit_json(args, {"max_abs_A": A0, "i_maslov": maslov_index(new).maslov_index})
    return EXIT_OK


def cmd_catalog(args, out):
    from .frontends import CATALOG, catalog

    if args.dump:
        e = catalog(args.dump)
        out.write(pio.dumps(pio.problem_to_dict(e.problem, e.distribution, e.endpoint,
                                                e.name, e.expected)))
        return EXIT_OK
    for name in sorted(CATALOG):
        e = catalog(name)
        print(f"{name:16s} n={e.problem.n} i_maslov={e.expected['i_maslov']} "
              f"n_-(I|K)={e.expected['n_minus_K']}", file=out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "integrate": cmd_integrate, "focal": cmd_focal,
    "maslov": cmd_maslov, "reduce": cmd_reduce, "index": cmd_index, "verify": cmd_verify,
    "morse-sturm": cmd_morse_sturm, "catalog": cmd_catalog,
}


def run(argv=None, out=None) -> int:
    """Parse ``argv`` and run the command, returning the exit status."""
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except pio.ProblemFileError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SympIndexError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main():
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # the reader went away (for example ``| head``); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = EXIT_OK
    sys.exit(code)


if __name__ == "__main__":
    main()
