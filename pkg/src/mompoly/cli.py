"""``mompoly`` command line: solve, verify, examples, reformulate, hankel.

Reports are JSON on stdout (``--pretty`` for a table).  Exit codes:
0 success, 2 invalid spec or arguments, 3 solver failure, 4 invalid certificate.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_SOLVER = 3
EXIT_CERT = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return obj.item()
    return obj


def _emit(report: dict, args) -> None:
    report = _jsonable(report)
    text = json.dumps(report, indent=2, sort_keys=True)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    if getattr(args, "pretty", False):
        _pretty(report)
    else:
        print(text)


def _pretty(report: dict, indent: int = 0) -> None:
    pad = " " * indent
    for k in sorted(report):
        v = report[k]
        if isinstance(v, dict):
            print(f"{pad}{k}:")
            _pretty(v, indent + 2)
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            print(f"{pad}{k}:")
            for item in v:
                _pretty(item, indent + 2)
                print(f"{pad}  --")
        else:
            print(f"{pad}{k:<24} {v}")


def _resolve_data(path: str) -> Path:
    """Existing file, else a file shipped in ``mompoly/data``."""
    p = Path(path)
    if p.exists():
        return p
    from .problems import data_path
    for cand in (path, f"{path}.json"):
        q = data_path(Path(cand).name)
        if q.is_file():
            return Path(str(q))
    raise CliError(EXIT_SPEC, f"no such file: {path}")


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def _parse_sweep(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise CliError(EXIT_SPEC, f"bad --sweep {text!r}, expected r1..r2") from None
    if hi < lo:
        raise CliError(EXIT_SPEC, "empty sweep range")
    return list(range(lo, hi + 1))


def _solve_one(spec_json: dict, order: int, solver: str, tol: float, max_dim: int,
               export_dir: str | None) -> dict:
    """Build and solve one relaxation; returns a report dict (runs in worker processes)."""
    from .relaxation import ProblemSpec, build_sdp, problem_sizes
    from .sdp import ProblemTooLarge, solve_ipm, write_sdpa

    spec = ProblemSpec.from_json(spec_json).with_(order=order)
    spec.validate()
    t0 = time.time()
    p = build_sdp(spec)
    timing = {"build": round(time.time() - t0, 3)}
    out = {"order": order, "relaxation_order": spec.r, "sizes": problem_sizes(p), "timing": timing,
           "info": {k: v for k, v in p.info.items() if k != "generators"},
           "generators": p.info.get("generators", [])}
    if solver == "sdpa-export":
        name = (spec.name or "problem") + f"_r{order}.dat-s"
        path = Path(export_dir or ".") / name
        write_sdpa(p, path)
        out.update({"status": "Exported", "sdpa_file": str(path)})
        return out
    try:
        sol = solve_ipm(p, tol=tol, max_dim=max_dim)
    except ProblemTooLarge as exc:
        out.update({"status": "TooLarge", "message": str(exc)})
        return out
    res = sol.residuals
    timing["solve"] = round(sol.seconds, 3)
    out.update({"status": sol.status, "bound": sol.value, "message": sol.message,
                "iterations": sol.iterations,
                "residuals": {"primal": res.get("relative_primal"), "dual": res.get("relative_dual"),
                              "gap": res.get("relative_gap"),
                              "primal_infeasibility": res.get("primal_infeasibility"),
                              "min_eigenvalue": res.get("min_eigenvalue")}})
    if spec.sense == "max" and spec.mode == "bound":
        out["dual_bound"] = -sol.dual_objective
    return out


def _monotone(spec_json: dict, bounds: list[float], tol: float = 1e-6) -> bool:
    mode = spec_json.get("mode", "bound")
    sense = spec_json.get("sense", "min")
    pairs = list(zip(bounds, bounds[1:]))
    if mode == "eps_min" or (mode == "bound" and sense == "max"):
        return all(b <= a + tol for a, b in pairs)
    return all(b >= a - tol for a, b in pairs)


def cmd_solve(args) -> int:
    from .relaxation import ProblemSpec, SpecError

    path = _resolve_data(args.spec)
    try:
        spec = ProblemSpec.load(path)
    except SpecError as exc:
        raise CliError(EXIT_SPEC, str(exc)) from None
    data = spec.to_json()
    for key in ("cone", "mode", "perturbation"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.M is not None:
        data["M"] = args.M
    if args.epsilon is not None:
        data["epsilon"] = args.epsilon
    try:
        ProblemSpec.from_json(data)
    except SpecError as exc:
        raise CliError(EXIT_SPEC, str(exc)) from None
    solver = os.environ.get("MOMPOLY_SOLVER") or args.solver
    if solver not in ("ipm", "sdpa-export"):
        raise CliError(EXIT_SPEC, f"unknown solver {solver!r}")
    orders = _parse_sweep(args.sweep) if args.sweep else [args.order if args.order is not None else spec.order]
    try:
        for r in orders:
            ProblemSpec.from_json(dict(data, order=r))
    except SpecError as exc:
        raise CliError(EXIT_SPEC, str(exc)) from None

    t0 = time.time()
    job = (solver, args.tol, args.max_dim, args.export_dir)
    if args.jobs > 1 and len(orders) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            runs = list(ex.map(_solve_one, [data] * len(orders), orders, *[[j] * len(orders) for j in job]))
    else:
        runs = [_solve_one(data, r, *job) for r in orders]
    report = {"command": args.echo, "spec": spec.name or str(path), "solver": solver, "runs": runs,
              "wall_time": {"total": round(time.time() - t0, 3),
                            "runs": [r.pop("timing") for r in runs]}}
    code = EXIT_OK
    if solver == "ipm":
        if any(r["status"] != "Optimal" for r in runs):
            code = EXIT_SOLVER
        elif len(runs) > 1:
            report["monotone"] = _monotone(data, [r["bound"] for r in runs])
            if not report["monotone"]:
                code = EXIT_SOLVER
        if len(runs) == 1 and "bound" in runs[0]:
            report["bound"] = runs[0]["bound"]
            report["status"] = runs[0]["status"]
    _emit(report, args)
    return code


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_report(cert, label: str) -> tuple[dict, int]:
    from .algebra import format_poly
    from .certificates import verify_gram_certificate

    res = verify_gram_certificate(None, cert)
    report = {"certificate": label, "valid": res.valid, "message": res.message,
              "residual": format_poly(res.residual) or "0",
              "blocks": [{"size": len(b.v), "tag": b.tag, "psd": p.status, "rank": p.rank}
                         for b, p in zip(cert.blocks, res.psd)]}
    return report, (EXIT_OK if res.valid else EXIT_CERT)


def cmd_verify(args) -> int:
    from .certificates import (GramCertificate, adhoc_certificate, holder_certificate,
                               holder_multivariate)

    what = args.certificate
    if what == "holder":
        if args.i:
            cert = holder_multivariate(args.k, _ints(args.i))
            label = f"holder k={args.k} i={args.i}"
        else:
            cert = holder_certificate(args.k)
            label = f"holder k={args.k}"
    elif what == "adhoc":
        if not args.i:
            raise CliError(EXIT_SPEC, "adhoc needs --i")
        cert = adhoc_certificate(_ints(args.i))
        label = f"adhoc i={args.i}"
    else:
        path = _resolve_data(what)
        label = str(what)
        try:
            cert = GramCertificate.load(path)
        except Exception as exc:  # malformed certificate content
            report = {"certificate": label, "valid": False, "message": f"unreadable certificate: {exc}"}
            _emit(report, args)
            return EXIT_CERT
    report, code = _verify_report(cert, label)
    if args.save:
        cert.save(args.save)
        report["saved"] = args.save
    _emit(report, args)
    return code


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace(" ", "").split(","))
    except ValueError:
        raise CliError(EXIT_SPEC, f"expected comma separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------

def _example_cov3322(args) -> tuple[dict, int]:
    from .certificates import GramCertificate
    from .measures import eval_random_vars
    from .problems import cov3322_attaining_space, cov3322_objective, data_path, load_data

    cert = GramCertificate.load(data_path("cov3322.cert.json"))
    ver, code = _verify_report(cert, "cov3322.cert.json")
    names = load_data("cov3322.json")["variables"]
    space = cov3322_attaining_space()
    vals = eval_random_vars(cov3322_objective(), space, names)
    report = {"certificate": ver, "witness_value": vals[0]}
    spec_json = load_data("cov3322.json")
    run = _solve_one(spec_json, 2, "ipm", args.tol, args.max_dim, None)
    run.pop("timing", None)
    run["reference_sizes"] = {"unknowns": 4146, "block": 100}
    report["sdp"] = run
    if run["status"] != "Optimal":
        code = code or EXIT_SOLVER
    return report, code


def _example_bilocal(args) -> tuple[dict, int]:
    from .certificates import bilocal_identities_check
    from .problems import bilocal_attainment_report, load_data

    ids = bilocal_identities_check()
    att = bilocal_attainment_report()
    report = {"identities": ids.to_json(), "attainment": {
        "value": att["value"], "constant": att["constant"], "binary": att["binary"],
        "constraints": att["constraints"], "violations": [list(v) for v in att["violations"]]}}
    code = EXIT_OK if ids.ok and not att["violations"] and att["value"] == 4 else EXIT_SOLVER
    if args.heavy:
        run = _solve_one(load_data("bilocal.json"), 3, "ipm", args.tol, max(args.max_dim, 400), None)
        run.pop("timing", None)
        run["reference_sizes"] = {"dual_unknowns": 4549, "dual_block": 325}
        report["dual_bound"] = run
        if run["status"] != "Optimal":
            code = EXIT_SOLVER
    return report, code


def _example_h17(args) -> tuple[dict, int]:
    from .pseudo import h17_counterexample_report

    rep = h17_counterexample_report(samples=args.samples)
    ok = rep.positive_definite and rep.pseudo_value == -7 and rep.min_measure_value >= 0
    return rep.to_json(), EXIT_OK if ok else EXIT_CERT


def _example_holder(args) -> tuple[dict, int]:
    out = []
    code = EXIT_OK
    from .certificates import holder_certificate
    for k in range(0, 11):
        rep, c = _verify_report(holder_certificate(k), f"holder k={k}")
        out.append({"k": k, "valid": rep["valid"], "blocks": len(rep["blocks"])})
        code = code or c
    return {"holder": out}, code


def _example_adhoc(args) -> tuple[dict, int]:
    from itertools import product

    from .certificates import adhoc_certificate
    out = []
    code = EXIT_OK
    for n in range(1, 4):
        for i in product(range(3), repeat=n):
            rep, c = _verify_report(adhoc_certificate(i), f"adhoc i={i}")
            out.append({"i": list(i), "valid": rep["valid"]})
            code = code or c
    return {"adhoc": out, "all_valid": code == EXIT_OK}, code


EXAMPLES = {"cov3322": _example_cov3322, "bilocal": _example_bilocal, "h17": _example_h17,
            "holder": _example_holder, "adhoc": _example_adhoc}


def cmd_examples(args) -> int:
    t0 = time.time()
    report, code = EXAMPLES[args.name](args)
    report = {"example": args.name, **report, "wall_time": round(time.time() - t0, 3)}
    _emit(report, args)
    return code


# ---------------------------------------------------------------------------
# reformulate / hankel
# ---------------------------------------------------------------------------

def cmd_reformulate(args) -> int:
    from .measures import tchakaloff_reformulate
    from .relaxation import ProblemSpec, SpecError

    try:
        spec = ProblemSpec.load(_resolve_data(args.spec))
    except SpecError as exc:
        raise CliError(EXIT_SPEC, str(exc)) from None
    prog = tchakaloff_reformulate(spec.S1, spec.S2, spec.objective, args.degree)
    report = {"spec": spec.name, "num_variables": prog.num_variables, "atoms": prog.atoms,
              "sense": spec.sense}
    if not args.summary:
        report["program"] = prog.to_json()
    _emit(report, args)
    return EXIT_OK


def cmd_hankel(args) -> int:
    from .certificates import exact_psd_check
    from .pseudo import (TruncatedFunctional, extend_functional, h17_functional, hankel_apply,
                         perturb_until_pd)

    if args.functional == "h17":
        L = h17_functional()
    else:
        if args.n is None:
            raise CliError(EXIT_SPEC, "--n is required for functional files")
        try:
            L = TruncatedFunctional.from_json(args.n, _resolve_data(args.functional).read_text())
        except (ValueError, KeyError) as exc:
            raise CliError(EXIT_SPEC, f"invalid functional: {exc}") from None
    d = args.d if args.d is not None else L.degree // 2
    H = hankel_apply(L, d)
    psd = exact_psd_check(H)
    report = {"n": L.n, "d": d, "dimension": len(H), "status": psd.status, "rank": psd.rank,
              "matrix": [[str(v) for v in row] for row in H] if args.show else None}
    if args.perturb:
        Lp, delta = perturb_until_pd(L.restrict(2 * d))
        report["perturbed"] = {"delta": str(delta), "status": exact_psd_check(hankel_apply(Lp, d)).status}
        L = Lp
    if args.extend:
        if not psd.is_pd and not args.perturb:
            raise CliError(EXIT_SPEC, "extension needs a positive definite Hankel image (try --perturb)")
        ext = []
        cur = L.restrict(2 * d)
        for _ in range(args.extend):
            cur, alpha = extend_functional(cur)
            ext.append({"degree": cur.degree, "alpha": str(alpha),
                        "status": exact_psd_check(hankel_apply(cur, cur.degree // 2)).status})
        report["extensions"] = ext
        if args.save:
            Path(args.save).write_text(json.dumps(cur.to_json(), indent=1) + "\n")
    report = {k: v for k, v in report.items() if v is not None}
    _emit(report, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mompoly", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="also write the JSON report here")
        p.add_argument("--pretty", action="store_true", help="human-readable output")

    s = sub.add_parser("solve", help="build and solve a relaxation")
    s.add_argument("spec")
    s.add_argument("--order", type=int)
    s.add_argument("--cone", choices=["qm", "QQM", "QM"])
    s.add_argument("--mode", choices=["bound", "eps_min", "QrM", "f_eps"])
    s.add_argument("--perturbation", choices=["phi_psi", "m_phi", "one_psi", "phi"])
    s.add_argument("--M", help="QrM constant (rational)")
    s.add_argument("--epsilon", help="f_eps perturbation weight (rational)")
    s.add_argument("--solver", default="ipm", help="ipm | sdpa-export (env MOMPOLY_SOLVER overrides)")
    s.add_argument("--export-dir", help="directory for sdpa-export files")
    s.add_argument("--sweep", help="order range r1..r2; checks monotonicity")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-dim", type=int, default=500)
    s.set_defaults(func=cmd_solve, echo=None)
    common(s)

    v = sub.add_parser("verify", help="verify a Gram certificate (file, 'holder' or 'adhoc')")
    v.add_argument("certificate")
    v.add_argument("--k", type=int, default=1)
    v.add_argument("--i", help="exponent vector, e.g. 1,1")
    v.add_argument("--save", help="write the (generated) certificate here")
    v.set_defaults(func=cmd_verify)
    common(v)

    e = sub.add_parser("examples", help="run an end-to-end scenario")
    e.add_argument("name", choices=sorted(EXAMPLES))
    e.add_argument("--heavy", action="store_true", help="include minutes-scale solves")
    e.add_argument("--samples", type=int, default=50)
    e.add_argument("--tol", type=float, default=1e-8)
    e.add_argument("--max-dim", type=int, default=500)
    e.set_defaults(func=cmd_examples)
    common(e)

    r = sub.add_parser("reformulate", help="classical program with finitely many atoms")
    r.add_argument("spec")
    r.add_argument("--degree", type=int)
    r.add_argument("--summary", action="store_true", help="sizes only")
    r.set_defaults(func=cmd_reformulate)
    common(r)

    h = sub.add_parser("hankel", help="Hankel images of truncated functionals")
    h.add_argument("functional", help="'h17' or a JSON file mapping monomials to values")
    h.add_argument("--n", type=int)
    h.add_argument("--d", type=int)
    h.add_argument("--show", action="store_true")
    h.add_argument("--extend", type=int, default=0, help="number of extension steps")
    h.add_argument("--perturb", action="store_true", help="mix with the box functional until PD")
    h.add_argument("--save")
    h.set_defaults(func=cmd_hankel)
    common(h)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SPEC if exc.code else EXIT_OK
    if getattr(args, "func", None) is cmd_solve:
        args.echo = ["solve", *(argv if argv is not None else sys.argv[1:])[1:]]
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": str(exc), "exit_code": exc.code}), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
