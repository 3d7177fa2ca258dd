"""Command-line interface: ``zipper solve | scan | verify | sample``.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from typing import Sequence

from zipper import boundary_law as bl
from zipper import gibbs, oracle, thermo, tree
from zipper.model import ModelParams, parse_coupling

FIG4 = {"k": 2, "q": 8, "epsilon": 2 * math.log(2), "J": math.log(2), "t_min": 1.0, "t_max": 3.0, "points": 201}
FIG3 = {"k": 4, "theta": 2.0, "etas": (0.5, 0.375, 0.25), "z_max": 1.0, "points": 201}


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_default(x):
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return float(x)
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _dumps(obj) -> str:
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return "inf" if o > 0 else ("-inf" if o < 0 else None)
        if isinstance(o, dict):
            return {str(key): clean(v) for key, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, ensure_ascii=False, default=_json_default)


def write_atomic(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".zipper-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(raw.decode())
    return json.loads(raw)


def params_from_args(args: argparse.Namespace, need_physical: bool = False) -> ModelParams:
    """ModelParams from --config and flags; flags win over the config file."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}

    def pick(name: str, cast=float):
        value = getattr(args, name, None)
        if value is None:
            value = cfg.get(name)
        return None if value is None else cast(value)

    k = pick("k", int)
    if k is None:
        raise UsageError("--k is required")
    theta, eta = pick("theta"), pick("eta")
    J = pick("J", parse_coupling)
    if theta is not None and eta is None and J is not None and math.isinf(J):
        eta = 0.0
    if theta is not None or eta is not None:
        if need_physical:
            raise UsageError("this command needs physical parameters, not --theta/--eta")
        if theta is None or eta is None:
            raise UsageError("--theta and --eta go together")
        return ModelParams.from_theta_eta(k, pick("q", int) or 1, theta, eta)
    q = pick("q", int)
    epsilon = pick("epsilon")
    beta, T = pick("beta"), pick("T")
    if beta is not None and T is not None:
        raise UsageError("give either --T or --beta, not both")
    if None in (q, epsilon, J) or (beta is None and T is None):
        raise UsageError("need --q, --epsilon, --J and one of --T/--beta (or --theta/--eta)")
    if T is not None:
        if not T > 0:
            raise UsageError("--T must be positive")
        beta = 1.0 / T
    return ModelParams(k, q, epsilon, J, beta)


def _add_param_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON or TOML file with model parameters")
    sp.add_argument("--k", type=int)
    sp.add_argument("--q", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--J", type=parse_coupling, help='coupling; "inf" for the hard constraint')
    temp = sp.add_mutually_exclusive_group()
    temp.add_argument("--beta", type=float)
    temp.add_argument("--T", type=float)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--out", help="output path (stdout if omitted)")
    sp.add_argument("--format", choices=("json", "csv"), default=None)


# ----------------------------------------------------------------------------
# solve


def solve_report(p: ModelParams, tol: float, z1: float | None, alpha1: float | None, n: int) -> dict:
    report: dict = {"params": p.to_dict()}
    k, theta, eta = p.k, p.theta, p.eta
    if p.hard_constraint and k == 1:
        z_1 = 1.0 if z1 is None else z1
        law = bl.j_infinite_1d_family(theta, z_1, n)
        report["family"] = {"name": "geometric", "z_1": z_1, "law": law.to_dict()}
        report["free_energy_finite_volume"] = thermo.finite_volume_free_energy(p, law, n)
        return report
    if p.hard_constraint and alpha1 is not None:
        law = bl.j_infinite_level_family(p, alpha1, n + 1)
        fe = thermo.free_energy_level(p, law, n)
        report["family"] = {"name": "level", "alpha_1": alpha1, "law": law.to_dict()}
        report["free_energy"] = {"partial": fe.partial, "limit": fe.limit}

    sols = bl.solve_constant(p, tol=tol)
    report["solutions"] = sols.to_dict()
    report["residuals"] = sols.residuals()
    report["b_values"] = [thermo.b_of(z, theta, eta) for z in sols.roots]
    if k >= 2:
        eta_c = {"general_formula": bl.eta_critical(k, theta), "numeric_double_root": bl.eta_critical_numeric(k, theta)}
        if k == 2:
            eta_c["k2_formula"] = 1.0 / (4.0 * theta)
        report["eta_c"] = eta_c
        if k == 2 and sols.roots:
            report["f_k2_closed_form"] = [thermo.free_energy_k2(theta, z) for z in sols.roots]
    tc = thermo.critical_temperature(k, p.q, p.epsilon, p.J)
    report["critical_temperature"] = tc.to_dict()
    return report


def cmd_solve(args: argparse.Namespace) -> int:
    if (
        args.k == 1 and args.J is not None and math.isinf(args.J) and args.z1 is not None
        and args.theta is None and args.beta is None and args.T is None and not args.config
    ):
        # no temperature given: the family is still known up to theta
        report = {
            "family": {"name": "geometric", "z_1": args.z1, "z_m": f"theta**(-(m-1)) * {args.z1!r}"},
            "note": "pass --theta, or --q/--epsilon with --T/--beta, for numeric values",
        }
        write_atomic(args.out, _dumps(report))
        return 0
    p = params_from_args(args)
    report = solve_report(p, args.tol, args.z1, args.alpha1, args.n or 5)
    write_atomic(args.out, _dumps(report))
    return 0


# ----------------------------------------------------------------------------
# scan


def scan_rows(points: Sequence[thermo.PhasePoint]) -> list[dict]:
    return [pt.row() for pt in points]


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str], meta: dict) -> str:
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {_fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_csv_rows(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`rows_to_csv`: metadata comments and float/int rows."""
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    rows = []
    for raw in reader:
        row = {}
        for key, value in raw.items():
            number = float(value)
            row[key] = None if math.isnan(number) else number
        rows.append(row)
    return meta, rows


def fig3_rows() -> tuple[list[dict], list[str], dict]:
    k, theta = FIG3["k"], FIG3["theta"]
    etas = FIG3["etas"]
    step = FIG3["z_max"] / (FIG3["points"] - 1)
    zs = [i * step for i in range(FIG3["points"])]
    columns = ["z"] + [f"f_eta_{eta:g}" for eta in etas]
    rows = []
    for z in zs:
        row = {"z": z}
        for eta, col in zip(etas, columns[1:]):
            row[col] = bl.constant_equation(z, k, theta, eta)
        rows.append(row)
    meta = {"figure": "fig3", "k": k, "theta": theta, "eta_c": bl.eta_critical(k, theta)}
    return rows, columns, meta


def cmd_scan(args: argparse.Namespace) -> int:
    fmt = args.format or "csv"
    if args.figure == "fig3":
        rows, columns, meta = fig3_rows()
    else:
        if args.figure == "fig4":
            k, q, epsilon, J = FIG4["k"], FIG4["q"], FIG4["epsilon"], FIG4["J"]
            t_min, t_max, points = FIG4["t_min"], FIG4["t_max"], FIG4["points"]
        else:
            base = params_from_args(_with_dummy_temperature(args), need_physical=True)
            k, q, epsilon, J = base.k, base.q, base.epsilon, base.J
            if args.t_min is None or args.t_max is None:
                raise UsageError("scan needs --t-min and --t-max (or --figure)")
            t_min, t_max, points = args.t_min, args.t_max, args.points
        temps = thermo.temperature_grid(t_min, t_max, points)
        pts = thermo.phase_scan(k, q, epsilon, J, temps)
        rows = scan_rows(pts)
        columns = list(thermo.CSV_COLUMNS)
        tc = thermo.critical_temperature(k, q, epsilon, J)
        curve = thermo.FreeEnergyCurve.from_scan(pts)
        meta = {
            "figure": args.figure or "custom",
            "k": k, "q": q, "epsilon": epsilon, "J": J,
            "t_cr": tc.value,
            "in_A": tc.in_A,
            "branch_order": curve.branch_order(),
            "z_minus/z_plus": "smaller/larger constant root; a double root fills both",
        }
    if fmt == "csv":
        text = rows_to_csv(rows, columns, meta)
    else:
        text = _dumps({"meta": meta, "columns": columns, "rows": rows})
    write_atomic(args.out, text)
    return 0


def _with_dummy_temperature(args: argparse.Namespace) -> argparse.Namespace:
    ns = argparse.Namespace(**vars(args))
    if ns.beta is None and ns.T is None:
        ns.T = 1.0
    return ns


# ----------------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace) -> int:
    if args.battery:
        with open(args.battery) as fh:
            entries = json.load(fh)
        if not isinstance(entries, list):
            raise UsageError("battery file must hold a JSON list of cases")
        cases = [c for entry in entries for c in oracle.case_from_dict(entry)]
    else:
        cases = oracle.default_battery()
    if args.perturb:
        cases = [oracle.perturb_case(c, args.perturb) for c in cases]
    reports = oracle.verify_all(cases, workers=thermo.worker_count(), samples=args.samples, seed=args.seed)
    ok = all(r.passed for r in reports)
    lines = [f"{'case':<52} {'residual':>10} {'compat':>10} {'recursion':>10}  status"]
    for r in reports:
        lines.append(
            f"{r.case_id:<52} {r.max_residual:>10.2e} {r.compatibility_error:>10.2e} "
            f"{r.Z_recursion_error:>10.2e}  {'PASS' if r.passed else 'FAIL ' + '; '.join(r.failures)}"
        )
    lines.append(f"{sum(r.passed for r in reports)}/{len(reports)} cases passed")
    print("\n".join(lines), file=sys.stderr)
    write_atomic(args.out, _dumps({"passed": ok, "cases": [r.to_dict() for r in reports]}))
    return 0 if ok else 1


# ----------------------------------------------------------------------------
# sample


def _sample_law(p: ModelParams, args: argparse.Namespace, n: int) -> bl.BoundaryLaw | None:
    if args.z is not None:
        return bl.ConstantLaw(args.z)
    if args.z1 is not None:
        return bl.j_infinite_1d_family(p.theta, args.z1, n)
    if args.alpha1 is not None:
        return bl.j_infinite_level_family(p, args.alpha1, n + 1)
    if args.root is not None:
        sols = bl.solve_constant(p)
        if not sols.roots:
            raise UsageError("no constant root exists at these parameters")
        return bl.ConstantLaw(sols.roots[0] if args.root == "minus" else sols.roots[-1])
    return None


def cmd_sample(args: argparse.Namespace) -> int:
    p = params_from_args(args)
    n = args.n or 3
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    law = _sample_law(p, args, n)
    draws = gibbs.sample_array(p, law, n, args.count, args.seed)
    h = gibbs.zero_fields(p.k, n) if law is None else gibbs.fields_from_law(law, p.k, n)
    first = tree.VertexId((0,))
    verts = [v.label() for v in tree.vertices(p.k, n)]
    records = [dict(zip(verts, map(int, row))) for row in draws[: args.records]]
    report = {
        "params": p.to_dict(),
        "n": n,
        "seed": args.seed,
        "count": args.count,
        "law": None if law is None else law.to_dict(),
        "open_fraction_by_level": gibbs.open_fraction_by_level(draws, p.k, n),
        "level1_open_exact": 1.0 - gibbs.closed_marginal(p, h, first),
        "records": records,
    }
    write_atomic(args.out, _dumps(report))
    return 0


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zipper", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="constant boundary laws at one parameter point")
    _add_param_flags(sp)
    sp.add_argument("--tol", type=float, default=bl.DEFAULT_TOL)
    sp.add_argument("--z1", type=float, help="k=1, J=inf: first value of the geometric family")
    sp.add_argument("--alpha1", type=float, help="k>=2, J=inf: level-family parameter")
    sp.add_argument("--n", type=int, help="depth to materialize families (default 5)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("scan", help="phase table over temperature")
    _add_param_flags(sp)
    sp.add_argument("--figure", choices=("fig3", "fig4"))
    sp.add_argument("--t-min", type=float, dest="t_min")
    sp.add_argument("--t-max", type=float, dest="t_max")
    sp.add_argument("--points", type=int, default=201)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("verify", help="run the oracle battery")
    sp.add_argument("--battery", help="JSON list of cases (default: built-in battery)")
    sp.add_argument("--perturb", type=float, default=0.0, help="add this to every law value (negative control)")
    sp.add_argument("--samples", type=int, default=20_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sample", help="exact samples from mu_n")
    _add_param_flags(sp)
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--records", type=int, default=10, help="how many raw configurations to print")
    sp.add_argument("--root", choices=("minus", "plus"), help="use a constant root as boundary law")
    sp.add_argument("--z", type=float, help="constant boundary law value")
    sp.add_argument("--z1", type=float)
    sp.add_argument("--alpha1", type=float)
    sp.set_defaults(func=cmd_sample)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"zipper {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"zipper {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
