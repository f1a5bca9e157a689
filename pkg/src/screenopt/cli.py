"""Command-line front end.

Exit codes: 0 success, 2 validation error (bad flags, malformed input files,
out-of-range parameters), 3 numerical failure (non-convergence, singular
systems, degenerate geometry).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import svg as svgmod
from .closed_form import make_blunt_profile, profile_table
from .direct_solver import SolverConfig, solve
from .errors import NumericalError, ValidationError
from .euler_lagrange import BunchInput, read_r_samples_csv, solve_fan, write_fan_csv
from .free_boundary_bvp import PolygonalDomain, refute_rc, solve_bvp
from .grid_field import read_field_csv, write_field_csv
from .params import ModelParams
from .pipeline import run_pipeline
from .pricing import (
    double_conjugate_gap,
    price_menu,
    product_intensity,
    write_intensity_csv,
    write_menu_csv,
)
from .regions import (
    classify,
    extract_interface,
    read_interface_csv,
    write_interface_csv,
    write_labels_csv,
)


def _out_dir(path_str: str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_closed_form(args) -> int:
    params = ModelParams(a=args.a)
    profile = make_blunt_profile(params)
    print(f"t05 = {profile.t05:.12f}")
    print(f"C0 = {profile.C0:.12f}")
    print(f"t15_rc = {profile.t15_rc:.12f}")
    table = profile_table(profile, num=args.num)
    lines = ["t,U,U_prime,U_second"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in table]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_solve_direct(args) -> int:
    params = ModelParams(a=args.a, n=args.n, tol=min(1e-8, args.kkt_tol))
    cfg = SolverConfig(
        max_iters=args.max_iters, kkt_tol=args.kkt_tol, stencil_width=args.stencil
    )
    field, report = solve(params, cfg)
    out = _out_dir(args.out)
    write_field_csv(field, out / "u.csv")
    with open(out / "report.json", "w") as fh:
        json.dump(
            {
                "phi": report.phi,
                "iterations": report.iterations,
                "primal_residual": report.primal_residual,
                "stationarity_residual": report.stationarity_residual,
            },
            fh,
            indent=2,
        )
    print(
        f"phi = {report.phi:.9f} after {report.iterations} iterations "
        f"(stationarity {report.stationarity_residual:.3e})"
    )
    return 0


def _cmd_classify(args) -> int:
    field = read_field_csv(args.infile)
    region_map = classify(field, rank_tol=args.rank_tol, zero_tol=args.zero_tol)
    curve = extract_interface(region_map)
    out = _out_dir(args.out)
    write_labels_csv(region_map, out / "labels.csv")
    write_interface_csv(curve, out / "interface.csv")
    if args.svg:
        svg_path = Path(args.svg)
        if not svg_path.is_absolute() and svg_path.parent == Path("."):
            svg_path = out / svg_path
        svgmod.render_region_map(region_map, curve, svg_path)
    print(f"interface spread = {curve.spread():.6f} over {curve.s.size} slices")
    return 0


def _cmd_el_solve(args) -> int:
    theta, r = read_r_samples_csv(args.r_samples)
    params = ModelParams(a=args.a)
    fan_input = BunchInput(a=args.a, t10=args.t10, theta=theta, r=r)
    fan = solve_fan(params, fan_input, step=args.step)
    write_fan_csv(fan, args.out)
    if fan.empty:
        print("degenerate fan (empty)")
    else:
        print(
            f"fan integrated over [{fan.theta[0]:.6f}, {fan.theta[-1]:.6f}] "
            f"({fan.theta.size} nodes)"
        )
    return 0


def _cmd_bvp_solve(args) -> int:
    params = ModelParams(a=args.a, n=args.n)
    curve = read_interface_csv(args.domain, a=args.a)
    domain = PolygonalDomain.from_graph(params, curve.s, curve.t)
    raw = np.genfromtxt(args.dirichlet, delimiter=",", names=True)
    if raw.dtype.names is None or set(raw.dtype.names) != {"s", "value"}:
        raise ValidationError("dirichlet file must have header s,value")
    s_data = np.atleast_1d(raw["s"]).astype(float)
    v_data = np.atleast_1d(raw["value"]).astype(float)
    if s_data.size < 2 or np.any(np.diff(s_data) <= 0):
        raise ValidationError("dirichlet samples must be strictly increasing in s")

    def dirichlet(x1, x2):
        return np.interp(np.asarray(x1) - np.asarray(x2), s_data, v_data)

    sol = solve_bvp(domain, dirichlet)
    write_field_csv(sol.u2, args.out)
    print(
        f"bvp solved on {int(domain.mask.sum())} nodes; "
        f"dirichlet residual {sol.dirichlet_residual:.3e}, "
        f"neumann residual {sol.neumann_residual:.3e}"
    )
    return 0


def _cmd_refute_rc(args) -> int:
    params = ModelParams(a=args.a, n=args.n)
    report = refute_rc(params)
    payload = report.to_json_dict()
    out_path = Path(args.out)
    if out_path.parent != Path("."):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"verdict: {report.verdict} (min_uxx = {report.min_uxx:.6f})")
    return 0


def _cmd_calibrate(args) -> int:
    from .free_boundary_bvp import CalibrationConfig, calibrate
    from .regions import InterfaceCurve

    params = ModelParams(a=args.a, n=args.n)
    result = calibrate(params, CalibrationConfig(k=args.k, max_evals=args.max_evals))
    out = _out_dir(args.out)
    write_fan_csv(result.fan, out / "fan.csv")
    write_field_csv(result.field, out / "u_calibrated.csv")
    write_interface_csv(
        InterfaceCurve(s=result.domain.s, t=result.domain.t, a=params.a),
        out / "interface_calibrated.csv",
    )
    with open(out / "calibration.json", "w") as fh:
        json.dump(
            {
                "t10": result.t10,
                "theta_knots": result.theta_knots.tolist(),
                "r_knots": result.r_knots.tolist(),
                "extra_l2": result.extra_l2,
                "extra_sup": result.extra_sup,
                "ansatz_extra_l2": result.ansatz_extra_l2,
                "ansatz_extra_sup": result.ansatz_extra_sup,
                "n_evals": result.n_evals,
                "success": result.success,
                "message": result.message,
            },
            fh,
            indent=2,
        )
    print(
        f"t10 = {result.t10:.6f}; extra-condition L2 {result.extra_l2:.3e} "
        f"vs ansatz {result.ansatz_extra_l2:.3e} ({result.message})"
    )
    return 0


def _cmd_price_menu(args) -> int:
    field = read_field_csv(args.infile)
    menu = price_menu(field, y_max=args.y_max, m_bins=args.m_bins)
    hist = product_intensity(field, bins=args.bins)
    out = _out_dir(args.out)
    write_menu_csv(menu, out / "menu.csv")
    write_intensity_csv(hist, out / "intensity.csv")
    with open(out / "pricing.json", "w") as fh:
        json.dump(
            {
                "v_origin": float(menu.values[0, 0]),
                "double_conjugate_gap": double_conjugate_gap(field, menu),
                "intensity_mass": hist.total_mass,
                "menu_min_second_difference": menu.min_second_difference(),
            },
            fh,
            indent=2,
        )
    print(
        f"menu on [0,{menu.y_max:g}]^2, intensity mass {hist.total_mass:.9f}, "
        f"double-conjugate gap {double_conjugate_gap(field, menu):.3e}"
    )
    return 0


def _cmd_pipeline(args) -> int:
    summary = run_pipeline(args.config, args.out)
    for stage, info in summary["stages"].items():
        print(f"{stage}: {info['status']} ({info['seconds']}s)")
    return 0 if summary["ok"] else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screenopt",
        description="Numerical toolkit for a bilinear screening model on the unit square of types.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("closed-form", help="blunt-bunching closed-form profile")
    p.add_argument("--a", type=float, required=True, help="type-square offset")
    p.add_argument("--num", type=int, default=201, help="table rows")
    p.add_argument("--out", help="write the CSV table here instead of stdout")
    p.set_defaults(fn=_cmd_closed_form)

    p = sub.add_parser("solve-direct", help="projected-ascent maximization of the profit functional")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--kkt-tol", type=float, default=1e-8)
    p.add_argument("--stencil", type=int, choices=(1, 2), default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_solve_direct)

    p = sub.add_parser("classify", help="label market regions of a solved field")
    p.add_argument("--in", dest="infile", required=True, help="u.csv from solve-direct")
    p.add_argument("--rank-tol", type=float, default=0.1)
    p.add_argument("--zero-tol", type=float, default=1e-4)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", help="also render a region map SVG")
    p.set_defaults(fn=_cmd_classify)

    p = sub.add_parser("el-solve", help="integrate the bunching-fan characteristic system")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--t10", type=float, required=True, help="diagonal foot of the fan")
    p.add_argument("--r-samples", required=True, help="CSV theta,R of segment lengths")
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--out", required=True, help="fan.csv path")
    p.set_defaults(fn=_cmd_el_solve)

    p = sub.add_parser("bvp-solve", help="mixed-boundary Poisson solve on a polygonal subdomain")
    p.add_argument("--domain", required=True, help="interface.csv (s,t graph)")
    p.add_argument("--dirichlet", required=True, help="CSV s,value on the interface")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--out", required=True, help="u2.csv path")
    p.set_defaults(fn=_cmd_bvp_solve)

    p = sub.add_parser("refute-rc", help="test the constant-interface ansatz for consistency")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--out", required=True, help="report.json path")
    p.set_defaults(fn=_cmd_refute_rc)

    p = sub.add_parser("calibrate", help="fit the interface radius profile to the extra condition")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--k", type=int, default=12, help="free R knots")
    p.add_argument("--max-evals", type=int, default=400)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("price-menu", help="convex-conjugate price menu and product intensity")
    p.add_argument("--in", dest="infile", required=True, help="u.csv from solve-direct")
    p.add_argument("--y-max", type=float, default=None)
    p.add_argument("--m-bins", type=int, default=None, help="menu grid points per axis")
    p.add_argument("--bins", type=int, default=64, help="intensity bins per axis")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_price_menu)

    p = sub.add_parser("pipeline", help="run staged end-to-end pipeline from a JSON config")
    p.add_argument("--config", required=True, help="JSON config path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
