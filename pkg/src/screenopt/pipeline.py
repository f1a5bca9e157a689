"""End-to-end pipeline: closed form, direct solve, regions, calibration,
refutation, and pricing, with every artifact written to one directory.

The configuration is flat JSON.  Recognized keys:

    a            model offset (required, > 0)
    n            grid points per axis (default 64)
    stages       list drawn from STAGES (default: all, canonical order)
    max_iters    direct-solver iteration cap (default 2000)
    kkt_tol      solver stationarity/feasibility tolerance (default 1e-8)
    stencil      convexity stencil width, 1 or 2 (default 1)
    rank_tol     Hessian rank threshold for classification (default 0.1)
    zero_tol     exclusion threshold for classification (default 1e-4)
    k            calibration R-knot count (default 12)
    max_evals    calibration objective-evaluation cap (default 400)
    bins         product-intensity bins per axis (default 64)
    svg          also render SVG panels (default true)

Stages that need an earlier stage's field fall back to reading u.csv from
the output directory, so a pipeline can resume from prior artifacts.  Runs
are deterministic: fixed seeds, fixed-order reductions, no wall-clock state
in any artifact (timings live only in the summary).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import svg as svgmod
from .closed_form import make_blunt_profile, profile_table
from .direct_solver import SolverConfig, solve
from .errors import ScreenOptError, ValidationError
from .euler_lagrange import write_fan_csv
from .free_boundary_bvp import CalibrationConfig, calibrate, refute_rc
from .grid_field import read_field_csv, write_field_csv
from .params import ModelParams
from .pricing import (
    double_conjugate_gap,
    price_menu,
    product_intensity,
    write_intensity_csv,
    write_menu_csv,
)
from .regions import (
    LABEL_NAMES,
    RegionLabel,
    classify,
    extract_interface,
    write_interface_csv,
    write_labels_csv,
)

STAGES = ("closed-form", "solve-direct", "classify", "calibrate", "refute-rc", "price-menu")

_DEFAULTS = {
    "n": 64,
    "max_iters": 2000,
    "kkt_tol": 1e-8,
    "stencil": 1,
    "rank_tol": 0.1,
    "zero_tol": 1e-4,
    "k": 12,
    "max_evals": 400,
    "bins": 64,
    "svg": True,
}


def _load_config(config) -> dict:
    if isinstance(config, (str, Path)):
        with open(config) as fh:
            config = json.load(fh)
    if not isinstance(config, dict):
        raise ValidationError("pipeline config must be a JSON object")
    if "a" not in config:
        raise ValidationError("pipeline config requires key 'a'")
    cfg = dict(_DEFAULTS)
    cfg.update(config)
    stages = cfg.get("stages", list(STAGES))
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ValidationError(f"unknown stages: {sorted(unknown)}")
    cfg["stages"] = [s for s in STAGES if s in stages]
    return cfg


def run_pipeline(config, out_dir) -> dict:
    """Execute the requested stages; returns (and writes) the summary dict."""
    cfg = _load_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = ModelParams(a=float(cfg["a"]), n=int(cfg["n"]), tol=1e-8)

    state: dict = {}
    summary: dict = {"config": {k: v for k, v in cfg.items()}, "stages": {}}

    for stage in cfg["stages"]:
        t_start = time.perf_counter()
        try:
            info = _STAGE_FNS[stage](params, cfg, state, out)
            status = "ok"
        except ScreenOptError as err:
            info = {"error": f"{type(err).__name__}: {err}"}
            status = "error"
        summary["stages"][stage] = {
            "status": status,
            "seconds": round(time.perf_counter() - t_start, 3),
            **info,
        }

    summary["ok"] = all(v["status"] == "ok" for v in summary["stages"].values())
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _need_field(params, state, out):
    if "field" in state:
        return state["field"]
    u_path = out / "u.csv"
    if u_path.exists():
        field = read_field_csv(u_path)
        if field.params.n != params.n or abs(field.params.a - params.a) > 1e-9:
            raise ValidationError("u.csv on disk does not match the configured grid")
        state["field"] = field
        return field
    raise ValidationError("no solved field available; run the solve-direct stage first")


def _stage_closed_form(params, cfg, state, out):
    profile = make_blunt_profile(params)
    table = profile_table(profile)
    with open(out / "closed_form.csv", "w", encoding="ascii", newline="\n") as fh:
        fh.write("t,U,U_prime,U_second\n")
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    consts = {
        "a": params.a,
        "t05": profile.t05,
        "C0": profile.C0,
        "t15_rc": profile.t15_rc,
    }
    with open(out / "closed_form.json", "w") as fh:
        json.dump(consts, fh, indent=2)
    state["profile"] = profile
    return consts


def _stage_solve_direct(params, cfg, state, out):
    solver_cfg = SolverConfig(
        max_iters=int(cfg["max_iters"]),
        kkt_tol=float(cfg["kkt_tol"]),
        stencil_width=int(cfg["stencil"]),
    )
    field, report = solve(params, solver_cfg)
    state["field"] = field
    write_field_csv(field, out / "u.csv")
    payload = {
        "phi": report.phi,
        "iterations": report.iterations,
        "primal_residual": report.primal_residual,
        "stationarity_residual": report.stationarity_residual,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    return payload


def _stage_classify(params, cfg, state, out):
    field = _need_field(params, state, out)
    region_map = classify(
        field, rank_tol=float(cfg["rank_tol"]), zero_tol=float(cfg["zero_tol"])
    )
    curve = extract_interface(region_map)
    state["region_map"] = region_map
    state["curve"] = curve
    write_labels_csv(region_map, out / "labels.csv")
    write_interface_csv(curve, out / "interface.csv")
    if cfg["svg"]:
        svgmod.render_region_map(region_map, curve, out / "regions.svg")
    fractions = {
        LABEL_NAMES[lab]: region_map.fraction(lab) for lab in RegionLabel
    }
    return {
        "fractions": fractions,
        "interface_spread": curve.spread(),
    }


def _stage_calibrate(params, cfg, state, out):
    if "curve" not in state and "field" in state:
        state["curve"] = extract_interface(classify(state["field"]))
    cal_cfg = CalibrationConfig(
        k=int(cfg["k"]),
        max_evals=int(cfg["max_evals"]),
        seed=state.get("curve"),
    )
    result = calibrate(params, cal_cfg)
    state["calibration"] = result
    write_fan_csv(result.fan, out / "fan.csv")
    write_field_csv(result.field, out / "u_calibrated.csv")
    write_interface_csv(
        _curve_from_domain(result), out / "interface_calibrated.csv"
    )
    payload = {
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
    }
    with open(out / "calibration.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    return payload


def _curve_from_domain(result):
    from .regions import InterfaceCurve

    return InterfaceCurve(s=result.domain.s, t=result.domain.t, a=result.domain.params.a)


def _stage_refute_rc(params, cfg, state, out):
    report = refute_rc(params)
    payload = report.to_json_dict()
    with open(out / "refutation.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    return {"verdict": report.verdict, "min_uxx": report.min_uxx}


def _stage_price_menu(params, cfg, state, out):
    field = _need_field(params, state, out)
    menu = price_menu(field)
    hist = product_intensity(field, bins=int(cfg["bins"]))
    gap = double_conjugate_gap(field, menu)
    write_menu_csv(menu, out / "menu.csv")
    write_intensity_csv(hist, out / "intensity.csv")
    if cfg["svg"]:
        svgmod.render_intensity(hist, out / "intensity.svg")
    payload = {
        "v_origin": float(menu.values[0, 0]),
        "double_conjugate_gap": gap,
        "intensity_mass": hist.total_mass,
        "menu_min_second_difference": menu.min_second_difference(),
    }
    with open(out / "pricing.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    return payload


_STAGE_FNS = {
    "closed-form": _stage_closed_form,
    "solve-direct": _stage_solve_direct,
    "classify": _stage_classify,
    "calibrate": _stage_calibrate,
    "refute-rc": _stage_refute_rc,
    "price-menu": _stage_price_menu,
}
