"""Command-line front end.

    conefrac <task> --config path [--out dir] [--threads k] [--mesh-level L]

Every run writes its artifacts (CSV / JSON / SVG, plus the binary field for
the extension task) into the output directory together with a manifest that
records the config hash, resolved parameters, mesh sizes, tolerances and
library versions.  Outputs are deterministic: no timestamps, stable float
formatting, fixed iteration orders (determinism is guaranteed in
single-threaded mode).

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .almgren import (beta_coefficients, default_radii, fourier_coeffs,
                      frequency_trace, pohozaev_check)
from .cones import (ApproxDomain, SmoothedCone, smoothing_defect,
                    smoothing_profile, starshape_margin)
from .config import RunConfig, parse_config
from .errors import ConfigurationError, ConefracError, ExpressionError
from .extension import (build_halfball_grid, manufactured_field, save_field,
                        solve_extension)
from .hardy import hardy_constant_richardson, hardy_scan
from .params import ProblemParams
from .spectral import solve_eigs
from .sphercap import assemble, build_mesh
from .svgplot import LineSeries, plot_svg

CG_TOL = 1e-10
EIG_GROUP_RTOL = 1e-6


def _f(x: float) -> str:
    """Stable float formatting for reproducible CSV bytes."""
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_f(v) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _manifest(out: Path, cfg: RunConfig, outputs, notes=None) -> None:
    import scipy
    payload = {
        "config_sha256": hashlib.sha256(
            cfg.raw_text.encode("utf-8")).hexdigest(),
        "task": cfg.task,
        "params": {"N": cfg.n_dim, "s": cfg.s, "lambda": cfg.lam,
                   "p": cfg.params().p},
        "cone": {"g_plus": cfg.cone_spec.g_plus,
                 "g_minus": cfg.cone_spec.g_minus,
                 "full": cfg.cone_spec.full},
        "mesh": {"nt": cfg.nt, "ntheta": cfg.ntheta,
                 "grading": cfg.grading, "nr": cfg.nr, "rmin": cfg.rmin},
        "tolerances": {"cg_tol": CG_TOL,
                       "eig_group_rtol": EIG_GROUP_RTOL},
        "versions": {"conefrac": __version__,
                     "numpy": np.__version__,
                     "scipy": scipy.__version__,
                     "python": ".".join(map(str, sys.version_info[:3]))},
        "outputs": sorted(outputs),
        "notes": notes or {},
    }
    (out / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def _scaled(cfg: RunConfig, level: int) -> RunConfig:
    if level == 0:
        return cfg
    factor = 2 ** level
    cfg.nt = max(4, cfg.nt * factor)
    cfg.ntheta = max(4, cfg.ntheta * factor)
    cfg.nr = max(4, cfg.nr * factor)
    return cfg


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def _task_eig(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    params = cfg.params()
    mesh = build_mesh(cfg.nt, cfg.ntheta, cfg.s, cfg.cap(), cfg.grading)
    forms = assemble(mesh, params)
    es = solve_eigs(forms, params, k=cfg.task_opts["k"])
    rows = [(j + 1, float(es.mu[j]), float(es.gamma[j]), int(es.group[j]))
            for j in range(es.k)]
    _write_csv(out / "eig.csv", ["j", "mu", "gamma", "multiplicity_group"],
               rows)
    plot_svg(out / "eig_ladder.svg",
             [LineSeries(range(1, es.k + 1), es.mu, "mu_j")],
             xlabel="j", ylabel="mu", title="eigenvalue ladder")
    return ["eig.csv", "eig_ladder.svg"]


def _task_hardy(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    params = cfg.params()
    res = hardy_constant_richardson(params, cfg.cap(), cfg.nt, cfg.ntheta,
                                    cfg.grading)
    _write_csv(out / "hardy.csv",
               ["arc_length", "lambda_star", "mesh_level",
                "richardson_estimate"],
               [(float(cfg.cap().length), res.lambda_star,
                 f"{res.mesh_level[0]}x{res.mesh_level[1]}",
                 res.richardson)])
    return ["hardy.csv"]


def _task_scan(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    params = cfg.params()
    arcs = cfg.task_opts["arcs"]
    results = hardy_scan(arcs, params, cfg.nt, cfg.ntheta, cfg.grading,
                         threads=threads)
    rows = [(float(a), r.lambda_star,
             f"{r.mesh_level[0]}x{r.mesh_level[1]}", r.richardson)
            for a, r in zip(arcs, results)]
    _write_csv(out / "scan.csv",
               ["arc_length", "lambda_star", "mesh_level",
                "richardson_estimate"], rows)
    plot_svg(out / "scan_lambda.svg",
             [LineSeries(arcs, [r.lambda_star for r in results],
                         "Lambda")],
             xlabel="arc length", ylabel="Lambda",
             title="Hardy constant vs cap size")
    return ["scan.csv", "scan_lambda.svg"]


def _frequency_outputs(cfg: RunConfig, out: Path, fld, es, params, h,
                       notes) -> list[str]:
    cap = cfg.cap()
    r0 = cfg.task_opts["r0"]
    fld_rmin = getattr(getattr(fld, "grid", None), "r_min", None)
    lo = 1e-2 if fld_rmin is None else max(1e-2, 10.0 * fld_rmin)
    radii = default_radii(R0=r0, n=cfg.task_opts["nradii"], r_min=lo)
    trace = frequency_trace(fld, params, h, cap, radii, R0=r0)
    _write_csv(out / "frequency.csv", ["r", "H", "D", "Ncal"],
               list(zip(map(float, radii), map(float, trace.H),
                        map(float, trace.D), map(float, trace.Ncal))))
    plot_svg(out / "frequency_ncal.svg",
             [LineSeries(radii, trace.Ncal, "N(r)")],
             xlabel="r", ylabel="N", logx=True,
             title="Almgren frequency")

    ft = fourier_coeffs(fld, es, radii, params, h, cap)
    rows = []
    for i, tau in enumerate(radii):
        for pos, j in enumerate(ft.modes):
            rows.append((float(tau), int(j) + 1, float(ft.phi[pos, i]),
                         float(ft.ups[pos, i])))
    _write_csv(out / "fourier.csv", ["tau", "j", "phi_j", "Upsilon_j"], rows)

    # dominant group and amplitudes at the configured reference radii
    proj = np.array([ft.phi_at(pos, radii[0]) for pos in range(es.k)])
    j0 = int(np.argmax(np.abs(proj)))
    gamma = float(es.gamma[j0])
    rlist = cfg.task_opts["rlist"]
    beta_by_R = {R: beta_coefficients(ft, gamma, R, params)
                 for R in rlist}
    members = es.group_members(j0)
    beta_ref = beta_by_R[rlist[len(rlist) // 2]]
    spreads = []
    for m in members:
        vals = [beta_by_R[R][m] for R in rlist]
        ref = max(abs(v) for v in vals)
        if ref > 0:
            spreads.append((max(vals) - min(vals)) / ref)
    summary = {
        "gamma_hat": trace.gamma_hat,
        "gamma_eigen": gamma,
        "j0": j0 + 1,
        "multiplicity_group": [int(m) + 1 for m in members],
        "beta": {str(int(m) + 1): float(beta_ref[m]) for m in members},
        "betah_R_spread": max(spreads) if spreads else 0.0,
        "fit": {"exponent": trace.fit_exponent,
                "coefficient": trace.fit_coefficient,
                "fallback": trace.fit_fallback},
        "pohozaev": [],
    }
    for r in np.linspace(0.3, 0.7, 5):
        rep = pohozaev_check(fld, params, h, cap, float(r))
        summary["pohozaev"].append({
            "r": float(r), "lhs": rep.lhs, "rhs": rep.rhs,
            "satisfied": bool(rep.satisfied),
            "green_residual": rep.green_residual})
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return ["frequency.csv", "frequency_ncal.svg", "fourier.csv",
            "summary.json"]


def _task_frequency(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    params = cfg.params()
    mesh = build_mesh(cfg.nt, cfg.ntheta, cfg.s, cfg.cap(), cfg.grading)
    forms = assemble(mesh, params)
    k_need = max(cfg.task_opts.get("k") or 10,
                 max(j for j, _ in cfg.task_opts["modes"]) + 1)
    es = solve_eigs(forms, params, k=k_need)
    fld = manufactured_field(es, cfg.task_opts["modes"])
    return _frequency_outputs(cfg, out, fld, es, params, None, {})


def _task_solve_ext(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    params = cfg.params()
    cap = cfg.cap()
    mesh = build_mesh(cfg.nt, cfg.ntheta, cfg.s, cap, cfg.grading)
    forms = assemble(mesh, params)
    es = solve_eigs(forms, params, k=cfg.task_opts.get("k") or 10)
    grid = build_halfball_grid(cfg.nr, cfg.rmin, mesh)

    h = cfg.task_opts.get("h")
    if "lid" in cfg.task_opts:
        lid_expr = cfg.task_opts["lid"]
        tgrid = np.repeat(mesh.t_nodes, mesh.ntheta)
        thgrid = np.tile(mesh.theta_nodes, mesh.nt)
        lid = np.asarray(lid_expr.eval({"t": tgrid, "theta": thgrid})
                         * np.ones_like(tgrid))
        lid_note = f"expression: {lid_expr.to_string()}"
    else:
        mode = cfg.task_opts["lid_mode"]
        if mode >= es.k:
            raise ConfigurationError(
                [f"[task] lid_mode = {mode + 1} exceeds computed modes"])
        lid = es.vectors[mode]
        lid_note = f"eigenmode {mode + 1} trace"

    fld = solve_extension(grid, params, cap, h, lid, es=es, cg_tol=CG_TOL)
    save_field(out / "field.bin", fld)
    outputs = _frequency_outputs(cfg, out, fld, es, params, h,
                                 {"lid": lid_note})
    return ["field.bin"] + outputs, {"lid_choice": lid_note,
                                     "inner_mode": fld.meta["inner_mode"]}


def _task_smooth_cone(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    n = cfg.task_opts["n"]
    samples = cfg.task_opts["samples"]
    sc = SmoothedCone(cfg.cone_spec, n)
    rng = np.random.default_rng(20240801)

    x1 = rng.uniform(-1.0, 1.0, samples)
    margins = np.array([
        starshape_margin(sc, (x, float(sc.psi(x)))) for x in x1])
    bound = 3.0 / (4.0 * n)

    ts = rng.uniform(0.0, 4.0 / n ** 2, samples)
    fvals = smoothing_profile(n, ts)
    defects = smoothing_defect(n, ts)
    report = {
        "n": n,
        "n0": max(math.ceil(6.0 * cfg.cone_spec.M), 1),
        "margin_bound": bound,
        "min_starshape_margin": float(margins.min()),
        "margin_ok": bool(margins.min() >= bound - 1e-12),
        "fn_identity_low": float(np.abs(
            smoothing_profile(n, np.linspace(0.0, 1.0 / n ** 2, 64))).max()),
        "fn_identity_high": float(np.abs(
            smoothing_profile(n, np.linspace(2.0 / n ** 2, 1.0, 64))
            - (np.linspace(2.0 / n ** 2, 1.0, 64) - 1.5 / n ** 2)).max()),
        "fn_defect_range_ok": bool(
            np.all(defects <= 0.0) and np.all(defects >= -1.5 / n ** 2)),
        "fn_distance_ok": bool(
            np.all(np.abs(fvals - ts) <= 1.5 / n ** 2 + 1e-15)),
        "samples": samples,
    }
    (out / "smooth_cone.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    _write_csv(out / "smooth_cone.csv", ["x1", "margin"],
               [(float(a), float(b)) for a, b in zip(x1, margins)])
    return ["smooth_cone.json", "smooth_cone.csv"]


_TASK_RUNNERS = {
    "eig": _task_eig,
    "hardy": _task_hardy,
    "scan": _task_scan,
    "frequency": _task_frequency,
    "solve-ext": _task_solve_ext,
    "smooth-cone": _task_smooth_cone,
}


def run_task(cfg: RunConfig, out_dir, threads: int = 1) -> Path:
    """Run one task and write its artifact bundle; returns the out dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = _TASK_RUNNERS[cfg.task](cfg, out, threads)
    if isinstance(result, tuple):
        outputs, notes = result
    else:
        outputs, notes = result, {}
    _manifest(out, cfg, outputs + ["manifest.json"], notes)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="conefrac",
        description="Vanishing orders, spherical eigenpairs, Hardy "
                    "constants and frequency traces at conical boundary "
                    "points.")
    ap.add_argument("task", choices=list(_TASK_RUNNERS),
                    help="which pipeline to run (must match the config)")
    ap.add_argument("--config", required=True, help="path to the INI config")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--threads", type=int, default=1,
                    help="module-internal parallelism (determinism is "
                         "asserted single-threaded)")
    ap.add_argument("--mesh-level", type=int, default=0,
                    help="refine (>0) every mesh dimension by 2^L")
    args = ap.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        cfg = parse_config(text)
        if cfg.task != args.task:
            raise ConfigurationError(
                [f"config declares task '{cfg.task}' but the command line "
                 f"asked for '{args.task}'"])
        cfg = _scaled(cfg, args.mesh_level)
    except (ConfigurationError, ExpressionError) as exc:
        if isinstance(exc, ConfigurationError):
            for v in exc.violations:
                print(f"config error: {v}", file=sys.stderr)
        else:
            print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        out = run_task(cfg, args.out, threads=args.threads)
    except ConfigurationError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except ConefracError as exc:
        print(f"numerical failure in task '{cfg.task}': {exc}",
              file=sys.stderr)
        return 3
    print(f"wrote artifacts to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
