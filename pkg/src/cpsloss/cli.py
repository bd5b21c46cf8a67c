"""Command-line front end: ``cpsloss <command> [options]``.

Every command writes a JSON run report into the output directory. Reports
embed SHA-256 digests of their inputs and contain no timestamps, so identical
inputs, config and seed give byte-identical files.
"""

import argparse
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .config import load_config
from .errors import (ConvergenceError, CpsLossError, DependencyError, InvalidInputError,
                     ParseError)
from .field_solver import capacitance, participation_ratios, solve_cross_section
from .inductance_solver import ConductorModel, inductance_matrix
from .loss_budget import (ExtrinsicModel, ase_correct, intrinsic_q, solve_budget,
                          wall_resistance_at)
from .regrowth import (ShiftSolver, StoichiometryModel, extract_ma_loss_tangent,
                       invert_thickness)
from .tls_model import (bounds_table, fit_power_sweep, fit_temperature_sweep, low_power_q,
                        thermal_factor, tls_inverse_q)
from .trace_fit import fit_resonance, model_s11, photon_number

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_PRECONDITION = 4
EXIT_CONVERGENCE = 5
EXIT_DEPENDENCY = 6

REGROWTH_BENCHMARK = {"delta_t_ma_nm": 1.8, "exposure_days": 8,
                      "note": "literature Nb2O5 growth-kinetics estimate, annotation only"}


def exit_code(exc):
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, DependencyError):
        return EXIT_DEPENDENCY
    return EXIT_PRECONDITION


class Run:
    """Collects inputs, warnings and results of one command."""

    def __init__(self, command, args, cfg):
        self.command = command
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out or cfg.output_dir or "cpsloss-out")
        self.inputs = {}
        self.warnings = []
        if cfg.source is not None:
            self.add_input(cfg.source, label="config")

    def add_input(self, path, label=None):
        self.inputs[label or str(path)] = io.file_digest(path)

    def warn(self, msg):
        if msg not in self.warnings:
            self.warnings.append(msg)

    def report(self, results, name=None):
        doc = {"command": self.command, "toolkit_version": __version__,
               "inputs": self.inputs, "seed": self.args.seed, "results": results,
               "warnings": self.warnings}
        return io.write_json(self.out / f"{name or self.command}.json", doc)


def _captured(fn, *a, **kw):
    """Call ``fn`` and return (result, warning messages)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fn(*a, **kw)
    return result, [str(w.message) for w in caught]


def _map(jobs, fn, items):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- fit ----------------------------------------------------------------------

def _fit_one(path, cfg):
    try:
        trace, meta = io.read_trace(path, default_attenuation_db=cfg.line_attenuation_db)
        fit, notes = _captured(fit_resonance, trace, **cfg.fit_tolerances)
    except CpsLossError as exc:
        return {"file": str(path), "error": type(exc).__name__, "message": str(exc),
                "exit_code": exit_code(exc)}, None, None
    entry = {"file": str(path), "fit": fit.as_dict(), "warnings": notes,
             "provenance": meta.get("comments", [])}
    if "applied_power_dbm" in meta:
        ph = photon_number(fit, trace.applied_power)
        entry["photon_number"] = ph.n_mean
        entry["q_loaded"] = ph.q_loaded
        entry["power_at_device_w"] = trace.applied_power
        entry["line_attenuation_db"] = meta["line_attenuation_db"]
    return entry, trace, fit


def cmd_fit(args, cfg):
    run = Run("fit", args, cfg)
    paths = [Path(p) for p in args.traces]
    for p in paths:
        if p.exists():
            run.add_input(p)
    results = _map(args.jobs, lambda p: _fit_one(p, cfg), paths)
    entries, summary, code = [], [], EXIT_OK
    for entry, trace, fit in results:
        entries.append(entry)
        if fit is None:
            code = code or entry["exit_code"]
            continue
        stem = Path(entry["file"]).stem
        io.write_json(run.out / "fit" / f"{stem}.json", entry)
        model = model_s11(fit, trace.frequencies)
        rows = [(f, "data", s.real, s.imag) for f, s in zip(trace.frequencies, trace.s11)]
        rows += [(f, "fit", s.real, s.imag) for f, s in zip(trace.frequencies, model)]
        io.write_tidy_csv(run.out / "fit" / f"{stem}_curve.csv",
                          ("frequency_hz", "series", "s11_real", "s11_imag"), rows)
        for k, v in fit.as_dict().items():
            if not k.endswith("_sigma") and k != "residual_rms":
                summary.append((stem, k, v, fit.as_dict()[f"{k}_sigma"]))
    io.write_tidy_csv(run.out / "fit_summary.csv", ("trace", "parameter", "value", "sigma"), summary)
    run.report({"traces": entries, "n_ok": sum("fit" in e for e in entries),
                "n_failed": sum("error" in e for e in entries)})
    return code


# -- sweep --------------------------------------------------------------------

def _device_f0(args, cfg):
    if args.f0_hz:
        return args.f0_hz
    if args.device:
        dev = cfg.devices.get(args.device)
        if dev is None:
            raise DependencyError(f"device {args.device!r} is not in the config")
        if dev.geometry.f0:
            return dev.geometry.f0
    raise InvalidInputError("resonance frequency unknown: pass --f0-hz or a --device with f0_hz")


def cmd_sweep(args, cfg):
    run = Run(f"sweep_{args.kind}", args, cfg)
    path = Path(args.sweep)
    points, has_sigma, comments = io.read_sweep(path, args.kind)
    run.add_input(path)
    if not has_sigma:
        run.warn("no sigma column: fitting with uniform weights")
    f0 = _device_f0(args, cfg)
    results = {"f0_hz": f0, "provenance": comments, "weighted": has_sigma,
               "uncertainty_convention": "1 sigma"}
    if args.kind == "power":
        fit, notes = _captured(fit_power_sweep, points, f0, args.temperature_k)
        sig = fit.uncertainties
        results.update({"temperature_k": args.temperature_k, "params": fit.params.as_dict(),
                        "sigma": dict(zip(("f_tls_tan_delta", "n_c", "beta_pow", "q_r"), sig)),
                        "degenerate": fit.degenerate, "residual_rms_loss": fit.residual_rms})
        try:
            results["low_power_q"] = low_power_q(points, fit.params.n_c)
        except CpsLossError as exc:
            run.warn(str(exc))
        x = np.logspace(np.log10(max(points[:, 0].min(), 1e-6)), np.log10(points[:, 0].max()), 200)
        curve = 1 / tls_inverse_q(fit.params, x, args.temperature_k, f0)
        xname = "n_photon"
    else:
        fit, notes = _captured(fit_temperature_sweep, points, f0)
        sig = fit.uncertainties
        results.update({"saturated_tls_loss": fit.saturated_tls_loss, "q_r": fit.q_r,
                        "sigma": {"saturated_tls_loss": sig[0], "q_r": sig[1]}})
        if fit.saturated_tls_loss > 0:
            results["inverse_saturated_tls_loss"] = 1 / fit.saturated_tls_loss
            results["inverse_saturated_tls_loss_sigma"] = sig[0] / fit.saturated_tls_loss ** 2
        x = np.linspace(points[:, 0].min(), points[:, 0].max(), 200)
        curve = 1 / (fit.saturated_tls_loss * thermal_factor(x, f0) + 1 / fit.q_r)
        xname = "temperature_k"
    for n in notes:
        run.warn(n)
    rows = [("data", a, b) for a, b in points[:, :2]] + [("fit", a, b) for a, b in zip(x, curve)]
    io.write_tidy_csv(run.out / f"sweep_{args.kind}_curve.csv", ("series", xname, "q"), rows)
    run.report(results)
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def _geometries(args, cfg):
    """(name, geometry, extras) from explicit files or the configured devices."""
    if args.geometries:
        out = []
        for p in args.geometries:
            geom, extras = io.read_geometry(p)
            out.append((geom.name or Path(p).stem, geom, extras, Path(p)))
        return out
    if not cfg.devices:
        raise DependencyError("no geometry files given and no devices in the config")
    return [(n, d.geometry, d.extras, d.geometry_path) for n, d in sorted(cfg.devices.items())]


def _lambda(extras, cfg):
    return extras.get("lambda_nm", cfg.materials.london_depth * 1e9) * 1e-9


def _filaments(extras, spec):
    return replace(spec, nx=int(extras.get("filament_nx", spec.nx)),
                   ny=int(extras.get("filament_ny", spec.ny)))


def _sim_participation(item, cfg):
    name, geom, extras, _ = item
    ps, notes = _captured(participation_ratios, geom, cfg.grid_spec)
    bare = replace(geom, t_ma=0.0, t_ms=0.0, t_sa=0.0)
    sol = solve_cross_section(bare, cfg.grid_spec)
    return name, {"participation_ppm_nm": ps.as_dict(), "capacitance_f_m": capacitance(sol),
                  "mesh": sol.stats, "linearity": ps.linearity, "warnings": notes}


def _sim_inductance(item, cfg):
    name, geom, extras, _ = item
    spec = _filaments(extras, cfg.filament_spec)
    lam = _lambda(extras, cfg)
    f0 = geom.f0 or 5e9
    normal = inductance_matrix(geom, ConductorModel.normal(), f0, spec)
    sc = inductance_matrix(geom, ConductorModel.superconducting(lam), f0, spec)
    finer = inductance_matrix(geom, ConductorModel.superconducting(lam), f0, spec.refined())
    alpha = (sc.l_eff - normal.l_eff) / sc.l_eff
    return name, {"normal": normal.as_dict(), "superconducting": sc.as_dict(), "alpha": alpha,
                  "lambda_nm": lam * 1e9, "f0_hz": f0,
                  "convergence": {"refined_l_eff_h": finer.l_eff,
                                  "relative_change": (finer.l_eff - sc.l_eff) / sc.l_eff}}


def _shift_solver(cfg, extras=None):
    extras = extras or {}
    return ShiftSolver(cfg.regrowth_grid, cfg.regrowth_filaments, _lambda(extras, cfg),
                       StoichiometryModel.from_constants(cfg.materials))


def _sim_curve(item, cfg):
    name, geom, extras, _ = item
    solver = _shift_solver(cfg, extras)
    rows = []
    for t_nm in cfg.regrowth_curve_nm:
        t = t_nm * 1e-9
        gc = solver.gamma_c(geom, t) if t > 0 else 0.0
        gl = solver.gamma_l(geom, t) if t > 0 else 0.0
        rows.append({"delta_t_ma_nm": t_nm, "gamma_c": gc, "gamma_l": gl,
                     "df_over_f": solver.shift(geom, t)})
    return name, {"curve": rows}


def cmd_simulate(args, cfg):
    items = _geometries(args, cfg)
    run = Run(f"simulate_{args.what}", args, cfg)
    for name, _, _, path in items:
        run.add_input(path, label=f"geometry:{name}")
    fn = {"participation": _sim_participation, "inductance": _sim_inductance,
          "regrowth-curve": _sim_curve}[args.what]
    results = dict(_map(args.jobs, lambda it: fn(it, cfg), items))
    for name, res in results.items():
        for n in res.pop("warnings", []):
            run.warn(f"{name}: {n}")
    if args.what == "regrowth-curve":
        rows = [(name, r["delta_t_ma_nm"], r["gamma_c"], r["gamma_l"], r["df_over_f"])
                for name, res in results.items() for r in res["curve"]]
        io.write_tidy_csv(run.out / "regrowth_curve.csv",
                          ("device_id", "delta_t_ma_nm", "gamma_c", "gamma_l", "df_over_f"), rows)
        results = {"devices": results,
                   "stoichiometry": StoichiometryModel.from_constants(cfg.materials).as_dict()}
    elif args.what == "participation":
        results = {"devices": results, "substrate_model": "isotropic eps_substrate unless "
                   "eps_substrate_normal is given"}
    else:
        results = {"devices": results}
    run.report(results)
    return EXIT_OK


# -- regrowth -----------------------------------------------------------------

def _load_report(out, name):
    path = Path(out) / f"{name}.json"
    if not path.exists():
        raise DependencyError(f"missing upstream stage {name!r} (expected {path})")
    return io.read_json(path), path


def _p_tilde(cfg, out, names):
    """Corner-absorbed p-tilde per device, plus where each came from."""
    table, source = {}, {}
    sim = None
    for name in names:
        dev = cfg.devices.get(name)
        if dev is not None and dev.p_tilde is not None:
            p = dev.p_tilde
            source[name] = "config"
        else:
            if sim is None:
                sim, _ = _load_report(out, "simulate_participation")
            try:
                raw = sim["results"]["devices"][name]["participation_ppm_nm"]
            except KeyError:
                raise DependencyError(f"no participation result for device {name!r}") from None
            p = {"ma": raw["ma"], "ms": raw["ms"], "sa": raw["sa"], "c": raw["c"]}
            source[name] = "simulate_participation"
        table[name] = {"ma_eff": p["ma"] + p["c"] / 2, "ms_eff": p["ms"] + p["c"] / 2,
                       "sa": p["sa"]}
    return table, source


def cmd_regrowth(args, cfg):
    run = Run("regrowth", args, cfg)
    path = Path(args.observations)
    (obs, comments), notes = _captured(io.read_observations, path)
    run.add_input(path)
    for n in notes:
        run.warn(n)
    names = [o.device_id for o in obs]
    missing = [n for n in names if n not in cfg.devices]
    if missing:
        raise DependencyError(f"devices {missing} have no geometry in the config")
    p_table, p_source = _p_tilde(cfg, run.out, names)
    obs = [replace(o, p_tilde_ma_eff=p_table[o.device_id]["ma_eff"]) for o in obs]
    geoms = {n: cfg.devices[n].geometry for n in names}
    solver = _shift_solver(cfg)
    nodes = np.array(cfg.surrogate_nodes_nm) * 1e-9
    est, notes = _captured(invert_thickness, obs, geoms, solver, nodes)
    for n in notes:
        run.warn(n)
    results = {"thickness": est.as_dict(), "provenance": comments,
               "p_tilde_source": p_source,
               "stoichiometry": solver.stoichiometry.as_dict(),
               "benchmark": REGROWTH_BENCHMARK}
    if cfg.bootstrap and len(obs) > 1:
        rng = np.random.default_rng(args.seed)
        draws = []
        for _ in range(cfg.bootstrap):
            pick = rng.integers(0, len(obs), len(obs))
            sample = [obs[i] for i in pick]
            if all(o.fractional_shift >= 0 for o in sample):
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                draws.append(invert_thickness(sample, geoms, solver, nodes).delta_t_ma)
        results["thickness"]["bootstrap_sigma_nm"] = float(np.std(draws, ddof=1) * 1e9)
        results["thickness"]["bootstrap_draws"] = len(draws)
    dt = args.delta_t_ma_nm * 1e-9 if args.delta_t_ma_nm else est.delta_t_ma
    tan_d, notes = _captured(extract_ma_loss_tangent, obs, dt)
    for n in notes:
        run.warn(n)
    results["loss_tangent"] = {**tan_d.as_dict(), "delta_t_ma_nm": dt * 1e9}
    run.report(results)
    return EXIT_OK


# -- budget -------------------------------------------------------------------

def _q_table(cfg):
    rows = []
    model = ExtrinsicModel(cfg.r_meas_cavity, 2 * np.pi * cfg.f_cavity)
    for name, dev in sorted(cfg.devices.items()):
        if dev.q_int is None or dev.q_extr is None:
            continue
        q_extr = dev.q_extr
        law = "as supplied"
        if cfg.extrinsic_law == "ase" and dev.q_extr_law == "classical":
            q_extr = ase_correct(q_extr, model.omega_cavity, 2 * np.pi * dev.geometry.f0)
            law = "classical corrected to ASE"
        row = {"device": name, "q_int": dev.q_int, "q_extr": q_extr, "q_extr_law": law,
               "q_intr": intrinsic_q(dev.q_int, q_extr)}
        if dev.geometry.f0:
            w = 2 * np.pi * dev.geometry.f0
            row["wall_resistance_ohm_sq"] = {k: wall_resistance_at(w, model, k)
                                             for k in ("classical", "ase")}
        rows.append(row)
    return rows


def cmd_budget(args, cfg):
    run = Run("budget", args, cfg)
    path = Path(args.budget)
    system, comments = io.read_budget(path)
    run.add_input(path)
    method = args.method or cfg.budget_method
    sol, notes = _captured(solve_budget, system, method, cfg.collinearity_threshold)
    results = {"solution": sol.as_dict(), "devices": list(system.device_ids),
               "collinearity_threshold": cfg.collinearity_threshold, "provenance": comments,
               "q_table": _q_table(cfg)}
    for n in notes:
        run.warn(n)
    run.report(results)
    return EXIT_OK


# -- report -------------------------------------------------------------------

def _fmt_pm(value, sigma, scale, unit):
    return f"({value / scale:.2g} ± {sigma / scale:.1g}){unit}"


def cmd_report(args, cfg):
    run = Run("report", args, cfg)
    out = run.out
    temp, tpath = _load_report(out, "sweep_temperature")
    ind, ipath = _load_report(out, "simulate_inductance")
    reg, rpath = _load_report(out, "regrowth")
    bud, bpath = _load_report(out, "budget")
    for p in (tpath, ipath, rpath, bpath):
        run.add_input(p, label=p.name)
    device = cfg.bound_device or "CPS3"
    if device not in ind["results"]["devices"]:
        raise DependencyError(f"simulate_inductance has no result for bound device {device!r}")
    p_table, p_source = _p_tilde(cfg, out, [device])
    t = temp["results"]
    a = float(t["saturated_tls_loss"])
    a_sig = float(t["sigma"]["saturated_tls_loss"])
    q_r = float(t["q_r"])
    q_r_sig = float(t["sigma"]["q_r"])
    alpha = float(ind["results"]["devices"][device]["alpha"])
    f0 = float(ind["results"]["devices"][device]["f0_hz"])
    part = {"ma": p_table[device]["ma_eff"], "ms": p_table[device]["ms_eff"],
            "sa": p_table[device]["sa"]}
    rows = bounds_table(a, a_sig, part, q_r, q_r_sig, alpha, f0, cfg.materials,
                        cfg.literature_tan_delta)
    lines = [f"Upper bounds (device {device}, p-tilde from {p_source[device]})"]
    for r in rows:
        if r["unit"] == "nm":
            lines.append(f"  {r['interface']} <= " + _fmt_pm(r["bound"], r["uncertainty"], 1e-3,
                                                          "x10^-3 nm"))
        else:
            lines.append(f"  n_qp <= {r['bound']:.3g} ± {r['uncertainty']:.2g} um^-3")
    q_rows = _q_table(cfg)
    if q_rows:
        lines.append("Quality factors (x10^6): device, Q_int, Q_extr, Q_intr")
        for r in q_rows:
            lines.append(f"  {r['device']}  {r['q_int'] / 1e6:.3g}  {r['q_extr'] / 1e6:.3g}  "
                         f"{r['q_intr'] / 1e6:.3g}")
    th = reg["results"]["thickness"]
    lt = reg["results"]["loss_tangent"]
    lines.append(f"Regrowth: dt_MA = {th['delta_t_ma_nm']:.3g} nm; "
                 f"tan(delta_MA) = {lt['mean']:.3g} ± {lt['stderr']:.2g}")
    sol = bud["results"]["solution"]
    lines.append(f"Budget: condition number {sol['condition_number']:.4g} "
                 f"(threshold {bud['results']['collinearity_threshold']:g})")
    for w in bud["warnings"]:
        lines.append(f"  warning: {w}")
    results = {
        "bounds": {"device": device, "rows": rows, "p_tilde_source": p_source[device],
                   "alpha": alpha, "materials": cfg.materials.provenance(),
                   "uncertainty_convention": "1 sigma"},
        "q_table": q_rows,
        "regrowth": {"thickness": th, "loss_tangent": lt,
                     "benchmark": reg["results"].get("benchmark")},
        "budget": {"condition_number": sol["condition_number"], "warnings": bud["warnings"],
                   "solution": sol},
        "summary": lines,
    }
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    run.report(results)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="project config (JSON)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for resampling steps")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p = argparse.ArgumentParser(prog="cpsloss", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cpsloss {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("fit", parents=[common], help="fit reflection traces")
    s.add_argument("traces", nargs="+")
    s = sub.add_parser("sweep", parents=[common], help="fit a TLS power or temperature sweep")
    s.add_argument("sweep")
    s.add_argument("--kind", choices=("power", "temperature"), required=True)
    s.add_argument("--f0-hz", type=float)
    s.add_argument("--device")
    s.add_argument("--temperature-k", type=float, default=0.02)
    s = sub.add_parser("simulate", parents=[common], help="field and inductance solvers")
    s.add_argument("geometries", nargs="*")
    s.add_argument("--what", choices=("participation", "inductance", "regrowth-curve"),
                   required=True)
    s = sub.add_parser("regrowth", parents=[common], help="invert oxide regrowth")
    s.add_argument("observations")
    s.add_argument("--delta-t-ma-nm", type=float,
                   help="use this thickness for the loss tangent instead of the fitted one")
    s = sub.add_parser("budget", parents=[common], help="solve the interface loss budget")
    s.add_argument("budget")
    s.add_argument("--method", choices=("direct", "nonnegative"))
    sub.add_parser("report", parents=[common], help="consolidate prior run reports")
    return p


COMMANDS = {"fit": cmd_fit, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "regrowth": cmd_regrowth, "budget": cmd_budget, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except CpsLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
