"""Experiment driver: every module surfaces as a subcommand.

Usage:  gcwaves <subcommand> [--config FILE] [flags...] --out DIR

Flags override values from the declarative JSON config file; every run
writes its resolved configuration (run_config.json), a manifest recording
all design knobs in effect (manifest.json), and the artifacts listed by
``gcwaves schema``.  Identical (config, seed) pairs reproduce byte-identical
artifacts.

Exit codes: 0 ok, 2 invalid config/usage, 3 resource budget exceeded,
4 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .dispersion import (DispersionParams, ScanWindow, WeightParams,
                         collinear_gap, exceptional_measure_bound,
                         lemma1_profile, scan_four_wave, scan_three_wave)
from .errors import (ConfigError, NumericAbortError, PositivityError,
                     ResourceBudgetError, SmallDivisorError)
from .fields import Grid, l2_norm, random_field, save_snapshot, sobolev_norm
from .model import ModelConfig, lifespan_sweep, run
from .energy import C_ENERGY, depletion_checks, increment_audit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4

_GUARD_THRESHOLD = 1e-12
_BISECTION_TOL = 1e-10


# ---------------------------------------------------------------------------
# artifact schemas (the --schema dump)
# ---------------------------------------------------------------------------

SCHEMAS = {
    "scan3": {
        "records.csv": ["s1", "s2", "s3", "v1x", "v1y", "v2x", "v2y",
                        "v3x", "v3y", "phase_value", "weight",
                        "normalized_gap", "flags"],
        "summary.json": ["min_normalized_gap", "shell_stats(shell,count,"
                         "min_gap,min_phase_x32)", "n_evaluated", "meta"],
    },
    "scan4": {
        "records.csv": ["s1", "s2", "vx", "vy", "xix", "xiy", "etax", "etay",
                        "max_modulation", "weight", "normalized_gap", "flags"],
        "summary.json": ["min_normalized_gap", "shell_stats", "n_evaluated", "meta"],
    },
    "collinear": {
        "gaps.csv": ["etax", "etay", "gap", "gap_times_xi6"],
    },
    "lemma1": {
        "result.json": ["root", "interval", "length", "empty_forced",
                        "f_at_0", "f_at_B"],
    },
    "measure": {
        "bounds.csv": ["j", "bound", "n_intervals", "ratio_to_previous"],
    },
    "paradiff-audit": {
        "report.json": ["self_adjoint_err", "conjugation_err", "t_const_err",
                        "t_one_err", "composition(slopes)", "paralin", "chi_exponent"],
    },
    "symbols": {
        "slopes.json": ["name", "eps", "values", "slope"],
        "sigma1_trace.csv": ["x1", "x2", "zeta1", "zeta2", "re", "im"],
    },
    "simulate": {
        "trajectory.jsonl": ["t", "l2", "hN", "doubled"],
        "conservation.json": ["l2_initial", "max_rel_l2_drift", "hn_initial",
                              "max_hn_growth", "doubling_time", "censored", "n_steps"],
        "final_field.json/.csv": ["xi1", "xi2", "re", "im"],
    },
    "sweep": {
        "sweep.csv": ["epsilon", "doubling_time", "censored", "n_steps",
                      "# footer: p_fit, p_stderr"],
    },
    "energy-audit": {
        "audit.json": ["rows(t,E_N,dE_dt_fd,dE_dt_trilinear,rel_err)",
                       "parts(t,hiMod,loMod_hiFreq,loMod_loFreq)", "totals",
                       "N", "D", "c"],
        "depletion.json": ["radius", "mprime_min", "mprime_max", "factor_C"],
    },
}


def _parser():
    top = argparse.ArgumentParser(prog="gcwaves", description=__doc__)
    sub = top.add_subparsers(dest="subcommand")

    def add(name, **flags):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        for flag, (typ, default) in flags.items():
            p.add_argument(f"--{flag}", type=typ, default=None,
                           help=f"default {default!r}")
        p.set_defaults(_defaults={k: v[1] for k, v in flags.items()})
        return p

    # --g accepts a float or one of the generic presets "sqrt2", "e", "pi/2"
    add("scan3", g=(str, "sqrt2"), sigma=(float, 1.0), kappa=(float, 0.5),
        **{"max-high": (int, 64), "max-low": (int, 4),
           "n-records": (int, 100), "budget": (float, 2e9)})
    add("scan4", g=(str, "sqrt2"), sigma=(float, 1.0),
        **{"max-high": (int, 128), "max-low": (int, 2), "bprime": (float, 1.0),
           "n-records": (int, 100), "budget": (float, 2e9)})
    add("collinear", g=(str, "sqrt2"), sigma=(float, 1.0),
        xi=(str, "6,0"))
    add("lemma1", a=(float, 1.0), b=(float, 1.0), c=(float, 2.0),
        bigB=(float, 10.0), delta=(float, 0.05))
    add("measure", bigB=(float, 5.0), kappa=(float, 1.0), cutoff=(int, 32),
        **{"j-min": (int, 5), "j-max": (int, 9), "budget": (float, 2e9)})
    add("paradiff-audit", grid=(int, 16), chi=(int, -2), seed=(int, 0))
    add("symbols", grid=(int, 32), g=(float, 1.0), sigma=(float, 1.0),
        amplitude=(float, 1.0), seed=(int, 0), chi=(int, -2),
        **{"eps-list": (str, "1e-1,1e-2,1e-3,1e-4")})
    add("simulate", grid=(int, 64), g=(float, 1.0), epsilon=(float, 0.01),
        dt=(float, 4e-3), seed=(int, 0), integrator=(str, "rk4"),
        **{"t-end": (float, 10.0), "velocity-band": (int, 10),
           "snapshot-dt": (float, 0.1), "sobolev-index": (float, 5.0),
           "linear-only": (int, 0)})
    add("sweep", grid=(int, 32), g=(float, 1.0), seed=(int, 2), dt=(float, 1e-2),
        **{"eps-list": (str, "0.4,0.2,0.1,0.05"), "t-end": (float, 2000.0),
           "courant": (float, 0.08), "sobolev-index": (float, 5.0)})
    add("energy-audit", grid=(int, 32), g=(float, 1.0), epsilon=(float, 0.01),
        dt=(float, 2e-3), seed=(int, 0), N=(float, 5.0), D=(float, 3.0),
        **{"t-end": (float, 0.1), "audit-times": (str, "0.02,0.05,0.08"),
           "depletion-radius": (int, 64)})
    sub.add_parser("schema")
    return top


def _resolve(args):
    """Merge file config <- defaults, then apply explicit CLI flags."""
    cfg = dict(args._defaults)
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for k, v in file_cfg.items():
            key = k.replace("_", "-")
            if key not in cfg and key not in ("out",):
                raise ConfigError(f"unknown config key {k!r}")
            if key == "out":
                continue
            cfg[key] = v
    for k, v in vars(args).items():
        key = k.replace("_", "-")
        if key in cfg and v is not None:
            cfg[key] = v
    return cfg


_G_PRESETS = {"sqrt2": math.sqrt(2.0), "e": math.e, "pi/2": math.pi / 2.0,
              "pi_2": math.pi / 2.0}


def _parse_g(value):
    """Gravity parameter: a float, or one of the generic presets."""
    if isinstance(value, str) and value in _G_PRESETS:
        return _G_PRESETS[value]
    return float(value)


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _sanitize(obj):
    """Strict-JSON pass: non-finite floats become null."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_sanitize(json.loads(json.dumps(obj, default=_jsonable))),
                  fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "to_json"):
        return o.to_json()
    if hasattr(o, "__dict__"):
        return {k: v for k, v in o.__dict__.items() if not k.startswith("_")}
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_scan3(cfg, out):
    params = DispersionParams(_parse_g(cfg["g"]), cfg["sigma"])
    res = scan_three_wave(params, WeightParams(cfg["kappa"]),
                          ScanWindow(cfg["max-high"], cfg["max-low"]),
                          n_records=cfg["n-records"], budget=int(cfg["budget"]))
    with open(f"{out}/records.csv", "w") as fh:
        fh.write(",".join(SCHEMAS["scan3"]["records.csv"]) + "\n")
        for r in res.records:
            (v1, v2, v3) = r.frequencies
            fh.write(f"{r.signs.signs[0]},{r.signs.signs[1]},{r.signs.signs[2]},"
                     f"{v1[0]},{v1[1]},{v2[0]},{v2[1]},{v3[0]},{v3[1]},"
                     f"{r.phase_value!r},{r.weight!r},{r.normalized_gap!r},"
                     f"{'|'.join(r.flags)}\n")
    _write_json(f"{out}/summary.json", {
        "min_normalized_gap": res.min_gap,
        "shell_stats": [s.__dict__ for s in res.shell_stats],
        "n_evaluated": res.n_evaluated, "meta": res.meta})
    return {"min_normalized_gap": res.min_gap}


def _cmd_scan4(cfg, out):
    params = DispersionParams(_parse_g(cfg["g"]), cfg["sigma"])
    res = scan_four_wave(params, ScanWindow(cfg["max-high"], cfg["max-low"]),
                         n_records=cfg["n-records"], bprime=cfg["bprime"],
                         budget=int(cfg["budget"]))
    with open(f"{out}/records.csv", "w") as fh:
        fh.write(",".join(SCHEMAS["scan4"]["records.csv"]) + "\n")
        for r in res.records:
            (v, xi, eta) = r.frequencies
            fh.write(f"{r.signs.signs[0]},{r.signs.signs[1]},"
                     f"{v[0]},{v[1]},{xi[0]},{xi[1]},{eta[0]},{eta[1]},"
                     f"{r.phase_value!r},{r.weight!r},{r.normalized_gap!r},"
                     f"{'|'.join(r.flags)}\n")
    _write_json(f"{out}/summary.json", {
        "min_normalized_gap": res.min_gap,
        "shell_stats": [s.__dict__ for s in res.shell_stats],
        "n_evaluated": res.n_evaluated, "meta": res.meta})
    return {"min_normalized_gap": res.min_gap}


def _cmd_collinear(cfg, out):
    params = DispersionParams(_parse_g(cfg["g"]), cfg["sigma"])
    xi = tuple(_ints(cfg["xi"]))
    rows = collinear_gap(params, xi)
    with open(f"{out}/gaps.csv", "w") as fh:
        fh.write(",".join(SCHEMAS["collinear"]["gaps.csv"]) + "\n")
        for eta, gap, norm in rows:
            fh.write(f"{eta[0]},{eta[1]},{gap!r},{norm!r}\n")
    return {"n_gaps": len(rows)}


def _cmd_lemma1(cfg, out):
    res = lemma1_profile(cfg["a"], cfg["b"], cfg["c"], cfg["bigB"], cfg["delta"])
    _write_json(f"{out}/result.json", res.__dict__)
    return {"length": res.length}


def _cmd_measure(cfg, out):
    wp = WeightParams(cfg["kappa"])
    rows = []
    prev = None
    for j in range(cfg["j-min"], cfg["j-max"] + 1):
        mb = exceptional_measure_bound(cfg["bigB"], j, wp, cfg["cutoff"],
                                       budget=int(cfg["budget"]))
        ratio = mb.total / prev if prev not in (None, 0.0) else float("nan")
        rows.append((j, mb.total, mb.n_intervals, ratio))
        prev = mb.total
    with open(f"{out}/bounds.csv", "w") as fh:
        fh.write(",".join(SCHEMAS["measure"]["bounds.csv"]) + "\n")
        for j, total, n, ratio in rows:
            fh.write(f"{j},{total!r},{n},{ratio!r}\n")
    return {"bounds": [r[1] for r in rows]}


def _cmd_paradiff_audit(cfg, out):
    from .fields import inner
    from .paradiff import (ParadiffConfig, Symbol, composition_residual,
                           paralin_remainder, weyl_apply)

    pcfg = ParadiffConfig(chi_exponent=cfg["chi"])
    grid = Grid(cfg["grid"])
    seed = cfg["seed"]
    a = Symbol.from_function(random_field(grid, seed=seed, real=True))
    u = random_field(grid, seed=seed + 1)
    v = random_field(grid, seed=seed + 2)
    sa = abs(inner(weyl_apply(a, u, pcfg), v) - inner(u, weyl_apply(a, v, pcfg)))
    lhs = weyl_apply(a, u, pcfg).conj()
    rhs = weyl_apply(a.conj_flip(), u.conj(), pcfg)
    conj_err = float(np.max(np.abs(lhs.coeffs - rhs.coeffs)))
    from .fields import FourierField
    const = FourierField.single_mode(grid, (0, 0), 1.7)
    tconst = float(np.max(np.abs(weyl_apply(a, const, pcfg).coeffs)))
    one = Symbol.constant(1.0)
    t1 = weyl_apply(one, u, pcfg)
    t1_err = float(np.max(np.abs(t1.coeffs - u.coeffs)))  # u is mean-zero
    mult = Symbol.multiplier(lambda z1, z2: np.hypot(z1, z2), 1.0,
                             dgz=(lambda z1, z2: z1 / np.hypot(z1, z2),
                                  lambda z1, z2: z2 / np.hypot(z1, z2)))
    comp = composition_residual(mult, a, 1.0, 0.0, [2, 3], grid, pcfg, seed=seed)
    h = paralin_remainder(random_field(grid, seed=seed + 3, real=True),
                          random_field(grid, seed=seed + 4, real=True), pcfg)
    report = {"self_adjoint_err": sa, "conjugation_err": conj_err,
              "t_const_err": tconst, "t_one_err": t1_err,
              "composition": comp.to_json(), "paralin_h_norm": l2_norm(h),
              "chi_exponent": pcfg.chi_exponent}
    _write_json(f"{out}/report.json", report)
    return report


def _cmd_symbols(cfg, out):
    from .goodvar import (build_good_variable, expansion_check,
                          export_symbol_trace, fit_loglog,
                          linear_good_variable, random_state)
    from .paradiff import ParadiffConfig

    pcfg = ParadiffConfig(chi_exponent=cfg["chi"])
    grid = Grid(cfg["grid"])
    params = DispersionParams(cfg["g"], cfg["sigma"])
    base = random_state(grid, params, amplitude=cfg["amplitude"], seed=cfg["seed"])
    eps_list = _floats(cfg["eps-list"])
    reports = expansion_check(base, eps_list, pcfg, powers=(-1.0, 0.5, 1.0, 2.0))
    vals = []
    for eps in eps_list:
        st = base.scaled(eps)
        gv = build_good_variable(st, pcfg)
        vals.append(sobolev_norm(gv.U - linear_good_variable(st), 3.0))
    reports_json = [r.to_json() for r in reports]
    reports_json.append({"name": "U_minus_linear", "eps": eps_list,
                         "values": vals, "slope": fit_loglog(eps_list, vals)})
    _write_json(f"{out}/slopes.json", reports_json)
    export_symbol_trace(gv.symbols.Sigma1, grid,
                        [(1.0, 0.0), (2.0, 1.5), (4.0, -3.0)],
                        f"{out}/sigma1_trace.csv")
    return {"slopes": {r["name"]: r["slope"] for r in reports_json}}


def _cmd_simulate(cfg, out):
    params = DispersionParams(cfg["g"], 1.0)
    mc = ModelConfig(params, Grid(cfg["grid"]), cfg["epsilon"], cfg["dt"],
                     cfg["t-end"], velocity_band=cfg["velocity-band"],
                     integrator=cfg["integrator"], snapshot_dt=cfg["snapshot-dt"],
                     sobolev_index=cfg["sobolev-index"],
                     linear_only=bool(cfg["linear-only"]), seed=cfg["seed"])
    traj = run(mc, keep_snapshots=True)
    traj.to_jsonl(f"{out}/trajectory.jsonl")
    _write_json(f"{out}/conservation.json", traj.report.__dict__)
    t_final, u_final = traj.snapshots[-1]
    save_snapshot(u_final, f"{out}/final_field", time=t_final, name="final state")
    return {"max_rel_l2_drift": traj.report.max_rel_l2_drift}


def _cmd_sweep(cfg, out):
    params = DispersionParams(cfg["g"], 1.0)
    mc = ModelConfig(params, Grid(cfg["grid"]), 0.1, cfg["dt"], cfg["t-end"],
                     sobolev_index=cfg["sobolev-index"], seed=cfg["seed"])
    res = lifespan_sweep(mc, _floats(cfg["eps-list"]), courant=cfg["courant"])
    res.to_csv(f"{out}/sweep.csv")
    return {"p_fit": res.p_fit, "p_stderr": res.p_stderr}


def _cmd_energy_audit(cfg, out):
    params = DispersionParams(cfg["g"], 1.0)
    mc = ModelConfig(params, Grid(cfg["grid"]), cfg["epsilon"], cfg["dt"],
                     cfg["t-end"], seed=cfg["seed"])
    audit = increment_audit(mc, None, _floats(cfg["audit-times"]),
                            N=cfg["N"], D=cfg["D"])
    audit.save(f"{out}/audit.json")
    rep = depletion_checks(params, cfg["N"], cfg["depletion-radius"])
    _write_json(f"{out}/depletion.json", rep.to_json())
    return {"max_rel_err": audit.max_rel_err, "factor_C": rep.factor_C}


_COMMANDS = {
    "scan3": _cmd_scan3, "scan4": _cmd_scan4, "collinear": _cmd_collinear,
    "lemma1": _cmd_lemma1, "measure": _cmd_measure,
    "paradiff-audit": _cmd_paradiff_audit, "symbols": _cmd_symbols,
    "simulate": _cmd_simulate, "sweep": _cmd_sweep,
    "energy-audit": _cmd_energy_audit,
}


def dispatch(argv) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if not args.subcommand:
        parser.print_usage()
        return EXIT_CONFIG
    if args.subcommand == "schema":
        json.dump(SCHEMAS, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return EXIT_OK

    import os

    t0 = time.time()
    status = "ok"
    abort_reason = None
    summary = {}
    cfg = None
    code = EXIT_OK
    try:
        cfg = _resolve(args)
        out = args.out or f"gcwaves_out/{args.subcommand}"
        os.makedirs(out, exist_ok=True)
        _write_json(f"{out}/run_config.json", dict(cfg))
        summary = _COMMANDS[args.subcommand](cfg, out)
        code = EXIT_OK
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, ValueError) as err:
        status, abort_reason, code = "config-error", str(err), EXIT_CONFIG
    except ResourceBudgetError as err:
        status, abort_reason, code = "resource-error", str(err), EXIT_RESOURCE
    except (NumericAbortError, SmallDivisorError, PositivityError) as err:
        status, abort_reason, code = "numeric-abort", str(err), EXIT_NUMERIC
    try:
        manifest = {
            "subcommand": args.subcommand,
            "config": cfg if status != "config-error" else None,
            "status": status,
            "abort_reason": abort_reason,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "knobs": {
                "c_energy": C_ENERGY,
                "chi_exponent": (cfg or {}).get("chi"),
                "sobolev_index": (cfg or {}).get("sobolev-index", (cfg or {}).get("N")),
                "dealias_rule": "2/3 (alias-free: 3 kmax < M)",
                "small_divisor_guard": _GUARD_THRESHOLD,
                "bisection_tol": _BISECTION_TOL,
                "velocity_proxy": "V1 = |grad|^{-1/2} grad Im U",
            },
            "wall_time_s": time.time() - t0,
        }
        out = args.out or f"gcwaves_out/{args.subcommand}"
        os.makedirs(out, exist_ok=True)
        _write_json(f"{out}/manifest.json", manifest)
        if summary:
            print(json.dumps(_sanitize(json.loads(
                json.dumps(summary, default=_jsonable))), sort_keys=True))
    except Exception:
        pass
    return code


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
