"""Command-line entry point: ``relnav run | mc | sweep | verify``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .sim import (
    NOISE_PRESETS,
    ConfigError,
    RunRecord,
    Scenario,
    build_scenario,
    compute_metrics,
    monte_carlo,
    q0_sweep,
    run_filter,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

OUT_ENV = "RELNAV_OUT"
SWEEP_GRID = (1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

_ANGLE_KEYS = {"i_deg": "i", "raan_deg": "raan", "argp_deg": "argp", "M_deg": "M"}
_SCENARIO_KEYS = {
    "orbits": "n_orbits", "truth_dt": "truth_dt", "meas_dt": "meas_dt", "seed": "seed",
    "accel_noise": "accel_noise", "torque_noise": "torque_noise", "emulator": "emulator",
    "knowledge_noise": "knowledge_noise", "w0_deg": "w0_deg", "q_init": "q0", "inertia": "inertia",
}


def csv_header() -> list[str]:
    cols = ["t_s", "e_t_m", "e_q_deg", "e_pose"]
    cols += [f"t_est_{c}_m" for c in "xyz"] + [f"t_true_{c}_m" for c in "xyz"]
    cols += [f"q_est_{c}" for c in "wxyz"] + [f"q_true_{c}" for c in "wxyz"]
    cols += [f"roe_{n}_m" for n in ("da", "dlam", "dex", "dey", "dix", "diy")]
    cols += [f"w_st_{c}_rad_s" for c in "xyz"]
    cols += [f"P_{i}" for i in range(12)] + [f"Q_{i}" for i in range(12)]
    cols += ["nees", "groups", "rejected"]
    return cols


def write_csv(rec: RunRecord, path: Path) -> None:
    e_t, e_q, e_pose = rec.errors()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header())
        for k in range(len(rec.t)):
            row = [rec.t[k], e_t[k], np.degrees(e_q[k]), e_pose[k]]
            row += list(rec.t_est[k]) + list(rec.t_true[k])
            row += list(rec.q_est[k]) + list(rec.q_true[k])
            row += list(rec.x[k, :6]) + list(rec.x[k, 9:12])
            row += list(rec.P_diag[k]) + list(rec.Q_diag[k])
            row += [rec.nees[k], int(rec.n_groups[k]), int(rec.n_rejected[k])]
            w.writerow([f"{v:.10g}" if isinstance(v, (float, np.floating)) else v for v in row])


def load_config(path) -> dict:
    """Scenario overrides from a TOML file with ``[scenario]`` and ``[filter]`` tables."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - {"scenario", "filter"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    sc = dict(data.get("scenario", {}))
    out = {"preset": sc.pop("preset", None)}
    serv = dict(sc.pop("servicer", {}))
    for k_deg, k in _ANGLE_KEYS.items():
        if k_deg in serv:
            serv[k] = np.radians(serv.pop(k_deg))
    if serv:
        out["servicer"] = serv
    if "roe" in sc:
        out["roe"] = dict(sc.pop("roe"))
    for key, val in sc.items():
        if key not in _SCENARIO_KEYS:
            raise ConfigError(f"unknown scenario key {key!r}")
        out[_SCENARIO_KEYS[key]] = tuple(val) if isinstance(val, list) else val
    filt = dict(data.get("filter", {}))
    for key, val in filt.items():
        if isinstance(val, list):
            filt[key] = tuple(val)
    if filt:
        out["filter"] = filt
    return out


def scenario_from_args(args) -> Scenario:
    over = load_config(args.config) if getattr(args, "config", None) else {}
    preset = args.preset or over.pop("preset", None) or "roe1"
    over.pop("preset", None)
    filt = over.pop("filter", {})
    if getattr(args, "asnc", None) is not None:
        filt["asnc"] = args.asnc == "on"
    if getattr(args, "q0", None) is not None:
        filt["q0"] = args.q0
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "orbits", None) is not None:
        over["n_orbits"] = args.orbits
    if getattr(args, "emulator", None) is not None:
        over["emulator"] = args.emulator
    s = build_scenario(preset, **over)
    if filt:
        try:
            s = replace(s, filter=replace(s.filter, **filt))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    return s


def output_dir(arg) -> Path:
    out = Path(os.environ.get(OUT_ENV) or arg or "relnav_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


PSD_UNITS = {"torque": "(N m)^2 s", "angular": "(rad/s^2)^2 s"}


def _att_psd_units(psd, inertia, units: str):
    """Attitude PSD is torque-based internally; ``angular`` divides by I_i^2."""
    if psd is None or units == "torque":
        return psd
    return np.asarray(psd) / np.asarray(inertia, dtype=float) ** 2


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o).__name__)


def cmd_run(args) -> int:
    s = scenario_from_args(args)
    rec = run_filter(s)
    out = output_dir(args.out)
    stem = f"{s.name}_seed{s.seed}"
    write_csv(rec, out / f"{stem}.csv")
    summary = {
        "scenario": s.name,
        "seed": s.seed,
        "asnc": s.filter.asnc,
        "q0": s.filter.q0,
        "init_time_s": rec.init_time,
        "second_orbit": compute_metrics(rec, "second-orbit") if s.n_orbits >= 2 else None,
        "full": compute_metrics(rec, "full"),
        "psd_roe": rec.psd_roe,
        "psd_att": _att_psd_units(rec.psd_att, s.inertia, args.psd_units),
        "psd_att_units": PSD_UNITS[args.psd_units],
    }
    (out / f"{stem}.json").write_text(json.dumps(summary, indent=2, default=_json_default))
    m = summary["second_orbit"] or summary["full"]
    print(
        f"{s.name}: e_t {m['e_t_m']['mean']:.4f} m, e_q {m['e_q_deg']['mean']:.3f} deg, "
        f"e_pose {m['e_pose']['mean']:.4g} ({m['window']}); wrote {out / stem}.csv/.json"
    )
    return 1 if rec.diverged else 0


def cmd_mc(args) -> int:
    s = scenario_from_args(args)
    agg = monte_carlo(s, args.runs, args.noise, workers=args.workers)
    out = output_dir(args.out)
    rows = np.column_stack([agg["t"], agg["e_t_mean"], agg["e_t_std"],
                            np.degrees(agg["e_q_mean"]), np.degrees(agg["e_q_std"])])
    path = out / f"{s.name}_mc_{args.noise}.csv"
    np.savetxt(path, rows, delimiter=",", fmt="%.10g",
               header="t_s,e_t_mean_m,e_t_std_m,e_q_mean_deg,e_q_std_deg", comments="")
    (out / f"{s.name}_mc_{args.noise}.json").write_text(
        json.dumps({"noise": args.noise, "sigma": NOISE_PRESETS[args.noise],
                    "runs": agg["summaries"]}, indent=2, default=_json_default)
    )
    print(f"{args.runs} runs ({args.noise}); wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    s = scenario_from_args(args)
    grid = [float(g) for g in args.grid.split(",")] if args.grid else list(SWEEP_GRID)
    modes = {"both": (True, False), "on": (True,), "off": (False,)}[args.modes]
    tab = q0_sweep(s, grid, modes)
    out = output_dir(args.out)
    path = out / f"{s.name}_q0_sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = [k for k in ("on", "off") if k in tab]
        w.writerow(["q0"] + [f"e_pose_asnc_{k}" for k in keys])
        for i, q in enumerate(tab["grid"]):
            w.writerow([f"{q:.3g}"] + [f"{tab[k][i]:.6g}" for k in keys])
    for k in ("on", "off"):
        if k in tab:
            print(f"ASNC {k}: max/min e_pose ratio {tab[k].max() / tab[k].min():.2f}")
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    from .oracles import run_all

    res = run_all(verbose=True)
    return 0 if all(err <= tol for err, tol, _ in res.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relnav", description="Relative pose filter simulations.")
    p.add_argument("--version", action="version", version=f"relnav {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_opts(sp):
        sp.add_argument("--preset", choices=("roe1", "roe2", "custom"))
        sp.add_argument("--config", help="TOML scenario file; flags override it")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--orbits", type=float)
        sp.add_argument("--emulator", choices=("synthetic", "lightbox-roe1", "lightbox-roe2"))
        sp.add_argument("--asnc", choices=("on", "off"))
        sp.add_argument("--q0", type=float, help="scalar for the constant Q_o = q0 * I")
        sp.add_argument("--out", help=f"output directory (env {OUT_ENV} takes precedence)")

    r = sub.add_parser("run", help="single scenario run")
    scenario_opts(r)
    r.add_argument("--psd-units", choices=tuple(PSD_UNITS), default="torque",
                   help="units for the reported attitude PSD")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("mc", help="Monte Carlo over seeds with servicer knowledge noise")
    scenario_opts(m)
    m.add_argument("--runs", type=int, required=True)
    m.add_argument("--noise", choices=tuple(NOISE_PRESETS), default="moderate")
    m.add_argument("--workers", type=int, default=1)
    m.set_defaults(func=cmd_mc)

    w = sub.add_parser("sweep", help="constant-Q_o sensitivity batch")
    scenario_opts(w)
    w.add_argument("--grid", help="comma-separated q0 values")
    w.add_argument("--modes", choices=("both", "on", "off"), default="both")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the analytical-vs-numerical oracle suites")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"relnav: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
