"""Configuration-driven experiment runner.

Subcommands:
  verify  -- run the module invariant suites, write a JSON summary.
  solve   -- one pressure solve plus trace diagnostics for a named field.
  study   -- the eta sweep over rough fields; writes the estimate ledger.

Config is a YAML key tree (see DEFAULT_CONFIG); any leaf can be overridden
with --set dotted.key=value.  Exit codes: 0 success, 1 validation error,
2 solver failure, 3 invariant failure.
"""

import argparse
import copy
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from .geometry import GeodesicChart, GeometryError, build_curve, build_cutoffs
from .fields import FieldError, GridField, InteriorChart, make_rough_stream, radial_flow
from .norms import build_pair_plan
from .elliptic import SolverError
from .mollify import MollifyError
from .pressure import (EstimateLedger, PressureError, _collar_resample,
                       boundary_trace, eta_study_record, solve_pressure)
from . import report, verification

DEFAULT_CONFIG = {
    "domain": {"kind": "circle", "radius": 1.0, "nodes": 256},
    "grid": {"n_rho": 64, "n_theta": 128,
             "collar_n_s": 64, "collar_n_theta": 128},
    "cutoffs": {"delta": 0.4, "epsilon": 0.05,
                "delta1": 0.1, "delta2": 0.2, "delta3": 0.25},
    "solver": {"tol": 1.0e-10, "maxiter": 100000},
    "mollify": {"n_sub": 4, "probe_n": 128},
    "field": {"kind": "rough", "alpha": 1.0 / 3.0, "seed": 7, "j_max": 2,
              "eta": 0.0125},
    "norms": {"plan_seed": 0, "n_random": 20000},
    "study": {"alphas": [0.25, 1.0 / 3.0, 0.5, 0.75],
              "seeds": [0, 1, 2, 3, 4],
              "etas": [0.0125, 0.00625, 0.003125]},
    "output": "out",
    "jobs": 0,
}


class ConfigError(ValueError):
    pass


def _deep_update(base, extra, path=""):
    for k, v in extra.items():
        key_path = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"unknown config key: {key_path}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{key_path} must be a mapping")
            _deep_update(base[k], v, key_path)
        else:
            base[k] = v


def _apply_override(cfg, spec):
    if "=" not in spec:
        raise ConfigError(f"--set expects key=value, got {spec!r}")
    key, _, raw = spec.partition("=")
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config key: {key}")
        node = node[p]
    leaf = parts[-1]
    if leaf not in node:
        raise ConfigError(f"unknown config key: {key}")
    value = yaml.safe_load(raw)
    if isinstance(value, str):
        # YAML 1.1 only floats "1.0e-8", not "1e-8"; accept both on the CLI
        try:
            value = int(value)
        except ValueError:
            try:
                value = float(value)
            except ValueError:
                pass
    node[leaf] = value


def load_config(path=None, overrides=(), out=None, jobs=None):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError("config root must be a mapping")
        _deep_update(cfg, user)
    for spec in overrides:
        _apply_override(cfg, spec)
    if out is not None:
        cfg["output"] = out
    if jobs is not None:
        cfg["jobs"] = jobs
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    c = cfg["cutoffs"]
    try:
        build_cutoffs(c["delta"], c["epsilon"],
                      c["delta1"], c["delta2"], c["delta3"])
    except GeometryError as exc:
        raise ConfigError(f"cutoffs: {exc}") from exc
    if cfg["mollify"]["n_sub"] < 2:
        raise ConfigError(
            "mollify.n_sub < 2: the kernel would span fewer than two "
            "sample cells across its radius")
    etas = cfg["study"]["etas"]
    if not etas:
        raise ConfigError("study.etas must not be empty")
    guard = c["epsilon"] / 4.0 + 1e-12
    for eta in list(etas) + [cfg["field"].get("eta", 0.0)]:
        if eta > guard:
            raise ConfigError(
                f"eta = {eta} exceeds epsilon/4 = {c['epsilon'] / 4.0}: the "
                "mollifier support would leak across the cutoff bands")
    if not cfg["study"]["alphas"] or not cfg["study"]["seeds"]:
        raise ConfigError("study.alphas and study.seeds must not be empty")
    for a in cfg["study"]["alphas"]:
        if not 0.0 < a < 1.0:
            raise ConfigError(f"alpha = {a} outside (0, 1)")


def _build_geometry(cfg):
    dom = cfg["domain"]
    spec = {k: v for k, v in dom.items() if k != "nodes"}
    curve = build_curve(spec, dom["nodes"])
    g = cfg["grid"]
    chart = InteriorChart(curve, g["n_rho"], g["n_theta"])
    c = cfg["cutoffs"]
    cutoffs = build_cutoffs(c["delta"], c["epsilon"],
                            c["delta1"], c["delta2"], c["delta3"])
    collar = GeodesicChart(curve, c["delta"], g["collar_n_s"],
                           g["collar_n_theta"])
    return curve, chart, cutoffs, collar


def _make_field(cfg, chart):
    f = cfg["field"]
    kind = f["kind"]
    if kind == "rigid":
        return radial_flow(lambda r: r, chart), None
    if kind == "radial2":
        return radial_flow(lambda r: r**2, chart), None
    if kind == "zero":
        return GridField(chart, np.zeros(chart.points.shape),
                         pole=np.zeros(2)), None
    if kind == "rough":
        rough = make_rough_stream(f["alpha"], f["seed"], f["j_max"], chart)
        return rough.velocity_field(), rough
    raise ConfigError(f"unknown field.kind: {kind}")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_verify(cfg):
    c = cfg["cutoffs"]
    cutoffs = build_cutoffs(c["delta"], c["epsilon"],
                            c["delta1"], c["delta2"], c["delta3"])
    suites = verification.run_all(cutoffs=cutoffs)
    outdir = cfg["output"]
    os.makedirs(outdir, exist_ok=True)
    ok = all(s["passed"] for s in suites)
    report.write_json_report(os.path.join(outdir, "verify.json"),
                             {"command": "verify", "passed": ok,
                              "suites": suites})
    for s in suites:
        status = "ok" if s["passed"] else "FAIL"
        print(f"{s['name']:<10} {status}")
    return 0 if ok else 3


def cmd_solve(cfg):
    curve, chart, cutoffs, collar = _build_geometry(cfg)
    u, rough = _make_field(cfg, chart)
    outdir = cfg["output"]
    os.makedirs(outdir, exist_ok=True)
    fname = cfg["field"]["kind"]

    if rough is not None:
        from .mollify import mollify_velocity
        rv = mollify_velocity(u, cfg["field"]["eta"], cutoffs, collar,
                              psi=rough.stream_field(),
                              n_sub=cfg["mollify"]["n_sub"],
                              probe_n=cfg["mollify"]["probe_n"])
        sol = solve_pressure(rv, chart=chart, collar=collar, cutoffs=cutoffs,
                             tol=cfg["solver"]["tol"], source_id=fname)
        moll_diag = rv.diagnostics()
        u_for_trace = rv.u_eta
    else:
        sol = solve_pressure(u, chart=chart, collar=collar, cutoffs=cutoffs,
                             tol=cfg["solver"]["tol"], source_id=fname)
        moll_diag = None
        u_for_trace = u

    Pc = _collar_resample(sol.P, collar)
    tc = boundary_trace(Pc, u_for_trace, collar)

    report.write_field_csv(os.path.join(outdir, "p.csv"), sol.p)
    report.write_field_csv(os.path.join(outdir, "P.csv"), sol.P)
    report.write_csv(os.path.join(outdir, "trace.csv"), tc.as_rows(),
                     ["s", "h_minus2_distance"])

    payload = {
        "command": "solve", "field": cfg["field"],
        "grid": cfg["grid"],
        "solver": sol.report.as_record(),
        "trace": {"s": tc.s, "distances": tc.distances,
                  "wall_distance": tc.wall_distance, "slope": tc.slope},
        "invariants": sol.check_invariants(),
    }
    if rough is not None:
        plan = build_pair_plan(chart.points, seed=cfg["norms"]["plan_seed"],
                               n_random=cfg["norms"]["n_random"])
        from .norms import holder_norm
        from .pressure import tensor_square
        uu = holder_norm(tensor_square(u_for_trace), cfg["field"]["alpha"],
                         plan)
        hP = holder_norm(sol.P, cfg["field"]["alpha"], plan)
        payload["C_meas"] = hP.norm / uu.norm
        payload["norms"] = {"uu": uu.as_record(), "P": hP.as_record()}
        payload["mollify"] = moll_diag
    if cfg["field"]["kind"] == "rigid":
        r = np.linalg.norm(chart.points - chart.center, axis=-1)
        payload["oracle_error"] = float(
            np.max(np.abs(sol.p.values - (r**2 / 2 - 0.25))))
    report.write_json_report(os.path.join(outdir, "solve.json"), payload)
    print(f"wrote {outdir}/solve.json")
    return 0


def _study_worker(args):
    cfg, alpha, seed = args
    curve, chart, cutoffs, collar = _build_geometry(cfg)
    plan = build_pair_plan(chart.points, seed=cfg["norms"]["plan_seed"],
                           n_random=cfg["norms"]["n_random"])
    rough = make_rough_stream(alpha, seed, cfg["field"]["j_max"], chart)
    records = []
    prev = None
    for eta in sorted(cfg["study"]["etas"], reverse=True):
        try:
            rec, prev = eta_study_record(
                rough, eta, cutoffs, collar, plan, prev_p=prev,
                mollify_kwargs={"n_sub": cfg["mollify"]["n_sub"],
                                "probe_n": cfg["mollify"]["probe_n"]})
        except Exception as exc:
            rec = {"alpha": float(alpha), "seed": int(seed),
                   "eta": float(eta), "error": str(exc)}
        records.append(rec)
    return records


def cmd_study(cfg):
    tasks = [(cfg, alpha, seed) for alpha in cfg["study"]["alphas"]
             for seed in cfg["study"]["seeds"]]
    jobs = cfg["jobs"] or os.cpu_count() or 1
    ledger = EstimateLedger()
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for recs in pool.map(_study_worker, tasks):
                for r in recs:
                    ledger.append(r)
    else:
        for task in tasks:
            for r in _study_worker(task):
                ledger.append(r)

    outdir = cfg["output"]
    os.makedirs(outdir, exist_ok=True)
    records = ledger.sorted_records()
    columns = ["alpha", "seed", "eta", "n_rho", "n_theta", "uu_holder",
               "p_holder", "P_holder", "P_sup", "C_meas", "C1_meas",
               "plan_seed", "pair_count", "solver_iterations", "trace_max",
               "tangency_max", "divergence_max", "p_c0_step", "error"]
    report.write_records_csv(os.path.join(outdir, "ledger.csv"), records,
                             columns=columns)
    report.write_json_report(os.path.join(outdir, "ledger.json"),
                             {"command": "study", "config": cfg,
                              "records": records})
    failed = [r for r in records if "error" in r and r["error"]]
    print(f"{len(records)} runs, {len(failed)} failed -> {outdir}/ledger.csv")
    return 2 if failed else 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="pressure-lab", description=__doc__)
    parser.add_argument("command", choices=["verify", "solve", "study"])
    parser.add_argument("--config", default=None, help="YAML config path")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="override a config leaf (repeatable)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker pool size for study")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.overrides, args.out, args.jobs)
    except (ConfigError, GeometryError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        return cmd_study(cfg)
    except (ConfigError, FieldError, GeometryError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, MollifyError, PressureError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
