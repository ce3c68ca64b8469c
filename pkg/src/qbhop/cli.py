"""Command-line entry point: ``qbhop <subcommand> [flags]``.

Every output embeds the fully resolved configuration.  In CSV files it is a
block of ``#! key = value`` lines; in JSON it is the ``config`` object.  Either
file can be passed back with ``--config`` to reproduce the output exactly.

Precedence: command-line flags, then ``QBHOP_<KEY>`` environment variables,
then the config file, then built-in defaults.

Exit codes: 0 success, 1 configuration error, 2 analytics input out of regime.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analytics, hopper, localsearch, objective, simulator

ENV_PREFIX = "QBHOP_"
FLOAT_FMT = "%.12g"


class ConfigError(ValueError):
    """Bad flag, malformed config file or invalid parameter value."""


def _intlist(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return [int(p) for p in parts]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text) -> str:
    return str(text)


# key -> (parser, flag, help)
KEYS = {
    "na": (_intlist, "--na", "N_alpha (comma list for sweep)"),
    "nb": (_intlist, "--nb", "N_beta (comma list for sweep)"),
    "ng": (_intlist, "--ng", "N_gamma (comma list for sweep); marked count for perturb"),
    "kmax": (int, "--kmax", "largest rotation count in the sweep"),
    "objective": (_str, "--objective", "quadratic, doublewell, eggcrate or tabulated"),
    "basins": (_intlist, "--basins", "egg-crate basin count(s)"),
    "dim": (int, "--dim", "domain dimension"),
    "points": (int, "--points", "grid points per dimension"),
    "tilt": (float, "--tilt", "double-well tilt"),
    "gap": (float, "--gap", "egg-crate global depth gap"),
    "depths": (_str, "--depths", "egg-crate depth profile: single or graded"),
    "table": (_str, "--table", "CSV table for the tabulated objective"),
    "method": (_str, "--method", "local search: gd or cg"),
    "step": (float, "--step", "descent step size (default from the curvature bound)"),
    "L": (int, "--L", "descent steps per local search"),
    "Y": (float, "--Y", "threshold ordinate"),
    "delta": (float, "--delta", "small-error radius"),
    "err_samples": (int, "--err-samples", "error samples per grid point"),
    "mode": (_str, "--mode", "oracle mode: deterministic or stochastic"),
    "r": (int, "--r", "Grover rotations"),
    "shots": (int, "--shots", "GBS runs for the histogram"),
    "eps": (float, "--eps", "per-event perturbation size"),
    "lam": (float, "--lambda", "rotation budget growth factor"),
    "M": (float, "--M", "rotation budget cap (default sqrt(N))"),
    "algorithms": (_str, "--algorithms", "comma list from qbh, multistart, random"),
    "trials": (int, "--trials", "seeded trials"),
    "seed": (int, "--seed", "root seed"),
    "full_indices": (_bool, "--full-indices", "include alpha/gamma index lists"),
    "format": (_str, "--format", "csv or json"),
    "out": (_str, "--out", "output path (stdout when absent)"),
}

_OBJECTIVE_KEYS = ("objective", "basins", "dim", "points", "tilt", "gap", "depths", "table", "method", "step", "L")

COMMANDS = {
    "angles": dict(
        help="Grover angles for region counts",
        keys=("na", "nb", "ng"),
        defaults={"format": "json"},
    ),
    "sweep": dict(
        help="closed form and recurrence over a grid of counts and k",
        keys=("na", "nb", "ng", "kmax"),
        defaults={"kmax": 50, "format": "csv"},
    ),
    "regions": dict(
        help="classify grid points into alpha/beta/gamma",
        keys=_OBJECTIVE_KEYS + ("Y", "delta", "err_samples", "full_indices", "seed"),
        defaults={"objective": "doublewell", "dim": 1, "points": 64, "Y": 0.5, "delta": 0.0,
                  "err_samples": 32, "full_indices": False, "seed": 0, "format": "json"},
    ),
    "grover": dict(
        help="histogram of repeated GBS runs",
        keys=_OBJECTIVE_KEYS + ("Y", "delta", "err_samples", "mode", "r", "shots", "seed"),
        defaults={"objective": "eggcrate", "basins": [16], "dim": 2, "points": 32, "Y": 0.0,
                  "delta": 0.0, "err_samples": 32, "mode": "deterministic", "shots": 10000,
                  "seed": 0, "format": "json"},
    ),
    "perturb": dict(
        help="perturbed vs nominal GBS states",
        keys=("points", "ng", "r", "L", "eps", "trials", "seed"),
        defaults={"points": 1024, "ng": [16], "r": 2, "L": 3, "eps": 0.001, "trials": 100,
                  "seed": 0, "format": "csv"},
    ),
    "hop": dict(
        help="basin hopper and baselines, per-trial records",
        keys=_OBJECTIVE_KEYS + ("delta", "err_samples", "mode", "lam", "M", "algorithms", "trials", "seed"),
        defaults={"objective": "eggcrate", "basins": [8], "dim": 2, "points": 64, "delta": 0.0,
                  "err_samples": 32, "mode": "deterministic", "lam": 8.0 / 7.0,
                  "algorithms": "qbh,multistart,random", "trials": 50, "seed": 0, "format": "csv"},
    ),
    "bench": dict(
        help="algorithm comparison over basin counts with power-law fits",
        keys=_OBJECTIVE_KEYS + ("delta", "err_samples", "mode", "lam", "M", "algorithms", "trials", "seed"),
        defaults={"objective": "eggcrate", "basins": [2, 4, 8, 16], "dim": 2, "points": 64,
                  "delta": 0.0, "err_samples": 32, "mode": "deterministic", "lam": 8.0 / 7.0,
                  "algorithms": "qbh,multistart", "trials": 200, "seed": 0, "format": "csv"},
    ),
}

_COMMON = ("format", "out")


# ---------------------------------------------------------------- config


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qbhop", description="Quantum basin hopping experiments.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, info in COMMANDS.items():
        p = sub.add_parser(name, help=info["help"], description=info["help"])
        for key in info["keys"] + _COMMON:
            flag, help_ = KEYS[key][1], KEYS[key][2]
            p.add_argument(flag, dest=key, default=argparse.SUPPRESS, metavar=key.upper(), help=help_)
        p.add_argument("--config", default=argparse.SUPPRESS, help="config file or earlier output")
    return parser


def read_config_file(path) -> dict:
    """Flat ``key = value`` pairs from a config file, JSON output or CSV output."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc.msg})") from None
        data = data.get("config", data)
        return {k: v for k, v in data.items() if k != "command"}
    lines = text.splitlines()
    embedded = [ln[2:] for ln in lines if ln.startswith("#!")]
    body = embedded if embedded else [ln for ln in lines if not ln.lstrip().startswith("#")]
    out = {}
    for n, line in enumerate(body, 1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {n} is not 'key = value': {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "command":
            continue
        out[key] = value
    return out


def _convert(key, value):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return KEYS[key][0](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def resolve_config(command: str, flags: dict, env=None) -> dict:
    """Merge defaults < config file < environment < flags for ``command``."""
    env = os.environ if env is None else env
    info = COMMANDS[command]
    allowed = set(info["keys"]) | set(_COMMON)
    cfg = dict(info["defaults"])
    if "config" in flags:
        for key, value in read_config_file(flags["config"]).items():
            value = _convert(key, value)
            if key in allowed and key != "out":
                cfg[key] = value
    for key in sorted(allowed):
        name = ENV_PREFIX + key.upper()
        if name in env:
            cfg[key] = _convert(key, env[name])
    for key, value in flags.items():
        if key != "config":
            cfg[key] = _convert(key, value)
    if cfg.get("format") not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.get('format')!r}")
    return cfg


def _echo_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(command: str, cfg: dict) -> dict:
    """The resolved config as written into outputs (no output path, no unset keys)."""
    out = {"command": command}
    for key in sorted(cfg):
        if key == "out" or cfg[key] is None:
            continue
        out[key] = cfg[key]
    return out


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    return str(v)


def _jsonable(obj, exact=False):
    """Plain JSON types; results are cut to 12 significant digits, configs kept exact."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v, exact) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v, exact) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return v if exact else float(FLOAT_FMT % v)
    return obj


def render_csv(config: dict, columns, rows) -> str:
    buf = io.StringIO()
    for key, value in config.items():
        buf.write(f"#! {key} = {_echo_value(value)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def render_json(config: dict, payload: dict) -> str:
    data = dict(_jsonable(payload))
    data["config"] = _jsonable(config, exact=True)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: str | None, stdout):
    if out is None:
        stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def emit(cfg: dict, config: dict, columns, rows, payload: dict, stdout) -> None:
    """Write rows as CSV (with a JSON summary sidecar) or everything as JSON."""
    out = cfg.get("out")
    if cfg["format"] == "json":
        body = dict(payload)
        if columns is not None:
            body["rows"] = [dict(zip(columns, r)) for r in rows]
        _emit(render_json(config, body), out, stdout)
        return
    if columns is None:
        columns = sorted(payload)
        rows = [[payload[c] for c in columns]]
        payload = {}
    _emit(render_csv(config, columns, rows), out, stdout)
    if out is not None and payload:
        _emit(render_json(config, payload), out + ".summary.json", stdout)


# ---------------------------------------------------------------- commands


def _single(cfg, key):
    vals = cfg.get(key)
    if vals is None:
        raise ConfigError(f"--{key} is required")
    if len(vals) != 1:
        raise ConfigError(f"--{key} takes a single value here")
    return vals[0]


def cmd_angles(cfg):
    counts = analytics.RegionCounts(_single(cfg, "na"), _single(cfg, "nb"), _single(cfg, "ng"))
    return None, None, analytics.angles_dict(counts)


def cmd_sweep(cfg):
    for key in ("na", "nb", "ng"):
        if cfg.get(key) is None:
            raise ConfigError(f"--{key} is required")
    if cfg["kmax"] < 0:
        raise ConfigError("kmax must be non-negative")
    triples = [(a, b, g) for a in cfg["na"] for b in cfg["nb"] for g in cfg["ng"]]
    for t in triples:
        try:
            analytics.check_regime(t)
        except analytics.OutOfRegimeError as exc:
            raise analytics.OutOfRegimeError(f"counts {t}: {exc}") from None
    rows = list(analytics.sweep_rows(triples, cfg["kmax"]))
    return analytics.SWEEP_COLUMNS, rows, {}


def _build_objective(cfg):
    basins = cfg.get("basins") or [4]
    spec = objective.make_objective(cfg["objective"], dim=cfg["dim"], basins=basins[0],
                                    tilt=cfg.get("tilt", 0.0), gap=cfg.get("gap", 0.04),
                                    depths=cfg.get("depths", "single"), table=cfg.get("table"))
    return spec


def _resolve_descent(cfg, spec):
    """Fill in step and L from the objective when they were not given."""
    if cfg.get("step") is None:
        cfg["step"] = spec.default_step()
    if cfg.get("L") is None:
        cfg["L"] = 40 if spec.kind == "eggcrate" else 30
    if not objective.lattice_step_ok(spec, cfg["step"]):
        print(f"qbhop: warning: step {cfg['step']:g} exceeds 1/curvature bound "
              f"{1.0 / spec.curvature_bound():g}; descent may not converge", file=sys.stderr)
    return localsearch.DescentConfig(cfg["method"], cfg["step"], cfg["L"])


def _grid(cfg, spec):
    if spec.kind == "tabulated":
        cfg["points"] = None
        cfg["dim"] = spec.dim
        return objective.DomainGrid(spec.domain, spec.params["points_per_dim"])
    return objective.DomainGrid(spec.domain, (cfg["points"],) * spec.dim)


def _fill_objective_defaults(cfg):
    cfg.setdefault("method", "gd")
    cfg.setdefault("tilt", 0.0)
    cfg.setdefault("gap", 0.04)
    cfg.setdefault("depths", "single")
    if cfg["objective"] != "eggcrate":
        for key in ("basins", "gap", "depths"):
            cfg.pop(key, None)
    if cfg["objective"] != "doublewell":
        cfg.pop("tilt", None)
    if cfg["objective"] != "tabulated":
        cfg.pop("table", None)


def cmd_regions(cfg):
    _fill_objective_defaults(cfg)
    spec = _build_objective(cfg)
    dcfg = _resolve_descent(cfg, spec)
    grid = _grid(cfg, spec)
    part = localsearch.classify_regions(spec, dcfg, grid, cfg["Y"], cfg["delta"],
                                        cfg["err_samples"], cfg["seed"])
    payload = part.to_dict(cfg["full_indices"])
    payload.update(n_total=part.n_total, Y=cfg["Y"], delta=cfg["delta"])
    return None, None, payload


def _auto_rotations(counts) -> int:
    try:
        return int(round(analytics.optimal_rotation_count(counts)))
    except analytics.OutOfRegimeError:
        return 0


def cmd_grover(cfg):
    _fill_objective_defaults(cfg)
    spec = _build_objective(cfg)
    dcfg = _resolve_descent(cfg, spec)
    grid = _grid(cfg, spec)
    problem = hopper.make_problem(spec, dcfg, grid, cfg["delta"], cfg["err_samples"], cfg["seed"], cfg["mode"])
    oracle = problem.oracle(cfg["Y"])
    n = problem.n_points
    counts = (n - oracle.marked.size - oracle.flaky.size, oracle.flaky.size, oracle.marked.size)
    if cfg.get("r") is None:
        cfg["r"] = _auto_rotations(counts)
    if cfg["shots"] < 1:
        raise ConfigError("shots must be positive")
    gcfg = simulator.GbsConfig(cfg["Y"], cfg["r"], dcfg.steps, cfg["mode"])
    idx = simulator.sample_gbs(gcfg, oracle, cfg["shots"], cfg["seed"])
    uniq, cnt = np.unique(idx, return_counts=True)
    hist = {str(int(i)): c / cfg["shots"] for i, c in zip(uniq, cnt)}
    observed = float(np.isin(idx, oracle.marked).mean())
    payload = {
        "n_points": n, "n_marked": counts[2], "n_flaky": counts[1], "rotations": cfg["r"],
        "shots": cfg["shots"], "histogram": hist, "observed_marked_frequency": observed,
        "predicted_marked_probability": analytics.success_probability(counts, cfg["r"])
        if counts[1] == 0 else None,
    }
    try:
        payload["bound_squared"] = max(analytics.gamma_amplitude_lower_bound(counts, cfg["r"]), 0.0) ** 2
    except analytics.OutOfRegimeError:
        payload["bound_squared"] = None
    return None, None, payload


def cmd_perturb(cfg):
    n, ng = cfg["points"], _single(cfg, "ng")
    if not 0 <= ng <= n:
        raise ConfigError("ng must lie in [0, points]")
    oracle = simulator.OracleSpec(n, np.arange(ng))
    gcfg = simulator.GbsConfig(0.0, cfg["r"], cfg["L"])
    norms = simulator.perturbation_experiment(gcfg, oracle, cfg["eps"], cfg["trials"], cfg["seed"])
    bound = simulator.perturbation_bound(cfg["r"], cfg["L"], cfg["eps"])
    rows = [(t, v, bound) for t, v in enumerate(norms)]
    payload = {"bound": bound, "max_norm": float(norms.max()), "min_norm": float(norms.min()),
               "mean_norm": float(norms.mean()), "all_below_bound": bool(np.all(norms < bound))}
    return ("trial", "norm", "bound"), rows, payload


TRIAL_COLUMNS = ("trial", "seed", "algorithm", "B", "N", "queries", "queries_to_global",
                 "found_global", "final_y", "outer_iterations")


def _parse_algorithms(text):
    algs = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in algs if a not in hopper.ALGORITHMS]
    if bad or not algs:
        raise ConfigError(f"unknown algorithm(s) {bad}; choose from {hopper.ALGORITHMS}")
    return algs


def _run_hop(cfg, fit):
    _fill_objective_defaults(cfg)
    algs = _parse_algorithms(cfg["algorithms"])
    basins = cfg.get("basins") or [1]
    if cfg["objective"] != "eggcrate" and len(basins) > 1:
        raise ConfigError("several basin counts need the eggcrate objective")
    rows, summary = [], {}
    for B in basins:
        # step, L and M left unset are derived per basin count and not echoed
        cfg_b = dict(cfg, basins=[B])
        spec = _build_objective(cfg_b)
        dcfg = _resolve_descent(cfg_b, spec)
        grid = _grid(cfg_b, spec)
        problem = hopper.make_problem(spec, dcfg, grid, cfg["delta"], cfg["err_samples"],
                                      cfg["seed"], cfg["mode"])
        hcfg = hopper.HopperConfig(cfg["lam"], cfg.get("M"))
        for alg in algs:
            results = hopper.run_trials(problem, alg, cfg["trials"], cfg["seed"], hcfg)
            for t, (seed, rec) in enumerate(results):
                rows.append((t, seed, alg, B, problem.n_points, rec.queries, rec.queries_to_global,
                             rec.found_global, rec.final_y, rec.outer_iterations))
            summary.setdefault(alg, {})[str(B)] = hopper.summarize([r for _, r in results])
    payload = {"summary": summary}
    if fit:
        fits = {}
        for alg, per_b in summary.items():
            Bs = [int(b) for b in per_b]
            fits[alg] = {}
            for stat in ("mean_queries_to_global", "median_queries_to_global"):
                ys = [per_b[str(b)][stat] for b in Bs]
                if len(Bs) >= 2 and all(np.isfinite(ys)) and all(y > 0 for y in ys):
                    exponent, prefactor = hopper.fit_power_law(Bs, ys)
                    fits[alg][stat] = {"exponent": exponent, "prefactor": prefactor}
                else:
                    fits[alg][stat] = None
        payload["fits"] = fits
    return TRIAL_COLUMNS, rows, payload


def cmd_hop(cfg):
    return _run_hop(cfg, fit=False)


def cmd_bench(cfg):
    return _run_hop(cfg, fit=True)


HANDLERS = {
    "angles": cmd_angles, "sweep": cmd_sweep, "regions": cmd_regions, "grover": cmd_grover,
    "perturb": cmd_perturb, "hop": cmd_hop, "bench": cmd_bench,
}


def main(argv=None, stdout=None, env=None) -> int:
    stdout = stdout or sys.stdout
    try:
        ns = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(ns).items() if k != "command"}
        cfg = resolve_config(ns.command, flags, env)
        columns, rows, payload = HANDLERS[ns.command](cfg)
        emit(cfg, echo_config(ns.command, cfg), columns, rows, payload, stdout)
    except analytics.OutOfRegimeError as exc:
        print(f"qbhop: out of regime: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, KeyError, IndexError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"qbhop: error: {msg}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
