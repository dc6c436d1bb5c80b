"""Command-line driver: ``stochnls {simulate,converge,residual,depend,moments,noise-check}``.

Parameters come from built-in defaults, then an optional flat INI file
(``--config``, keys in a ``[stochnls]`` section or at top level), then flags.
Every output file embeds a run manifest; ``manifest.json`` additionally lists
SHA-256 digests of all files written.

Exit codes: 0 success, 2 configuration error, 3 blow-up, 4 solver divergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    ANALYTIC_FUNCTIONS,
    default_workers,
    exp_moment_probe,
    initial_dependence_study,
    lp_error,
    noise_scaling,
    residual_study,
    run_coupled_ensemble,
)
from .functionals import FunctionalReport
from .grid import UniformGrid, format_float, to_record
from .noise import BASES, COSINE, SpectralCovariance, covariance_matrix, noise_matrix, write_noise_path_csv
from .scheme import BlowUp, FixedPointDiverged, SchemeConfig, evolve, parse_profile, write_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_DIVERGED = 4

WORKERS_ENV = "STOCHNLS_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _int_list(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _float_list(text):
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


# name -> (parser, default)
SCHEME_KEYS = {
    "n": (int, 63),
    "dt": (float, 1e-4),
    "t": (float, 0.5),
    "lambda": (int, -1),
    "modes": (int, 16),
    "decay": (float, 12.0),
    "basis": (str, COSINE),
    "eigenvalues": (_float_list, None),
    "seed": (int, 20240607),
    "initial": (str, "sin"),
    "fp_tol": (float, 1e-12),
    "fp_max_iter": (int, 100),
    "fp_damping": (float, 1.0),
    "blowup_threshold": (float, 1e6),
}

COMMAND_KEYS = {
    "simulate": {"dump_every": (int, 100), "report_every": (int, 1), "noise_dump": (int, 0)},
    "converge": {
        "coarse": (_int_list, [15, 31, 63]),
        "fine": (int, 511),
        "samples": (int, 64),
        "min_refinement": (int, 4),
        "p": (_float_list, [2.0, 4.0]),
    },
    "residual": {"function": (str, "sin"), "grids": (_int_list, [15, 31, 63, 127])},
    "depend": {
        "kind": (str, "initial"),
        "deltas": (_float_list, [1e-3, 1e-2, 1e-1]),
        "direction": (str, "sin:2"),
        "v0": (str, None),
        "eps": (_float_list, [0.05, 0.1, 0.2, 0.4]),
        "samples": (int, 64),
    },
    "moments": {"samples": (int, 128), "q": (_float_list, [1.0, 2.0])},
    "noise-check": {"increments": (int, 100_000), "pairs": (int, 20), "check_seed": (int, 7)},
}


def _normalize(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path: str | Path) -> dict:
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text if text.lstrip().startswith("[") else "[stochnls]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[_normalize(key)] = value
    return out


def resolve(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge defaults, config file and flags; parse and validate every field."""
    schema = {**SCHEME_KEYS, **COMMAND_KEYS[command]}
    cfg = {}
    for key, (kind, default) in schema.items():
        raw = flag_values.get(key)
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            cfg[key] = default
            continue
        try:
            cfg[key] = kind(raw) if not isinstance(raw, (list, tuple)) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from exc
    unknown = sorted(set(file_values) - set(schema) - {"workers", "out", "format"})
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown configuration key for '{command}'")
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    checks = [
        ("n", cfg["n"] >= 1, "must be a positive integer"),
        ("dt", cfg["dt"] > 0, "must be positive"),
        ("t", cfg["t"] >= 0, "must be nonnegative"),
        ("dt", cfg["t"] == 0 or cfg["dt"] <= cfg["t"], "must not exceed t"),
        ("lambda", cfg["lambda"] in (1, -1), "must be 1 (focusing) or -1 (defocusing)"),
        ("modes", cfg["modes"] >= 0, "must be nonnegative"),
        ("basis", cfg["basis"] in BASES, f"must be one of {', '.join(BASES)}"),
        ("fp_tol", cfg["fp_tol"] > 0, "must be positive"),
        ("fp_max_iter", cfg["fp_max_iter"] >= 1, "must be at least 1"),
        ("fp_damping", 0 < cfg["fp_damping"] <= 1, "must lie in (0, 1]"),
        ("blowup_threshold", cfg["blowup_threshold"] > 0, "must be positive"),
    ]
    if cfg.get("eigenvalues") is not None:
        checks.append(("eigenvalues", all(q >= 0 for q in cfg["eigenvalues"]), "must be nonnegative"))
    if "samples" in cfg:
        checks.append(("samples", cfg["samples"] >= 1, "must be at least 1"))
    if "coarse" in cfg:
        checks.append(("coarse", len(cfg["coarse"]) >= 3, "need ≥ 3 grids"))
        checks.append(("coarse", all(n >= 1 for n in cfg["coarse"]), "grid sizes must be positive"))
    if "grids" in cfg:
        checks.append(("grids", len(cfg["grids"]) >= 3, "need ≥ 3 grids"))
        checks.append(("function", cfg["function"] in ANALYTIC_FUNCTIONS, f"must be one of {', '.join(ANALYTIC_FUNCTIONS)}"))
    if "kind" in cfg:
        checks.append(("kind", cfg["kind"] in ("initial", "noise"), "must be 'initial' or 'noise'"))
    if "increments" in cfg:
        checks.append(("increments", cfg["increments"] >= 2, "must be at least 2"))
    for key in ("dump_every", "report_every"):
        if key in cfg:
            checks.append((key, cfg[key] >= 0 if key == "dump_every" else cfg[key] >= 1, "out of range"))
    for key, ok, message in checks:
        if not ok:
            raise ConfigError(f"{key}: {message}")
    for key in ("initial", "direction", "v0"):
        if cfg.get(key):
            try:
                parse_profile(cfg[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc


def covariance_from(cfg: dict) -> SpectralCovariance:
    if cfg.get("eigenvalues") is not None:
        return SpectralCovariance(tuple(cfg["eigenvalues"]), None, cfg["basis"])
    return SpectralCovariance.power_law(cfg["modes"], cfg["decay"], basis_kind=cfg["basis"])


def scheme_from(cfg: dict, n: int | None = None) -> SchemeConfig:
    try:
        return SchemeConfig(
            n_interior=cfg["n"] if n is None else n,
            dt=cfg["dt"],
            t_final=cfg["t"],
            lam=cfg["lambda"],
            covariance=covariance_from(cfg),
            seed=cfg["seed"],
            fp_tol=cfg["fp_tol"],
            fp_max_iter=cfg["fp_max_iter"],
            fp_damping=cfg["fp_damping"],
            blowup_threshold=cfg["blowup_threshold"],
        )
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from exc


# Output handling.


class Run:
    """Collects outputs of one command and writes them with the manifest."""

    def __init__(self, command: str, cfg: dict, out: Path, workers: int):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.workers = workers
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.files: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def manifest(self) -> dict:
        """The reproducible part of the manifest, embedded in every output file.

        Wall times, the worker count and digests vary between identical reruns,
        so they live only in ``manifest.json``.
        """
        return {
            "tool": "stochnls",
            "version": __version__,
            "command": self.command,
            "config": _plain(self.cfg),
            "seed": self.cfg["seed"],
        }

    def header_lines(self) -> list[str]:
        return ["manifest " + json.dumps(self.manifest(), sort_keys=True)]

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def write_json(self, name: str, payload: dict) -> Path:
        p = self.path(name)
        p.write_text(json.dumps({"manifest": self.manifest(), "payload": _plain(payload)}, sort_keys=True, indent=1) + "\n")
        return p

    def write_csv(self, name: str, body: str) -> Path:
        p = self.path(name)
        p.write_text("".join(f"# {line}\n" for line in self.header_lines()) + body)
        return p

    def write_text(self, name: str, body: str) -> Path:
        p = self.path(name)
        p.write_text(body)
        return p

    def finish(self, status: str) -> Path:
        manifest = self.manifest()
        manifest["started"] = self.started
        manifest["workers"] = self.workers
        manifest["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        manifest["status"] = status
        manifest["outputs"] = {p.name: sha256_file(p) for p in self.files if p.exists()}
        path = self.out / "manifest.json"
        path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
        return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def payload_lines(path: str | Path) -> list[str]:
    """Numeric payload of an output file: CSV rows without comments, or the JSON ``payload``."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return [json.dumps(json.loads(text)["payload"], sort_keys=True)]
    return [line for line in text.splitlines() if not line.startswith("#")]


def _reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FunctionalReport.columns())
    for r in reports:
        w.writerow([format_float(v) for v in r.row()])
    return buf.getvalue()


# Commands.


def cmd_simulate(cfg: dict, run: Run, fmt: str) -> int:
    scheme = scheme_from(cfg)
    initial = scheme.grid.sample(parse_profile(cfg["initial"]))
    status, code = "ok", EXIT_OK
    try:
        state = evolve(scheme, initial, report_every=cfg["report_every"], snapshot_every=cfg["dump_every"] or None)
    except BlowUp as exc:
        state, status, code = exc.state, f"blow-up at t={exc.t:.17g}", EXIT_BLOWUP
        print(f"blow-up: {exc}", file=sys.stderr)
    except FixedPointDiverged as exc:
        state, status, code = exc.state, f"solver diverged at t={exc.t:.17g}", EXIT_DIVERGED
        print(f"solver diverged: {exc}", file=sys.stderr)
    snapshots = state.snapshots if state.snapshots else [(0, 0.0, initial)]
    if fmt == "json":
        run.write_json(
            "trajectory.json",
            {
                "cfg_hash": scheme.digest(),
                "snapshots": [{"step": n, "t": t, "record": to_record(u).tolist()} for n, t, u in snapshots],
            },
        )
    else:
        traj = run.path(f"trajectory.{'bin' if fmt == 'bin' else 'csv'}")
        write_trajectory(traj, scheme, snapshots, fmt, run.header_lines())
        if fmt == "bin":
            run.files.append(Path(str(traj) + ".header"))
    run.write_csv("functionals.csv", _reports_csv(state.reports))
    if cfg["noise_dump"]:
        p = run.path("noise_path.csv")
        write_noise_path_csv(p, scheme.seed, 0, min(cfg["noise_dump"], scheme.n_steps), scheme.covariance.truncation, run.header_lines())
    summary = {
        "status": status,
        "t_reached": state.t,
        "steps": state.step_index,
        "max_charge_drift": state.max_charge_drift,
        "sup_linf": state.sup_linf,
    }
    run.write_json("summary.json", summary)
    run.finish(status)
    print(f"simulate: {status}; t={state.t:.6g}, steps={state.step_index}, max relative charge drift={state.max_charge_drift:.3e}")
    return code


def cmd_converge(cfg: dict, run: Run, fmt: str) -> int:
    fine = scheme_from(cfg, cfg["fine"])
    coarse = [scheme_from(cfg, n) for n in cfg["coarse"]]
    try:
        record = run_coupled_ensemble(
            coarse, fine, cfg["samples"], parse_profile(cfg["initial"]), run.workers, cfg["min_refinement"]
        )
    except ValueError as exc:
        raise ConfigError(f"coarse: {exc}") from exc
    payload = record.to_dict()
    payload["lp_errors"] = {format_float(p): lp_error(record, p).tolist() for p in cfg["p"]}
    run.write_json("convergence.json", payload)
    run.write_csv("convergence.csv", record.to_csv())
    lines = [
        f"strong error vs reference N={record.reference_n}, M={record.n_samples} samples"
        f" (excluded {record.excluded}, fraction {record.excluded_fraction:.3f}{'' if record.valid else ', INVALID'})",
    ]
    for n, h, e, s in zip(record.n_interior, record.h, record.errors, record.stderr):
        lines.append(f"  N={n:5d} h={h:.6g} error={e:.6e} +- {s:.2e}")
    if record.order is not None:
        lo, hi = record.order_ci
        lines.append(f"fitted order {record.order:.4f} (95% bootstrap CI [{lo:.4f}, {hi:.4f}])")
    lines.append(f"max relative charge drift {record.max_charge_drift:.3e}; energy bounds held: {record.energy_bounds_ok}")
    summary = "\n".join(lines) + "\n"
    run.write_text("summary.txt", summary)
    run.finish("ok")
    print(summary, end="")
    return EXIT_OK


def cmd_residual(cfg: dict, run: Run, fmt: str) -> int:
    report = residual_study(cfg["function"], cfg["grids"])
    run.write_json("residual.json", report.to_dict())
    run.write_csv("residual.csv", report.to_csv())
    run.finish("ok")
    order = "n/a (residual identically zero)" if report.order is None else f"{report.order:.4f}"
    print(f"residual of {report.function_id}: sup norms {[f'{r:.3e}' for r in report.residual_linf]}, fitted order {order}")
    return EXIT_OK


def cmd_depend(cfg: dict, run: Run, fmt: str) -> int:
    scheme = scheme_from(cfg)
    initial = parse_profile(cfg["initial"])
    if cfg["kind"] == "noise":
        record = noise_scaling(cfg["eps"], scheme, cfg["samples"], initial, run.workers)
    elif cfg["v0"]:
        other = parse_profile(cfg["v0"])
        u0 = scheme.grid.sample(initial)
        v0 = scheme.grid.sample(other)
        diff = lambda x: other(x) - initial(x)  # noqa: E731
        record = initial_dependence_study(scheme, [1.0], cfg["samples"], initial, diff, run.workers)
        record.input_distance = [float(np.sqrt(scheme.grid.step * np.sum(np.abs(u0.values - v0.values) ** 2)))]
    else:
        direction = parse_profile(cfg["direction"])
        record = initial_dependence_study(scheme, cfg["deltas"], cfg["samples"], initial, direction, run.workers)
    run.write_json(f"depend_{record.kind}.json", record.to_dict())
    run.write_csv(f"depend_{record.kind}.csv", record.to_csv())
    run.finish("ok")
    print(f"{record.kind} dependence: errors {[f'{e:.4e}' for e in record.errors]}")
    if record.slope is not None:
        print(f"fitted slope {record.slope:.4f} (95% bootstrap CI [{record.slope_ci[0]:.4f}, {record.slope_ci[1]:.4f}])")
    return EXIT_OK


def cmd_moments(cfg: dict, run: Run, fmt: str) -> int:
    scheme = scheme_from(cfg)
    est = exp_moment_probe(scheme, cfg["samples"], parse_profile(cfg["initial"]), cfg["q"], run.workers)
    run.write_json("moments.json", {"q": list(est), "estimate": list(est.values()), "samples": cfg["samples"]})
    run.finish("ok")
    for q, v in est.items():
        print(f"q={q:g}: E[exp(q int ||u0|| ||d+u|| dr)]^(1/q) = {v:.6g}")
    return EXIT_OK


def covariance_check(cfg: dict) -> dict:
    """Empirical vs closed-form increment covariance at random node pairs."""
    cov = covariance_from(cfg)
    grid = UniformGrid(cfg["n"])
    dt = cfg["dt"]
    m = cfg["increments"]
    mat = noise_matrix(cov, grid)
    xi = np.random.Generator(np.random.Philox(key=[cfg["seed"], cfg["check_seed"]])).standard_normal((m, cov.truncation))
    dw = np.sqrt(dt) * xi @ mat
    exact = covariance_matrix(cov, grid, dt)
    pick = np.random.Generator(np.random.PCG64(cfg["check_seed"]))
    interior = np.arange(1, grid.n_interior + 1)
    rows = []
    for _ in range(cfg["pairs"]):
        a, b = pick.choice(interior, size=2, replace=True)
        prod = dw[:, a] * dw[:, b]
        est = prod.mean()
        se = prod.std(ddof=1) / np.sqrt(m)
        z = (est - exact[a, b]) / se if se > 0 else 0.0
        rows.append({"l": int(a), "m": int(b), "empirical": float(est), "exact": float(exact[a, b]), "stderr": float(se), "z": float(z), "pass": bool(abs(z) <= 3.0)})
    return {"pairs": rows, "all_pass": all(r["pass"] for r in rows), "increments": m, "K": cov.truncation, "basis": cov.basis_kind}


def cmd_noise_check(cfg: dict, run: Run, fmt: str) -> int:
    result = covariance_check(cfg)
    run.write_json("noise_check.json", result)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l", "m", "empirical", "exact", "stderr", "z", "pass"])
    for r in result["pairs"]:
        w.writerow([r["l"], r["m"], format_float(r["empirical"]), format_float(r["exact"]), format_float(r["stderr"]), format_float(r["z"]), int(r["pass"])])
    run.write_csv("noise_check.csv", buf.getvalue())
    run.finish("ok")
    print(f"noise covariance check ({result['increments']} increments, K={result['K']}): {'pass' if result['all_pass'] else 'FAIL'}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "residual": cmd_residual,
    "depend": cmd_depend,
    "moments": cmd_moments,
    "noise-check": cmd_noise_check,
}

CSV_HELP = {
    "simulate": "outputs trajectory.csv (step,t,N,h,re_0,im_0,...) and functionals.csv (t,charge,energy_h,lyapunov_2,h1_seminorm,linf,gn_slack)",
    "converge": "outputs convergence.csv (N,h,error,stderr,fit), convergence.json and summary.txt",
    "residual": "outputs residual.csv (N,h,residual_linf) and residual.json",
    "depend": "outputs depend_<kind>.csv (size,input_distance,error,stderr) and JSON",
    "moments": "outputs moments.json",
    "noise-check": "outputs noise_check.csv (l,m,empirical,exact,stderr,z,pass) and JSON",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochnls", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=CSV_HELP[name], description=CSV_HELP[name])
        p.add_argument("--config", help="flat INI-style key = value file")
        p.add_argument("--workers", type=int, help=f"worker processes (env {WORKERS_ENV}; default: available CPUs)")
        p.add_argument("--out", default=None, help="output directory (default ./out/<command>)")
        p.add_argument("--format", choices=["csv", "json", "bin"], default="csv", help="trajectory format for simulate")
        for key in {**SCHEME_KEYS, **COMMAND_KEYS[name]}:
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, default=None, help=argparse.SUPPRESS if key in ("fp_damping",) else None)
    return parser


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"workers: {WORKERS_ENV}={env!r} is not an integer")
    return default_workers()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "workers", "out", "format")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(args.command, file_values, flags)
        workers = resolve_workers(args.workers if args.workers is not None else _opt_int(file_values.get("workers")))
        out = Path(args.out or file_values.get("out") or Path("out") / args.command)
        run = Run(args.command, cfg, out, workers)
        return COMMANDS[args.command](cfg, run, args.format)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FixedPointDiverged as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def _opt_int(value):
    return None if value is None else int(value)


if __name__ == "__main__":
    sys.exit(main())
