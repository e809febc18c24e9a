"""Command-line entry points and experiment I/O.

Configuration files are plain structured text, one ``section.key = value``
per line with ``#`` comments; unknown keys are rejected.  Outputs are small
diffable CSV series plus a key=value manifest, written with 17 significant
digits so a re-parse reproduces every value exactly.  The special config
name ``default`` selects the built-in defaults.

Determinism: fixed config and seed give byte-identical series (manifest
timestamp and wall-time lines excluded).  Thread count is controlled by the
ALPHASQG_THREADS environment variable.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, analysis, flow
from .analysis import RunRecord, TracerSeries, fit_exponential, inflation_report
from .particles import discretize, log_lipschitz_modulus, write_snapshot
from .fields import make_initial_data


class ConfigError(ValueError):
    """Invalid configuration file or parameter range."""


@dataclass
class ExperimentConfig:
    """All knobs of one experiment; every field has a validated range."""

    alpha: float = 0.5
    beta_amp: float = 0.1
    n0: int = 4
    N: int = 8
    nodes_per_bubble: int = 1024
    eps_kappa: float = 0.5
    dt_max: float = 1.0e-3
    cfl: float = 0.2
    T: float = 0.05
    output_cadence: float = 5.0e-3
    tracer_spec: str = "centers"
    seed: int = 0
    output_dir: str = "out"

    def as_dict(self) -> dict:
        return {key: getattr(self, name) for key, (name, _) in _CONFIG_KEYS.items()}

    def validate(self) -> "ExperimentConfig":
        import math

        def fail(key: str, why: str) -> None:
            raise ConfigError(f"config key {key}: {why}")

        if not 0.0 < self.alpha < 1.0:
            fail("data.alpha", f"must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta_amp < 0.25:
            fail("data.beta_amp", f"must lie in (0, 1/4), got {self.beta_amp}")
        if not 1 <= self.n0 <= self.N:
            fail("data.n0", f"need 1 <= n0 <= N, got n0={self.n0}, N={self.N}")
        g = math.isqrt(self.nodes_per_bubble)
        if g * g != self.nodes_per_bubble or g < 8:
            fail(
                "particles.nodes_per_bubble",
                f"must be a perfect square G^2 with G >= 8, got {self.nodes_per_bubble}",
            )
        if self.eps_kappa <= 0.0:
            fail("particles.eps_kappa", "must be positive")
        if self.dt_max <= 0.0:
            fail("flow.dt_max", "must be positive")
        if not 0.0 < self.cfl <= 1.0:
            fail("flow.cfl", "must lie in (0, 1]")
        if self.T < 0.0:
            fail("flow.T", "must be >= 0")
        if self.output_cadence <= 0.0:
            fail("flow.output_cadence", "must be positive")
        if self.tracer_spec not in ("centers", "none"):
            fail("tracers.spec", f"unknown tracer spec {self.tracer_spec!r}")
        if self.seed < 0:
            fail("run.seed", "must be >= 0")
        return self


_CONFIG_KEYS: dict[str, tuple[str, type]] = {
    "data.alpha": ("alpha", float),
    "data.beta_amp": ("beta_amp", float),
    "data.n0": ("n0", int),
    "data.N": ("N", int),
    "particles.nodes_per_bubble": ("nodes_per_bubble", int),
    "particles.eps_kappa": ("eps_kappa", float),
    "flow.dt_max": ("dt_max", float),
    "flow.cfl": ("cfl", float),
    "flow.T": ("T", float),
    "flow.output_cadence": ("output_cadence", float),
    "tracers.spec": ("tracer_spec", str),
    "run.seed": ("seed", int),
    "run.output_dir": ("output_dir", str),
}


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; 'default' gives the defaults."""
    cfg = ExperimentConfig()
    if str(path) == "default":
        return cfg.validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        name, typ = _CONFIG_KEYS[key]
        try:
            setattr(cfg, name, typ(value))
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: config key {key}: bad {typ.__name__} {value!r}"
            ) from exc
    return cfg.validate()


def config_text(cfg: ExperimentConfig) -> str:
    """Canonical text form (fixed key order, one key = value per line)."""
    return "".join(f"{key} = {value}\n" for key, value in cfg.as_dict().items())


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(config_text(cfg))


# ---------------------------------------------------------------------------
# series / manifest / report files
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_series(record: RunRecord, out_dir) -> None:
    """Persist a run record: series.csv, positions.csv, and manifest.txt.

    series.csv columns: t, holder_est, riesz_dist, then one ratio_<n> and
    one witness_<n> column per tracked bubble (ascending n).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ns = record.bubble_indices
    alpha = float(record.metadata.get("alpha", 0.5))
    header = (
        ["t", "holder_est", "riesz_dist"]
        + [f"ratio_{n}" for n in ns]
        + [f"witness_{n}" for n in ns]
    )
    ratio = {n: analysis.ratio_series(record, n) for n in ns}
    witness = {n: analysis.witness_quotient(record, n, alpha) for n in ns}
    with open(out / "series.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(record.times)):
            row = (
                [record.times[i], record.holder_estimate[i], record.riesz_to_initial[i]]
                + [ratio[n][i] for n in ns]
                + [witness[n][i] for n in ns]
            )
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    pos_header = (
        ["t"]
        + [f"phi1_{n}" for n in ns]
        + [f"phi2_{n}" for n in ns]
        + ["inner_phi1_max", "outer_phi1_min", "max_node_radius", "crossings"]
    )
    with open(out / "positions.csv", "w") as fh:
        fh.write(",".join(pos_header) + "\n")
        for i in range(len(record.times)):
            row = (
                [record.times[i]]
                + [record.tracer(n).positions[i, 0] for n in ns]
                + [record.tracer(n).positions[i, 1] for n in ns]
                + [
                    record.inner_phi1_max[i],
                    record.outer_phi1_min[i],
                    record.max_node_radius[i],
                    record.crossings[i],
                ]
            )
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    lines = []
    cfg = record.metadata.get("config", {})
    for key, value in cfg.items():
        lines.append(f"config.{key} = {value}")
    for key in ("dt", "n_steps", "n_nodes", "truncated", "crossings"):
        if key in record.metadata:
            lines.append(f"{key} = {record.metadata[key]}")
    lines.append(f"version = {__version__}")
    lines.append(f"wall_time_s = {record.metadata.get('wall_time_s', 0.0)}")
    lines.append(f"timestamp_utc = {datetime.now(timezone.utc).isoformat()}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_series(out_dir) -> RunRecord:
    """Rebuild a record from series.csv / positions.csv / manifest.txt."""
    out = Path(out_dir)
    manifest = {}
    for raw in (out / "manifest.txt").read_text().splitlines():
        if "=" in raw:
            key, _, value = raw.partition("=")
            manifest[key.strip()] = value.strip()
    alpha = float(manifest.get("config.data.alpha", 0.5))

    def load_csv(path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return header, data

    s_head, s_data = load_csv(out / "series.csv")
    p_head, p_data = load_csv(out / "positions.csv")
    ns = [int(c.split("_", 1)[1]) for c in s_head if c.startswith("ratio_")]
    col_s = {c: i for i, c in enumerate(s_head)}
    col_p = {c: i for i, c in enumerate(p_head)}
    tracers = []
    for n in ns:
        positions = np.stack(
            [p_data[:, col_p[f"phi1_{n}"]], p_data[:, col_p[f"phi2_{n}"]]], axis=1
        )
        witness0 = s_data[0, col_s[f"witness_{n}"]]
        theta0 = witness0 * positions[0, 1] ** alpha
        tracers.append(
            TracerSeries(
                bubble_index=n, x0=positions[0].copy(), theta0=theta0,
                positions=positions,
            )
        )
    return RunRecord(
        times=s_data[:, col_s["t"]],
        holder_estimate=s_data[:, col_s["holder_est"]],
        riesz_to_initial=s_data[:, col_s["riesz_dist"]],
        max_node_radius=p_data[:, col_p["max_node_radius"]],
        crossings=p_data[:, col_p["crossings"]],
        inner_phi1_max=p_data[:, col_p["inner_phi1_max"]],
        outer_phi1_min=p_data[:, col_p["outer_phi1_min"]],
        tracers=tracers,
        metadata={
            "alpha": alpha,
            "truncated": manifest.get("truncated", "False") == "True",
        },
    )


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alphasqg",
        description="Particle simulator and verification suite for the "
        "generalized SQG equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("gen-data", "discretize the initial data and write the node snapshot"),
        ("check-kernel", "sample the velocity's log-Lipschitz modulus"),
        ("check-velocity", "hyperbolic velocity-approximation residuals"),
        ("evolve", "integrate the flow and write diagnostic series"),
        ("inflate", "evolve plus growth/inflation report"),
        ("stability", "twin-run distance under an amplitude perturbation"),
        ("report", "re-render the report from stored series"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default="default", help="config file or 'default'")
        p.add_argument("--output-dir", default=None, help="override run.output_dir")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name in ("evolve", "inflate"):
            p.add_argument(
                "--wall-budget", type=float, default=None,
                help="wall-clock budget in seconds; truncates gracefully",
            )
        if name == "stability":
            p.add_argument(
                "--perturbation", type=float, default=1.0e-3,
                help="relative amplitude perturbation of the largest bubble",
            )
        if name == "check-velocity":
            p.add_argument(
                "--zero-data", action="store_true",
                help="zero the node values (residuals must vanish)",
            )
    return parser


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    out = Path(args.output_dir) if args.output_dir else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _cmd_gen_data(cfg, args) -> int:
    data = make_initial_data(cfg.n0, cfg.N, cfg.alpha, cfg.beta_amp)
    ens = discretize(data, cfg.nodes_per_bubble, cfg.eps_kappa)
    out = _out_dir(cfg, args)
    write_snapshot(ens, out / "ensemble.csv")
    _say(args, f"wrote {ens.n_nodes} nodes to {out / 'ensemble.csv'}")
    return 0


def _cmd_check_kernel(cfg, args) -> int:
    data = make_initial_data(cfg.n0, cfg.N, cfg.alpha, cfg.beta_amp)
    ens = discretize(data, cfg.nodes_per_bubble, cfg.eps_kappa)
    est = log_lipschitz_modulus(ens, pair_budget=600, seed=cfg.seed)
    out = _out_dir(cfg, args)
    _write_json(
        out / "kernel_check.json",
        {
            "c_sup": est.c_sup,
            "c_p95": est.c_p95,
            "separations": est.bin_separations.tolist(),
            "lipschitz_max": est.bin_lipschitz_max.tolist(),
            "log_lipschitz_max": est.bin_log_lipschitz_max.tolist(),
        },
    )
    _say(args, f"log-Lipschitz c_sup = {est.c_sup:.6g}, c_p95 = {est.c_p95:.6g}")
    return 0


def _cmd_check_velocity(cfg, args) -> int:
    data = make_initial_data(cfg.n0, cfg.N, cfg.alpha, cfg.beta_amp)
    ens = discretize(data, cfg.nodes_per_bubble, cfg.eps_kappa)
    if getattr(args, "zero_data", False):
        ens = dataclasses.replace(ens, values=np.zeros_like(ens.values))
    norm = analysis.ensemble_holder_norm(ens, seed=cfg.seed)
    probes = []
    for b in data.bubbles:
        r1, r2 = analysis.velocity_residual(ens, b.center_array, theta_norm=norm or None)
        probes.append({"n": b.n, "x": list(b.center), "r1": r1, "r2": r2})
    payload = {
        "theta_norm": norm,
        "probes": probes,
        "max_r1": max(p["r1"] for p in probes),
        "max_r2": max(p["r2"] for p in probes),
    }
    out = _out_dir(cfg, args)
    _write_json(out / "velocity_check.json", payload)
    _say(args, f"max residuals r1 = {payload['max_r1']:.6g}, r2 = {payload['max_r2']:.6g}")
    return 0


def _cmd_evolve(cfg, args) -> int:
    record = flow.run(cfg, wall_budget_s=getattr(args, "wall_budget", None))
    out = _out_dir(cfg, args)
    write_series(record, out)
    _say(args, f"evolved to t = {record.times[-1]:.6g} ({out / 'series.csv'})")
    return 0


def _cmd_inflate(cfg, args) -> int:
    record = flow.run(cfg, wall_budget_s=getattr(args, "wall_budget", None))
    out = _out_dir(cfg, args)
    write_series(record, out)
    report = inflation_report(record)
    _write_json(out / "report.json", report)
    _say(
        args,
        "growth factors: "
        + ", ".join(f"n={d['n']}: {d['growth']:.4g}" for d in report["tracers"]),
    )
    return 0


def _cmd_stability(cfg, args) -> int:
    result = flow.twin_run_distance(cfg, args.perturbation)
    out = _out_dir(cfg, args)
    with open(out / "stability.csv", "w") as fh:
        fh.write("t,distance\n")
        for t, d in zip(result.times, result.distances):
            fh.write(f"{_fmt(t)},{_fmt(d)}\n")
    positive = result.distances > 0.0
    if np.all(positive) and len(result.times) > 1:
        c_fit, r2 = fit_exponential(result.times, result.distances)
    else:
        c_fit, r2 = 0.0, 1.0
    _write_json(
        out / "stability.json",
        {"perturbation": args.perturbation, "c_fit": c_fit, "r_squared": r2},
    )
    _say(args, f"twin-run fit: c = {c_fit:.6g}, R^2 = {r2:.4f}")
    return 0


def _cmd_report(cfg, args) -> int:
    out = _out_dir(cfg, args)
    record = read_series(out)
    _write_json(out / "report.json", inflation_report(record))
    _say(args, f"re-rendered {out / 'report.json'}")
    return 0


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "check-kernel": _cmd_check_kernel,
    "check-velocity": _cmd_check_velocity,
    "evolve": _cmd_evolve,
    "inflate": _cmd_inflate,
    "stability": _cmd_stability,
    "report": _cmd_report,
}


def run_command(argv) -> int:
    """Dispatch a CLI invocation; returns the process exit code.

    0 on success, 1 on runtime failure, 2 on configuration errors.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure -> exit 1, per contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
