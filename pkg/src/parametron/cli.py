"""Command-line front end.

    parametron run cat-creation --config fig3a.cfg --out results/
    parametron rz-gate --config s3.cfg --out results/ --figures

Configs are INI files with flat sections. Frequencies are given as f/2pi
with explicit unit suffixes and converted to rad/ns once, here.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .model import NROT, RWA

log = logging.getLogger("parametron")

SCENARIOS = (
    "cat-creation",
    "pump-sweep",
    "delta0-sweep",
    "rx-gate",
    "rz-gate",
    "decay-study",
    "convergence",
    "wigner",
)


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = f" (key '{key}'" + (f", line {line})" if line else ")") if key else ""
        super().__init__(message + where)
        self.key = key
        self.line = line


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _words(text: str) -> tuple[str, ...]:
    return tuple(w for w in text.replace(",", " ").split())


# section -> key -> (parser, positive-only)
SCHEMA = {
    "experiment": {"scenario": (str, False)},
    "model": {
        "beta0_over_2pi_mhz": (float, True),
        "chi_over_2pi_mhz": (float, True),
        "omega_p_over_2pi_ghz": (float, True),
        "delta_over_2pi_mhz": (float, False),
        "delta0_over_2pi_mhz": (float, False),
        "dim": (int, True),
    },
    "schedule": {
        "detuning_mode": (_words, False),
        "t_ramp_ns": (_floats, True),
        "t_gate_ns": (float, True),
        "drive_scale": (float, False),
    },
    "sweep": {
        "omega_p_over_2pi_ghz": (_floats, True),
        "delta0_over_2pi_mhz": (_floats, False),
        "kappa_over_2pi_khz": (_floats, False),
    },
    "numerics": {
        "dynamics": (str, False),
        "dt_fs": (float, True),
        "tail_ns": (float, True),
        "sample_ns": (float, True),
        "stats_sample_ns": (float, True),
        "levels": (int, True),
        "check_convergence": (_bool, False),
        "threads": (int, True),
    },
    "output": {
        "trajectories": (_bool, False),
        "wigner": (_bool, False),
        "figures": (_bool, False),
    },
}

ALWAYS_REQUIRED = [("model", "beta0_over_2pi_mhz"), ("model", "chi_over_2pi_mhz"), ("model", "omega_p_over_2pi_ghz")]
NEEDS_T_RAMP = {"cat-creation", "pump-sweep", "delta0-sweep", "decay-study", "convergence", "wigner"}
NEEDS_T_GATE = {"rx-gate", "rz-gate"}


@dataclass
class ParsedConfig:
    config: ex.ExperimentConfig
    raw: dict
    text: str
    path: str
    outputs: dict = field(default_factory=dict)
    defaulted: list = field(default_factory=list)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=")[0].split(":")[0].strip() == key:
            return i
    return None


def parse_config(path, scenario: str | None = None) -> ParsedConfig:
    """Read and validate an experiment config; units converted to rad/ns and ns."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    raw: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section, _line_of(text, section, ""))
        for key, value in cp.items(section):
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key in [{section}]", key, line)
            parser, positive = SCHEMA[section][key]
            try:
                parsed = parser(value)
            except ValueError as exc:
                raise ConfigError(f"cannot parse value {value!r}: {exc}", key, line) from exc
            vals = parsed if isinstance(parsed, tuple) else (parsed,)
            if positive and any(isinstance(v, (int, float)) and v <= 0 for v in vals):
                raise ConfigError("value must be positive", key, line)
            if key.startswith("delta") and any(v > 0 for v in vals):
                raise ConfigError("detuning must be <= 0 (vacuum must be the highest level)", key, line)
            raw.setdefault(section, {})[key] = parsed

    scenario = scenario or raw.get("experiment", {}).get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown or missing scenario {scenario!r}", "scenario")
    required = list(ALWAYS_REQUIRED)
    if scenario in NEEDS_T_RAMP:
        required.append(("schedule", "t_ramp_ns"))
    if scenario in NEEDS_T_GATE:
        required.append(("schedule", "t_gate_ns"))
    for section, key in required:
        if key not in raw.get(section, {}):
            raise ConfigError(f"missing required key in [{section}]", key)

    m, s = raw["model"], raw.get("schedule", {})
    sw, nm = raw.get("sweep", {}), raw.get("numerics", {})
    modes = s.get("detuning_mode", (ex.CONSTANT,))
    if scenario == "delta0-sweep":
        modes = (ex.DECAY,)
    if ex.DECAY in modes and "delta0_over_2pi_mhz" not in m:
        raise ConfigError("linear-decay detuning needs delta0 in [model]", "delta0_over_2pi_mhz")
    defaulted = []
    if "dt_fs" not in nm:
        defaulted.append("dt_fs")
    kwargs = dict(
        scenario=scenario,
        beta0=ex.mhz(m["beta0_over_2pi_mhz"]),
        chi=ex.mhz(m["chi_over_2pi_mhz"]),
        omega_p=ex.ghz(m["omega_p_over_2pi_ghz"]),
        delta=ex.mhz(m.get("delta_over_2pi_mhz", 0.0)),
        delta0=ex.mhz(m.get("delta0_over_2pi_mhz", 0.0)),
        dim=m.get("dim", 40),
        detuning_modes=modes,
        t_ramp=s.get("t_ramp_ns", (50.0,)),
        t_gate=s.get("t_gate_ns", 100.0),
        drive_scale=s.get("drive_scale", 1.0),
        omega_p_sweep=tuple(ex.ghz(f) for f in sw.get("omega_p_over_2pi_ghz", ())),
        delta0_sweep=tuple(ex.mhz(f) for f in sw.get("delta0_over_2pi_mhz", ())),
        kappa=tuple(ex.khz(f) for f in sw.get("kappa_over_2pi_khz", (0.0,))),
        dynamics=nm.get("dynamics", RWA if scenario == "decay-study" else NROT),
        dt=nm["dt_fs"] * 1e-6 if "dt_fs" in nm else None,
        tail=nm.get("tail_ns", 20.0),
        cadence=nm.get("sample_ns", 0.1),
        stats_cadence=nm.get("stats_sample_ns", 0.002),
        levels=nm.get("levels", 9),
        check_convergence=nm.get("check_convergence", True),
        threads=nm.get("threads", 1),
    )
    try:
        cfg = ex.ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = {"trajectories": True, "wigner": False, "figures": False}
    out.update(raw.get("output", {}))
    return ParsedConfig(cfg, raw, text, str(path), out, defaulted)


# --------------------------------------------------------------------------- output


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


class Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, header, rows) -> Path:
        path = self.out_dir / name
        lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        self.files.append(name)
        return path

    def register(self, name: str):
        self.files.append(name)


STATS_HEADER = ["sweep_value", "fidelity_at_T", "tail_mean", "tail_std", "dt_fs", "dim", "converged"]


def stats_rows(points, scale=1.0):
    rows = []
    for p in points:
        s = p.stats
        vals = s.as_row() if s else (math.nan,) * 3
        rows.append([p.sweep_value / scale, *vals, p.dt * 1e6, p.dim, p.converged])
    return rows


def write_trajectory(w: Writer, name: str, point: ex.PointResult, levels: int):
    pops = point.pops
    header = ["t_ns"] + [f"p{i}" for i in range(levels)] + ["norm_or_trace"]
    rows = []
    for i, t in enumerate(point.times):
        row = [t] + [pops[i, k] if k < pops.shape[1] else math.nan for k in range(levels)]
        row.append(point.norms[i] if point.norms is not None else math.nan)
        rows.append(row)
    w.csv(name, header, rows)


def write_wigner(w: Writer, name: str, grid):
    w.csv(name, ["x", "p", "W"], grid.records())


def _series_name(s: str) -> str:
    return s.replace(" ", "_").replace("/", "_")


def _tag(v: float) -> str:
    return format(v, "g").replace("-", "m").replace(".", "p")


# --------------------------------------------------------------------------- scenario dispatch


def _emit_sweep(w, sweep, scale, cfg, outputs, figures):
    w.csv(f"stats_{_series_name(sweep.series)}.csv", STATS_HEADER, stats_rows(sweep.points, scale))
    if outputs.get("trajectories", True):
        for p in sweep.points:
            if p.times is not None:
                write_trajectory(w, f"trajectory_{_series_name(sweep.series)}_{_tag(p.sweep_value / scale)}.csv",
                                 p, cfg.levels)
    figures.append(("sweep", sweep, scale))


def _points_of(sweeps):
    for s in sweeps:
        yield from s.points


def run_scenario(scenario: str, parsed: ParsedConfig, out_dir: Path) -> dict:
    cfg = parsed.config
    w = Writer(out_dir)
    figures: list = []
    summary: dict = {}
    points: list[ex.PointResult] = []

    if scenario == "cat-creation":
        for mode in cfg.detuning_modes:
            sweep = ex.run_cat_creation(cfg, mode)
            _emit_sweep(w, sweep, 1.0, cfg, parsed.outputs, figures)
            points += sweep.points
    elif scenario == "pump-sweep":
        sweep = ex.run_pump_frequency_sweep(cfg)
        _emit_sweep(w, sweep, ex.ghz(1.0), cfg, parsed.outputs, figures)
        ref = sweep.reference["rwa_stats"]
        w.csv("stats_rwa-reference.csv", STATS_HEADER,
              [[math.nan, *ref.as_row(), cfg.dt_for(RWA) * 1e6, cfg.dim, "waived"]])
        summary["rwa_spread"] = sweep.reference["rwa_spread"]
        points += sweep.points
    elif scenario == "delta0-sweep":
        sweep = ex.run_delta0_sweep(cfg)
        _emit_sweep(w, sweep, ex.mhz(1.0), cfg, parsed.outputs, figures)
        base = sweep.reference["constant"]
        w.csv("stats_constant-reference.csv", STATS_HEADER, stats_rows([base], ex.mhz(1.0)))
        points += sweep.points + [base]
    elif scenario == "rx-gate":
        out = ex.run_rx_gate(cfg, wigner=parsed.outputs.get("wigner", False))
        cal = out["calibration"]
        w.csv("calibration.csv", ["delta0_over_2pi_mhz", "abs_delta0_over_chi", "rwa_target_population"],
              [[cal["delta0"] / ex.mhz(1.0), cal["ratio"], cal.get("fidelity", math.nan)]])
        ratios, fid = ex.rx_delta0_scan(cfg)
        w.csv("rx_scan.csv", ["abs_delta0_over_chi", "target_population"], zip(ratios, fid))
        figures.append(("scan", (ratios, fid), None))
        for dyn, p in out["points"].items():
            p.sweep_value = cal["ratio"]
            w.csv(f"stats_rx-{dyn}.csv", STATS_HEADER, stats_rows([p]))
            points.append(p)
        for name, grid in out.get("wigner", {}).items():
            write_wigner(w, f"wigner_{name}.csv", grid)
            figures.append(("wigner", grid, name))
        summary["abs_delta0_over_chi"] = cal["ratio"]
        figures.append(("rx", out["points"], None))
    elif scenario == "rz-gate":
        out = ex.run_rz_gate(cfg)
        for key in ("driven", "control"):
            p = out[key]
            w.csv(f"stats_rz-{key}.csv", STATS_HEADER, stats_rows([p]))
            if parsed.outputs.get("trajectories", True) and p.times is not None:
                w.csv(f"trajectory_rz-{key}.csv", ["t_ns", "p_phi0", "p_phi1", "norm_or_trace"],
                      [[t, *p.extra["qubit_pops"][i], p.norms[i]] for i, t in enumerate(p.times)])
            points.append(p)
        summary.update(phase=out["phase"], peak_ratio=out["peak_ratio"])
        figures.append(("rz", out, None))
    elif scenario == "decay-study":
        for sweep in ex.run_decay_study(cfg):
            _emit_sweep(w, sweep, 1.0, cfg, parsed.outputs, figures)
            points += sweep.points
    elif scenario == "convergence":
        rows = []
        for mode in cfg.detuning_modes:
            for T in cfg.t_ramp:
                p = ex._with_convergence(
                    lambda d, T=T, mode=mode: ex.simulate_cat_creation(cfg, T, mode, cfg.dynamics, dt=d),
                    cfg.dt_for(), True,
                )
                c = p.convergence
                rows.append([mode, T, p.dt * 1e6, c.max_diff if c else math.nan,
                             c.summary_diff if c else math.nan, p.converged])
                points.append(p)
        w.csv("convergence.csv", ["series", "sweep_value", "dt_fs", "max_p0_diff", "summary_diff", "converged"], rows)
    elif scenario == "wigner":
        T = cfg.t_ramp[0]
        for mode in cfg.detuning_modes:
            p = ex.simulate_cat_creation(cfg, T, mode, cfg.dynamics)
            for t, grid in ex.wigner_snapshots(p, T).items():
                name = f"wigner_{mode}_{cfg.dynamics}_t{_tag(round(t, 6))}.csv"
                write_wigner(w, name, grid)
                figures.append(("wigner", grid, name[:-4]))
            points.append(p)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(scenario)

    if parsed.outputs.get("figures", False):
        from . import plotting

        for name in plotting.render(figures, out_dir):
            w.register(name)
    return {"writer": w, "points": points, "summary": summary}


def _resolved(cfg: ex.ExperimentConfig) -> dict:
    d = asdict(cfg)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def run(scenario: str, parsed: ParsedConfig, out_dir, *, manifest_name: str = "manifest.json") -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, error = "ok", None
    result = {"writer": Writer(out_dir), "points": [], "summary": {}}
    try:
        result = run_scenario(scenario, parsed, out_dir)
    except Exception as exc:  # recorded in the manifest, then re-signalled by the exit code
        log.exception("scenario failed")
        status, error = "failed", f"{type(exc).__name__}: {exc}"
    conv = [p.converged for p in result["points"]]
    if status == "ok" and any(c in ("fail", "error") for c in conv):
        status = "failed"
        error = "propagation or convergence failure in at least one point"
    cfg = parsed.config
    manifest = {
        "config_hash": parsed.hash,
        "config_path": parsed.path,
        "scenario": scenario,
        "resolved_parameters": _resolved(cfg),
        "defaulted": parsed.defaulted,
        "dt_fs": cfg.dt_for() * 1e6,
        "dim": cfg.dim,
        "convergence_status": conv,
        "summary": result["summary"],
        "outputs": result["writer"].files,
        "status": status,
        "error": error,
        "wall_clock_s": time.perf_counter() - start,
    }
    with open(out_dir / manifest_name, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return 0 if status == "ok" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parametron", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI experiment config")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--dt-fs", type=float, help="override the integration step (fs)")
        p.add_argument("--dim", type=int, help="override the Fock truncation")
        p.add_argument("--threads", type=int, help="worker threads for sweep points")
        p.add_argument("--figures", action="store_true", help="also render PNG figures")

    runp = sub.add_parser("run", help="run a named scenario")
    runp.add_argument("scenario", choices=SCENARIOS)
    common(runp)
    for name in SCENARIOS:
        common(sub.add_parser(name, help=f"run the {name} scenario"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    scenario = args.scenario if args.command == "run" else args.command
    try:
        parsed = parse_config(args.config, scenario)
    except (ConfigError, OSError) as exc:
        print(f"parametron: config error: {exc}", file=sys.stderr)
        return 2
    overrides = {}
    if args.dt_fs is not None:
        overrides["dt"] = args.dt_fs * 1e-6
        parsed.defaulted = [k for k in parsed.defaulted if k != "dt_fs"]
    if args.dim is not None:
        overrides["dim"] = args.dim
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        parsed.config = replace(parsed.config, **overrides)
        parsed.text += "\n# cli overrides: " + json.dumps(overrides, sort_keys=True)
    if args.figures:
        parsed.outputs["figures"] = True
    return run(scenario, parsed, Path(args.out))


if __name__ == "__main__":
    sys.exit(main())
