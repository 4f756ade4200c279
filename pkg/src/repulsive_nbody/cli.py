"""Command line entry point: ``repulsive-nbody {run,fit,verify}``.

Exit codes: 0 all enabled checks pass, 1 a check failed, 2 invalid
configuration or input file, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import checks, diagnostics, integrate
from .asymptotics import summarize
from .errors import ConfigError, CSVParseError, InsufficientHorizonError, NBodyError, NotApplicableError
from .integrate import StepperConfig, Trajectory
from .model import ParticleState
from .scenarios import ScenarioSpec, build

log = logging.getLogger("repulsive_nbody")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

OUTPUT_DIR_ENV = "REPULSIVE_NBODY_OUTPUT_DIR"

DIAG_COLUMNS = [
    "t", "e_kin", "e_pot", "e_total", "e_kin_rel", "inertia", "inertia_rate",
    "int_e_rel", "int_t_epot", "residual_b", "t_epot", "e_rel_scaled",
    "velocity_margin", "distance_margin",
]


@dataclass
class OutputConfig:
    prefix: str = "run"
    spacing: str = "geometric"
    factor: float = 10 ** (1 / 16)
    dt: float = 1.0
    precision: int = 17

    def validate(self):
        if self.spacing not in ("geometric", "fixed"):
            raise ConfigError(f"output.spacing must be 'geometric' or 'fixed', got {self.spacing!r}")
        if self.spacing == "geometric" and not self.factor > 1:
            raise ConfigError("output.factor must exceed 1")
        if self.spacing == "fixed" and not self.dt > 0:
            raise ConfigError("output.dt must be positive")
        if not (isinstance(self.precision, int) and 6 <= self.precision <= 17):
            raise ConfigError("output.precision must be an integer in [6, 17]")


@dataclass
class ChecksConfig:
    enabled: bool = True
    disable: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    scaling_horizon: float = 100.0
    reversal_span: float = 10.0

    def validate(self):
        unknown = (set(self.disable) | set(self.tolerances)) - set(checks.ALL_CHECKS)
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")

    def active(self, names):
        if not self.enabled:
            return ()
        return tuple(n for n in names if n not in self.disable)


@dataclass
class RunConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    t_end: float = 1000.0
    output: OutputConfig = field(default_factory=OutputConfig)
    checks: ChecksConfig = field(default_factory=ChecksConfig)

    def validate(self):
        self.output.validate()
        self.checks.validate()
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.checks.enabled and not self.t_end > 1:
            raise ConfigError("t_end must exceed 1 when diagnostics are enabled")
        return self


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    known = {"scenario", "stepper", "t_end", "output", "checks"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    try:
        t_end = float(data.get("t_end", 1000.0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"t_end: {exc}") from exc
    return RunConfig(
        scenario=_section(ScenarioSpec, data.get("scenario"), "scenario"),
        stepper=_section(StepperConfig, data.get("stepper"), "stepper"),
        t_end=t_end,
        output=_section(OutputConfig, data.get("output"), "output"),
        checks=_section(ChecksConfig, data.get("checks"), "checks"),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def output_times(config: RunConfig, t_start: float) -> list[float]:
    """Sample grid: the spacing policy plus t = 1 and the fractions of t_end the checks read."""
    T = config.t_end
    extra = [1.0] + [T / k for k in (2, 4, 10, 20)]
    if config.output.spacing == "geometric":
        return integrate.geometric_output_times(T, config.output.factor, t_start=t_start, extra=extra)
    k = int(math.floor((T - t_start) / config.output.dt))
    grid = {t_start + i * config.output.dt for i in range(k + 1)} | {T}
    grid |= {e for e in extra if t_start <= e <= T}
    return sorted(grid)


def format_number(x: float, precision: int = 17) -> str:
    if precision >= 17:
        return repr(float(x))
    return format(float(x), f".{precision}g")


def traj_header(n: int) -> list[str]:
    cols = ["t"]
    cols += [f"x{i}_{c}" for i in range(1, n + 1) for c in "xyz"]
    cols += [f"v{i}_{c}" for i in range(1, n + 1) for c in "xyz"]
    return cols


def write_traj_csv(path, trajectory: Trajectory, precision: int = 17):
    fmt = lambda x: format_number(x, precision)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(traj_header(trajectory.n))
        for s in trajectory:
            st = s.state
            w.writerow([fmt(st.t)] + [fmt(x) for x in st.positions.ravel()] + [fmt(v) for v in st.velocities.ravel()])


def write_diag_csv(path, trajectory: Trajectory, records, precision: int = 17):
    fmt = lambda x: format_number(math.nan if x is None else x, precision)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_COLUMNS)
        for s, r in zip(trajectory, records):
            rep = s.report
            w.writerow([fmt(v) for v in (
                s.t, rep.e_kin, rep.e_pot, rep.e_total, rep.e_kin_rel, rep.inertia, rep.inertia_rate,
                s.int_e_rel, s.int_t_epot, r.residual_b, r.t_epot, r.e_rel_scaled,
                r.velocity_margin, r.distance_margin,
            )])


def read_traj_csv(path) -> Trajectory:
    """Parse a trajectory CSV; errors name the offending row and column."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CSVParseError(f"cannot open {path}: {exc}") from exc
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CSVParseError("empty file", row=1)
    header = rows[0]
    if (len(header) - 1) % 6 != 0 or len(header) < 7:
        raise CSVParseError(f"header has {len(header)} columns, expected 1 + 6n", row=1)
    n = (len(header) - 1) // 6
    expected = traj_header(n)
    for col, (got, want) in enumerate(zip(header, expected)):
        if got.strip() != want:
            raise CSVParseError(f"expected header {want!r}, found {got!r}", row=1, column=want)
    states = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(expected):
            raise CSVParseError(f"expected {len(expected)} fields, found {len(row)}", row=lineno)
        vals = []
        for name, cell in zip(expected, row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise CSVParseError(f"not a number: {cell!r}", row=lineno, column=name) from None
        try:
            states.append(ParticleState(vals[0], vals[1: 1 + 3 * n], vals[1 + 3 * n:]))
        except ValueError as exc:
            raise CSVParseError(str(exc), row=lineno) from None
    if not states:
        raise CSVParseError("no data rows", row=2)
    try:
        return Trajectory.from_states(states)
    except ValueError as exc:
        raise CSVParseError(str(exc)) from None


def _summary_document(trajectory: Trajectory, results=None) -> dict:
    traj = Trajectory.from_states(trajectory.states)
    doc = {"n": traj.n, "t_end": float(traj.times[-1]), "e0": traj[0].report.e_total}
    try:
        doc["c_constant"] = diagnostics.c_constant(traj.at(1.0).report)
    except KeyError:
        doc["c_constant"] = None
    try:
        summ = summarize(traj)
        doc["asymptotics"] = summ.to_dict()
    except (InsufficientHorizonError, NotApplicableError) as exc:
        doc["asymptotics"] = None
        doc["asymptotics_error"] = str(exc)
    if results is not None:
        doc["checks"] = {r.name: r.to_dict() for r in results}
        doc["passed"] = all(r.passed for r in results)
    return doc


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def dump_summary(doc: dict) -> str:
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


def resolve_prefix(prefix: str) -> Path:
    p = Path(prefix)
    outdir = os.environ.get(OUTPUT_DIR_ENV)
    if outdir and not p.is_absolute():
        p = Path(outdir) / p
    return p


def simulate(config: RunConfig):
    state = build(config.scenario)
    trajectory = integrate.integrate_adaptive(state, config.t_end, config.stepper, output_times(config, state.t))
    records = diagnostics.diagnose(trajectory)
    return state, trajectory, records


def cmd_run(config: RunConfig, quiet: bool = False) -> int:
    config.validate()
    _, trajectory, records = simulate(config)
    active = config.checks.active(checks.TRAJECTORY_CHECKS)
    results = checks.trajectory_checks(trajectory, active, config.checks.tolerances, records=records)
    prefix = resolve_prefix(config.output.prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prec = config.output.precision
    write_traj_csv(f"{prefix}.traj.csv", trajectory, prec)
    write_diag_csv(f"{prefix}.diag.csv", trajectory, records, prec)
    Path(f"{prefix}.summary.json").write_text(dump_summary(_summary_document(trajectory, results)))
    if not quiet:
        print(checks.format_table(results))
        print(f"wrote {prefix}.traj.csv, {prefix}.diag.csv, {prefix}.summary.json")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def cmd_fit(path, out=None, quiet: bool = False) -> int:
    trajectory = read_traj_csv(path)
    text = dump_summary(_summary_document(trajectory))
    if out:
        Path(out).write_text(text)
    if not quiet:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(config: RunConfig, quiet: bool = False) -> int:
    config.validate()
    state, trajectory, records = simulate(config)
    active = config.checks.active(checks.ALL_CHECKS)
    tols = {**checks.DEFAULT_TOLERANCES, **config.checks.tolerances}
    results = checks.trajectory_checks(trajectory, active, config.checks.tolerances, records=records)
    if "scaling" in active:
        horizon = min(config.checks.scaling_horizon, config.t_end)
        results.append(checks.scaling_check(state, config.stepper, horizon, tol=tols["scaling"]))
    if "reversal" in active:
        results.append(checks.reversal_check(state, config.stepper, config.checks.reversal_span, tols["reversal"]))
    if not quiet:
        print(checks.format_table(results))
    ok = all(r.passed for r in results)
    if not quiet:
        print("ALL CHECKS PASS" if ok else "SOME CHECKS FAILED")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repulsive-nbody", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--prefix", help="output path prefix")
        p.add_argument("--t-end", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--rel-tol", type=float)
        p.add_argument("--quiet", action="store_true")

    common(sub.add_parser("run", help="integrate a scenario and write CSV + summary outputs"))
    common(sub.add_parser("verify", help="run the full diagnostic battery and print a report"))
    fit = sub.add_parser("fit", help="recompute the asymptotic summary from a trajectory CSV")
    fit.add_argument("path")
    fit.add_argument("--prefix", help="write <prefix>.summary.json")
    fit.add_argument("--quiet", action="store_true")
    return parser


def _config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    if args.t_end is not None:
        data["t_end"] = args.t_end
    if args.seed is not None:
        data.setdefault("scenario", {})["seed"] = args.seed
    if args.rel_tol is not None:
        data.setdefault("stepper", {})["rel_tol"] = args.rel_tol
    if args.prefix is not None:
        data.setdefault("output", {})["prefix"] = args.prefix
    return config_from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.command == "fit":
            out = f"{resolve_prefix(args.prefix)}.summary.json" if args.prefix else None
            return cmd_fit(args.path, out, args.quiet)
        config = _config_from_args(args)
        if args.command == "run":
            return cmd_run(config, args.quiet)
        return cmd_verify(config, args.quiet)
    except (ConfigError, CSVParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NBodyError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
