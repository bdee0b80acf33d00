"""Command-line interface: solve, ode, bench, and validate workflows.

Configuration comes from an optional TOML file (sections [map], [theta],
[error], [run], plus a top-level `output` key) with command-line flags
overriding file values key for key.  All validation errors are reported
together, each naming the offending key.

Exit codes: 0 success, 2 validation failure (including failed hypothesis
verdicts from `validate`), 3 diverged / left_domain, 4 I/O error.  The
default seed may come from the MANNFLOW_SEED environment variable; the
seed in effect is always echoed into the output metadata.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .bench import (AllRunsFailedError, BenchReport, bisection_count,
                    format_tables, reproduce_tables, run_cell,
                    write_report_csv)
from .continuous import (LEFT_DOMAIN, closed_form_linear, integrate,
                         write_flow_csv)
from .diagnostics import summarize_tail
from .discrete import (DIVERGED, StoppingRule, run, write_trajectory_csv)
from .maps import (PIECEWISE_LINEAR, DegenerateSegmentError, ScalarMap,
                   constant_value, enumerate_fixed_points, get_map,
                   load_knots)
from .schedules import (CLASSIC_MANN, CONSTANT, POWER, UNIFORM_DECAY, ZERO,
                        ErrorModel, ThetaSchedule, classic_mann_schedule,
                        constant_schedule, power_schedule, uniform_decay,
                        validate_hypotheses, zero_error)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

ENV_SEED = "MANNFLOW_SEED"

_THETA_FAMILIES = (POWER, CLASSIC_MANN, CONSTANT)
_ERROR_FAMILIES = (ZERO, UNIFORM_DECAY)
_CONFIG_SECTIONS = {"map", "theta", "error", "run", "output"}
_SECTION_KEYS = {
    "map": {"name", "knots"},
    "theta": {"family", "alpha", "value"},
    "error": {"family", "amplitude", "seed"},
    "run": {"x0", "epsilon", "cap", "projected", "seed", "runs", "horizon",
            "step", "stride", "paper_tables"},
}


@dataclass
class RunConfig:
    """Fully validated parameters for one command."""

    command: str
    map_name: str = "paper-sec4"
    theta_family: str = POWER
    alpha: float = 1.0
    theta_value: float = 0.5
    error_family: str = ZERO
    amplitude: float = 0.0
    seed: int = 0
    error_seed: Optional[int] = None
    x0: str = "random"  # "random" or repr of a float
    epsilon: float = 1e-4
    cap: int = 1_000_000
    horizon: float = 100.0
    step: float = 1e-3
    stride: int = 1
    runs: int = 100
    paper_tables: bool = False
    cell_amplitude: Optional[float] = None
    cell_alpha: Optional[float] = None
    cell_epsilon: Optional[float] = None
    projected: str = "auto"
    output: str = "-"

    resolved_map: Optional[ScalarMap] = field(default=None, repr=False)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mannflow",
        description="Averaged fixed-point iteration on [0,1] with perturbations")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, help="base seed (default: "
                       f"${ENV_SEED} or 0)")

    def add_process(p):
        p.add_argument("--map", dest="map_name",
                       help="registry name (paper-sec4, cosine, identity, "
                            "const:<v>) or knot-file path")
        p.add_argument("--theta", dest="theta_family",
                       help="schedule family: power, classic_mann, constant")
        p.add_argument("--alpha", type=float, help="power-family exponent")
        p.add_argument("--theta-constant", dest="theta_value", type=float,
                       help="constant-family level in [0, 1]")
        p.add_argument("--error", dest="error_family",
                       help="error family: zero, uniform_decay")
        p.add_argument("--amplitude", type=float,
                       help="uniform_decay amplitude A > 0")
        p.add_argument("--x0", help="initial point in [0, 1], or 'random'")
        p.add_argument("--epsilon", type=float, help="stopping residual")
        p.add_argument("--output", "-o", help="CSV destination ('-' = stdout)")

    p_solve = sub.add_parser("solve", help="run the discrete iteration")
    add_common(p_solve)
    add_process(p_solve)
    p_solve.add_argument("--cap", type=int, help="iteration cap")
    p_solve.add_argument("--projected", choices=("auto", "on", "off"),
                         help="clamp steps back into [0,1] "
                              "(auto: on for stochastic error)")

    p_ode = sub.add_parser("ode", help="integrate the continuous flow")
    add_common(p_ode)
    add_process(p_ode)
    p_ode.add_argument("--step", type=float, help="integration step h in (0, 0.1]")
    p_ode.add_argument("--horizon", type=float, help="time horizon T")
    p_ode.add_argument("--stride", type=int, help="CSV subsampling stride")

    p_bench = sub.add_parser("bench", help="Monte Carlo iteration-count grid")
    add_common(p_bench)
    p_bench.add_argument("--paper-tables", action="store_true", default=None,
                         help="run the full 7x4 grid for A in {0.1, 0.001}")
    p_bench.add_argument("--amplitude", type=float, help="single-cell A")
    p_bench.add_argument("--alpha", type=float, help="single-cell alpha")
    p_bench.add_argument("--epsilon", type=float, help="single-cell epsilon")
    p_bench.add_argument("--runs", type=int, help="runs per cell")
    p_bench.add_argument("--cap", type=int, help="per-run iteration cap")
    p_bench.add_argument("--output", "-o", help="CSV destination ('-' = stdout)")

    p_val = sub.add_parser("validate",
                           help="check the four convergence hypotheses")
    add_common(p_val)
    p_val.add_argument("--theta", dest="theta_family")
    p_val.add_argument("--alpha", type=float)
    p_val.add_argument("--theta-constant", dest="theta_value", type=float)
    p_val.add_argument("--error", dest="error_family")
    p_val.add_argument("--amplitude", type=float)
    return parser


def _load_config_file(path: str, errors: list[str]) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        errors.append(f"config: cannot read {path}: {exc}")
        return {}
    except tomllib.TOMLDecodeError as exc:
        errors.append(f"config: {path}: {exc}")
        return {}
    for section, content in data.items():
        if section == "output":
            continue
        if section not in _CONFIG_SECTIONS:
            errors.append(f"config: unknown section or key '{section}' in {path}")
            continue
        if not isinstance(content, dict):
            errors.append(f"config: '{section}' must be a table in {path}")
            continue
        for key in content:
            if key not in _SECTION_KEYS[section]:
                errors.append(f"config: unknown key '{section}.{key}' in {path}")
    return data


def _given(ns: argparse.Namespace, name: str):
    return getattr(ns, name, None)


def _pick(flag_value, file_section: dict, file_key: str, default):
    if flag_value is not None:
        return flag_value
    if file_key in file_section:
        return file_section[file_key]
    return default


def _as_float(value, key: str, errors: list[str], default: float) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        errors.append(f"{key}: '{value}' is not a number")
        return default


def _as_int(value, key: str, errors: list[str], default: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        errors.append(f"{key}: '{value}' is not an integer")
        return default


def _pick_output(ns: argparse.Namespace, file_data: dict,
                 errors: list[str]) -> str:
    value = _pick(_given(ns, "output"), file_data, "output", "-")
    if not isinstance(value, str):
        errors.append("output: must be a file path string or '-'")
        return "-"
    return value


def _resolve_map(name: str, errors: list[str]) -> Optional[ScalarMap]:
    try:
        return get_map(name)
    except (KeyError, ValueError):
        pass
    if os.path.exists(name):
        try:
            return load_knots(name)
        except (OSError, ValueError) as exc:
            errors.append(f"map.knots: {name}: {exc}")
            return None
    errors.append(f"map.name: '{name}' is not a registry name or a knot file")
    return None


def parse_config(argv: list[str], env: Optional[dict] = None
                 ) -> tuple[Optional[RunConfig], list[str]]:
    """Parse flags plus optional config file into a validated RunConfig.

    Flags override file values.  On failure, returns (None, errors) with
    every validation problem listed, not just the first.
    """
    env = os.environ if env is None else env
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit:
        raise
    errors: list[str] = []
    file_data = _load_config_file(ns.config, errors) if ns.config else {}
    f_map = file_data.get("map", {}) if isinstance(file_data.get("map", {}), dict) else {}
    f_theta = file_data.get("theta", {}) if isinstance(file_data.get("theta", {}), dict) else {}
    f_error = file_data.get("error", {}) if isinstance(file_data.get("error", {}), dict) else {}
    f_run = file_data.get("run", {}) if isinstance(file_data.get("run", {}), dict) else {}

    cfg = RunConfig(command=ns.command)

    env_seed = env.get(ENV_SEED)
    seed = _pick(_given(ns, "seed"), f_run, "seed",
                 None if env_seed is None else env_seed)
    try:
        cfg.seed = int(seed) if seed is not None else 0
    except (TypeError, ValueError):
        errors.append(f"run.seed: '{seed}' is not an integer")

    if ns.command in ("solve", "ode"):
        cfg.map_name = str(_pick(_given(ns, "map_name"), f_map, "name",
                                 f_map.get("knots", cfg.map_name)))
        cfg.resolved_map = _resolve_map(cfg.map_name, errors)

    if ns.command in ("solve", "ode", "validate"):
        cfg.theta_family = str(_pick(_given(ns, "theta_family"), f_theta,
                                     "family", POWER)).replace("-", "_")
        if cfg.theta_family not in _THETA_FAMILIES:
            errors.append(f"theta.family: '{cfg.theta_family}' is not one of "
                          f"{', '.join(_THETA_FAMILIES)}")
        raw_alpha = _pick(_given(ns, "alpha"), f_theta, "alpha", 1.0)
        cfg.alpha = _as_float(raw_alpha, "theta.alpha", errors, 1.0)
        if cfg.theta_family in (POWER, CLASSIC_MANN):
            if ns.command == "validate":
                if not cfg.alpha > 0.0:
                    errors.append("theta.alpha: alpha must be positive for "
                                  "the power family")
            elif not 0.0 < cfg.alpha <= 1.0:
                errors.append("theta.alpha: alpha must lie in (0, 1] for the "
                              "power family")
        cfg.theta_value = _as_float(_pick(_given(ns, "theta_value"), f_theta,
                                          "value", 0.5), "theta.value",
                                    errors, 0.5)
        if cfg.theta_family == CONSTANT and not 0.0 <= cfg.theta_value <= 1.0:
            errors.append("theta.value: constant level must lie in [0, 1]")

        raw_amp = _pick(_given(ns, "amplitude"), f_error, "amplitude", None)
        default_family = UNIFORM_DECAY if raw_amp is not None else ZERO
        cfg.error_family = str(_pick(_given(ns, "error_family"), f_error,
                                     "family", default_family))
        if cfg.error_family not in _ERROR_FAMILIES:
            errors.append(f"error.family: '{cfg.error_family}' is not one of "
                          f"{', '.join(_ERROR_FAMILIES)}")
        elif cfg.error_family == UNIFORM_DECAY:
            cfg.amplitude = _as_float(raw_amp, "error.amplitude", errors,
                                      0.0) if raw_amp is not None else 0.0
            if not cfg.amplitude > 0.0:
                errors.append("error.amplitude: uniform_decay needs a "
                              "positive amplitude")
        if "seed" in f_error:
            cfg.error_seed = _as_int(f_error["seed"], "error.seed", errors, 0)

    if ns.command in ("solve", "ode"):
        cfg.x0 = str(_pick(_given(ns, "x0"), f_run, "x0", "random"))
        if cfg.x0 != "random":
            try:
                v = float(cfg.x0)
                if not 0.0 <= v <= 1.0:
                    raise ValueError
            except ValueError:
                errors.append("run.x0: must be 'random' or a number in [0, 1]")
        default_eps = 1e-4 if ns.command == "solve" else 1e-6
        cfg.epsilon = _as_float(_pick(_given(ns, "epsilon"), f_run, "epsilon",
                                      default_eps), "run.epsilon", errors,
                                default_eps)
        if not cfg.epsilon > 0.0:
            errors.append("run.epsilon: must be positive")
        cfg.output = _pick_output(ns, file_data, errors)

    if ns.command == "solve":
        cfg.cap = _as_int(_pick(_given(ns, "cap"), f_run, "cap", 1_000_000),
                          "run.cap", errors, 1_000_000)
        if cfg.cap < 1:
            errors.append("run.cap: must be at least 1")
        cfg.projected = str(_pick(_given(ns, "projected"), f_run, "projected",
                                  "auto"))
        if cfg.projected not in ("auto", "on", "off"):
            errors.append("run.projected: must be auto, on, or off")

    if ns.command == "ode":
        cfg.step = _as_float(_pick(_given(ns, "step"), f_run, "step", 1e-3),
                             "run.step", errors, 1e-3)
        if not 0.0 < cfg.step <= 0.1:
            errors.append("run.step: must lie in (0, 0.1]")
        cfg.horizon = _as_float(_pick(_given(ns, "horizon"), f_run, "horizon",
                                      100.0), "run.horizon", errors, 100.0)
        if cfg.horizon < cfg.step:
            errors.append("run.horizon: must be at least one step")
        cfg.stride = _as_int(_pick(_given(ns, "stride"), f_run, "stride", 1),
                             "run.stride", errors, 1)
        if cfg.stride < 1:
            errors.append("run.stride: must be at least 1")

    if ns.command == "bench":
        cfg.paper_tables = bool(_pick(_given(ns, "paper_tables"), f_run,
                                      "paper_tables", False))
        cfg.runs = _as_int(_pick(_given(ns, "runs"), f_run, "runs", 100),
                           "run.runs", errors, 100)
        if cfg.runs < 1:
            errors.append("run.runs: must be at least 1")
        cfg.cap = _as_int(_pick(_given(ns, "cap"), f_run, "cap", 100_000),
                          "run.cap", errors, 100_000)
        if cfg.cap < 1:
            errors.append("run.cap: must be at least 1")
        cfg.output = _pick_output(ns, file_data, errors)
        cfg.cell_amplitude = _pick(_given(ns, "amplitude"), f_error,
                                   "amplitude", None)
        cfg.cell_alpha = _pick(_given(ns, "alpha"), f_theta, "alpha", None)
        cfg.cell_epsilon = _pick(_given(ns, "epsilon"), f_run, "epsilon", None)
        if not cfg.paper_tables:
            missing = [k for k, v in (("error.amplitude", cfg.cell_amplitude),
                                      ("theta.alpha", cfg.cell_alpha),
                                      ("run.epsilon", cfg.cell_epsilon))
                       if v is None]
            if missing:
                errors.append("bench: needs --paper-tables or a full cell; "
                              f"missing {', '.join(missing)}")
            else:
                if not float(cfg.cell_amplitude) > 0.0:
                    errors.append("error.amplitude: must be positive")
                if not 0.0 < float(cfg.cell_alpha) <= 1.0:
                    errors.append("theta.alpha: alpha must lie in (0, 1] for "
                                  "the power family")
                if not float(cfg.cell_epsilon) > 0.0:
                    errors.append("run.epsilon: must be positive")

    if errors:
        return None, errors
    return cfg, []


def _build_schedule(cfg: RunConfig) -> ThetaSchedule:
    if cfg.theta_family == POWER:
        return power_schedule(cfg.alpha)
    if cfg.theta_family == CLASSIC_MANN:
        return classic_mann_schedule()
    return constant_schedule(cfg.theta_value)


def _build_error(cfg: RunConfig) -> ErrorModel:
    if cfg.error_family == ZERO:
        return zero_error()
    seed = cfg.error_seed if cfg.error_seed is not None else cfg.seed
    return uniform_decay(cfg.amplitude, seed)


def _pick_x0(cfg: RunConfig) -> float:
    if cfg.x0 == "random":
        from numpy.random import Generator, PCG64, SeedSequence
        return Generator(PCG64(SeedSequence(
            cfg.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(1,)))).random()
    return float(cfg.x0)


def _fixed_points_of(map_: ScalarMap) -> tuple[float, ...]:
    if map_.known_fixed_points:
        return map_.known_fixed_points
    if map_.kind == PIECEWISE_LINEAR:
        try:
            return tuple(enumerate_fixed_points(map_))
        except DegenerateSegmentError:
            return ()
    return ()


def _open_output(cfg: RunConfig):
    if cfg.output == "-":
        return sys.stdout, False
    return open(cfg.output, "w", newline=""), True


def _emit_csv(cfg: RunConfig, write) -> Optional[int]:
    """Write CSV to the configured destination; EXIT_IO on failure."""
    try:
        out, close = _open_output(cfg)
    except OSError as exc:
        print(f"error: cannot open output {cfg.output}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        write(out)
    except OSError as exc:
        print(f"error: writing {cfg.output}: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if close:
            out.close()
    return None


def _summary_stream(cfg: RunConfig):
    # Keep stdout clean when it carries the CSV.
    return sys.stderr if cfg.output == "-" else sys.stdout


def _cmd_solve(cfg: RunConfig) -> int:
    map_ = cfg.resolved_map
    schedule = _build_schedule(cfg)
    error = _build_error(cfg)
    x0 = _pick_x0(cfg)
    projected = (cfg.error_family != ZERO) if cfg.projected == "auto" \
        else cfg.projected == "on"
    stop = StoppingRule(epsilon=cfg.epsilon, max_iterations=cfg.cap)
    traj = run(map_, schedule, error, x0, stop, projected=projected)
    meta = {"seed": cfg.seed, "map": cfg.map_name, "x0": repr(x0),
            "epsilon": repr(cfg.epsilon)}
    code = _emit_csv(cfg, lambda out: write_trajectory_csv(
        traj, map_, schedule, out, metadata=meta))
    if code is not None:
        return code
    info = _summary_stream(cfg)
    print(f"stop reason: {traj.stop_reason}", file=info)
    print(f"iterations used: {traj.iterations_used}", file=info)
    print(f"final iterate: {traj.last!r}", file=info)
    print(f"final residual: {map_(traj.last) - traj.last!r}", file=info)
    print(f"config fingerprint: {traj.config_fingerprint}", file=info)
    summary = summarize_tail(traj, fixed_points=_fixed_points_of(map_))
    for line in summary.lines():
        print(line, file=info)
    print(f"tail summary csv: {summary.CSV_HEADER}", file=info)
    print(f"tail summary csv: {summary.csv_row()}", file=info)
    return EXIT_DIVERGED if traj.stop_reason == DIVERGED else EXIT_OK


def _cmd_ode(cfg: RunConfig) -> int:
    map_ = cfg.resolved_map
    schedule = _build_schedule(cfg)
    error = _build_error(cfg)
    x0 = _pick_x0(cfg)
    traj = integrate(map_, schedule, error, x0, h=cfg.step,
                     horizon=cfg.horizon, epsilon=cfg.epsilon)
    meta = {"seed": cfg.seed, "map": cfg.map_name, "x0": repr(x0),
            "step": repr(cfg.step), "epsilon": repr(cfg.epsilon)}
    code = _emit_csv(cfg, lambda out: write_flow_csv(
        traj, map_, schedule, error, out, stride=cfg.stride, metadata=meta))
    if code is not None:
        return code
    info = _summary_stream(cfg)
    print(f"stop reason: {traj.stop_reason}", file=info)
    print(f"steps taken: {len(traj.states) - 1}", file=info)
    print(f"final time: {traj.times[-1]!r}", file=info)
    print(f"final state: {traj.last!r}", file=info)
    print(f"final residual: {map_(traj.last) - traj.last!r}", file=info)
    print(f"boundary clamp events: {traj.clamp_events}", file=info)
    level = constant_value(map_)
    if (level is not None and cfg.error_family == ZERO
            and cfg.theta_family in (POWER, CLASSIC_MANN)):
        dev = max(abs(x - closed_form_linear(level, x0, cfg.alpha, t))
                  for t, x in zip(traj.times, traj.states))
        print(f"max deviation from closed form: {dev!r}", file=info)
    summary = summarize_tail(traj, fixed_points=_fixed_points_of(map_))
    for line in summary.lines():
        print(line, file=info)
    print(f"tail summary csv: {summary.CSV_HEADER}", file=info)
    print(f"tail summary csv: {summary.csv_row()}", file=info)
    return EXIT_DIVERGED if traj.stop_reason == LEFT_DOMAIN else EXIT_OK


def _cmd_bench(cfg: RunConfig) -> int:
    info = _summary_stream(cfg)
    if cfg.paper_tables:
        report = reproduce_tables(runs=cfg.runs, base_seed=cfg.seed,
                                  cap=cfg.cap)
    else:
        try:
            cell = run_cell(float(cfg.cell_amplitude), float(cfg.cell_alpha),
                            float(cfg.cell_epsilon), cfg.runs, cfg.seed,
                            cap=cfg.cap)
        except AllRunsFailedError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        report = BenchReport(
            grid=(cell,),
            bisection_counts={cell.epsilon: bisection_count(cell.epsilon)},
            metadata={"rng": "PCG64", "base_seed": str(cfg.seed),
                      "runs": str(cfg.runs), "cap": str(cfg.cap),
                      "version": __version__})
    code = _emit_csv(cfg, lambda out: write_report_csv(report, out))
    if code is not None:
        return code
    print(format_tables(report), end="", file=info)
    if "timestamp" in report.metadata:
        print(f"generated at {report.metadata['timestamp']} "
              f"(rng {report.metadata['rng']}, seed {cfg.seed})", file=info)
    failed = [c for c in report.grid if c.failures == c.runs]
    return EXIT_DIVERGED if failed else EXIT_OK


def _cmd_validate(cfg: RunConfig) -> int:
    schedule = _build_schedule(cfg)
    error = _build_error(cfg)
    report = validate_hypotheses(schedule, error)
    for line in report.lines():
        print(line)
    if report.all_hold():
        print("all four hypotheses hold: the iteration converges to a fixed point")
        return EXIT_OK
    print("not all hypotheses hold")
    return EXIT_VALIDATION


def execute(cfg: RunConfig) -> int:
    """Dispatch a validated RunConfig; returns the process exit code."""
    if cfg.command == "solve":
        return _cmd_solve(cfg)
    if cfg.command == "ode":
        return _cmd_ode(cfg)
    if cfg.command == "bench":
        return _cmd_bench(cfg)
    if cfg.command == "validate":
        return _cmd_validate(cfg)
    raise ValueError(f"unknown command {cfg.command!r}")


def main(argv: Optional[list[str]] = None) -> int:
    cfg, errors = parse_config(sys.argv[1:] if argv is None else list(argv))
    if cfg is None:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return execute(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
