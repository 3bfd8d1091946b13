"""Command-line entry point: ``qswitch {timing,switch,trigger,sweep}``."""

import argparse
import itertools
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import polars as pl

from qswitch.config import PRESETS, ScenarioConfig, SweepTarget, load_config
from qswitch.error import ConfigError, QSwitchError
from qswitch.report import OutputFormat, RunReport
from qswitch.switch_model import SWITCH_ZETA, DiagonalBasis, SwitchOutcome, diagonal_measure, postselect, run_switch, target_switch
from qswitch.timing import (
    PathProfile,
    build_paths,
    matching_residual,
    near_surface_duration,
    proper_time,
    small_mass_duration,
    solve_matching,
    static_agent_tau,
    validate_windows,
)
from qswitch.trigger import (
    TriggerMode,
    analytic_trajectory,
    check_trigger_condition,
    numeric_evolve,
    reflection_bound,
    trajectory_table,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_CONFIG = 2
EXIT_STRICT = 3


def _timing_row(config: ScenarioConfig) -> tuple[dict[str, Any], list[str]]:
    body = config.body()
    p = config.protocol
    schedule = config.schedule()
    solution = solve_matching(body, p.h, p.d, dt_c=p.dt_c)
    row: dict[str, Any] = {
        "regime": str(solution.regime),
        "ratio_exact": solution.ratio_exact,
        "ratio_weak_field": solution.ratio_weak_field,
        "ratio_curvature_form": solution.ratio_curvature_form,
        "relative_gap": solution.relative_gap,
        "dt_r[s]": schedule.dt_r,
        "dt_s[s]": schedule.dt_s,
        "dt_c[s]": schedule.transit_time,
        "dt_exp[s]": schedule.dt_exp,
        "tau_star[s]": schedule.tau_star,
        "residual[s]": matching_residual(schedule),
        "dt_r_near_surface[s]": near_surface_duration(body, p.h, p.d),
        "dt_r_small_mass[s]": small_mass_duration(body, p.d),
        "static_tau[s]": static_agent_tau(config.static_radius, body),
    }
    row.update({f"ref_{name}": value for name, value in config.references})
    warnings: list[str] = []
    if p.decay_time is not None and p.trigger_window is not None:
        feasibility = validate_windows(schedule, p.decay_time, p.trigger_window, threshold=p.threshold)
        row["photon_window_margin"] = feasibility.photon_window_margin
        row["decay_window_margin"] = feasibility.decay_window_margin
        row["transit_margin"] = feasibility.transit_margin
        row["feasible"] = feasibility.passed
        warnings.extend(feasibility.failures())
    return row, warnings


def _events_table(config: ScenarioConfig) -> pl.DataFrame:
    schedule = config.schedule()
    body = schedule.body
    paths = dict(zip(("tau_A<B[s]", "tau_B<A[s]"), build_paths(schedule), strict=True))
    events = {
        "t0": schedule.t0,
        "t1": schedule.t1,
        "t2": schedule.t2,
        "t3": schedule.t3,
        "t_b_prepare": schedule.t_b_prepare,
        "t4": schedule.t4,
    }

    def elapsed(path: PathProfile, t: float) -> float:
        t = min(t, path.duration)
        return proper_time(path.truncated(t), body) if t > 0.0 else 0.0

    return pl.DataFrame(
        {
            "event": list(events),
            "t[s]": list(events.values()),
            **{col: [elapsed(path, t) for t in events.values()] for col, path in paths.items()},
        },
    )


def cmd_timing(config: ScenarioConfig) -> RunReport:
    row, warnings = _timing_row(config)
    tables = {"events": _events_table(config)}
    p = config.protocol
    if p.decay_time is not None and p.trigger_window is not None:
        tables["feasibility"] = validate_windows(config.schedule(), p.decay_time, p.trigger_window, threshold=p.threshold).table()
    else:
        logger.info("no decay time or trigger window configured; feasibility checks skipped")
    return RunReport(
        command="timing",
        inputs=config.resolved(),
        headline=pl.DataFrame([{"scenario": config.name, **row}]),
        warnings=tuple(warnings),
        tables=tables,
    )


def _switch_row(outcome: SwitchOutcome) -> dict[str, Any]:
    row: dict[str, Any] = {f"P_zeta{z}": p for z, p in outcome.probabilities().items()}
    post, p = postselect(outcome, SWITCH_ZETA)
    plus, minus = diagonal_measure(post) if p > 0.0 else (None, None)
    row["P_plus"] = 0.0 if plus is None else plus.probability
    row["P_minus"] = 0.0 if minus is None else minus.probability
    return row


def cmd_switch(config: ScenarioConfig) -> RunReport:
    outcome = run_switch(config.alpha, config.model)
    tables = {
        "path_basis": outcome.table(DiagonalBasis.PATH),
        "state": outcome.state.table(),
    }
    try:
        classical = target_switch(config.alpha)
    except QSwitchError as e:
        logger.info("target-only switch skipped: %s", e)
    else:
        states = (classical.plus.amplitudes, classical.minus.amplitudes)
        amps = {f"e{k + 1}.{part}": [getattr(s[k], attr) for s in states] for k in range(5) for part, attr in (("re", "real"), ("im", "imag"))}
        tables["target_only"] = pl.DataFrame({"sign": [1, -1], "probability": [classical.p_plus, classical.p_minus], **amps})
    inputs = {**config.resolved(), **{f"alpha{k + 1}.re": a.real for k, a in enumerate(config.alpha)}}
    inputs.update({f"alpha{k + 1}.im": a.imag for k, a in enumerate(config.alpha)})
    return RunReport(command="switch", inputs=inputs, headline=outcome.table(DiagonalBasis.AGENTS), tables=tables)


def cmd_trigger(config: ScenarioConfig) -> RunReport:
    t = config.trigger
    params = config.trigger_params()
    grid = t.grid()
    reports = [check_trigger_condition(params, TriggerMode.ANALYTIC, validity_threshold=t.validity_threshold)]
    tables = {"analytic_trajectory": trajectory_table(analytic_trajectory(params, t.samples))}
    if t.numeric:
        reports.append(
            check_trigger_condition(
                params,
                TriggerMode.NUMERIC,
                grid=grid,
                before_threshold=t.before_threshold,
                after_threshold=t.after_threshold,
                validity_threshold=t.validity_threshold,
            ),
        )
        tables["trajectory"] = trajectory_table(numeric_evolve(params, grid, samples=t.samples))
    bound = reflection_bound(params)
    inputs = {
        **config.resolved(),
        "trigger_mass[kg]": params.mass,
        "omega[rad/s]": params.omega,
        "delta[m]": params.delta,
        "v0[J]": params.v0,
        "amplitude[m]": params.amplitude,
        "sigma[m]": params.sigma,
        "tau_star[s]": params.tau_star,
        "above_barrier": bound.above_barrier,
        **{f"factor_{k.replace('/', '_over_')}": v for k, v in params.validity_factors().items()},
    }
    return RunReport(
        command="trigger",
        inputs=inputs,
        headline=pl.concat([r.table() for r in reports]),
        warnings=tuple(params.violations(t.validity_threshold)),
        tables=tables,
    )


def cmd_sweep(config: ScenarioConfig) -> RunReport:
    sweep = config.sweep
    if sweep is None:
        err = "the sweep command needs a [sweep] section"
        raise ConfigError(err)
    names = [a.parameter for a in sweep.axes]
    logger.info("sweeping %s over %d points (%s)", ", ".join(names), sweep.size, sweep.target)
    rows = []
    warnings: dict[str, None] = {}
    for point in itertools.product(*(a.values() for a in sweep.axes)):
        scenario = config
        for name, value in zip(names, point, strict=True):
            scenario = scenario.with_value(name, float(value))
        match sweep.target:
            case SweepTarget.TIMING:
                row, found = _timing_row(scenario)
                warnings.update(dict.fromkeys(found))
            case SweepTarget.SWITCH:
                row = _switch_row(run_switch(scenario.alpha, scenario.model))
        rows.append({**dict(zip(names, (float(v) for v in point), strict=True)), **row})
    headline = pl.DataFrame(rows).sort(names, maintain_order=True)
    return RunReport(command="sweep", inputs=config.resolved(), headline=headline, warnings=tuple(warnings))


COMMANDS: dict[str, Callable[[ScenarioConfig], RunReport]] = {
    "timing": cmd_timing,
    "switch": cmd_switch,
    "trigger": cmd_trigger,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="scenario TOML file")
    common.add_argument("--preset", choices=sorted(PRESETS), default=None, help="override the scenario preset")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: [output] dir)")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    common.add_argument("--strict", action="store_true", help="exit with status 3 when any warning is raised")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="qswitch", description="Gravitational quantum switch calculations.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("timing", parents=[common], help="matching condition and protocol duration")
    sub.add_parser("switch", parents=[common], help="agent/photon switch amplitudes and postselection")
    sub.add_parser("trigger", parents=[common], help="harmonic-oscillator trigger evolution")
    sub.add_parser("sweep", parents=[common], help="grid evaluation of timing or switch outputs")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("qswitch").setLevel(level)

    try:
        config = load_config(args.config, preset=args.preset)
        report = COMMANDS[args.command](config)
        written = report.write(args.out or config.output.dir, config.stem, OutputFormat(args.format))
    except ConfigError as e:
        sys.stderr.write(f"qswitch: config error: {e}\n")
        return EXIT_CONFIG
    except QSwitchError as e:
        sys.stderr.write(f"qswitch: error: {e}\n")
        return EXIT_DOMAIN

    for path in written:
        sys.stdout.write(f"{path}\n")
    if report.warnings:
        logger.info("%d warning(s) raised", len(report.warnings))
        if args.strict:
            sys.stderr.write(f"qswitch: {len(report.warnings)} warning(s) under --strict\n")
            return EXIT_STRICT
    return EXIT_OK
