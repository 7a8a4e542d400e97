"""Command-line entry point.

Exit codes: 0 success, 1 any other project error, 2 config parse or network
validation error, 3 infeasible lab sizing, 4 simulation aborted, 5 t* span mismatch.
"""
import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Tuple

import pandas as pd

from configuration.loader import (
    CONSTRAINT_SECTIONS, MODEL_SECTIONS, SCENARIO_SECTIONS, apply_overrides, load_lab_constraints,
    load_model, load_scenario, save_model,
)
from configuration.settings import get_settings
from harness.channel_mapping import external_trajectory, load_channel_map
from harness.comparison import compare_runs, overlay_frame
from harness.experiment_runner import ExperimentJob, run_job
from harness.losses import enthalpy_losses
from harness.pipeline import build_metrics_report
from harness.report_renderer import ReportRenderer
from models.command import CommandName, CommandSpec
from models.errors import (
    ConfigParseError, DhnError, SimulationAbortedError, SpanMismatchError, ValidationFailedError,
)
from models.network import NetworkModel
from models.scenario import ExperimentScenario
from models.similitude import NondimBase
from network.validator import validate_network
from similitude.sizing import solve_lab_scale
from similitude.trajectory import nondimensionalize_trajectory
from utils.logger import setup_logger
from utils.result_writer import ResultWriter, read_trajectory

logger = logging.getLogger("dhn_similitude")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_ABORTED = 4
EXIT_SPAN = 5

_CONSTRAINT_ONLY = {"base", "lab", "thermal_mass_defaults"}


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise ConfigParseError(f"cannot read {path}: {e.strerror}") from e


def split_overrides(overrides: List[str], grammars: List[Tuple[str, Dict]]) -> Dict[str, List[str]]:
    """Route each ``section.key=value`` to the first grammar that knows the section kind."""
    routed: Dict[str, List[str]] = {name: [] for name, _ in grammars}
    for override in overrides:
        section = override.partition("=")[0].rpartition(".")[0].strip()
        kind = section.partition(" ")[0]
        target = next((name for name, grammar in grammars if kind in grammar), None)
        if target is None:
            raise ConfigParseError(f"override {override!r} references an unknown section", section=section)
        routed[target].append(override)
    return routed


def _model_and_scenario(spec: CommandSpec) -> Tuple[NetworkModel, ExperimentScenario]:
    routed = split_overrides(spec.overrides, [("model", MODEL_SECTIONS), ("scenario", SCENARIO_SECTIONS)])
    model = load_model(apply_overrides(_read(spec.model), routed["model"], MODEL_SECTIONS))
    scenario = load_scenario(apply_overrides(_read(spec.scenario), routed["scenario"], SCENARIO_SECTIONS))
    updates = {}
    if spec.dt is not None:
        updates["dt"] = spec.dt
    if spec.subsegments is not None:
        updates["subsegments"] = spec.subsegments
    if updates:
        scenario = ExperimentScenario.model_validate({**scenario.model_dump(), **updates})
    return model, scenario


def _writer(spec: CommandSpec) -> ResultWriter:
    if spec.out_dir:
        return ResultWriter(spec.out_dir, dated=False)
    return ResultWriter(get_settings().output_dir)


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def cmd_validate(spec: CommandSpec) -> int:
    model = load_model(apply_overrides(_read(spec.model), spec.overrides, MODEL_SECTIONS))
    report = validate_network(model)
    for violation in report.violations:
        print(f"{violation.severity.value.upper():8s} {violation.component}: {violation.rule} {violation.message}")
    if report.valid:
        print(f"Network valid ({len(report.warnings)} warning(s))")
        return EXIT_OK
    print(f"Network invalid: {len(report.errors)} error(s)")
    return EXIT_PARSE


def cmd_scale(spec: CommandSpec) -> int:
    routed = split_overrides(
        spec.overrides,
        [("constraints", {k: v for k, v in CONSTRAINT_SECTIONS.items() if k in _CONSTRAINT_ONLY}),
         ("full", MODEL_SECTIONS)])
    full_model = load_model(apply_overrides(_read(spec.full), routed["full"], MODEL_SECTIONS))
    constraints = load_lab_constraints(
        apply_overrides(_read(spec.lab_constraints), routed["constraints"], CONSTRAINT_SECTIONS))
    report = validate_network(full_model)
    if not report.valid:
        raise ValidationFailedError(report)

    solution = solve_lab_scale(full_model, constraints)
    writer = _writer(spec)
    text = ReportRenderer().render_scaling_report(solution)
    writer.save_text("scaling_report", text)
    writer.save_table("scaling_table", pd.DataFrame([row.model_dump() for row in solution.rows]))
    writer.save_text("lab_model", save_model(solution.lab_model), suffix=".ini")
    writer.save_result("scaling", solution.model_dump(mode="json", exclude={"lab_model"}))
    print(text)
    if not solution.feasible:
        for flag in solution.flags:
            print(f"INFEASIBLE {flag.component}: {flag.constraint}")
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_simulate(spec: CommandSpec) -> int:
    model, scenario = _model_and_scenario(spec)
    seed = spec.seed if spec.seed is not None else get_settings().seed
    job = ExperimentJob(name=_stem(spec.scenario), model=model, scenario=scenario,
                        autotune=spec.autotune, seed=seed)
    writer = _writer(spec)
    try:
        trajectory = run_job(job)
    except SimulationAbortedError as e:
        if e.partial is not None:
            path = writer.save_trajectory(e.partial)
            print(f"Partial trajectory written to {path}")
        raise
    path = writer.save_trajectory(trajectory)
    print(f"Trajectory ({len(trajectory)} samples) written to {path} [run {trajectory.metadata.run_id}]")
    return EXIT_OK


def cmd_nondim(spec: CommandSpec) -> int:
    writer = _writer(spec)
    model = load_model(apply_overrides(_read(spec.model), spec.overrides, MODEL_SECTIONS)) if spec.model else None
    for path in spec.trajectories:
        trajectory = read_trajectory(path)
        base = NondimBase.from_model(model) if model else trajectory.metadata.base
        nondimensional = nondimensionalize_trajectory(trajectory, base, model)
        written = writer.save_trajectory(nondimensional, f"{_stem(path)}_nondim")
        print(f"Nondimensional trajectory written to {written}")
    return EXIT_OK


def cmd_compare(spec: CommandSpec) -> int:
    if len(spec.trajectories) != 2:
        raise ConfigParseError("compare needs exactly two trajectory files (full scale first)")
    full = read_trajectory(spec.trajectories[0])
    lab = read_trajectory(spec.trajectories[1])
    full_model = load_model(_read(spec.full)) if spec.full else None
    lab_model = load_model(_read(spec.model)) if spec.model else None
    report = compare_runs(full, lab, full.metadata.base, lab.metadata.base, full_model, lab_model)

    writer = _writer(spec)
    writer.save_table("comparison_overlay", overlay_frame(
        full, lab, report, full.metadata.base, lab.metadata.base, full_model, lab_model))
    writer.save_result("comparison", report.model_dump(mode="json"))
    text = ReportRenderer().render_comparison_report(report)
    writer.save_text("comparison_report", text)
    print(text)
    return EXIT_OK


def cmd_metrics(spec: CommandSpec) -> int:
    model, scenario = _model_and_scenario(spec)
    if not spec.trajectories:
        raise ConfigParseError("metrics needs a trajectory file")
    if spec.channel_map:
        channel_map = load_channel_map(_read(spec.channel_map))
        trajectory = external_trajectory(pd.read_csv(spec.trajectories[0]), channel_map, model)
    else:
        trajectory = read_trajectory(spec.trajectories[0])
    reference = read_trajectory(spec.trajectories[1]) if len(spec.trajectories) > 1 else None
    reference_model = load_model(_read(spec.full)) if spec.full and reference is not None else None

    report = build_metrics_report(trajectory, model, scenario, reference=reference,
                                  reference_model=reference_model)
    writer = _writer(spec)
    name = _stem(spec.trajectories[0])
    writer.save_table(f"{name}_losses", enthalpy_losses(trajectory, model))
    writer.save_result(f"{name}_metrics", report.model_dump(mode="json"))
    text = ReportRenderer().render_metrics_report(report)
    writer.save_text(f"{name}_metrics", text)
    print(text)
    return EXIT_OK


COMMANDS: Dict[CommandName, Callable[[CommandSpec], int]] = {
    CommandName.VALIDATE: cmd_validate,
    CommandName.SCALE: cmd_scale,
    CommandName.SIMULATE: cmd_simulate,
    CommandName.NONDIM: cmd_nondim,
    CommandName.COMPARE: cmd_compare,
    CommandName.METRICS: cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dhn-similitude",
        description="District heating network simulator and lab-scale similitude toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out-dir", help="Output directory (default: DHN_OUTPUT_DIR/<date>).")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="Override a config value; repeatable.")

    p = sub.add_parser(CommandName.VALIDATE.value, help="Validate a network model config.")
    p.add_argument("--model", required=True)
    common(p)

    p = sub.add_parser(CommandName.SCALE.value, help="Size a lab-scale network from a full-scale one.")
    p.add_argument("--full", required=True, help="Full-scale network model config.")
    p.add_argument("--lab-constraints", required=True, help="Lab base and hardware constraints config.")
    common(p)

    p = sub.add_parser(CommandName.SIMULATE.value, help="Simulate a scenario on a network.")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--dt", type=float, help="Integration step [s].")
    p.add_argument("--subsegments", type=int, help="Sub-volumes per pipe segment.")
    p.add_argument("--autotune", action="store_true", help="Relay-tune the PIDs before the run.")
    p.add_argument("--seed", type=int, help="Seed for auto-tuning perturbations (default: DHN_SEED).")
    common(p)

    p = sub.add_parser(CommandName.NONDIM.value, help="Write nondimensional copies of trajectories.")
    p.add_argument("trajectories", nargs="+")
    p.add_argument("--model", help="Model config defining the base (default: run metadata).")
    common(p)

    p = sub.add_parser(CommandName.COMPARE.value, help="Compare a full-scale and a lab-scale run on t*.")
    p.add_argument("trajectories", nargs=2, metavar="TRAJECTORY")
    p.add_argument("--full", help="Full-scale model config, enables design π residuals.")
    p.add_argument("--model", help="Lab-scale model config, enables design π residuals.")
    common(p)

    p = sub.add_parser(CommandName.METRICS.value, help="Efficiency, delay and statistics of a run.")
    p.add_argument("trajectories", nargs="+", help="Run to evaluate, optionally followed by a reference run.")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--full", help="Model config of the reference run.")
    p.add_argument("--channel-map", help="Channel map for an external sensor export.")
    common(p)
    return parser


def parse_command(argv: Optional[List[str]] = None) -> CommandSpec:
    args = build_parser().parse_args(argv)
    return CommandSpec(
        command=CommandName(args.command),
        model=getattr(args, "model", None),
        scenario=getattr(args, "scenario", None),
        full=getattr(args, "full", None),
        lab_constraints=getattr(args, "lab_constraints", None),
        trajectories=list(getattr(args, "trajectories", None) or []),
        channel_map=getattr(args, "channel_map", None),
        out_dir=args.out_dir,
        overrides=args.override,
        seed=getattr(args, "seed", None),
        dt=getattr(args, "dt", None),
        subsegments=getattr(args, "subsegments", None),
        autotune=getattr(args, "autotune", False),
    )


def main(argv: Optional[List[str]] = None) -> int:
    setup_logger(level=get_settings().log_level)
    spec = parse_command(argv)
    try:
        return COMMANDS[spec.command](spec)
    except (ConfigParseError, ValidationFailedError) as e:
        logger.error(f"{spec.command.value}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except SimulationAbortedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ABORTED
    except SpanMismatchError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPAN
    except (DhnError, FileNotFoundError) as e:
        logger.error(f"{spec.command.value} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
