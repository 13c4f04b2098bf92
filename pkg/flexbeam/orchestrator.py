"""Pipeline orchestrator: stage state machine, presets and stage-wise commands."""

from __future__ import annotations

import platform
import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from importlib import metadata
from pathlib import Path

import numpy as np
import structlog

from flexbeam import __version__, artifacts, config
from flexbeam.errors import (
    DimensionMismatchError,
    FlexbeamError,
    MalformedSpecError,
    ValidationThresholdError,
)
from flexbeam.logging_config import cleanup_run_logger, get_run_logger
from flexbeam.models import (
    BeamSpec,
    BoundReport,
    CommutationReport,
    ConstantSignal,
    ErrorReport,
    ExperimentPreset,
    PolyExpSignal,
    ResidualReport,
    RunManifest,
    SimulationSummary,
    StateModel,
    TrajectorySummary,
    Verdict,
)
from flexbeam.numerics.beam import (
    BeamConfig,
    SpatialGrid,
    beam_config_from_spec,
    reference_config,
)
from flexbeam.numerics.genfun import (
    GenFunTable,
    compute_gen_fun_table,
    verify_decay_bounds,
)
from flexbeam.numerics.jets import make_trajectory_spec, p_jets
from flexbeam.numerics.simulator import (
    InputSignal,
    SimResult,
    SimSettings,
    compare_to_flat,
    discretize,
    simulate,
)
from flexbeam.numerics.synthesis import (
    BeamState,
    FlatTrajectory,
    check_commutation,
    initial_state_from_p,
    make_synthesis_params,
    residuals,
    synthesize_field,
)

logger = structlog.get_logger()


# --- Pipeline stages ---


class PipelineStage(str, Enum):
    """Ordered stages of one pipeline run."""

    CONFIG = "CONFIG"
    GENFUN = "GENFUN"
    BOUNDS = "BOUNDS"
    SYNTHESIS = "SYNTHESIS"
    RESIDUALS = "RESIDUALS"
    SIMULATION = "SIMULATION"
    VALIDATION = "VALIDATION"
    COMPLETE = "COMPLETE"


# --- Presets ---


def builtin_presets() -> dict[str, ExperimentPreset]:
    return {
        # transfer from a moving state to rest at 0
        "problem1": ExperimentPreset(
            name="problem1",
            p0=PolyExpSignal(poly=[1.0], exp_poly=[0.0, 0.0, 10.0], rate=-2.0),
        ),
        # rest-to-rest, 0.4 m to 0
        "problem2": ExperimentPreset(name="problem2", p0=ConstantSignal(value=0.4)),
        "steady": ExperimentPreset(
            name="steady",
            p0=ConstantSignal(value=0.4),
            pT=ConstantSignal(value=0.4),
        ),
    }


def load_preset(name_or_path: str) -> ExperimentPreset:
    presets = builtin_presets()
    if name_or_path in presets:
        return presets[name_or_path]
    return artifacts.read_json(Path(name_or_path), ExperimentPreset)


def load_beam(source: BeamSpec | str | Path | None) -> BeamConfig:
    """Reference rig for None, else a BeamSpec or the path of a beam JSON."""
    if source is None:
        return reference_config()
    if isinstance(source, BeamSpec):
        return beam_config_from_spec(source)
    return beam_config_from_spec(artifacts.read_json(Path(source), BeamSpec))


def table_intervals(nx: int, minimum: int = config.GENFUN_INTERVALS) -> int:
    """Smallest multiple of nx that is >= minimum, so field nodes are table nodes."""
    return nx * max(1, -(-minimum // nx))


# --- Run state ---


@dataclass
class ArtifactBundle:
    out_dir: Path
    manifest: RunManifest
    table: GenFunTable
    trajectory: FlatTrajectory
    simulation: SimResult
    errors: ErrorReport
    paths: dict[str, Path] = field(default_factory=dict)


class PipelineRun:
    """Mutable state for one pipeline run."""

    def __init__(self, preset: ExperimentPreset, out_dir: Path) -> None:
        self.preset = preset
        self.out_dir = out_dir
        self.stage = PipelineStage.CONFIG
        self.run_id = f"{preset.name}-{uuid.uuid4().hex[:6]}"
        self.log = get_run_logger(self.run_id)
        self.paths: dict[str, Path] = {}


def _transition(run: PipelineRun, stage: PipelineStage) -> None:
    prev = run.stage.value
    run.stage = stage
    run.log.info("stage_transition", from_stage=prev, to_stage=stage.value)


@contextmanager
def _stage(run: PipelineRun, stage: PipelineStage) -> Iterator[None]:
    _transition(run, stage)
    try:
        yield
    except FlexbeamError as exc:
        exc.stage = stage.value
        run.log.error(
            "stage_failed",
            stage=stage.value,
            error=type(exc).__name__,
            message=str(exc),
        )
        raise


# --- Serialization helpers ---


def state_model(state: BeamState) -> StateModel:
    return StateModel(
        x=state.x.tolist(),
        u=state.u.tolist(),
        v=state.v.tolist(),
        alpha=state.alpha,
        beta=state.beta,
    )


def beam_state(model: StateModel) -> BeamState:
    return BeamState(
        x=np.asarray(model.x),
        u=np.asarray(model.u),
        v=np.asarray(model.v),
        alpha=model.alpha,
        beta=model.beta,
    )


def package_versions() -> dict[str, str]:
    versions = {"flexbeam": __version__, "python": platform.python_version()}
    for name in ("numpy", "scipy", "matplotlib", "pydantic", "structlog"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def tolerances() -> dict[str, float]:
    return {
        "refinement_rtol": config.REFINEMENT_RTOL,
        "bound_atol": config.BOUND_ATOL,
        "bound_rtol": config.BOUND_RTOL,
        "quad_rtol": config.QUAD_RTOL,
        "quad_atol": config.QUAD_ATOL,
        "underflow_exponent": config.UNDERFLOW_EXPONENT,
        "compatibility_tol": config.COMPATIBILITY_TOL,
        "settling_fraction": config.SETTLING_FRACTION,
        "field_agreement": config.FIELD_AGREEMENT,
        "jet_slack": float(config.JET_SLACK),
    }


# --- Acceptance verdicts ---


def _verdict(name: str, value: float, threshold: float) -> Verdict:
    return Verdict(
        name=name, value=value, threshold=threshold, passed=value <= threshold
    )


def acceptance_verdicts(
    traj: FlatTrajectory,
    sim: SimResult,
    errors: ErrorReport,
    start: BeamState,
    end: BeamState,
    bounds: BoundReport,
    commutation: CommutationReport,
    residual_report: ResidualReport,
) -> list[Verdict]:
    travel = float(np.abs(start.u - end.u).max())
    settle = max(config.SETTLING_FRACTION * travel, config.COMPATIBILITY_TOL)
    field_tol = max(config.FIELD_AGREEMENT * travel, config.COMPATIBILITY_TOL)
    agreement = max(
        config.FIELD_AGREEMENT * errors.field_scale, config.COMPATIBILITY_TOL
    )
    series_left = float(np.abs(traj.w[-1] - end.u).max())
    simulated_left = float(np.abs(sim.w[-1] - end.u).max())
    return [
        _verdict("input_start", abs(traj.f[0] - start.u[-1]), 1e-9),
        _verdict("input_end", abs(traj.f[-1] - end.u[-1]), 1e-9),
        _verdict("tip_settling", abs(sim.tip[-1] - end.u[0]), settle),
        _verdict("tip_rate_settling", abs(sim.tip_rate[-1] - end.v[0]), settle),
        _verdict("series_field_settling", series_left, field_tol),
        _verdict("simulated_field_settling", simulated_left, field_tol),
        _verdict("series_simulation_agreement", errors.field_sup, agreement),
        _verdict("decay_bounds", 0.0 if bounds.passed else 1.0, 0.0),
        _verdict("commutation", commutation.relative, 1e-12),
        _verdict(
            "clamped_slope",
            residual_report.slope,
            max(residual_report.tail_bound, config.COMPATIBILITY_TOL),
        ),
    ]


# --- Pipeline ---


def run_pipeline(
    preset: ExperimentPreset,
    out_dir: str | Path | None = None,
    enforce: bool = True,
) -> ArtifactBundle:
    """Generating functions, trajectory, simulation and cross-validation.

    Writes every artifact under <out_dir>/<preset.name>/. With enforce, a
    failed acceptance verdict raises ValidationThresholdError after the
    manifest is written.
    """
    out = Path(out_dir if out_dir is not None else preset.output_dir) / preset.name
    run = PipelineRun(preset, out)
    run.log.info("pipeline_started", preset=preset.name, out_dir=str(out))

    try:
        with _stage(run, PipelineStage.CONFIG):
            cfg = beam_config_from_spec(preset.beam)
            field_grid = SpatialGrid(cfg.L, preset.nx)

        with _stage(run, PipelineStage.GENFUN):
            intervals = table_intervals(preset.nx, preset.genfun_intervals)
            grid = SpatialGrid(cfg.L, intervals)
            # one extra level feeds the first omitted term of the series
            table = compute_gen_fun_table(cfg, grid, preset.N + 1)
            json_path, csv_path = artifacts.write_genfun(table, out)
            run.paths.update(genfun_json=json_path, genfun_csv=csv_path)

        with _stage(run, PipelineStage.BOUNDS):
            bounds = verify_decay_bounds(table)

        with _stage(run, PipelineStage.SYNTHESIS):
            spec = make_trajectory_spec(preset.T, preset.s, preset.p0, preset.pT)
            params = make_synthesis_params(
                preset.N, preset.T, field_grid, preset.time_samples, preset.sign_flip
            )
            traj = synthesize_field(table, spec, params)
            start = initial_state_from_p(table, spec, params, "start")
            end = initial_state_from_p(table, spec, params, "end")
            input_path, field_path = artifacts.write_trajectory(traj, out)
            run.paths.update(input_csv=input_path, field_csv=field_path)

        with _stage(run, PipelineStage.RESIDUALS):
            residual_report = residuals(traj, cfg)
            commutation = check_commutation(
                table, p_jets(spec, params.time_grid, 4 * preset.N), preset.N
            )
            summary = TrajectorySummary(
                T=preset.T,
                s=preset.s,
                N=preset.N,
                sign_flip=preset.sign_flip,
                c_norm=spec.C_norm,
                gevrey_constant=traj.gevrey_constant,
                residuals=residual_report,
                start=state_model(start),
                end=state_model(end),
            )
            run.paths["trajectory_json"] = artifacts.write_json(
                summary, out / "trajectory.json"
            )

        with _stage(run, PipelineStage.SIMULATION):
            op = discretize(cfg, preset.nx)
            settings = SimSettings(
                dt=preset.dt,
                T=preset.T,
                output_dt=preset.T / (preset.time_samples - 1),
                damping=preset.damping,
            )
            signal = InputSignal.from_samples(traj.input_samples())
            sim = simulate(op, traj.state(0), signal, settings)
            sim_path, sim_field_path = artifacts.write_simulation(sim, out)
            run.paths.update(sim_csv=sim_path, sim_field_csv=sim_field_path)

        with _stage(run, PipelineStage.VALIDATION):
            errors = compare_to_flat(sim, traj)
            run.paths["errors_json"] = artifacts.write_json(errors, out / "errors.json")
            run.paths["input_svg"] = artifacts.plot_input(
                traj.times, traj.f, out / "input.svg"
            )
            run.paths["tip_svg"] = artifacts.plot_tip(
                traj.times, traj.w[:, 0], sim.times, sim.tip, out / "tip.svg"
            )
            verdicts = acceptance_verdicts(
                traj, sim, errors, start, end, bounds, commutation, residual_report
            )
            manifest = RunManifest(
                preset=preset,
                versions=package_versions(),
                tolerances=tolerances(),
                bounds=bounds,
                residuals=residual_report,
                commutation=commutation,
                simulation=_simulation_summary(sim, preset),
                errors=errors,
                verdicts=verdicts,
            )
            run.paths["manifest_json"] = artifacts.write_json(
                manifest, out / "manifest.json"
            )
            failed = [v.name for v in verdicts if not v.passed]
            if failed and enforce:
                raise ValidationThresholdError(
                    f"acceptance failed: {', '.join(failed)}"
                )

        _transition(run, PipelineStage.COMPLETE)
        run.log.info("pipeline_complete", failed_verdicts=failed)
        return ArtifactBundle(
            out_dir=out,
            manifest=manifest,
            table=table,
            trajectory=traj,
            simulation=sim,
            errors=errors,
            paths=dict(run.paths),
        )
    finally:
        cleanup_run_logger(run.run_id)


def _simulation_summary(sim: SimResult, preset: ExperimentPreset) -> SimulationSummary:
    return SimulationSummary(
        nx=preset.nx,
        dt=preset.dt,
        damping=preset.damping,
        energy_drift=sim.energy_drift if sim.constant_input else None,
        final_tip=float(sim.tip[-1]),
        final_tip_rate=float(sim.tip_rate[-1]),
    )


# --- Stage-wise commands ---


def cmd_genfun(
    beam: BeamSpec | str | Path | None,
    N: int,
    out: str | Path,
    intervals: int = config.GENFUN_INTERVALS,
) -> GenFunTable:
    """Tabulate g_k, h_k for k <= N, check the decay bounds, write genfun.*."""
    cfg = load_beam(beam)
    table = compute_gen_fun_table(cfg, SpatialGrid(cfg.L, intervals), N)
    verify_decay_bounds(table)
    artifacts.write_genfun(table, Path(out))
    logger.info("cmd_genfun_complete", N=N, out=str(out))
    return table


def cmd_synthesize(preset: ExperimentPreset, out: str | Path) -> FlatTrajectory:
    """Trajectory from the genfun artifacts in out; writes input/field CSV and JSON."""
    out = Path(out)
    cfg = beam_config_from_spec(preset.beam)
    table = artifacts.read_genfun(out)
    spec = make_trajectory_spec(preset.T, preset.s, preset.p0, preset.pT)
    params = make_synthesis_params(
        preset.N,
        preset.T,
        SpatialGrid(cfg.L, preset.nx),
        preset.time_samples,
        preset.sign_flip,
    )
    traj = synthesize_field(table, spec, params)
    artifacts.write_trajectory(traj, out)
    summary = TrajectorySummary(
        T=preset.T,
        s=preset.s,
        N=preset.N,
        sign_flip=preset.sign_flip,
        c_norm=spec.C_norm,
        gevrey_constant=traj.gevrey_constant,
        residuals=residuals(traj, cfg),
        start=state_model(initial_state_from_p(table, spec, params, "start")),
        end=state_model(initial_state_from_p(table, spec, params, "end")),
    )
    artifacts.write_json(summary, out / "trajectory.json")
    logger.info("cmd_synthesize_complete", out=str(out), sign_flip=preset.sign_flip)
    return traj


def cmd_simulate(preset: ExperimentPreset, out: str | Path) -> SimResult:
    """Simulate the input.csv / trajectory.json pair in out; writes sim*.csv."""
    out = Path(out)
    cfg = beam_config_from_spec(preset.beam)
    summary = artifacts.read_json(out / "trajectory.json", TrajectorySummary)
    samples = artifacts.read_input(out / "input.csv")
    z0 = beam_state(summary.start)
    if z0.u.size != preset.nx + 1:
        raise DimensionMismatchError(
            f"trajectory has {z0.u.size} nodes, --nx {preset.nx} needs {preset.nx + 1}"
        )
    if samples.times.size < 2:
        raise MalformedSpecError("input.csv needs at least two samples")
    settings = SimSettings(
        dt=preset.dt,
        T=float(samples.times[-1]),
        output_dt=float(samples.times[1] - samples.times[0]),
        damping=preset.damping,
    )
    signal = InputSignal.from_samples(samples)
    sim = simulate(discretize(cfg, preset.nx), z0, signal, settings)
    artifacts.write_simulation(sim, out)
    artifacts.write_json(_simulation_summary(sim, preset), out / "simulation.json")
    logger.info("cmd_simulate_complete", out=str(out), final_tip=float(sim.tip[-1]))
    return sim


def cmd_validate(out: str | Path) -> ErrorReport:
    """Compare sim_field.csv against field.csv; writes errors.json."""
    out = Path(out)
    series = artifacts.read_field(out / "field.csv")
    sim = artifacts.read_field(out / "sim_field.csv")
    errors = compare_to_flat(sim, series)
    artifacts.write_json(errors, out / "errors.json")
    logger.info("cmd_validate_complete", field_relative=errors.field_relative)
    return errors
