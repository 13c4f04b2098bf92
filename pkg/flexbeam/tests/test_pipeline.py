"""End-to-end pipeline, stage-wise commands and the command-line surface."""

from __future__ import annotations

import json

import pytest

from flexbeam import artifacts
from flexbeam.errors import (
    EXIT_USAGE,
    EXIT_VALIDATION,
    ArtifactNotFoundError,
    DimensionMismatchError,
    GridMismatchError,
    ValidationThresholdError,
)
from flexbeam.main import build_parser, main, resolve_preset
from flexbeam.models import ExperimentPreset, RunManifest
from flexbeam.orchestrator import (
    builtin_presets,
    cmd_genfun,
    cmd_simulate,
    cmd_synthesize,
    cmd_validate,
    load_preset,
    run_pipeline,
    table_intervals,
)

# coarser sampling than the defaults keeps each run to a few seconds
FAST = {"time_samples": 151, "dt": 1e-3}

EXPECTED_ARTIFACTS = (
    "genfun.json",
    "genfun.csv",
    "input.csv",
    "field.csv",
    "trajectory.json",
    "sim.csv",
    "sim_field.csv",
    "errors.json",
    "input.svg",
    "tip.svg",
    "manifest.json",
)


def fast(name: str, /, **updates) -> ExperimentPreset:
    return builtin_presets()[name].model_copy(update={**FAST, **updates})


@pytest.fixture(scope="module")
def problem2_run(tmp_path_factory):
    return run_pipeline(fast("problem2"), tmp_path_factory.mktemp("runs"))


# --- Presets ---


def test_builtin_presets():
    presets = builtin_presets()
    assert set(presets) == {"problem1", "problem2", "steady"}
    assert presets["problem2"].p0.value == 0.4
    assert presets["problem2"].N == 20
    assert presets["problem2"].T == 3.0


def test_preset_from_file(tmp_path):
    path = tmp_path / "custom.json"
    preset = fast("problem2", name="custom", N=12)
    path.write_text(preset.model_dump_json())
    loaded = load_preset(str(path))
    assert loaded.name == "custom"
    assert loaded.N == 12


def test_missing_preset_file(tmp_path):
    with pytest.raises(ArtifactNotFoundError):
        load_preset(str(tmp_path / "absent.json"))


def test_table_intervals():
    assert table_intervals(150, 512) == 600
    assert table_intervals(150, 150) == 150
    assert table_intervals(600, 512) == 600


def test_command_line_overrides():
    args = build_parser().parse_args(
        ["run", "--preset", "problem1", "--N", "8", "--sign-flip", "--out", "x"]
    )
    preset = resolve_preset(args)
    assert preset.name == "problem1"
    assert preset.N == 8
    assert preset.sign_flip
    assert preset.output_dir == "x"


# --- Full pipeline ---


def test_transfer_run_passes(problem2_run):
    manifest = problem2_run.manifest
    assert all(v.passed for v in manifest.verdicts), [
        v.name for v in manifest.verdicts if not v.passed
    ]
    traj = problem2_run.trajectory
    assert traj.f[0] == pytest.approx(0.4, abs=1e-9)
    assert traj.f[-1] == pytest.approx(0.0, abs=1e-9)
    assert abs(problem2_run.simulation.tip[-1]) <= 0.004
    assert problem2_run.table.N == 21
    # a driven joint does work on the beam, so no drift is reported
    assert problem2_run.manifest.simulation.energy_drift is None


def test_transfer_run_writes_artifacts(problem2_run):
    out = problem2_run.out_dir
    assert out.name == "problem2"
    for name in EXPECTED_ARTIFACTS:
        assert (out / name).is_file(), name
    manifest = artifacts.read_json(out / "manifest.json", RunManifest)
    assert manifest.preset.name == "problem2"
    assert manifest.residuals.N == 20
    assert "numpy" in manifest.versions
    assert {v.name for v in manifest.verdicts} >= {
        "input_start",
        "tip_settling",
        "decay_bounds",
        "commutation",
        "clamped_slope",
    }
    errors = json.loads((out / "errors.json").read_text())
    assert errors["field_scale"] >= 0.4


def test_steady_run_stays_put(tmp_path):
    bundle = run_pipeline(fast("steady"), tmp_path)
    assert all(v.passed for v in bundle.manifest.verdicts)
    assert bundle.errors.field_sup <= 1e-10
    assert abs(bundle.simulation.tip[-1] - 0.4) <= 1e-10
    assert bundle.manifest.simulation.energy_drift is not None


def test_moving_start_run_passes(tmp_path):
    bundle = run_pipeline(fast("problem1"), tmp_path)
    failed = [v.name for v in bundle.manifest.verdicts if not v.passed]
    assert not failed
    assert abs(bundle.trajectory.f[-1]) <= 1e-9


def test_flipped_sign_fails_acceptance(tmp_path):
    preset = fast("problem2", sign_flip=True)
    bundle = run_pipeline(preset, tmp_path / "report", enforce=False)
    assert not all(v.passed for v in bundle.manifest.verdicts)
    assert (bundle.out_dir / "manifest.json").is_file()
    with pytest.raises(ValidationThresholdError) as info:
        run_pipeline(preset, tmp_path / "enforced")
    assert info.value.exit_code == 2
    assert info.value.stage == "VALIDATION"


# --- Stage-wise commands ---


def test_stage_wise_commands(tmp_path):
    preset = fast("problem2")
    table = cmd_genfun(preset.beam, preset.N, tmp_path, 600)
    assert table.endpoints.shape == (21, 4)
    traj = cmd_synthesize(preset, tmp_path)
    sim = cmd_simulate(preset, tmp_path)
    errors = cmd_validate(tmp_path)
    assert (tmp_path / "simulation.json").is_file()
    assert errors.joint_sup <= 1e-9
    assert errors.field_relative < 0.02
    assert sim.times.size == traj.times.size


def test_simulate_checks_grid_size(tmp_path):
    preset = fast("problem2")
    cmd_genfun(preset.beam, preset.N, tmp_path, 600)
    cmd_synthesize(preset, tmp_path)
    with pytest.raises(DimensionMismatchError):
        cmd_simulate(preset.model_copy(update={"nx": 100}), tmp_path)


def test_validate_rejects_mismatched_fields(tmp_path):
    preset = fast("steady")
    cmd_genfun(preset.beam, preset.N, tmp_path / "a", 600)
    cmd_synthesize(preset, tmp_path / "a")
    cmd_simulate(preset, tmp_path / "a")
    coarse = preset.model_copy(update={"nx": 50})
    cmd_genfun(coarse.beam, coarse.N, tmp_path / "b", 600)
    cmd_synthesize(coarse, tmp_path / "b")
    (tmp_path / "a" / "field.csv").write_bytes(
        (tmp_path / "b" / "field.csv").read_bytes()
    )
    with pytest.raises(GridMismatchError):
        cmd_validate(tmp_path / "a")


def test_genfun_export_is_deterministic(tmp_path):
    cmd_genfun(None, 4, tmp_path / "a", 512)
    cmd_genfun(None, 4, tmp_path / "b", 512)
    first = (tmp_path / "a" / "genfun.csv").read_bytes()
    assert first == (tmp_path / "b" / "genfun.csv").read_bytes()


# --- Command line ---


def test_cli_run_succeeds(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["run", "--preset", "steady", "--dt", "1e-3", "--out", "runs"])
    assert code == 0
    assert (tmp_path / "runs" / "steady" / "manifest.json").is_file()
    assert any((tmp_path / "logs").iterdir())


def test_cli_reports_failed_acceptance(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(
        ["run", "--preset", "problem2", "--sign-flip", "--dt", "1e-3", "--out", "o"]
    )
    assert code == 2


def test_cli_missing_artifacts(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["validate", "--out", "empty"]) == 4
    assert "validate" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv", [["plot"], ["run", "--preset"], ["run", "--bogus"], ["run", "--N", "x"]]
)
def test_cli_usage_errors_have_own_exit_code(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE
    assert info.value.code != EXIT_VALIDATION
    assert "usage: flexbeam" in capsys.readouterr().err
