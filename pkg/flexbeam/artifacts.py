"""Reading and writing pipeline artifacts (CSV, JSON, SVG).

Directory layout of one run:
    out/problem2/
        genfun.json  genfun.csv
        input.csv  field.csv  trajectory.json
        sim.csv  sim_field.csv
        errors.json  manifest.json
        input.svg  tip.svg
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TypeVar

import matplotlib
import numpy as np
import structlog
from matplotlib.figure import Figure
from pydantic import BaseModel, ValidationError

from flexbeam.errors import ArtifactNotFoundError, ArtifactParseError
from flexbeam.models import GenFunExport, GridModel
from flexbeam.numerics.beam import FloatArray, SpatialGrid
from flexbeam.numerics.genfun import FAMILIES, GenFunTable
from flexbeam.numerics.simulator import SimResult
from flexbeam.numerics.synthesis import FlatTrajectory, InputSamples

logger = structlog.get_logger()

ModelT = TypeVar("ModelT", bound=BaseModel)

DERIVATIVE_SUFFIXES = ("", "_x", "_xx", "_xxx", "_xxxx")
CSV_FORMAT = "%.17g"

# fixed element ids keep the SVG output byte-identical across runs
matplotlib.rcParams["svg.hashsalt"] = "flexbeam"


@dataclass(frozen=True)
class FieldTable:
    """A field history w(t_i, x_j) read back from a long-format CSV."""

    times: FloatArray
    x: FloatArray
    w: FloatArray
    w_t: FloatArray | None = None


# --- Generic helpers ---


def _require(path: Path) -> Path:
    if not path.is_file():
        raise ArtifactNotFoundError(f"missing artifact: {path}")
    return path


def write_json(model: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n")
    logger.debug("artifact_written", path=str(path))
    return path


def read_json(path: Path, model: type[ModelT]) -> ModelT:
    text = _require(path).read_text()
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise ArtifactParseError(f"{path}: {exc}") from exc


def write_csv(path: Path, columns: list[str], data: FloatArray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        data,
        delimiter=",",
        header=",".join(columns),
        comments="",
        fmt=CSV_FORMAT,
    )
    logger.debug("artifact_written", path=str(path), rows=data.shape[0])
    return path


def read_csv(
    path: Path, columns: list[str] | None = None
) -> tuple[list[str], FloatArray]:
    with _require(path).open() as fh:
        header = fh.readline().strip().split(",")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ArtifactParseError(f"{path}: {exc}") from exc
    if columns is not None and header != columns:
        raise ArtifactParseError(f"{path}: expected columns {columns}, got {header}")
    if data.shape[1] != len(header):
        raise ArtifactParseError(
            f"{path}: {data.shape[1]} values, {len(header)} names"
        )
    return header, data


# --- Generating functions ---


def genfun_columns(N: int) -> list[str]:
    names = ["x"]
    for fam in FAMILIES:
        for k in range(N + 1):
            names.extend(f"{fam}{k}{suffix}" for suffix in DERIVATIVE_SUFFIXES)
    return names


def genfun_export(table: GenFunTable) -> GenFunExport:
    return GenFunExport(
        N=table.N,
        grid=GridModel(L=table.grid.L, M=table.grid.M),
        endpoints=table.endpoints.tolist(),
        R1=table.R1,
        R2=table.R2,
    )


def write_genfun(table: GenFunTable, out_dir: Path) -> tuple[Path, Path]:
    blocks = [table.grid.nodes[:, None]]
    for fam in FAMILIES:
        values = table.family(fam)  # (N + 1, 5, M + 1)
        blocks.append(values.reshape(-1, values.shape[-1]).T)
    csv_path = write_csv(
        out_dir / "genfun.csv", genfun_columns(table.N), np.hstack(blocks)
    )
    json_path = write_json(genfun_export(table), out_dir / "genfun.json")
    return json_path, csv_path


def read_genfun(out_dir: Path) -> GenFunTable:
    meta = read_json(out_dir / "genfun.json", GenFunExport)
    _, data = read_csv(out_dir / "genfun.csv", genfun_columns(meta.N))
    grid = SpatialGrid(meta.grid.L, meta.grid.M)
    if data.shape[0] != grid.M + 1 or not np.allclose(
        data[:, 0], grid.nodes, rtol=0, atol=1e-14 * grid.L
    ):
        raise ArtifactParseError("genfun.csv nodes do not match genfun.json grid")

    width = (meta.N + 1) * len(DERIVATIVE_SUFFIXES)
    tables = []
    for i in range(len(FAMILIES)):
        block = data[:, 1 + i * width : 1 + (i + 1) * width].T
        tables.append(block.reshape(meta.N + 1, len(DERIVATIVE_SUFFIXES), -1))
    table = GenFunTable(
        N=meta.N, grid=grid, g=tables[0], h=tables[1], R1=meta.R1, R2=meta.R2
    )
    if not np.array_equal(table.endpoints, np.asarray(meta.endpoints)):
        raise ArtifactParseError("genfun.csv endpoints disagree with genfun.json")
    return table


# --- Trajectories ---

INPUT_COLUMNS = ["t", "f", "f_t", "f_tt"]
FIELD_COLUMNS = ["t", "x", "w", "w_t"]
SIM_COLUMNS = ["t", "w0", "wx0", "E"]
SIM_FIELD_COLUMNS = ["t", "x", "w"]


def _long_format(times: FloatArray, x: FloatArray, *fields: FloatArray) -> FloatArray:
    tt, xx = np.meshgrid(times, x, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel(), *(f.ravel() for f in fields)])


def _from_long_format(data: FloatArray, path: Path) -> FieldTable:
    times = np.unique(data[:, 0])
    x = np.unique(data[:, 1])
    if data.shape[0] != times.size * x.size:
        raise ArtifactParseError(f"{path}: rows do not form a (t, x) grid")
    w = data[:, 2].reshape(times.size, x.size)
    w_t = data[:, 3].reshape(times.size, x.size) if data.shape[1] > 3 else None
    return FieldTable(times=times, x=x, w=w, w_t=w_t)


def write_trajectory(traj: FlatTrajectory, out_dir: Path) -> tuple[Path, Path]:
    input_path = write_csv(
        out_dir / "input.csv",
        INPUT_COLUMNS,
        np.column_stack([traj.times, traj.f, traj.f_dot, traj.f_ddot]),
    )
    field_path = write_csv(
        out_dir / "field.csv",
        FIELD_COLUMNS,
        _long_format(traj.times, traj.x, traj.w, traj.w_t),
    )
    return input_path, field_path


def read_input(path: Path) -> InputSamples:
    _, data = read_csv(path, INPUT_COLUMNS)
    return InputSamples(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def read_field(path: Path) -> FieldTable:
    header, data = read_csv(path)
    if header not in (FIELD_COLUMNS, SIM_FIELD_COLUMNS):
        raise ArtifactParseError(f"{path}: unexpected columns {header}")
    return _from_long_format(data, path)


# --- Simulation ---


def write_simulation(sim: SimResult, out_dir: Path) -> tuple[Path, Path]:
    trace = write_csv(
        out_dir / "sim.csv",
        SIM_COLUMNS,
        np.column_stack([sim.times, sim.tip, sim.slope, sim.energy]),
    )
    field = write_csv(
        out_dir / "sim_field.csv",
        SIM_FIELD_COLUMNS,
        _long_format(sim.times, sim.x, sim.w),
    )
    return trace, field


# --- Charts ---


def _save_svg(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("chart_written", path=str(path))
    return path


def plot_input(times: FloatArray, f: FloatArray, path: Path) -> Path:
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    ax.plot(times, f, color="tab:blue")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("f(t) [m]")
    ax.set_title("Joint position")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save_svg(fig, path)


def plot_tip(
    times: FloatArray,
    series_tip: FloatArray,
    sim_times: FloatArray,
    sim_tip: FloatArray,
    path: Path,
) -> Path:
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    ax.plot(times, series_tip, color="tab:blue", label="series")
    ax.plot(sim_times, sim_tip, color="tab:orange", linestyle="--", label="simulation")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("w(0, t) [m]")
    ax.set_title("Tip-mass position")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save_svg(fig, path)
