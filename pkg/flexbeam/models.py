"""Pydantic models for config files, reports and serialized artifacts."""

from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, Field, model_validator

from flexbeam import config

# --- Coefficient functions rho(x), EI(x) ---


class AffineSpec(BaseModel):
    """a * (1 + b * x)."""

    kind: Literal["affine"] = "affine"
    a: float
    b: float = 0.0


class PolySpec(BaseModel):
    """Polynomial in x, ascending coefficients."""

    kind: Literal["poly"] = "poly"
    coeffs: list[float] = Field(min_length=1)


class TableSpec(BaseModel):
    """Tabulated samples, interpolated by a quintic (C4) spline."""

    kind: Literal["table"] = "table"
    x: list[float] = Field(min_length=6)
    values: list[float] = Field(min_length=6)

    @model_validator(mode="after")
    def _check_lengths(self) -> TableSpec:
        if len(self.x) != len(self.values):
            raise ValueError("x and values must have the same length")
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ValueError("x must be strictly increasing")
        return self


CoefficientSpec = Annotated[
    AffineSpec | PolySpec | TableSpec, Field(discriminator="kind")
]


class BeamSpec(BaseModel):
    """JSON schema of a beam config file."""

    L: float
    m: float
    J: float
    rho: CoefficientSpec
    ei: CoefficientSpec


# --- Closed-form flat-parameter signals p0, pT ---


class ConstantSignal(BaseModel):
    kind: Literal["constant"] = "constant"
    value: float


class PolynomialSignal(BaseModel):
    """Polynomial in t, ascending coefficients."""

    kind: Literal["polynomial"] = "polynomial"
    coeffs: list[float] = Field(min_length=1)


class PolyExpSignal(BaseModel):
    """poly(t) + exp_poly(t) * exp(rate * t)."""

    kind: Literal["poly-times-exponential"] = "poly-times-exponential"
    poly: list[float] = Field(default_factory=lambda: [0.0])
    exp_poly: list[float] = Field(min_length=1)
    rate: float


SignalSpec = Annotated[
    ConstantSignal | PolynomialSignal | PolyExpSignal, Field(discriminator="kind")
]


# --- Experiment presets ---


class ExperimentPreset(BaseModel):
    """Everything one pipeline run depends on."""

    name: str
    beam: BeamSpec = Field(default_factory=lambda: BeamSpec(**config.REFERENCE_BEAM))
    T: float = config.DEFAULT_T
    s: float = config.DEFAULT_S
    N: int = config.DEFAULT_N
    p0: SignalSpec
    pT: SignalSpec = Field(default_factory=lambda: ConstantSignal(value=0.0))
    time_samples: int = config.TIME_SAMPLES
    genfun_intervals: int = config.GENFUN_INTERVALS
    nx: int = config.SIM_INTERVALS
    dt: float = config.SIM_DT
    damping: float = 0.0
    sign_flip: bool = False
    output_dir: str = "out"


# --- Reports ---


class FamilyMargin(BaseModel):
    """Worst observed bound usage for one generating-function family."""

    family: Literal["g", "h"]
    worst_ratio: float  # max |value| / bound over nodes with bound > 0
    worst_excess: float  # max |value| - bound - allowance (<= 0 means pass)
    worst_level: int


class BoundReport(BaseModel):
    R1: float
    R2: float
    families: list[FamilyMargin]
    passed: bool


class CommutationReport(BaseModel):
    max_abs_diff: float
    scale: float

    @property
    def relative(self) -> float:
        return self.max_abs_diff / self.scale if self.scale > 0 else 0.0


class ResidualReport(BaseModel):
    N: int
    pde: float
    tip_force: float
    tip_moment: float
    slope: float
    tail_estimate: float
    tail_bound: float


class ErrorReport(BaseModel):
    tip_sup: float
    tip_l2: float
    joint_sup: float
    joint_l2: float
    field_sup: float
    field_l2: float
    field_scale: float

    @property
    def field_relative(self) -> float:
        return self.field_sup / self.field_scale if self.field_scale > 0 else 0.0


# --- Serialized artifacts ---


class GridModel(BaseModel):
    L: float
    M: int


class GenFunExport(BaseModel):
    """genfun.json; the sampled functions live in genfun.csv."""

    N: int
    grid: GridModel
    endpoints: list[list[float]]
    R1: float
    R2: float


class StateModel(BaseModel):
    """A BeamState on a field grid."""

    x: list[float]
    u: list[float]
    v: list[float]
    alpha: float
    beta: float


class TrajectorySummary(BaseModel):
    """trajectory.json written next to input.csv and field.csv."""

    T: float
    s: float
    N: int
    sign_flip: bool
    c_norm: float
    gevrey_constant: float
    residuals: ResidualReport | None = None
    start: StateModel
    end: StateModel


class SimulationSummary(BaseModel):
    nx: int
    dt: float
    damping: float
    integrator: str = "newmark-average-acceleration"
    energy_drift: float | None = None  # constant input only
    final_tip: float
    final_tip_rate: float


class Verdict(BaseModel):
    name: str
    value: float
    threshold: float
    passed: bool


class RunManifest(BaseModel):
    """manifest.json: every parameter and tolerance affecting the outputs."""

    preset: ExperimentPreset
    versions: dict[str, str]
    tolerances: dict[str, float]
    bounds: BoundReport
    residuals: ResidualReport
    commutation: CommutationReport
    simulation: SimulationSummary
    errors: ErrorReport
    verdicts: list[Verdict]
