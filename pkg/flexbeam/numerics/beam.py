"""Physical beam description and the spatial grid shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Protocol

import numpy as np
import structlog
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike, NDArray
from pydantic import ValidationError
from scipy.interpolate import make_interp_spline

from flexbeam import config
from flexbeam.errors import (
    GridTooCoarseError,
    MalformedSpecError,
    NonPositiveCoefficientError,
    NonPositiveParameterError,
    OutOfDomainError,
)
from flexbeam.models import AffineSpec, BeamSpec, CoefficientSpec, PolySpec, TableSpec

logger = structlog.get_logger()

FloatArray = NDArray[np.float64]


# --- Coefficient functions ---


class Coefficient(Protocol):
    """x -> value with analytic derivatives of order <= 4."""

    spec: AffineSpec | PolySpec | TableSpec

    def __call__(self, x: ArrayLike) -> FloatArray: ...

    def derivative(self, x: ArrayLike, order: int = 1) -> FloatArray: ...


@dataclass(frozen=True)
class AffineCoefficient:
    spec: AffineSpec

    def __call__(self, x: ArrayLike) -> FloatArray:
        return self.spec.a * (1.0 + self.spec.b * np.asarray(x, dtype=float))

    def derivative(self, x: ArrayLike, order: int = 1) -> FloatArray:
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self(x)
        if order == 1:
            return np.full_like(x, self.spec.a * self.spec.b)
        return np.zeros_like(x)


@dataclass(frozen=True)
class PolyCoefficient:
    spec: PolySpec

    @cached_property
    def _poly(self) -> Polynomial:
        return Polynomial(self.spec.coeffs)

    def __call__(self, x: ArrayLike) -> FloatArray:
        return self._poly(np.asarray(x, dtype=float))

    def derivative(self, x: ArrayLike, order: int = 1) -> FloatArray:
        return self._poly.deriv(order)(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class TableCoefficient:
    """Quintic interpolating spline, C4 on the sampled interval."""

    spec: TableSpec

    @cached_property
    def _spline(self) -> Any:
        return make_interp_spline(self.spec.x, self.spec.values, k=5)

    def __call__(self, x: ArrayLike) -> FloatArray:
        return self._spline(np.asarray(x, dtype=float))

    def derivative(self, x: ArrayLike, order: int = 1) -> FloatArray:
        return self._spline(np.asarray(x, dtype=float), nu=order)


def make_coefficient(spec: CoefficientSpec) -> Coefficient:
    if isinstance(spec, AffineSpec):
        return AffineCoefficient(spec)
    if isinstance(spec, PolySpec):
        return PolyCoefficient(spec)
    if isinstance(spec, TableSpec):
        return TableCoefficient(spec)
    raise MalformedSpecError(f"unsupported coefficient spec: {spec!r}")


# --- Spatial grid ---


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid x_0 = 0 < ... < x_M = L."""

    L: float
    M: int

    def __post_init__(self) -> None:
        if self.M < config.MIN_GRID_INTERVALS:
            raise GridTooCoarseError(
                f"grid needs at least {config.MIN_GRID_INTERVALS} intervals, "
                f"got {self.M}"
            )
        if not self.L > 0:
            raise NonPositiveParameterError(f"grid length must be > 0, got {self.L}")

    @property
    def spacing(self) -> float:
        return self.L / self.M

    @cached_property
    def nodes(self) -> FloatArray:
        x = np.arange(self.M + 1, dtype=float) * self.spacing
        x[-1] = self.L
        x.setflags(write=False)
        return x

    def refine(self, factor: int = 2) -> SpatialGrid:
        return SpatialGrid(self.L, self.M * factor)


# --- Beam config ---


@dataclass(frozen=True)
class BeamConfig:
    """Validated physical parameters; build with make_beam_config."""

    L: float
    m: float
    J: float
    rho: Coefficient
    ei: Coefficient
    _extrema: tuple[float, float, float, float] = field(repr=False, compare=False)

    def probe_grid(self) -> FloatArray:
        return np.linspace(0.0, self.L, config.PROBE_POINTS + 1)

    def extrema(self) -> tuple[float, float, float, float]:
        """(min rho, max rho, min EI, max EI) over the probe grid."""
        return self._extrema

    def to_spec(self) -> BeamSpec:
        return BeamSpec(
            L=self.L, m=self.m, J=self.J, rho=self.rho.spec, ei=self.ei.spec
        )

    def grid(self, intervals: int) -> SpatialGrid:
        return SpatialGrid(self.L, intervals)


def make_beam_config(
    L: float,
    m: float,
    J: float,
    rho_spec: CoefficientSpec | dict,
    ei_spec: CoefficientSpec | dict,
) -> BeamConfig:
    """Parse coefficient specs and validate positivity on a dense probe grid."""
    try:
        spec = BeamSpec.model_validate(
            {"L": L, "m": m, "J": J, "rho": rho_spec, "ei": ei_spec}
        )
    except ValidationError as exc:
        raise MalformedSpecError(str(exc)) from exc
    return beam_config_from_spec(spec)


def beam_config_from_spec(spec: BeamSpec) -> BeamConfig:
    for name in ("L", "m", "J"):
        value = getattr(spec, name)
        if not (np.isfinite(value) and value > 0):
            raise NonPositiveParameterError(f"{name} must be > 0, got {value}")

    rho = make_coefficient(spec.rho)
    ei = make_coefficient(spec.ei)

    probe = np.linspace(0.0, spec.L, config.PROBE_POINTS + 1)
    for name, fn in (("rho", rho), ("ei", ei)):
        values = fn(probe)
        if not np.all(np.isfinite(values)):
            raise MalformedSpecError(f"{name} is not finite on [0, L]")
        worst = int(np.argmin(values))
        if values[worst] <= 0:
            raise NonPositiveCoefficientError(
                f"{name}({probe[worst]:.6g}) = {values[worst]:.6g} <= 0"
            )

    rho_probe = rho(probe)
    ei_probe = ei(probe)
    extrema = (
        float(rho_probe.min()),
        float(rho_probe.max()),
        float(ei_probe.min()),
        float(ei_probe.max()),
    )
    logger.debug("beam_config_validated", L=spec.L, m=spec.m, J=spec.J, extrema=extrema)
    return BeamConfig(L=spec.L, m=spec.m, J=spec.J, rho=rho, ei=ei, _extrema=extrema)


def load_beam_config(data: dict) -> BeamConfig:
    """Build a config from the parsed JSON schema."""
    try:
        spec = BeamSpec.model_validate(data)
    except ValidationError as exc:
        raise MalformedSpecError(str(exc)) from exc
    return beam_config_from_spec(spec)


def reference_config() -> BeamConfig:
    return load_beam_config(config.REFERENCE_BEAM)


def eval_coefficients(cfg: BeamConfig, x: ArrayLike) -> tuple[Any, Any]:
    """Return (rho(x), EI(x)); scalars in, scalars out."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0.0) or np.any(xa > cfg.L) or not np.all(np.isfinite(xa)):
        raise OutOfDomainError(f"x must lie in [0, {cfg.L}]")
    rho, ei = cfg.rho(xa), cfg.ei(xa)
    if xa.ndim == 0:
        return float(rho), float(ei)
    return rho, ei
