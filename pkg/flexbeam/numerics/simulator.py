"""Finite-difference model of the beam with tip-mass and moving joint.

Unknowns q = [theta, w_0, ..., w_{Nx-1}]; the joint node w_Nx = f(t) is
prescribed. Nodal curvatures

    kappa_0  = 2 (w_1 - w_0 - h theta) / h^2
    kappa_i  = (w_{i+1} - 2 w_i + w_{i-1}) / h^2
    kappa_Nx = 2 (w_{Nx-1} - w_Nx) / h^2        (ghost w_{Nx+1} = w_{Nx-1})

enter the strain energy 1/2 sum_i c_i h EI_i kappa_i^2 (trapezoidal
weights), so the stiffness is D^T W D. theta is the modified tip slope
w_x(0) + h^2/6 w_xxx(0), which makes the tip rows second-order consistent.
The mass is lumped: J on theta, m + rho_0 h/2 on w_0 and rho_i h inside.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
import structlog
from scipy.integrate import trapezoid
from scipy.interpolate import BPoly
from scipy.linalg import cho_solve_banded, cholesky_banded, eigh

from flexbeam import config
from flexbeam.errors import (
    DimensionMismatchError,
    GridMismatchError,
    GridTooCoarseError,
    IncompatibleInitialDataError,
    MalformedSpecError,
    NonFiniteStateError,
    OutOfDomainError,
)
from flexbeam.models import ErrorReport
from flexbeam.numerics.beam import BeamConfig, FloatArray, SpatialGrid
from flexbeam.numerics.synthesis import BeamState, InputSamples

logger = structlog.get_logger()

BANDWIDTH = 2


@dataclass(frozen=True)
class SimOperator:
    config: BeamConfig
    Nx: int
    dx: float
    x: FloatArray
    mass: FloatArray  # diagonal of M, length Nx + 1
    input_mass: float  # rho_Nx h / 2 carried by the joint node
    K: FloatArray  # constrained stiffness (Nx + 1, Nx + 1)
    k_f: FloatArray  # coupling column to the joint node
    k_ff: float
    curvature: FloatArray  # D, (Nx + 1, Nx + 2)
    weights: FloatArray  # diagonal of W

    @property
    def size(self) -> int:
        return self.Nx + 1

    def full_stiffness(self) -> FloatArray:
        return self.curvature.T @ (self.weights[:, None] * self.curvature)

    def curvatures(self, q: FloatArray, f: float) -> FloatArray:
        return self.curvature @ np.append(q, f)

    def internal_force(self, q: FloatArray, f: float) -> FloatArray:
        """K q + k_f f, formed as D^T W D [q; f] so rest states give exactly 0."""
        return (self.curvature.T @ (self.weights * self.curvatures(q, f)))[:-1]


def discretize(cfg: BeamConfig, Nx: int) -> SimOperator:
    if Nx < config.MIN_SIM_INTERVALS:
        raise GridTooCoarseError(
            f"simulator needs at least {config.MIN_SIM_INTERVALS} intervals, got {Nx}"
        )
    grid = SpatialGrid(cfg.L, Nx)
    x = grid.nodes
    h = grid.spacing
    rho = cfg.rho(x)
    ei = cfg.ei(x)

    # columns: theta, w_0 .. w_Nx
    D = np.zeros((Nx + 1, Nx + 2))
    D[0, :3] = np.array([-2.0 * h, -2.0, 2.0]) / h**2
    for i in range(1, Nx):
        D[i, i : i + 3] = np.array([1.0, -2.0, 1.0]) / h**2
    D[Nx, Nx] = 2.0 / h**2
    D[Nx, Nx + 1] = -2.0 / h**2

    c = np.ones(Nx + 1)
    c[0] = c[-1] = 0.5
    weights = c * h * ei
    Kfull = D.T @ (weights[:, None] * D)

    mass = np.empty(Nx + 1)
    mass[0] = cfg.J
    mass[1] = cfg.m + 0.5 * rho[0] * h
    mass[2:] = rho[1:Nx] * h

    op = SimOperator(
        config=cfg,
        Nx=Nx,
        dx=h,
        x=x,
        mass=mass,
        input_mass=0.5 * rho[Nx] * h,
        K=Kfull[: Nx + 1, : Nx + 1].copy(),
        k_f=Kfull[: Nx + 1, Nx + 1].copy(),
        k_ff=float(Kfull[Nx + 1, Nx + 1]),
        curvature=D,
        weights=weights,
    )
    logger.debug("fd_operator_assembled", Nx=Nx, dx=h)
    return op


def _banded_lower(A: FloatArray, bandwidth: int = BANDWIDTH) -> FloatArray:
    """Lower banded storage for scipy.linalg.cholesky_banded."""
    n = A.shape[0]
    ab = np.zeros((bandwidth + 1, n))
    for d in range(bandwidth + 1):
        ab[d, : n - d] = np.diagonal(A, -d)
    return ab


def natural_frequencies(op: SimOperator, count: int | None = None) -> FloatArray:
    """Angular frequencies of K v = lambda M v with the joint clamped."""
    lam = eigh(op.K, np.diag(op.mass), eigvals_only=True)
    if count is not None:
        lam = lam[:count]
    return np.sqrt(np.clip(lam, 0.0, None))


# --- Input and state ---


@dataclass(frozen=True)
class InputSignal:
    """Quintic Hermite reconstruction of f from f, f_dot, f_ddot samples."""

    times: FloatArray
    poly: BPoly

    @classmethod
    def from_samples(cls, samples: InputSamples) -> InputSignal:
        yi = np.column_stack([samples.f, samples.f_dot, samples.f_ddot])
        return cls(samples.times, BPoly.from_derivatives(samples.times, yi))

    @classmethod
    def constant(cls, value: float, T: float) -> InputSignal:
        times = np.array([0.0, T])
        return cls.from_samples(
            InputSamples(times, np.full(2, value), np.zeros(2), np.zeros(2))
        )

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def value(self, t: float | FloatArray) -> FloatArray:
        return self.poly(t)

    def rate(self, t: float | FloatArray) -> FloatArray:
        return self.poly(t, nu=1)


@dataclass
class SimState:
    q: FloatArray
    q_dot: FloatArray
    f: float
    f_dot: float


def _modified_slope(w: FloatArray, h: float) -> float:
    """w_x(0) + h^2/6 w_xxx(0) from the first four nodal values."""
    second = (2.0 * w[0] - 5.0 * w[1] + 4.0 * w[2] - w[3]) / h**2
    return (w[1] - w[0]) / h - 0.5 * h * second


def state_from_beam(op: SimOperator, z: BeamState) -> SimState:
    if z.u.size != op.Nx + 1 or z.v.size != op.Nx + 1:
        raise DimensionMismatchError(
            f"state has {z.u.size} nodes, operator expects {op.Nx + 1}"
        )
    q = np.concatenate([[_modified_slope(z.u, op.dx)], z.u[:-1]])
    q_dot = np.concatenate([[_modified_slope(z.v, op.dx)], z.v[:-1]])
    return SimState(q=q, q_dot=q_dot, f=float(z.u[-1]), f_dot=float(z.v[-1]))


def energy(op: SimOperator, state: SimState) -> float:
    """Kinetic plus strain energy of the discrete model."""
    if state.q.size != op.size or state.q_dot.size != op.size:
        raise DimensionMismatchError(
            f"state has {state.q.size} unknowns, operator expects {op.size}"
        )
    kinetic = 0.5 * float(state.q_dot @ (op.mass * state.q_dot))
    kinetic += 0.5 * op.input_mass * state.f_dot**2
    curvature = op.curvatures(state.q, state.f)
    strain = 0.5 * float(curvature @ (op.weights * curvature))
    return kinetic + strain


# --- Time stepping ---


@dataclass(frozen=True)
class SimSettings:
    dt: float = config.SIM_DT
    T: float = config.DEFAULT_T
    output_dt: float = config.DEFAULT_T / (config.TIME_SAMPLES - 1)
    damping: float = 0.0  # Newmark gamma = 1/2 + damping

    @property
    def gamma(self) -> float:
        return 0.5 + self.damping

    @property
    def beta(self) -> float:
        return 0.25 * (1.0 + self.damping) ** 2


@dataclass
class SimResult:
    times: FloatArray
    x: FloatArray
    w: FloatArray  # (outputs, Nx + 1), joint node included
    w_t: FloatArray
    slope: FloatArray  # theta, the tip slope
    slope_rate: FloatArray
    energy: FloatArray
    input: FloatArray
    settings: SimSettings

    @property
    def tip(self) -> FloatArray:
        return self.w[:, 0]

    @property
    def tip_rate(self) -> FloatArray:
        return self.w_t[:, 0]

    @property
    def constant_input(self) -> bool:
        scale = max(float(np.abs(self.input).max()), 1.0)
        return float(np.ptp(self.input)) <= 1e-12 * scale

    @property
    def energy_drift(self) -> float:
        """Largest change of E relative to max |E|, meaningful under constant input."""
        scale = max(float(np.abs(self.energy).max()), np.finfo(float).tiny)
        return float(np.abs(self.energy - self.energy[0]).max() / scale)


def simulate(
    op: SimOperator,
    z0: BeamState,
    signal: InputSignal,
    settings: SimSettings | None = None,
) -> SimResult:
    """Newmark integration of M q'' + K q + k_f f(t) = 0."""
    settings = settings or SimSettings()
    dt, T = settings.dt, settings.T
    if not dt > 0:
        raise MalformedSpecError(f"dt must be > 0, got {dt}")
    if T > signal.end * (1.0 + 1e-12):
        raise OutOfDomainError(f"horizon {T} exceeds the input signal ({signal.end})")

    f0, f0_dot = float(signal.value(0.0)), float(signal.rate(0.0))
    mismatch = max(abs(f0 - z0.u[-1]), abs(f0_dot - z0.v[-1]))
    if mismatch > config.COMPATIBILITY_TOL:
        raise IncompatibleInitialDataError(
            f"f(0), f'(0) differ from the joint state by {mismatch:.3g}"
        )

    state = state_from_beam(op, z0)
    n_steps = int(round(T / dt))
    stride = max(1, int(round(settings.output_dt / dt)))
    gamma, beta = settings.gamma, settings.beta

    a0 = 1.0 / (beta * dt**2)
    a2 = 1.0 / (beta * dt)
    a3 = 1.0 / (2.0 * beta) - 1.0
    a6 = dt * (1.0 - gamma)
    a7 = gamma * dt

    K_eff = op.K + np.diag(a0 * op.mass)
    factor = cholesky_banded(_banded_lower(K_eff), lower=True)

    step_times = np.arange(n_steps + 1) * dt
    f = signal.value(step_times)
    f_dot = signal.rate(step_times)

    u = state.q.copy()
    v = state.q_dot.copy()
    acc = -op.internal_force(u, f[0]) / op.mass

    n_out = n_steps // stride + 1
    w_hist = np.empty((n_out, op.Nx + 1))
    wt_hist = np.empty((n_out, op.Nx + 1))
    slope = np.empty(n_out)
    slope_rate = np.empty(n_out)
    energy_hist = np.empty(n_out)

    def record(j: int, n: int) -> None:
        w_hist[j, :-1] = u[1:]
        w_hist[j, -1] = f[n]
        wt_hist[j, :-1] = v[1:]
        wt_hist[j, -1] = f_dot[n]
        slope[j] = u[0]
        slope_rate[j] = v[0]
        energy_hist[j] = energy(op, SimState(u, v, float(f[n]), float(f_dot[n])))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NonFiniteStateError(f"non-finite state at t = {n * dt:.6g}")

    record(0, 0)
    for n in range(1, n_steps + 1):
        # incremental form: K_eff du = -(K u + k_f f) + M (a2 v + a3 a)
        rhs = op.mass * (a2 * v + a3 * acc) - op.internal_force(u, f[n])
        du = cho_solve_banded((factor, True), rhs)
        acc_new = a0 * du - a2 * v - a3 * acc
        v = v + a6 * acc + a7 * acc_new
        u, acc = u + du, acc_new
        if n % stride == 0:
            record(n // stride, n)
            if (n // stride) % 100 == 0:
                logger.debug("simulation_step_block", t=n * dt, tip=float(u[1]))

    out_times = step_times[::stride][:n_out]
    result = SimResult(
        times=out_times,
        x=op.x,
        w=w_hist,
        w_t=wt_hist,
        slope=slope,
        slope_rate=slope_rate,
        energy=energy_hist,
        input=f[::stride][:n_out],
        settings=settings,
    )
    logger.info(
        "simulation_complete",
        Nx=op.Nx,
        dt=dt,
        steps=n_steps,
        final_tip=float(result.tip[-1]),
        energy_drift=result.energy_drift if result.constant_input else None,
    )
    return result


# --- Cross-validation ---


class FieldHistory(Protocol):
    """Anything carrying w(t_i, x_j) with its sample times and nodes."""

    @property
    def times(self) -> FloatArray: ...

    @property
    def x(self) -> FloatArray: ...

    @property
    def w(self) -> FloatArray: ...


def _resample(
    times: FloatArray, source_times: FloatArray, values: FloatArray
) -> FloatArray:
    if values.ndim == 1:
        return np.interp(times, source_times, values)
    return np.stack(
        [np.interp(times, source_times, values[:, j]) for j in range(values.shape[1])],
        axis=1,
    )


def compare_to_flat(sim: FieldHistory, traj: FieldHistory) -> ErrorReport:
    """Sup and L2-in-time errors of tip, joint and field between the two models."""
    same = sim.x.size == traj.x.size and np.allclose(sim.x, traj.x, rtol=0, atol=1e-12)
    if not same:
        raise GridMismatchError(
            f"simulation has {sim.x.size} nodes, trajectory has {traj.x.size}"
        )
    t = traj.times
    if t[0] < sim.times[0] - 1e-12 or t[-1] > sim.times[-1] + 1e-9:
        raise GridMismatchError("trajectory times extend past the simulation")

    w_sim = _resample(t, sim.times, sim.w)
    err = w_sim - traj.w

    def l2(e: FloatArray) -> float:
        return float(np.sqrt(trapezoid(e**2, t)))

    spatial = trapezoid(err**2, traj.x, axis=1)
    report = ErrorReport(
        tip_sup=float(np.abs(err[:, 0]).max()),
        tip_l2=l2(err[:, 0]),
        joint_sup=float(np.abs(err[:, -1]).max()),
        joint_l2=l2(err[:, -1]),
        field_sup=float(np.abs(err).max()),
        field_l2=float(np.sqrt(trapezoid(spatial, t))),
        field_scale=float(np.abs(traj.w).max()),
    )
    logger.info(
        "comparison_complete",
        field_relative=report.field_relative,
        tip_sup=report.tip_sup,
    )
    return report
