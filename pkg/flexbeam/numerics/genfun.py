"""Generating functions g_k, h_k of the flat parametrization.

Both families solve (EI u_xx)_xx + rho * u_prev = 0 on [0, L] with
initial data at the tip x = 0:

    g_0 = 1,  g_1: (u, u_x, EI u_xx, (EI u_xx)_x)(0) = (0, 0, 0, -m)
    h_0 = x,  h_1: (u, u_x, EI u_xx, (EI u_xx)_x)(0) = (0, 0, J, 0)

and zero data for every level k >= 2. All levels of both families are
stepped together as one triangular linear system with classical RK4 on
the fixed grid, so level k sees level k - 1 at the half-steps exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import structlog
from scipy.interpolate import BPoly
from scipy.special import gammaln

from flexbeam import config
from flexbeam.errors import (
    BoundViolationError,
    GridMismatchError,
    GridTooCoarseError,
    IndexOutOfRangeError,
    OutOfDomainError,
    SolverDivergenceError,
)
from flexbeam.models import BoundReport, FamilyMargin
from flexbeam.numerics.beam import BeamConfig, FloatArray, SpatialGrid

logger = structlog.get_logger()

Family = Literal["g", "h"]
FAMILIES: tuple[Family, Family] = ("g", "h")
DERIVATIVE_ORDERS = 5  # u, u_x, u_xx, u_xxx, u_xxxx


@dataclass(frozen=True)
class GenFunTable:
    """Sampled g_k, h_k (k = 0..N) with x-derivatives 0..4 on a grid.

    g and h have shape (N + 1, 5, M + 1): level, derivative order, node.
    endpoints[k] = (g_k(L), g_k,x(L), h_k(L), h_k,x(L)).
    """

    N: int
    grid: SpatialGrid
    g: FloatArray
    h: FloatArray
    R1: float
    R2: float
    _interpolants: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def endpoints(self) -> FloatArray:
        return np.stack(
            [self.g[:, 0, -1], self.g[:, 1, -1], self.h[:, 0, -1], self.h[:, 1, -1]],
            axis=1,
        )

    def family(self, name: Family) -> FloatArray:
        return self.g if name == "g" else self.h

    def sample(self, x: FloatArray, name: Family, order: int = 0) -> FloatArray:
        """Evaluate d^order/dx^order of every level at positions x.

        Positions on table nodes return the stored values exactly; other
        positions use a piecewise quintic Hermite interpolant built from
        the stored higher derivatives. Returns shape (N + 1, len(x)).
        """
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > self.grid.L):
            raise OutOfDomainError(f"x must lie in [0, {self.grid.L}]")
        values = self.family(name)[:, order, :]
        index = np.rint(x / self.grid.spacing).astype(int)
        on_node = np.abs(x - self.grid.nodes[index]) <= 1e-12 * self.grid.L
        out = np.empty((self.N + 1, x.size))
        out[:, on_node] = values[:, index[on_node]]
        if not np.all(on_node):
            off = x[~on_node]
            for k in range(self.N + 1):
                out[k, ~on_node] = self._interpolant(name, order, k)(off)
        return out

    def _interpolant(self, name: Family, order: int, k: int) -> BPoly:
        key = (name, order, k)
        if key not in self._interpolants:
            top = min(order + 3, DERIVATIVE_ORDERS)
            yi = self.family(name)[k, order:top, :].T
            self._interpolants[key] = BPoly.from_derivatives(self.grid.nodes, yi)
        return self._interpolants[key]


# --- Integration ---


def _integrate_families(cfg: BeamConfig, grid: SpatialGrid, N: int) -> FloatArray:
    """RK4 over the grid. Returns states of shape (M + 1, 2, N, 4) for k = 1..N.

    State per level: (u, u_x, EI u_xx, (EI u_xx)_x).
    """
    x = grid.nodes
    dx = grid.spacing
    mid = x[:-1] + 0.5 * dx
    rho_n, ei_n = cfg.rho(x), cfg.ei(x)
    rho_m, ei_m = cfg.rho(mid), cfg.ei(mid)

    y = np.zeros((2, N, 4))
    y[0, 0, 3] = -cfg.m
    y[1, 0, 2] = cfg.J

    def rhs(xs: float, rho: float, ei: float, state: FloatArray) -> FloatArray:
        prev = np.empty((2, N))
        prev[0, 0] = 1.0
        prev[1, 0] = xs
        prev[:, 1:] = state[:, :-1, 0]
        out = np.empty_like(state)
        out[..., 0] = state[..., 1]
        out[..., 1] = state[..., 2] / ei
        out[..., 2] = state[..., 3]
        out[..., 3] = -rho * prev
        return out

    states = np.empty((grid.M + 1, 2, N, 4))
    states[0] = y
    for i in range(grid.M):
        k1 = rhs(x[i], rho_n[i], ei_n[i], y)
        k2 = rhs(mid[i], rho_m[i], ei_m[i], y + 0.5 * dx * k1)
        k3 = rhs(mid[i], rho_m[i], ei_m[i], y + 0.5 * dx * k2)
        k4 = rhs(x[i + 1], rho_n[i + 1], ei_n[i + 1], y + dx * k3)
        y = y + dx * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        states[i + 1] = y

    if not np.all(np.isfinite(states)):
        raise SolverDivergenceError("non-finite generating-function values")
    return states


def _derivative_tables(
    cfg: BeamConfig, grid: SpatialGrid, states: FloatArray
) -> tuple[FloatArray, FloatArray]:
    """Recover u..u_xxxx per level from the integrated first-order states."""
    x = grid.nodes
    rho = cfg.rho(x)
    ei = cfg.ei(x)
    ei_x = cfg.ei.derivative(x, 1)
    ei_xx = cfg.ei.derivative(x, 2)
    N = states.shape[2]

    tables = []
    for fam in range(2):
        s = states[:, fam]  # (M + 1, N, 4)
        table = np.zeros((N + 1, DERIVATIVE_ORDERS, x.size))
        if fam == 0:
            table[0, 0] = 1.0
        else:
            table[0, 0] = x
            table[0, 1] = 1.0
        u = s[..., 0].T
        u_x = s[..., 1].T
        u_xx = s[..., 2].T / ei
        u_xxx = (s[..., 3].T - ei_x * u_xx) / ei
        prev = np.concatenate([table[:1, 0], u[:-1]], axis=0)
        u_xxxx = (-rho * prev - 2.0 * ei_x * u_xxx - ei_xx * u_xx) / ei
        table[1:] = np.stack([u, u_x, u_xx, u_xxx, u_xxxx], axis=1)
        tables.append(table)
    return tables[0], tables[1]


def decay_constants(cfg: BeamConfig) -> tuple[float, float]:
    """R1 = (max rho + m) / min EI * max(1, L)
    R2 = (max rho + J) / min EI * max(1, L^3)
    """
    _, rho_max, ei_min, _ = cfg.extrema()
    R1 = (rho_max + cfg.m) / ei_min * max(1.0, cfg.L)
    R2 = (rho_max + cfg.J) / ei_min * max(1.0, cfg.L**3)
    return R1, R2


def _endpoint_mismatch(coarse: FloatArray, fine: FloatArray) -> float:
    """Largest change per endpoint column, relative to that column's largest entry.

    Deep levels carry a larger relative error but enter the series with
    factorially small weight, so each column is measured in its own norm.
    """
    scale = np.maximum(np.abs(coarse), np.abs(fine)).max(axis=0)
    diff = np.abs(coarse - fine).max(axis=0)
    rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
    return float(rel.max())


def compute_gen_fun_table(
    cfg: BeamConfig,
    grid: SpatialGrid,
    N: int,
    check_refinement: bool = True,
    rtol: float = config.REFINEMENT_RTOL,
) -> GenFunTable:
    """Integrate g_k, h_k for k <= N on grid.

    With check_refinement the table is recomputed with halved spacing and
    the endpoint columns must agree to rtol, else GridTooCoarseError.
    """
    if N < 1:
        raise IndexOutOfRangeError(f"truncation order must be >= 1, got {N}")
    if not np.isclose(grid.L, cfg.L, rtol=0.0, atol=1e-14 * cfg.L):
        raise GridMismatchError(f"grid length {grid.L} != beam length {cfg.L}")

    g, h = _derivative_tables(cfg, grid, _integrate_families(cfg, grid, N))
    R1, R2 = decay_constants(cfg)
    table = GenFunTable(N=N, grid=grid, g=g, h=h, R1=R1, R2=R2)

    if check_refinement:
        fine_grid = grid.refine(2)
        g_f, h_f = _derivative_tables(
            cfg, fine_grid, _integrate_families(cfg, fine_grid, N)
        )
        fine = GenFunTable(N=N, grid=fine_grid, g=g_f, h=h_f, R1=R1, R2=R2)
        mismatch = _endpoint_mismatch(table.endpoints, fine.endpoints)
        logger.debug("genfun_refinement_check", M=grid.M, mismatch=mismatch)
        if mismatch > rtol:
            raise GridTooCoarseError(
                f"endpoint values change by {mismatch:.3g} (> {rtol:g}) "
                f"when the {grid.M}-interval spacing is halved"
            )

    logger.info("genfun_table_complete", N=N, M=grid.M, R1=R1, R2=R2)
    return table


def endpoint_row(table: GenFunTable, k: int) -> tuple[float, float, float, float]:
    if not 0 <= k <= table.N:
        raise IndexOutOfRangeError(f"level {k} outside 0..{table.N}")
    gL, gxL, hL, hxL = table.endpoints[k]
    return float(gL), float(gxL), float(hL), float(hxL)


# --- Decay bounds ---


def _exponents(name: Family) -> tuple[int, int]:
    """Power of x in the value / slope bound is 4k - a, 4k - b."""
    return (1, 2) if name == "g" else (2, 3)


def log_decay_bounds(
    R: float, x: FloatArray, N: int, name: Family
) -> tuple[FloatArray, FloatArray]:
    """log of R^k x^e / e! for values and slopes, k = 1..N (shape (N, len(x)))."""
    k = np.arange(1, N + 1)[:, None]
    a, b = _exponents(name)
    with np.errstate(divide="ignore"):
        log_x = np.log(x)[None, :]
    out = []
    for offset in (a, b):
        e = 4 * k - offset
        with np.errstate(invalid="ignore"):
            log_bound = k * np.log(R) + np.where(e > 0, e * log_x, 0.0) - gammaln(e + 1)
        out.append(log_bound)
    return out[0], out[1]


def decay_bound_values(
    table: GenFunTable, name: Family
) -> tuple[FloatArray, FloatArray]:
    R = table.R1 if name == "g" else table.R2
    log_v, log_s = log_decay_bounds(R, table.grid.nodes, table.N, name)
    return np.exp(log_v), np.exp(log_s)


def verify_decay_bounds(
    table: GenFunTable,
    atol: float = config.BOUND_ATOL,
    rtol: float = config.BOUND_RTOL,
    raise_on_violation: bool = True,
) -> BoundReport:
    """Check |g_k| <= R1^k x^(4k-1)/(4k-1)! and its slope/h analogues on every node.

    Every comparison allows atol + rtol * bound for the integration error.
    """
    margins = []
    for name in FAMILIES:
        bound_v, bound_s = decay_bound_values(table, name)
        fam = table.family(name)[1:]
        worst_ratio, worst_excess, worst_level = 0.0, -np.inf, 1
        for values, bound in ((fam[:, 0], bound_v), (fam[:, 1], bound_s)):
            excess = np.abs(values) - bound * (1.0 + rtol) - atol
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(bound > 0, np.abs(values) / bound, 0.0)
            level_excess = excess.max(axis=1)
            if level_excess.max() > worst_excess:
                worst_excess = float(level_excess.max())
                worst_level = int(np.argmax(level_excess)) + 1
            worst_ratio = max(worst_ratio, float(ratio.max()))
        margins.append(
            FamilyMargin(
                family=name,
                worst_ratio=worst_ratio,
                worst_excess=worst_excess,
                worst_level=worst_level,
            )
        )

    passed = all(m.worst_excess <= 0.0 for m in margins)
    report = BoundReport(R1=table.R1, R2=table.R2, families=margins, passed=passed)
    logger.info(
        "decay_bounds_checked",
        passed=passed,
        **{f"{m.family}_worst_ratio": m.worst_ratio for m in margins},
    )
    if not passed and raise_on_violation:
        bad = next(m for m in margins if m.worst_excess > 0.0)
        raise BoundViolationError(
            f"{bad.family}_{bad.worst_level} exceeds its decay bound "
            f"by {bad.worst_excess:.3g}"
        )
    return report


# --- Diagnostics ---


def recursion_residual(table: GenFunTable, cfg: BeamConfig, name: Family) -> FloatArray:
    """Per level k >= 1: max over interior nodes of

    |D2(EI u_k,xx) + rho u_{k-1}| / max |rho u_{k-1}|

    where D2 is the centered second difference (O(dx^2) accurate).
    """
    x = table.grid.nodes
    dx = table.grid.spacing
    fam = table.family(name)
    moment = cfg.ei(x) * fam[1:, 2]
    d2 = (moment[:, 2:] - 2.0 * moment[:, 1:-1] + moment[:, :-2]) / dx**2
    forcing = cfg.rho(x)[1:-1] * fam[:-1, 0, 1:-1]
    scale = np.abs(forcing).max(axis=1)
    return np.abs(d2 + forcing).max(axis=1) / scale


def observed_order(cfg: BeamConfig, N: int, intervals: int = 32) -> float:
    """Convergence order of the endpoint slopes from three successive halvings."""
    tables = [
        compute_gen_fun_table(cfg, SpatialGrid(cfg.L, intervals * 2**i), N, False)
        for i in range(3)
    ]
    slopes = [t.endpoints[1:, [1, 3]] for t in tables]
    coarse = np.abs(slopes[0] - slopes[1]).max()
    fine = np.abs(slopes[1] - slopes[2]).max()
    return float(np.log2(coarse / fine))
