"""Flat operators and synthesis of the input and displacement field.

With y1 = L2 p and y2 = -L1 p the field is

    w(x, t) = sum_l A_l(x) p^(2l)(t),
    A_l(x)  = sum_{k+j=l} g_k(x) h_{j,x}(L) - h_k(x) g_{j,x}(L)

truncated at total order l <= N. Terms k and l - k of A_l are added as a
pair, which makes A_l,x(L) vanish exactly and the clamped slope w_x(L, t)
comes out as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import structlog
from scipy.special import gammaln, logsumexp

from flexbeam import config
from flexbeam.errors import (
    GridMismatchError,
    IndexOutOfRangeError,
    JetTooShortError,
    MalformedSpecError,
    MissingDerivativesError,
)
from flexbeam.models import CommutationReport, ResidualReport
from flexbeam.numerics.beam import BeamConfig, FloatArray, SpatialGrid
from flexbeam.numerics.genfun import GenFunTable, log_decay_bounds
from flexbeam.numerics.jets import (
    Jet,
    TrajectorySpec,
    gevrey_constant,
    p_jets,
    signal_jet,
)

logger = structlog.get_logger()


# --- Types ---


@dataclass(frozen=True)
class SynthesisParams:
    N: int
    time_grid: FloatArray
    field_grid: SpatialGrid
    sign_flip: bool = False

    def __post_init__(self) -> None:
        if self.N < 1:
            raise MalformedSpecError(f"N must be >= 1, got {self.N}")
        t = self.time_grid
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise MalformedSpecError("time grid must be strictly increasing")

    @property
    def jet_order(self) -> int:
        return 2 * self.N + config.JET_SLACK


def make_synthesis_params(
    N: int,
    T: float,
    field_grid: SpatialGrid,
    samples: int = config.TIME_SAMPLES,
    sign_flip: bool = False,
) -> SynthesisParams:
    times = np.linspace(0.0, T, samples)
    times[-1] = T
    return SynthesisParams(
        N=N, time_grid=times, field_grid=field_grid, sign_flip=sign_flip
    )


@dataclass(frozen=True)
class BeamState:
    """z = [w(., t), w_t(., t), w_t(0, t), w_xt(0, t)] on a field grid."""

    x: FloatArray
    u: FloatArray
    v: FloatArray
    alpha: float
    beta: float


@dataclass(frozen=True)
class InputSamples:
    """f(t_i) with its first two time derivatives."""

    times: FloatArray
    f: FloatArray
    f_dot: FloatArray
    f_ddot: FloatArray


@dataclass
class FlatTrajectory:
    params: SynthesisParams
    spec: TrajectorySpec
    f: FloatArray
    f_dot: FloatArray
    f_ddot: FloatArray
    w: FloatArray  # (times, x)
    w_t: FloatArray
    y1: FloatArray  # (times, N + 1): y1^(2k)
    y2: FloatArray
    tip_slope_rate: FloatArray  # w_xt(0, t)
    derivatives: dict[str, FloatArray] = field(default_factory=dict)
    tail_estimate: float = 0.0
    tail_bound: float = 0.0
    gevrey_constant: float = 0.0

    @property
    def times(self) -> FloatArray:
        return self.params.time_grid

    @property
    def x(self) -> FloatArray:
        return self.params.field_grid.nodes

    def state(self, i: int) -> BeamState:
        return BeamState(
            x=self.x,
            u=self.w[i],
            v=self.w_t[i],
            alpha=float(self.w_t[i, 0]),
            beta=float(self.tip_slope_rate[i]),
        )

    @property
    def states(self) -> list[BeamState]:
        return [self.state(i) for i in range(self.times.size)]

    def input_samples(self) -> InputSamples:
        return InputSamples(self.times, self.f, self.f_dot, self.f_ddot)


# --- Series coefficients ---


def _times_factorial(coef: FloatArray, n: FloatArray) -> FloatArray:
    """coef * n! with the factorial formed in log-space."""
    with np.errstate(divide="ignore"):
        return np.sign(coef) * np.exp(np.log(np.abs(coef)) + gammaln(n + 1.0))


def _check_table(table: GenFunTable, N: int) -> None:
    if table.N < N:
        raise IndexOutOfRangeError(f"table has {table.N} levels, synthesis needs {N}")


def series_coefficients(
    table: GenFunTable,
    x: FloatArray,
    N: int,
    order: int = 0,
    sign_flip: bool = False,
) -> FloatArray:
    """A_l^(order)(x) for l = 0..N, shape (N + 1, len(x))."""
    _check_table(table, N)
    G = table.sample(x, "g", order)
    H = table.sample(x, "h", order)
    gx = table.endpoints[:, 1]
    hx = table.endpoints[:, 3]
    sign = 1.0 if sign_flip else -1.0

    A = np.zeros((N + 1, x.size))
    for level in range(N + 1):
        terms = [
            G[k] * hx[level - k] + sign * (H[k] * gx[level - k])
            for k in range(level + 1)
        ]
        acc = np.zeros(x.size)
        for k in range((level + 1) // 2):
            acc += terms[k] + terms[level - k]
        if level % 2 == 0:
            acc += terms[level // 2]
        A[level] = acc
    return A


def _jet_matrix(jets: list[Jet]) -> FloatArray:
    return np.stack([j.c for j in jets])


def _series(A: FloatArray, C: FloatArray, m: int) -> FloatArray:
    """sum_l A_l(x) p^(2l + m)(t) for every (t, x)."""
    levels = A.shape[0]
    n = 2 * np.arange(levels) + m
    if n[-1] >= C.shape[1]:
        raise JetTooShortError(f"need jet order {n[-1]}, have {C.shape[1] - 1}")
    B = _times_factorial(A, n[:, None].astype(float))
    return C[:, n] @ B


# --- Flat outputs ---


def flat_outputs_from_p(
    table: GenFunTable, p: Jet, N: int, n: int = 0
) -> tuple[float, float]:
    """(y1^(n), y2^(n)) at p.t0 with y1 = L2 p, y2 = -L1 p, each truncated at N."""
    _check_table(table, N)
    if p.K < 2 * N + n:
        raise JetTooShortError(f"need jet order {2 * N + n}, have {p.K}")
    orders = 2 * np.arange(N + 1) + n
    gx = table.endpoints[: N + 1, 1]
    hx = table.endpoints[: N + 1, 3]
    scaled = p.c[orders]
    y1 = float(np.sum(_times_factorial(hx, orders.astype(float)) * scaled))
    y2 = -float(np.sum(_times_factorial(gx, orders.astype(float)) * scaled))
    return y1, y2


def flat_output_table(
    table: GenFunTable, p: Jet, N: int
) -> tuple[FloatArray, FloatArray]:
    """y1^(2k), y2^(2k) for k = 0..N, each truncated so that total order <= N."""
    _check_table(table, N)
    if p.K < 2 * N:
        raise JetTooShortError(f"need jet order {2 * N}, have {p.K}")
    gx = table.endpoints[: N + 1, 1]
    hx = table.endpoints[: N + 1, 3]
    y1 = np.zeros(N + 1)
    y2 = np.zeros(N + 1)
    for k in range(N + 1):
        orders = 2 * (k + np.arange(N - k + 1))
        scaled = p.c[orders]
        n = orders.astype(float)
        y1[k] = np.sum(_times_factorial(hx[: N - k + 1], n) * scaled)
        y2[k] = -np.sum(_times_factorial(gx[: N - k + 1], n) * scaled)
    return y1, y2


# --- Tail diagnostics ---


def tail_estimate(
    table: GenFunTable, jets: list[Jet], x: FloatArray, N: int, sign_flip: bool = False
) -> float:
    """sup |A_l(x) p^(2l)(t)| for the first omitted level l = N + 1.

    Falls back to the last retained level when the table stops at N.
    """
    level = min(N + 1, table.N)
    A = series_coefficients(table, x, level, 0, sign_flip)[level:]
    C = _jet_matrix(jets)
    n = 2 * level
    if n >= C.shape[1]:
        raise JetTooShortError(f"need jet order {n}, have {C.shape[1] - 1}")
    B = _times_factorial(A, np.array([[float(n)]]))
    return float(np.abs(C[:, [n]] @ B).max())


def tail_bound(table: GenFunTable, jets: list[Jet], N: int) -> float:
    """Analytic bound on the omitted part of the clamped-slope series.

    sup_t sum_{l > N} sum_{k+j=l} (B_gx,k B_hx,j + B_hx,k B_gx,j) |p^(2l)(t)|
    with the factorial decay bounds on g_k,x(L), h_k,x(L) and
    B_gx,0 = 0, B_hx,0 = 1; the sum runs as far as the jets reach.
    """
    K = min(j.K for j in jets)
    top = K // 2
    if top <= N:
        return 0.0
    L = np.array([table.grid.L])
    _, log_gx = log_decay_bounds(table.R1, L, top, "g")
    _, log_hx = log_decay_bounds(table.R2, L, top, "h")
    log_gx = np.concatenate([[-np.inf], log_gx[:, 0]])
    log_hx = np.concatenate([[0.0], log_hx[:, 0]])

    levels = np.arange(N + 1, top + 1)
    log_coef = np.empty(levels.size)
    for i, level in enumerate(levels):
        k = np.arange(level + 1)
        pairs = np.concatenate(
            [log_gx[k] + log_hx[level - k], log_hx[k] + log_gx[level - k]]
        )
        log_coef[i] = logsumexp(pairs)

    best = -np.inf
    with np.errstate(divide="ignore"):
        for jet in jets:
            log_p, _ = jet.log_derivatives()
            best = max(best, float(logsumexp(log_coef + log_p[2 * levels])))
    return float(np.exp(best))


# --- Synthesis ---


def synthesize_input(
    table: GenFunTable, spec: TrajectorySpec, params: SynthesisParams
) -> InputSamples:
    """f = w(L, t) and its first two time derivatives."""
    _check_table(table, params.N)
    jets = p_jets(spec, params.time_grid, params.jet_order)
    C = _jet_matrix(jets)
    A = series_coefficients(
        table, np.array([table.grid.L]), params.N, 0, params.sign_flip
    )
    f, f_dot, f_ddot = (_series(A, C, m)[:, 0] for m in range(3))
    logger.info("input_synthesized", N=params.N, samples=f.size, f0=f[0], fT=f[-1])
    return InputSamples(params.time_grid, f, f_dot, f_ddot)


def synthesize_field(
    table: GenFunTable,
    spec: TrajectorySpec,
    params: SynthesisParams,
    with_derivatives: bool = True,
) -> FlatTrajectory:
    _check_table(table, params.N)
    x = params.field_grid.nodes
    if not np.isclose(x[-1], table.grid.L, rtol=0.0, atol=1e-14):
        raise GridMismatchError("field grid and table cover different lengths")

    times = params.time_grid
    jets = p_jets(spec, times, params.jet_order)
    C = _jet_matrix(jets)
    A0 = series_coefficients(table, x, params.N, 0, params.sign_flip)
    A1 = series_coefficients(table, x, params.N, 1, params.sign_flip)

    w = _series(A0, C, 0)
    w_t = _series(A0, C, 1)
    w_tt = _series(A0, C, 2)
    w_xt = _series(A1, C, 1)

    derivatives: dict[str, FloatArray] = {}
    if with_derivatives:
        derivatives["w_tt"] = w_tt
        derivatives["w_x"] = _series(A1, C, 0)
        derivatives["w_xtt"] = _series(A1, C, 2)
        for order, name in ((2, "w_xx"), (3, "w_xxx"), (4, "w_xxxx")):
            A = series_coefficients(table, x, params.N, order, params.sign_flip)
            derivatives[name] = _series(A, C, 0)

    y1 = np.empty((times.size, params.N + 1))
    y2 = np.empty((times.size, params.N + 1))
    for i, jet in enumerate(jets):
        y1[i], y2[i] = flat_output_table(table, jet, params.N)

    traj = FlatTrajectory(
        params=params,
        spec=spec,
        f=w[:, -1].copy(),
        f_dot=w_t[:, -1].copy(),
        f_ddot=w_tt[:, -1].copy(),
        w=w,
        w_t=w_t,
        y1=y1,
        y2=y2,
        tip_slope_rate=w_xt[:, 0].copy(),
        derivatives=derivatives,
        tail_estimate=tail_estimate(table, jets, x, params.N, params.sign_flip),
        tail_bound=tail_bound(table, jets, params.N),
        gevrey_constant=gevrey_constant(jets, spec.s),
    )
    logger.info(
        "field_synthesized",
        N=params.N,
        samples=times.size,
        nodes=x.size,
        sign_flip=params.sign_flip,
        tail_estimate=traj.tail_estimate,
    )
    return traj


def _state_from_jet(table: GenFunTable, jet: Jet, params: SynthesisParams) -> BeamState:
    x = params.field_grid.nodes
    C = jet.c[None, :]
    A0 = series_coefficients(table, x, params.N, 0, params.sign_flip)
    A1 = series_coefficients(table, x[:1], params.N, 1, params.sign_flip)
    u = _series(A0, C, 0)[0]
    v = _series(A0, C, 1)[0]
    beta = float(_series(A1, C, 1)[0, 0])
    return BeamState(x=x, u=u, v=v, alpha=float(v[0]), beta=beta)


def initial_state_from_p(
    table: GenFunTable,
    spec: TrajectorySpec,
    params: SynthesisParams,
    which: str = "start",
) -> BeamState:
    """State generated by p0 at t = 0 ("start") or reached from pT at t = T ("end")."""
    K = params.jet_order
    if which == "start":
        jet = signal_jet(spec.p0, 0.0, K)
    elif which == "end":
        jet = signal_jet(spec.pT, 0.0, K).reverse(spec.T)
    else:
        raise MalformedSpecError(f"which must be 'start' or 'end', got {which!r}")
    return _state_from_jet(table, jet, params)


# --- Structural checks ---


def check_commutation(
    table: GenFunTable, jets: list[Jet], N: int
) -> CommutationReport:
    """Compare L1 L2 p and L2 L1 p summed in opposite nesting orders."""
    _check_table(table, N)
    if min(j.K for j in jets) < 4 * N:
        raise JetTooShortError(f"commutation needs jet order {4 * N}")
    gx = table.endpoints[: N + 1, 1]
    hx = table.endpoints[: N + 1, 3]
    orders = 2 * (np.arange(N + 1)[:, None] + np.arange(N + 1)[None, :])
    coef = _times_factorial(np.outer(gx, hx), orders.astype(float))

    worst = 0.0
    scale = 0.0
    for jet in jets:
        terms = coef * jet.c[orders]
        l1_l2 = 0.0
        for k in range(N + 1):
            inner = 0.0
            for j in range(N + 1):
                inner += terms[k, j]
            l1_l2 += inner
        l2_l1 = 0.0
        for j in range(N + 1):
            inner = 0.0
            for k in range(N + 1):
                inner += terms[k, j]
            l2_l1 += inner
        worst = max(worst, abs(l1_l2 - l2_l1))
        scale = max(scale, float(np.abs(terms).sum()))

    report = CommutationReport(max_abs_diff=worst, scale=scale)
    logger.info(
        "commutation_checked", N=N, max_abs_diff=worst, relative=report.relative
    )
    return report


_REQUIRED = ("w_tt", "w_x", "w_xx", "w_xxx", "w_xxxx", "w_xtt")


def residuals(traj: FlatTrajectory, cfg: BeamConfig) -> ResidualReport:
    """Sup-norms of the beam equation, tip-mass and clamped-slope residuals."""
    missing = [name for name in _REQUIRED if name not in traj.derivatives]
    if missing:
        raise MissingDerivativesError(f"trajectory lacks {', '.join(missing)}")
    d = traj.derivatives
    x = traj.x
    rho = cfg.rho(x)
    ei = cfg.ei(x)
    ei_x = cfg.ei.derivative(x, 1)
    ei_xx = cfg.ei.derivative(x, 2)

    pde = (
        rho * d["w_tt"]
        + ei * d["w_xxxx"]
        + 2.0 * ei_x * d["w_xxx"]
        + ei_xx * d["w_xx"]
    )
    tip_force = (
        cfg.m * d["w_tt"][:, 0]
        + ei[0] * d["w_xxx"][:, 0]
        + ei_x[0] * d["w_xx"][:, 0]
    )
    tip_moment = cfg.J * d["w_xtt"][:, 0] - ei[0] * d["w_xx"][:, 0]
    slope = d["w_x"][:, -1]

    report = ResidualReport(
        N=traj.params.N,
        pde=float(np.abs(pde).max()),
        tip_force=float(np.abs(tip_force).max()),
        tip_moment=float(np.abs(tip_moment).max()),
        slope=float(np.abs(slope).max()),
        tail_estimate=traj.tail_estimate,
        tail_bound=traj.tail_bound,
    )
    logger.info("residuals_computed", **report.model_dump())
    return report
