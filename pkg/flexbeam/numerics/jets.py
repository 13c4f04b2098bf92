"""Truncated Taylor jets and the Gevrey bump / flat-parameter construction.

A jet stores scaled coefficients c_k = f^(k)(t0) / k!, k = 0..K.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import structlog
from pydantic import TypeAdapter, ValidationError
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gammaln

from flexbeam import config
from flexbeam.errors import (
    MalformedSpecError,
    MismatchedJetsError,
    NonPositiveBaseError,
    NonPositiveParameterError,
    OutOfDomainError,
    QuadratureFailureError,
    UnknownSpecError,
)
from flexbeam.models import (
    ConstantSignal,
    PolyExpSignal,
    PolynomialSignal,
    SignalSpec,
)
from flexbeam.numerics.beam import FloatArray

logger = structlog.get_logger()

SIGNAL_KINDS = ("constant", "polynomial", "poly-times-exponential")
_signal_adapter: TypeAdapter[Any] = TypeAdapter(SignalSpec)


@dataclass(frozen=True, eq=False)
class Jet:
    t0: float
    c: FloatArray

    @property
    def K(self) -> int:
        return self.c.size - 1

    @classmethod
    def constant(cls, t0: float, value: float, K: int) -> Jet:
        c = np.zeros(K + 1)
        c[0] = value
        return cls(t0, c)

    @classmethod
    def variable(cls, t0: float, K: int) -> Jet:
        """The jet of t itself."""
        c = np.zeros(K + 1)
        c[0] = t0
        if K >= 1:
            c[1] = 1.0
        return cls(t0, c)

    def is_constant(self, value: float) -> bool:
        return bool(self.c[0] == value and not np.any(self.c[1:]))

    def __add__(self, other: Jet | float) -> Jet:
        if isinstance(other, Jet):
            return jet_add(self, other)
        c = self.c.copy()
        c[0] += other
        return Jet(self.t0, c)

    __radd__ = __add__

    def __sub__(self, other: Jet) -> Jet:
        return jet_sub(self, other)

    def __mul__(self, other: Jet | float) -> Jet:
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return jet_scale(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> Jet:
        return Jet(self.t0, -self.c)

    def reverse(self, t0: float | None = None) -> Jet:
        """Jet of tau -> f(-tau): c_k -> (-1)^k c_k, expanded at t0 (default -t0)."""
        signs = np.where(np.arange(self.K + 1) % 2 == 0, 1.0, -1.0)
        return Jet(-self.t0 if t0 is None else t0, signs * self.c)

    def evaluate(self, h: float) -> float:
        """Taylor polynomial at t0 + h."""
        return float(np.polynomial.polynomial.polyval(h, self.c))

    def derivative_values(self) -> FloatArray:
        """Raw derivatives f^(k)(t0)."""
        return self.c * np.exp(gammaln(np.arange(self.K + 1) + 1.0))

    def log_derivatives(self) -> tuple[FloatArray, FloatArray]:
        """(log |f^(k)(t0)|, sign) without forming the raw derivatives."""
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(self.c)) + gammaln(np.arange(self.K + 1) + 1.0)
        return log_abs, np.sign(self.c)

    def to_list(self) -> list[float]:
        return self.c.tolist()


# --- Arithmetic ---


def _check_compatible(a: Jet, b: Jet) -> None:
    if a.t0 != b.t0 or a.K != b.K:
        raise MismatchedJetsError(
            f"jets at t0={a.t0}, K={a.K} and t0={b.t0}, K={b.K} cannot be combined"
        )


def jet_add(a: Jet, b: Jet) -> Jet:
    _check_compatible(a, b)
    return Jet(a.t0, a.c + b.c)


def jet_sub(a: Jet, b: Jet) -> Jet:
    _check_compatible(a, b)
    return Jet(a.t0, a.c - b.c)


def jet_scale(a: Jet, factor: float) -> Jet:
    return Jet(a.t0, factor * a.c)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Cauchy product truncated at order K."""
    _check_compatible(a, b)
    return Jet(a.t0, np.convolve(a.c, b.c)[: a.K + 1])


def jet_exp(a: Jet) -> Jet:
    """exp(a) via k e_k = sum_{j=1..k} j a_j e_{k-j}."""
    K = a.K
    e = np.zeros(K + 1)
    e[0] = np.exp(a.c[0])
    ja = np.arange(K + 1) * a.c
    for k in range(1, K + 1):
        e[k] = np.dot(ja[1 : k + 1], e[k - 1 :: -1]) / k
    return Jet(a.t0, e)


def _integer_power(a: Jet, r: int) -> Jet:
    result = Jet.constant(a.t0, 1.0, a.K)
    base = a
    while r:
        if r & 1:
            result = jet_mul(result, base)
        base = jet_mul(base, base)
        r >>= 1
    return result


def jet_rpow(a: Jet, r: float) -> Jet:
    """a^r via b_k = 1/(k a_0) sum_{j=1..k} ((r + 1) j - k) a_j b_{k-j}."""
    a0 = float(a.c[0])
    integral = float(r).is_integer()
    if not integral and a0 <= 0.0:
        raise NonPositiveBaseError(f"a_0 = {a0} <= 0 for exponent {r}")
    if a0 == 0.0:
        if r < 0:
            raise NonPositiveBaseError(f"a_0 = 0 for negative exponent {r}")
        return _integer_power(a, int(r))

    K = a.K
    b = np.zeros(K + 1)
    b[0] = a0**r
    j = np.arange(K + 1, dtype=float)
    for k in range(1, K + 1):
        weights = (r + 1.0) * j[1 : k + 1] - k
        b[k] = np.dot(weights * a.c[1 : k + 1], b[k - 1 :: -1]) / (k * a0)
    return Jet(a.t0, b)


# --- Closed-form signals ---


def parse_signal(spec_id: str, params: dict) -> SignalSpec:
    if spec_id not in SIGNAL_KINDS:
        raise UnknownSpecError(f"unknown signal kind {spec_id!r}")
    try:
        return _signal_adapter.validate_python({"kind": spec_id, **params})
    except ValidationError as exc:
        raise MalformedSpecError(str(exc)) from exc


def _poly_jet(coeffs: Sequence[float], t: float, K: int) -> Jet:
    """Horner evaluation of an ascending-coefficient polynomial on the t-jet."""
    tj = Jet.variable(t, K)
    out = Jet.constant(t, coeffs[-1], K)
    for coef in reversed(coeffs[:-1]):
        out = jet_mul(out, tj) + coef
    return out


def signal_jet(signal: SignalSpec, t: float, K: int) -> Jet:
    if isinstance(signal, ConstantSignal):
        return Jet.constant(t, signal.value, K)
    if isinstance(signal, PolynomialSignal):
        return _poly_jet(signal.coeffs, t, K)
    if isinstance(signal, PolyExpSignal):
        growth = jet_exp(jet_scale(Jet.variable(t, K), signal.rate))
        return _poly_jet(signal.poly, t, K) + jet_mul(
            _poly_jet(signal.exp_poly, t, K), growth
        )
    raise UnknownSpecError(f"unknown signal {signal!r}")


def closed_form_jet(spec_id: str, params: dict, t: float, K: int) -> Jet:
    return signal_jet(parse_signal(spec_id, params), t, K)


# --- Gevrey bump ---


@dataclass(frozen=True)
class TrajectorySpec:
    """Transfer horizon, Gevrey order, boundary signals and bump normalizer."""

    T: float
    s: float
    p0: SignalSpec
    pT: SignalSpec
    C_norm: float


def _check_horizon(T: float, s: float) -> None:
    if not (np.isfinite(T) and T > 0):
        raise NonPositiveParameterError(f"T must be > 0, got {T}")
    if not 1.0 < s < 2.0:
        raise MalformedSpecError(f"Gevrey order must lie in (1, 2), got {s}")


def bump_density(tau: Any, T: float, s: float) -> Any:
    """psi_0(tau) = exp(-[(tau/T)(1 - tau/T)]^(-1/(s-1))), exactly 0 past underflow."""
    scalar = np.ndim(tau) == 0
    u = np.atleast_1d(np.asarray(tau, dtype=float)) / T
    u = u * (1.0 - u)
    out = np.zeros_like(u)
    inside = u > 0.0
    with np.errstate(divide="ignore", over="ignore"):
        expo = np.where(inside, u, 1.0) ** (-1.0 / (s - 1.0))
    live = inside & (expo <= config.UNDERFLOW_EXPONENT)
    out[live] = np.exp(-expo[live])
    return float(out[0]) if scalar else out


def _integrate(fn: Any, a: float, b: float, points: list[float] | None = None) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(
                fn,
                a,
                b,
                points=points,
                epsrel=config.QUAD_RTOL,
                epsabs=config.QUAD_ATOL,
                limit=200,
            )
        except IntegrationWarning as exc:
            raise QuadratureFailureError(f"quadrature on [{a}, {b}]: {exc}") from exc
    return float(value)


def bump_normalizer(T: float, s: float) -> float:
    _check_horizon(T, s)
    C = _integrate(lambda tau: bump_density(tau, T, s), 0.0, T, points=[T / 2])
    if not C > 0:
        raise QuadratureFailureError(f"bump normalizer evaluated to {C}")
    logger.debug("bump_normalizer", T=T, s=s, C_norm=C)
    return C


def make_trajectory_spec(
    T: float, s: float, p0: SignalSpec | dict, pT: SignalSpec | dict
) -> TrajectorySpec:
    try:
        p0 = _signal_adapter.validate_python(p0) if isinstance(p0, dict) else p0
        pT = _signal_adapter.validate_python(pT) if isinstance(pT, dict) else pT
    except ValidationError as exc:
        raise MalformedSpecError(str(exc)) from exc
    return TrajectorySpec(T=T, s=s, p0=p0, pT=pT, C_norm=bump_normalizer(T, s))


def _check_time(t: float, spec: TrajectorySpec) -> None:
    if not 0.0 <= t <= spec.T:
        raise OutOfDomainError(f"t = {t} outside [0, {spec.T}]")


def psi_value(t: float, spec: TrajectorySpec) -> float:
    """psi(t) = 1 - int_0^t psi_0 / C_norm.

    Past the midpoint the complementary integral is used, written on the
    mirrored interval [0, T - t], so psi(t) + psi(T - t) = 1 to rounding.
    """
    _check_time(t, spec)

    def density(tau: float) -> float:
        return bump_density(tau, spec.T, spec.s)

    if t <= spec.T / 2:
        return 1.0 - _integrate(density, 0.0, t) / spec.C_norm
    return _integrate(density, 0.0, spec.T - t) / spec.C_norm


def _phase_jet(t: float, T: float, K: int) -> Jet:
    """Exact jet of (t/T)(1 - t/T)."""
    c = np.zeros(K + 1)
    c[0] = (t / T) * (1.0 - t / T)
    if K >= 1:
        c[1] = 1.0 / T - 2.0 * t / T**2
    if K >= 2:
        c[2] = -1.0 / T**2
    return Jet(t, c)


def psi_jet(t: float, spec: TrajectorySpec, K: int) -> Jet:
    _check_time(t, spec)
    phase = _phase_jet(t, spec.T, max(K - 1, 0))
    r = -1.0 / (spec.s - 1.0)
    if phase.c[0] <= 0.0 or phase.c[0] ** r > config.UNDERFLOW_EXPONENT:
        return Jet.constant(t, 1.0 if t < spec.T / 2 else 0.0, K)

    density = jet_exp(-jet_rpow(phase, r))
    c = np.zeros(K + 1)
    c[0] = psi_value(t, spec)
    k = np.arange(1, K + 1)
    c[1:] = -density.c[:K] / (k * spec.C_norm)
    return Jet(t, c)


def p_jet(t: float, spec: TrajectorySpec, K: int) -> Jet:
    """p = q + psi (p0 - q) with q(t) = pT(T - t)."""
    _check_time(t, spec)
    psi = psi_jet(t, spec, K)
    q = signal_jet(spec.pT, spec.T - t, K).reverse(t)
    if psi.is_constant(0.0):
        return q
    p0 = signal_jet(spec.p0, t, K)
    if psi.is_constant(1.0):
        return p0
    return q + jet_mul(psi, p0 - q)


def p_jets(spec: TrajectorySpec, times: FloatArray, K: int) -> list[Jet]:
    """p_jet over a time grid; result order follows times."""
    with ThreadPoolExecutor(max_workers=config.FLEXBEAM_THREADS) as pool:
        return list(pool.map(lambda t: p_jet(float(t), spec, K), times))


def gevrey_constant(jets: Sequence[Jet], s: float) -> float:
    """Smallest D with |f^(k)| <= D^(k+1) (k!)^s for every sampled jet and k."""
    best = 0.0
    for jet in jets:
        log_abs, _ = jet.log_derivatives()
        k = np.arange(jet.K + 1)
        finite = np.isfinite(log_abs)
        if not np.any(finite):
            continue
        log_d = (log_abs[finite] - s * gammaln(k[finite] + 1.0)) / (k[finite] + 1)
        best = max(best, float(np.exp(log_d.max())))
    return best
