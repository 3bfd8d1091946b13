"""Harmonic-oscillator clock that flips agent A from A0 to A1 at proper time τ* = T/4.

The oscillator starts in the coherent state |α0⟩ at x = +A and crosses the interaction zone
[0, Δ] during [τ* - ε, τ*]. Inside the zone H_int = V0 σ_x acts on span{A0, A1}, so the
|±⟩ = (|A0⟩ ± |A1⟩)/√2 channels see a barrier (+V0) or a well (-V0) and decouple.
"""

import cmath
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import NamedTuple, Self

import numpy as np
import polars as pl
import scipy.fft as spfft

from qswitch.constants import PhysicalConstants
from qswitch.error import DomainError

logger = logging.getLogger(__name__)

DEFAULT_VALIDITY_FACTOR = 20.0
VALIDITY_THRESHOLD = 10.0
STEPS_PER_SHORTEST_SCALE = 200
MIN_HALF_WIDTH = 10.0
MAX_SPACING = 1.0 / 8.0


@dataclass(frozen=True)
class TriggerParams:
    mass: float
    omega: float
    delta: float
    v0: float
    amplitude_override: float | None = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self: Self) -> None:
        for name in ("mass", "omega", "delta"):
            if not getattr(self, name) > 0.0:
                err = f"trigger parameter {name} must be positive, got {getattr(self, name)}"
                raise DomainError(err)
        if not self.v0 >= 0.0:
            err = f"trigger parameter v0 must be non-negative, got {self.v0}"
            raise DomainError(err)
        if self.amplitude_override is not None and not self.amplitude_override > 0.0:
            err = f"oscillation amplitude must be positive, got {self.amplitude_override}"
            raise DomainError(err)
        if self.amplitude_override is None and self.v0 == 0.0:
            err = "v0 = 0 leaves the oscillation amplitude undefined; give it explicitly"
            raise DomainError(err)

    @classmethod
    def from_validity_factors(
        cls: type[Self],
        mass: float,
        omega: float,
        *,
        spread_factor: float = DEFAULT_VALIDITY_FACTOR,
        amplitude_factor: float = DEFAULT_VALIDITY_FACTOR,
        constants: PhysicalConstants | None = None,
    ) -> Self:
        """Δ = spread_factor·σ, and V0 such that A = amplitude_factor·Δ."""
        constants = constants or PhysicalConstants()
        sigma = math.sqrt(constants.hbar / (mass * omega))
        v0 = math.pi * constants.hbar * omega * amplitude_factor / 2.0
        return cls(mass=mass, omega=omega, delta=spread_factor * sigma, v0=v0, constants=constants)

    @property
    def hbar(self: Self) -> float:
        return self.constants.hbar

    @property
    def period(self: Self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def tau_star(self: Self) -> float:
        return self.period / 4.0

    @property
    def sigma(self: Self) -> float:
        return math.sqrt(self.hbar / (self.mass * self.omega))

    @property
    def amplitude(self: Self) -> float:
        if self.amplitude_override is not None:
            return self.amplitude_override
        return 2.0 * self.delta * self.v0 / (math.pi * self.hbar * self.omega)

    @property
    def alpha0(self: Self) -> float:
        return self.amplitude / (math.sqrt(2.0) * self.sigma)

    @property
    def speed(self: Self) -> float:
        return self.omega * self.amplitude

    @property
    def epsilon(self: Self) -> float:
        return self.delta / self.speed

    @property
    def theta(self: Self) -> float:
        return self.v0 * self.delta / (self.hbar * self.omega * self.amplitude)

    @property
    def kinetic_energy(self: Self) -> float:
        return 0.5 * self.mass * self.speed**2

    def validity_factors(self: Self) -> dict[str, float]:
        return {
            "amplitude/delta": self.amplitude / self.delta,
            "delta/sigma": self.delta / self.sigma,
            "energy/v0": math.inf if self.v0 == 0.0 else self.kinetic_energy / self.v0,
        }

    def violations(self: Self, threshold: float = VALIDITY_THRESHOLD) -> list[str]:
        labels = {"amplitude/delta": "A >> Δ", "delta/sigma": "Δ >> σ", "energy/v0": "mω²A²/2 >> V0"}
        return [f"{labels[k]} violated: {k} = {v:.3g} < {threshold:g}" for k, v in self.validity_factors().items() if v < threshold]


def rotation_angle(params: TriggerParams) -> float:
    return params.v0 * params.epsilon / params.hbar


def coherent_alpha(params: TriggerParams, tau: float) -> complex:
    return params.alpha0 * cmath.exp(-1j * params.omega * tau)


def classical_position(params: TriggerParams, tau: float) -> float:
    return params.amplitude * math.cos(params.omega * tau)


def refined_window(params: TriggerParams) -> float:
    """Time the classical orbit x = A cos ωτ spends inside [0, Δ] before τ*."""
    if params.delta >= params.amplitude:
        err = f"interaction zone Δ = {params.delta} m is not inside the orbit amplitude {params.amplitude} m"
        raise DomainError(err)
    return math.asin(params.delta / params.amplitude) / params.omega


class ReflectionBound(NamedTuple):
    probability: float
    above_barrier: bool


def reflection_bound(params: TriggerParams) -> ReflectionBound:
    """Plane-wave step reflection ((k - k')/(k + k'))² at the barrier edge, k' from E - V0 with E = m v²/2."""
    e = params.kinetic_energy
    if params.v0 >= e:
        logger.warning("oscillator energy %.3g J does not exceed the barrier %.3g J", e, params.v0)
        return ReflectionBound(1.0, above_barrier=False)
    ratio = math.sqrt(1.0 - params.v0 / e)
    return ReflectionBound(((1.0 - ratio) / (1.0 + ratio)) ** 2, above_barrier=True)


@dataclass(frozen=True)
class TriggerState:
    tau: float
    alpha: complex
    mean_x: float
    mean_p: float
    p_a0: float
    p_a1: float
    norm: float
    spread_x: float
    internal: np.ndarray | None = None


def _coherent_state(params: TriggerParams, tau: float, internal: np.ndarray) -> TriggerState:
    alpha = coherent_alpha(params, tau)
    return TriggerState(
        tau=tau,
        alpha=alpha,
        mean_x=math.sqrt(2.0) * params.sigma * alpha.real,
        mean_p=math.sqrt(2.0) * params.hbar / params.sigma * alpha.imag,
        p_a0=abs(internal[0]) ** 2,
        p_a1=abs(internal[1]) ** 2,
        norm=float(np.linalg.norm(internal)) ** 2,
        spread_x=params.sigma / math.sqrt(2.0),
        internal=internal,
    )


def analytic_evolve(params: TriggerParams, tau: float) -> TriggerState:
    """Piecewise solution under perfect transmission: free oscillation, plus exp(-i V0 σ_x s/ħ) on A while in the zone."""
    if not 0.0 <= tau <= params.tau_star:
        err = f"analytic evolution covers 0 <= tau <= tau* = {params.tau_star} s, got {tau} s"
        raise DomainError(err)
    phi = max(0.0, params.v0 * (tau - params.tau_star + params.epsilon) / params.hbar)
    internal = np.array([math.cos(phi), -1j * math.sin(phi)], dtype=np.complex128)
    return _coherent_state(params, tau, internal)


@dataclass(frozen=True)
class GridSpec:
    """Co-moving grid in units of σ; ``max_step`` in seconds overrides the default time step."""

    points: int = 1024
    spacing: float = 1.0 / 16.0
    max_step: float | None = None
    substeps: int = 8

    def __post_init__(self: Self) -> None:
        if self.points < 16 or self.points % 2:
            err = f"grid needs an even number of points >= 16, got {self.points}"
            raise DomainError(err)
        if not 0.0 < self.spacing <= MAX_SPACING:
            err = f"grid spacing must be in (0, σ/8], got {self.spacing}σ"
            raise DomainError(err)
        if self.half_width < MIN_HALF_WIDTH:
            err = f"grid half-width {self.half_width:g}σ is below {MIN_HALF_WIDTH:g}σ"
            raise DomainError(err)
        if self.substeps < 1:
            err = f"substeps must be >= 1, got {self.substeps}"
            raise DomainError(err)

    @property
    def half_width(self: Self) -> float:
        return self.points * self.spacing / 2.0

    def coordinates(self: Self) -> np.ndarray:
        return (np.arange(self.points) - self.points // 2) * self.spacing

    def wavenumbers(self: Self) -> np.ndarray:
        return 2.0 * np.pi * spfft.fftfreq(self.points, d=self.spacing)


def default_step(params: TriggerParams) -> float:
    shortest = params.period if params.v0 == 0.0 else min(params.period, math.pi * params.hbar / params.v0)
    return shortest / STEPS_PER_SHORTEST_SCALE


class _Integrator:
    """Strang split-step evolution of the two channels' envelopes in the frame following the classical orbit.

    Dimensionless units: length σ, time 1/ω, energy ħω. The envelope sees ½ξ² plus ±Ṽ inside the zone,
    evaluated at the lab position ξ + Ã cos t.
    """

    def __init__(self: Self, params: TriggerParams, grid: GridSpec, squeeze: float = 1.0) -> None:
        self._xi = grid.coordinates()
        self._k = grid.wavenumbers()
        self._dx = grid.spacing
        self._substeps = grid.substeps
        self._amp = params.amplitude / params.sigma
        self._zone = params.delta / params.sigma
        self._v = params.v0 / (params.hbar * params.omega)
        self._sign = np.array([1.0, -1.0])[:, None]
        envelope = np.exp(-0.5 * (self._xi / squeeze) ** 2).astype(np.complex128)
        envelope /= math.sqrt(float(np.sum(np.abs(envelope) ** 2)) * self._dx)
        self.chi = np.stack([envelope, envelope]) / math.sqrt(2.0)
        self.t = 0.0

    def _occupancy(self: Self, t0: float, h: float) -> np.ndarray:
        s = t0 + (np.arange(self._substeps) + 0.5) * h / self._substeps
        x = self._xi[None, :] + self._amp * np.cos(s)[:, None]
        return np.mean((x >= 0.0) & (x <= self._zone), axis=0)

    def _kick(self: Self, t0: float, h: float) -> None:
        phase = h * (0.5 * self._xi**2)[None, :] + self._sign * (self._v * h) * self._occupancy(t0, h)[None, :]
        self.chi *= np.exp(-1j * phase)

    def step(self: Self, h: float) -> None:
        self._kick(self.t, h / 2.0)
        self.chi = spfft.ifft(np.exp(-0.5j * self._k**2 * h) * spfft.fft(self.chi, axis=-1), axis=-1)
        self._kick(self.t + h / 2.0, h / 2.0)
        self.t += h

    def observe(self: Self, params: TriggerParams) -> TriggerState:
        dx = self._dx
        density = np.abs(self.chi) ** 2
        norm = float(np.sum(density)) * dx
        mean_xi = float(np.sum(density * self._xi[None, :])) * dx / norm
        var_xi = float(np.sum(density * (self._xi[None, :] - mean_xi) ** 2)) * dx / norm
        spectrum = np.abs(spfft.fft(self.chi, axis=-1)) ** 2
        mean_k = float(np.sum(spectrum * self._k[None, :]) / np.sum(spectrum))
        x = self._amp * math.cos(self.t) + mean_xi
        p = -self._amp * math.sin(self.t) + mean_k
        a0 = float(np.sum(np.abs(self.chi[0] + self.chi[1]) ** 2)) * dx / 2.0
        a1 = float(np.sum(np.abs(self.chi[0] - self.chi[1]) ** 2)) * dx / 2.0
        return TriggerState(
            tau=self.t / params.omega,
            alpha=complex(x, p) / math.sqrt(2.0),
            mean_x=x * params.sigma,
            mean_p=p * params.hbar / params.sigma,
            p_a0=a0,
            p_a1=a1,
            norm=norm,
            spread_x=math.sqrt(var_xi) * params.sigma,
        )


def numeric_evolve(
    params: TriggerParams,
    grid: GridSpec | None = None,
    tau_end: float | None = None,
    *,
    samples: int = 101,
    sample_times: Iterable[float] = (),
    squeeze: float = 1.0,
) -> list[TriggerState]:
    """Integrate both channels from τ = 0 to ``tau_end`` (default τ*), recording evenly spaced samples and ``sample_times``.

    The oscillator starts at x = A with a Gaussian envelope ``squeeze`` times as wide as the ground state;
    1 gives the coherent state |α0⟩.
    """
    grid = grid or GridSpec()
    if not squeeze > 0.0:
        err = f"squeeze factor must be positive, got {squeeze}"
        raise DomainError(err)
    tau_end = params.tau_star if tau_end is None else tau_end
    if not tau_end > 0.0:
        err = f"tau_end must be positive, got {tau_end} s"
        raise DomainError(err)
    limit = default_step(params)
    step = limit if grid.max_step is None else grid.max_step
    if not 0.0 < step <= limit:
        err = f"time step {step} s does not resolve the oscillation and coupling (limit {limit} s)"
        raise DomainError(err)
    extra = sorted(float(t) for t in sample_times)
    if extra and not (0.0 <= extra[0] and extra[-1] <= tau_end):
        err = f"sample times must lie in [0, {tau_end}] s"
        raise DomainError(err)
    marks = np.unique(np.concatenate([np.linspace(0.0, tau_end, max(samples, 2)), extra]))

    integrator = _Integrator(params, grid, squeeze)
    states = [integrator.observe(params)]
    h_max = step * params.omega
    n_steps = 0
    for a, b in zip(marks[:-1], marks[1:], strict=True):
        gap = (b - a) * params.omega
        n = max(1, math.ceil(gap / h_max))
        for _ in range(n):
            integrator.step(gap / n)
        integrator.t = b * params.omega
        n_steps += n
        states.append(integrator.observe(params))
    drift = max(abs(s.norm - 1.0) for s in states)
    logger.debug("numeric trigger run: %d steps, %d samples, max norm drift %.3g", n_steps, len(states), drift)
    return states


def trajectory_table(states: Sequence[TriggerState]) -> pl.DataFrame:
    return pl.DataFrame(
        {
            "tau[s]": [s.tau for s in states],
            "x[m]": [s.mean_x for s in states],
            "p[kg*m/s]": [s.mean_p for s in states],
            "alpha.re": [s.alpha.real for s in states],
            "alpha.im": [s.alpha.imag for s in states],
            "P_A0": [s.p_a0 for s in states],
            "P_A1": [s.p_a1 for s in states],
            "norm": [s.norm for s in states],
            "spread_x[m]": [s.spread_x for s in states],
        },
    )


def analytic_trajectory(params: TriggerParams, samples: int = 101) -> list[TriggerState]:
    return [analytic_evolve(params, t) for t in np.linspace(0.0, params.tau_star, samples)]


class TriggerMode(StrEnum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class TriggerReport:
    mode: TriggerMode
    epsilon: float
    refined_window: float
    tau_before: float
    p_a0_before: float
    p_a1_at_star: float
    before_threshold: float
    after_threshold: float
    reflection: float
    violations: tuple[str, ...] = ()

    @property
    def before_ok(self: Self) -> bool:
        return self.p_a0_before >= self.before_threshold

    @property
    def after_ok(self: Self) -> bool:
        return self.p_a1_at_star >= self.after_threshold

    @property
    def passed(self: Self) -> bool:
        return self.before_ok and self.after_ok and not self.violations

    def table(self: Self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "mode": [str(self.mode)],
                "epsilon[s]": [self.epsilon],
                "refined_window[s]": [self.refined_window],
                "tau_before[s]": [self.tau_before],
                "P_A0_before": [self.p_a0_before],
                "P_A1_at_star": [self.p_a1_at_star],
                "reflection_bound": [self.reflection],
                "passed": [self.passed],
            },
        )


ANALYTIC_TOLERANCE = 1e-12


def check_trigger_condition(
    params: TriggerParams,
    mode: TriggerMode = TriggerMode.ANALYTIC,
    *,
    grid: GridSpec | None = None,
    before_threshold: float | None = None,
    after_threshold: float | None = None,
    validity_threshold: float = VALIDITY_THRESHOLD,
    before_margin: float = 2.0,
) -> TriggerReport:
    """Check that A is still in A0 at τ* - before_margin·ε and in A1 at τ*.

    The margin keeps the finite wavepacket clear of the zone edge; any margin >= 1 tests the first clause.
    """
    violations = tuple(params.violations(validity_threshold))
    for v in violations:
        logger.warning("trigger: %s", v)
    tau_before = max(0.0, params.tau_star - before_margin * params.epsilon)
    match mode:
        case TriggerMode.ANALYTIC:
            before = analytic_evolve(params, tau_before)
            star = analytic_evolve(params, params.tau_star)
            lo = 1.0 - ANALYTIC_TOLERANCE if before_threshold is None else before_threshold
            hi = 1.0 - ANALYTIC_TOLERANCE if after_threshold is None else after_threshold
        case TriggerMode.NUMERIC:
            states = numeric_evolve(params, grid, params.tau_star, samples=2, sample_times=[tau_before])
            before = min(states, key=lambda s: abs(s.tau - tau_before))
            star = states[-1]
            lo = 0.99 if before_threshold is None else before_threshold
            hi = 0.95 if after_threshold is None else after_threshold
    try:
        window = refined_window(params)
    except DomainError:
        window = math.nan
    return TriggerReport(
        mode=mode,
        epsilon=params.epsilon,
        refined_window=window,
        tau_before=tau_before,
        p_a0_before=before.p_a0,
        p_a1_at_star=star.p_a1,
        before_threshold=lo,
        after_threshold=hi,
        reflection=reflection_bound(params).probability,
        violations=violations,
    )
