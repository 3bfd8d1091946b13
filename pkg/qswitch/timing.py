"""Proper-time matching for the two paths of agent A.

Agent A is sent along a superposition of two worldlines that start together at r = R and
end at r = R + h. Along P_{A≺B} it rises at t0 and waits at the top; along P_{B≺A} it waits
Δt_r at the bottom before rising. The target photon crosses P_{A≺B} at t3 and P_{B≺A} at
t4 = t3 + Δt_c, and the switch needs both crossings to happen at the same proper time τ* of A.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Self

import polars as pl
from scipy.integrate import quad

from qswitch.constants import PhysicalConstants
from qswitch.error import DomainError
from qswitch.spacetime import CentralBody, dilation_difference, dilation_factor

logger = logging.getLogger(__name__)

QUAD_EPSREL = 1e-13
NEAR_SURFACE_LIMIT = 1e-2
SMALL_MASS_LIMIT = 1e2
DEFAULT_THRESHOLD = 10.0


@dataclass(frozen=True, slots=True)
class Hold:
    radius: float
    duration: float
    azimuth: float = 0.0

    def radius_at(self: Self, _t: float) -> float:
        return self.radius


@dataclass(frozen=True, slots=True)
class LinearAscent:
    r_start: float
    r_end: float
    duration: float

    def radius_at(self: Self, t: float) -> float:
        return self.r_start + (self.r_end - self.r_start) * (t / self.duration)


type Segment = Hold | LinearAscent


@dataclass(frozen=True, slots=True)
class PathProfile:
    segments: tuple[Segment, ...]

    def __post_init__(self: Self) -> None:
        if not self.segments:
            err = "path has no segments"
            raise DomainError(err)
        for s in self.segments:
            if not s.duration > 0.0:
                err = f"segment duration must be positive, got {s.duration} s"
                raise DomainError(err)

    @property
    def duration(self: Self) -> float:
        return math.fsum(s.duration for s in self.segments)

    def boundaries(self: Self) -> list[float]:
        t = [0.0]
        for s in self.segments:
            t.append(t[-1] + s.duration)
        return t

    def segment_at(self: Self, t: float) -> tuple[Segment, float]:
        start = 0.0
        for s in self.segments:
            if t < start + s.duration:
                return s, t - start
            start += s.duration
        last = self.segments[-1]
        return last, last.duration

    def truncated(self: Self, t_end: float) -> "PathProfile":
        if not 0.0 < t_end <= self.duration:
            err = f"cannot truncate a {self.duration} s path at {t_end} s"
            raise DomainError(err)
        kept: list[Segment] = []
        start = 0.0
        for s in self.segments:
            if start >= t_end:
                break
            remaining = t_end - start
            if remaining >= s.duration:
                kept.append(s)
            else:
                match s:
                    case Hold():
                        kept.append(Hold(radius=s.radius, duration=remaining, azimuth=s.azimuth))
                    case LinearAscent():
                        kept.append(LinearAscent(r_start=s.r_start, r_end=s.radius_at(remaining), duration=remaining))
            start += s.duration
        return PathProfile(tuple(kept))


def _check_path(path: PathProfile, body: CentralBody) -> None:
    rs = body.schwarzschild_radius
    for s in path.segments:
        radii = (s.radius,) if isinstance(s, Hold) else (s.r_start, s.r_end)
        if any(not r > rs for r in radii):
            err = f"path segment {s} reaches r <= R_S = {rs} m"
            raise DomainError(err)


def _deficit(r: float, body: CentralBody) -> float:
    # 1 - sqrt(1 - R_S/r), evaluated without cancellation
    x = body.schwarzschild_radius / r
    return x / (1.0 + math.sqrt(1.0 - x))


def _segment_proper_time(s: Segment, body: CentralBody) -> float:
    match s:
        case Hold():
            return dilation_factor(s.radius, body) * s.duration
        case LinearAscent():
            lost, _ = quad(lambda t: _deficit(s.radius_at(t), body), 0.0, s.duration, epsabs=0.0, epsrel=QUAD_EPSREL, limit=200)
            return s.duration - lost


def proper_time(path: PathProfile, body: CentralBody) -> float:
    _check_path(path, body)
    return math.fsum(_segment_proper_time(s, body) for s in path.segments)


def _pointwise_difference(r_a: float, r_b: float, body: CentralBody) -> float:
    rs = body.schwarzschild_radius
    return rs * ((r_a - r_b) / (r_a * r_b)) / (dilation_factor(r_a, body) + dilation_factor(r_b, body))


def proper_time_difference(path_a: PathProfile, path_b: PathProfile, body: CentralBody) -> float:
    """τ(path_a) - τ(path_b) for paths of equal coordinate duration; positive when path_a runs higher."""
    _check_path(path_a, body)
    _check_path(path_b, body)
    if not math.isclose(path_a.duration, path_b.duration, rel_tol=1e-12):
        err = f"paths differ in coordinate duration: {path_a.duration} s vs {path_b.duration} s"
        raise DomainError(err)
    knots = sorted({*path_a.boundaries(), *path_b.boundaries()})
    knots[-1] = min(path_a.duration, path_b.duration)
    parts: list[float] = []
    for a, b in zip(knots[:-1], knots[1:], strict=True):
        if not b > a:
            continue
        mid = 0.5 * (a + b)
        seg_a, local_a = path_a.segment_at(mid)
        seg_b, local_b = path_b.segment_at(mid)
        off_a = local_a - (mid - a)
        off_b = local_b - (mid - a)
        match seg_a, seg_b:
            case Hold(), Hold():
                if seg_a.radius >= seg_b.radius:
                    parts.append(dilation_difference(seg_a.radius, seg_b.radius, body) * (b - a))
                else:
                    parts.append(-dilation_difference(seg_b.radius, seg_a.radius, body) * (b - a))
            case _:
                value, _ = quad(
                    lambda t, sa=seg_a, sb=seg_b, oa=off_a, ob=off_b: _pointwise_difference(sa.radius_at(oa + t), sb.radius_at(ob + t), body),
                    0.0,
                    b - a,
                    epsabs=0.0,
                    epsrel=QUAD_EPSREL,
                    limit=200,
                )
                parts.append(value)
    return math.fsum(parts)


class Regime(StrEnum):
    NEAR_SURFACE = "near-surface"
    SMALL_MASS = "small-mass"
    GENERAL = "general"


def classify_regime(body: CentralBody, h: float) -> Regime:
    ratio = h / body.radius
    if ratio <= NEAR_SURFACE_LIMIT:
        return Regime.NEAR_SURFACE
    if ratio >= SMALL_MASS_LIMIT:
        return Regime.SMALL_MASS
    return Regime.GENERAL


@dataclass(frozen=True)
class ProtocolSchedule:
    body: CentralBody
    h: float
    d: float
    dt_v: float = 0.0
    dt_s: float = 0.0
    dt_c: float | None = None

    def __post_init__(self: Self) -> None:
        if not self.h > 0.0:
            err = f"height h must be positive, got {self.h} m"
            raise DomainError(err)
        if not self.d > 0.0:
            err = f"separation d must be positive, got {self.d} m"
            raise DomainError(err)
        if self.dt_v < 0.0 or self.dt_s < 0.0:
            err = f"dt_v and dt_s must be non-negative, got dt_v={self.dt_v} s, dt_s={self.dt_s} s"
            raise DomainError(err)
        if self.dt_c is not None and not self.dt_c > 0.0:
            err = f"dt_c must be positive, got {self.dt_c} s"
            raise DomainError(err)

    @classmethod
    def solved(cls: type[Self], body: CentralBody, h: float, d: float, *, dt_v: float = 0.0, dt_c: float | None = None) -> Self:
        dt_r = solve_matching(body, h, d, dt_c=dt_c, dt_v=dt_v).dt_r
        return cls(body=body, h=h, d=d, dt_v=dt_v, dt_s=dt_r - dt_v, dt_c=dt_c)

    @property
    def constants(self: Self) -> PhysicalConstants:
        return self.body.constants

    @property
    def transit_time(self: Self) -> float:
        return self.d / self.constants.c if self.dt_c is None else self.dt_c

    @property
    def dt_r(self: Self) -> float:
        return self.dt_v + self.dt_s

    @property
    def t0(self: Self) -> float:
        return 0.0

    @property
    def t1(self: Self) -> float:
        return self.t0 + self.dt_v

    @property
    def t2(self: Self) -> float:
        return self.t1 + self.dt_s

    @property
    def t3(self: Self) -> float:
        return self.t0 + self.dt_v + self.dt_r

    @property
    def t4(self: Self) -> float:
        return self.t3 + self.transit_time

    @property
    def t_b_prepare(self: Self) -> float:
        return self.t3 + self.d / (2.0 * self.constants.c)

    @property
    def dt_exp(self: Self) -> float:
        return self.t4 - self.t0

    @property
    def tau_v(self: Self) -> float:
        if self.dt_v == 0.0:
            return 0.0
        return proper_time(PathProfile((LinearAscent(r_start=self.body.radius, r_end=self.body.radius + self.h, duration=self.dt_v),)), self.body)

    @property
    def tau_c(self: Self) -> float:
        return dilation_factor(self.body.radius + self.h, self.body) * self.transit_time

    @property
    def tau_star(self: Self) -> float:
        return self.tau_v + dilation_factor(self.body.radius + self.h, self.body) * self.dt_r


@dataclass(frozen=True, slots=True)
class MatchingSolution:
    ratio_exact: float
    ratio_weak_field: float
    ratio_curvature_form: float
    dt_c: float
    tau_star: float
    regime: Regime

    @property
    def dt_r(self: Self) -> float:
        return self.ratio_exact * self.dt_c

    @property
    def relative_gap(self: Self) -> float:
        return self.ratio_weak_field / self.ratio_exact - 1.0


def solve_matching(body: CentralBody, h: float, d: float, *, dt_c: float | None = None, dt_v: float = 0.0) -> MatchingSolution:
    if not h > 0.0:
        err = f"height h must be positive, got {h} m"
        raise DomainError(err)
    if not d > 0.0:
        err = f"separation d must be positive, got {d} m"
        raise DomainError(err)
    c = body.constants.c
    r = body.radius
    rs = body.schwarzschild_radius
    s_hi = dilation_factor(r + h, body)
    s_lo = dilation_factor(r, body)
    ratio_exact = s_hi * (s_hi + s_lo) * (r * (r + h)) / (rs * h)
    ratio_weak = (r / rs) * (2.0 * r / h + 2.0)
    g = body.surface_gravity
    ratio_curv = c**2 / (g * h) - (c**2 / 2.0) * body.curvature_r0101 / g**2
    transit = d / c if dt_c is None else dt_c
    dt_r = ratio_exact * transit
    if dt_v > dt_r:
        err = f"ascent time {dt_v} s exceeds the matching interval dt_r = {dt_r} s"
        raise DomainError(err)
    schedule = ProtocolSchedule(body=body, h=h, d=d, dt_v=dt_v, dt_s=dt_r - dt_v, dt_c=dt_c)
    solution = MatchingSolution(
        ratio_exact=ratio_exact,
        ratio_weak_field=ratio_weak,
        ratio_curvature_form=ratio_curv,
        dt_c=transit,
        tau_star=schedule.tau_star,
        regime=classify_regime(body, h),
    )
    logger.debug("matching h=%g m d=%g m: ratio=%.17g gap=%.3g regime=%s", h, d, ratio_exact, solution.relative_gap, solution.regime)
    return solution


def near_surface_duration(body: CentralBody, h: float, d: float) -> float:
    """Δt_r ≃ c R² d / (G M h), the leading term for h ≪ R and a photon target."""
    return body.constants.c * body.radius**2 * d / (body.gm * h)


def small_mass_duration(body: CentralBody, d: float) -> float:
    return body.constants.c * body.radius * d / body.gm


def static_agent_tau(r_b: float, body: CentralBody) -> float:
    if not r_b > body.schwarzschild_radius:
        err = f"agent radius {r_b} m is not outside R_S = {body.schwarzschild_radius} m"
        raise DomainError(err)
    return 2.0 * r_b**2 * body.constants.c / body.gm


def experiment_duration(schedule: ProtocolSchedule) -> float:
    return schedule.dt_exp


def clock_resolved_separation(frequency: float, constants: PhysicalConstants | None = None) -> float:
    if not frequency > 0.0:
        err = f"clock frequency must be positive, got {frequency} Hz"
        raise DomainError(err)
    return (constants or PhysicalConstants()).c / frequency


def separation_product_for_duration(duration: float, body: CentralBody) -> float:
    # R·d giving a small-mass protocol of the requested duration
    return duration * body.gm / body.constants.c


@dataclass(frozen=True, slots=True)
class FeasibilityReport:
    photon_window_margin: float
    decay_window_margin: float
    transit_margin: float
    threshold: float

    @property
    def photon_window_ok(self: Self) -> bool:
        return self.photon_window_margin >= self.threshold

    @property
    def decay_window_ok(self: Self) -> bool:
        return self.decay_window_margin >= self.threshold

    @property
    def transit_ok(self: Self) -> bool:
        return self.transit_margin >= self.threshold

    @property
    def passed(self: Self) -> bool:
        return self.photon_window_ok and self.decay_window_ok and self.transit_ok

    def failures(self: Self) -> list[str]:
        out = []
        if not self.photon_window_ok:
            out.append(f"decay time not << d/c (margin {self.photon_window_margin:.3g} < {self.threshold:g})")
        if not self.decay_window_ok:
            out.append(f"trigger window not << decay time (margin {self.decay_window_margin:.3g} < {self.threshold:g})")
        if not self.transit_ok:
            out.append(f"dt_c not << t3 - t0 (margin {self.transit_margin:.3g} < {self.threshold:g})")
        return out

    def table(self: Self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "check": ["photon_window", "decay_window", "transit"],
                "margin": [self.photon_window_margin, self.decay_window_margin, self.transit_margin],
                "passed": [self.photon_window_ok, self.decay_window_ok, self.transit_ok],
            },
        )


def validate_windows(schedule: ProtocolSchedule, decay_time: float, trigger_window: float, *, threshold: float = DEFAULT_THRESHOLD) -> FeasibilityReport:
    if not (decay_time > 0.0 and trigger_window > 0.0 and threshold > 0.0):
        err = f"decay time, trigger window and threshold must be positive, got {decay_time}, {trigger_window}, {threshold}"
        raise DomainError(err)
    report = FeasibilityReport(
        photon_window_margin=(schedule.d / schedule.constants.c) / decay_time,
        decay_window_margin=decay_time / trigger_window,
        transit_margin=(schedule.t3 - schedule.t0) / schedule.transit_time,
        threshold=threshold,
    )
    for msg in report.failures():
        logger.warning("feasibility: %s", msg)
    return report


def build_paths(schedule: ProtocolSchedule) -> tuple[PathProfile, PathProfile]:
    r_lo = schedule.body.radius
    r_hi = r_lo + schedule.h
    ascent = [LinearAscent(r_start=r_lo, r_end=r_hi, duration=schedule.dt_v)] if schedule.dt_v > 0.0 else []
    a_first: list[Segment] = [*ascent, Hold(radius=r_hi, duration=schedule.dt_r + schedule.transit_time)]
    b_first: list[Segment] = [*ascent, Hold(radius=r_hi, duration=schedule.transit_time)]
    if schedule.dt_r > 0.0:
        b_first.insert(0, Hold(radius=r_lo, duration=schedule.dt_r))
    return PathProfile(tuple(a_first)), PathProfile(tuple(b_first))


def matching_residual(schedule: ProtocolSchedule) -> float:
    """Δτ_{A≺B} - Δτ_{B≺A}: proper time of P_{A≺B} up to t3 minus that of P_{B≺A} up to t4."""
    a_first, b_first = build_paths(schedule)
    return proper_time_difference(a_first, b_first, schedule.body) - schedule.tau_c
