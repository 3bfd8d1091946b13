import math

import mpmath
import numpy as np
import pytest

from qswitch.constants import PhysicalConstants
from qswitch.error import DomainError
from qswitch.spacetime import EARTH_RADIUS, CentralBody, dilation_difference, dilation_factor
from qswitch.timing import (
    Hold,
    LinearAscent,
    PathProfile,
    ProtocolSchedule,
    Regime,
    build_paths,
    classify_regime,
    clock_resolved_separation,
    experiment_duration,
    matching_residual,
    near_surface_duration,
    proper_time,
    proper_time_difference,
    separation_product_for_duration,
    small_mass_duration,
    solve_matching,
    static_agent_tau,
    validate_windows,
)

mpmath.mp.dps = 50

D = 0.3e-6


def earth() -> CentralBody:
    return CentralBody.earth()


def path(*segments: Hold | LinearAscent) -> PathProfile:
    return PathProfile(segments)


def random_grid(n: int, seed: int) -> list[tuple[float, float, float]]:
    """(mass, radius, h) triples, log-uniform, keeping bodies far outside their Schwarzschild radius."""
    rng = np.random.default_rng(seed)
    constants = PhysicalConstants()
    grid: list[tuple[float, float, float]] = []
    while len(grid) < n:
        mass = 10.0 ** rng.uniform(-10.0, 30.0)
        radius = 10.0 ** rng.uniform(-15.0, 9.0)
        if radius < 1e3 * 2.0 * constants.G * mass / constants.c**2:
            continue
        grid.append((mass, radius, 10.0 ** rng.uniform(-12.0, 9.0)))
    return grid


def test_proper_time_flat_limit():
    assert proper_time(path(Hold(radius=math.inf, duration=5.0)), earth()) == 5.0


def test_proper_time_hold_at_surface():
    body = earth()
    expect = mpmath.sqrt(1 - mpmath.mpf(body.schwarzschild_radius) / mpmath.mpf(EARTH_RADIUS))
    assert proper_time(path(Hold(radius=EARTH_RADIUS, duration=1.0)), body) == pytest.approx(float(expect), rel=1e-15)


def test_proper_time_ascent_continuity():
    body = earth()
    hold = proper_time(path(Hold(radius=EARTH_RADIUS, duration=3.0)), body)
    ascent = proper_time(path(LinearAscent(r_start=EARTH_RADIUS, r_end=EARTH_RADIUS, duration=3.0)), body)
    assert ascent == pytest.approx(hold, rel=1e-15)


def test_proper_time_ascent_matches_extended_precision():
    body = earth()
    h, t = 1e5, 10.0
    rs = mpmath.mpf(body.schwarzschild_radius)
    expect = mpmath.quad(lambda s: mpmath.sqrt(1 - rs / (EARTH_RADIUS + h * s / t)), [0, t])
    value = proper_time(path(LinearAscent(r_start=EARTH_RADIUS, r_end=EARTH_RADIUS + h, duration=t)), body)
    assert value == pytest.approx(float(expect), rel=1e-13)


def test_proper_time_rejects_interior_path():
    body = earth()
    with pytest.raises(DomainError):
        proper_time(path(Hold(radius=body.schwarzschild_radius / 2.0, duration=1.0)), body)


def test_path_rejects_empty_and_non_positive_duration():
    with pytest.raises(DomainError):
        PathProfile(())
    with pytest.raises(DomainError) as e:
        path(Hold(radius=EARTH_RADIUS, duration=0.0))
    assert "duration must be positive" in str(e.value)


def test_truncated_path():
    p = path(LinearAscent(r_start=EARTH_RADIUS, r_end=EARTH_RADIUS + 10.0, duration=2.0), Hold(radius=EARTH_RADIUS + 10.0, duration=8.0))
    head = p.truncated(1.0)
    assert head.duration == 1.0
    assert head.segments == (LinearAscent(r_start=EARTH_RADIUS, r_end=EARTH_RADIUS + 5.0, duration=1.0),)
    assert p.truncated(6.0).segments[-1] == Hold(radius=EARTH_RADIUS + 10.0, duration=4.0)
    with pytest.raises(DomainError):
        p.truncated(11.0)


def test_proper_time_difference_identical_paths():
    body = earth()
    p = path(LinearAscent(r_start=EARTH_RADIUS, r_end=EARTH_RADIUS + 1.0, duration=1.0), Hold(radius=EARTH_RADIUS + 1.0, duration=2.0))
    assert proper_time_difference(p, p, body) == 0.0


def test_proper_time_difference_holds():
    body = earth()
    hi = path(Hold(radius=EARTH_RADIUS + 1.0, duration=1.0))
    lo = path(Hold(radius=EARTH_RADIUS, duration=1.0))
    rs = mpmath.mpf(body.schwarzschild_radius)
    expect = mpmath.sqrt(1 - rs / mpmath.mpf(EARTH_RADIUS + 1.0)) - mpmath.sqrt(1 - rs / mpmath.mpf(EARTH_RADIUS))
    value = proper_time_difference(hi, lo, body)
    assert value == pytest.approx(float(expect), rel=1e-12)
    assert proper_time_difference(lo, hi, body) == -value


def test_proper_time_difference_ignores_azimuth():
    body = earth()
    a = path(Hold(radius=EARTH_RADIUS + 1.0, duration=4.0, azimuth=0.0))
    b = path(Hold(radius=EARTH_RADIUS + 1.0, duration=4.0, azimuth=math.pi / 3))
    assert proper_time_difference(a, b, body) == 0.0


def test_proper_time_difference_with_ascent_matches_extended_precision():
    body = earth()
    h = 50.0
    a = path(LinearAscent(r_start=EARTH_RADIUS, r_end=EARTH_RADIUS + h, duration=2.0), Hold(radius=EARTH_RADIUS + h, duration=3.0))
    b = path(Hold(radius=EARTH_RADIUS, duration=5.0))
    rs = mpmath.mpf(body.schwarzschild_radius)
    r0 = mpmath.mpf(EARTH_RADIUS)

    def s(r: mpmath.mpf) -> mpmath.mpf:
        return mpmath.sqrt(1 - rs / r)

    expect = mpmath.quad(lambda t: s(r0 + h * t / 2) - s(r0), [0, 2]) + 3 * (s(mpmath.mpf(EARTH_RADIUS + h)) - s(r0))
    assert proper_time_difference(a, b, body) == pytest.approx(float(expect), rel=1e-11)


def test_proper_time_difference_duration_mismatch():
    body = earth()
    with pytest.raises(DomainError) as e:
        proper_time_difference(path(Hold(radius=EARTH_RADIUS, duration=1.0)), path(Hold(radius=EARTH_RADIUS, duration=2.0)), body)
    assert "coordinate duration" in str(e.value)


def test_solve_matching_earth():
    solution = solve_matching(earth(), 1.0, D)
    assert solution.dt_r == pytest.approx(9.1583485624569381, rel=1e-9)
    assert solution.dt_r * 1.0 / D == pytest.approx(3.05e7, rel=1e-2)
    assert solution.regime == Regime.NEAR_SURFACE
    assert solution.tau_star == pytest.approx(dilation_factor(EARTH_RADIUS + 1.0, earth()) * solution.dt_r, rel=1e-15)


@pytest.mark.parametrize("h", [0.1, 1.0, 10.0, 100.0])
def test_weak_field_gap(h: float):
    solution = solve_matching(earth(), h, D)
    assert abs(solution.relative_gap) < 1e-8
    assert solution.relative_gap != 0.0


@pytest.mark.parametrize(("mass", "radius", "h"), random_grid(100, 20))
def test_weak_field_forms_agree(mass: float, radius: float, h: float):
    solution = solve_matching(CentralBody(mass=mass, radius=radius), h, D)
    assert solution.ratio_curvature_form == pytest.approx(solution.ratio_weak_field, rel=1e-12)


def test_pure_curvature_limit():
    body = earth()
    solution = solve_matching(body, 1e30, D)
    assert solution.ratio_weak_field == pytest.approx(2.0 * EARTH_RADIUS / body.schwarzschild_radius, rel=1e-12)


def test_near_surface_duration():
    body = earth()
    assert solve_matching(body, 1.0, D).dt_r == pytest.approx(near_surface_duration(body, 1.0, D), rel=1e-6)


def test_solve_matching_errors():
    with pytest.raises(DomainError):
        solve_matching(earth(), 0.0, D)
    with pytest.raises(DomainError):
        solve_matching(earth(), 1.0, -D)


def test_classify_regime():
    assert classify_regime(earth(), 1.0) == Regime.NEAR_SURFACE
    assert classify_regime(earth(), EARTH_RADIUS) == Regime.GENERAL
    assert classify_regime(CentralBody.small_mass(), 1e-12) == Regime.SMALL_MASS


def test_small_mass_duration():
    body = CentralBody.small_mass()
    value = small_mass_duration(body, 1e-15)
    assert value == pytest.approx(0.04491743823, rel=1e-9)
    assert small_mass_duration(body, 2e-15) == pytest.approx(2.0 * value, rel=1e-15)
    wide = CentralBody(mass=1e-10, radius=1e-14)
    assert 1.0 < small_mass_duration(wide, 1e-14) < 10.0


def test_separation_product_round_trip():
    body = CentralBody.small_mass()
    rd = separation_product_for_duration(1.0, body)
    assert small_mass_duration(body, rd / body.radius) == pytest.approx(1.0, rel=1e-14)


def test_static_agent_tau():
    body = earth()
    tau = static_agent_tau(EARTH_RADIUS, body)
    assert tau == pytest.approx(61055647.58, rel=1e-9)
    assert static_agent_tau(2.0 * EARTH_RADIUS, body) == pytest.approx(4.0 * tau, rel=1e-15)
    with pytest.raises(DomainError):
        static_agent_tau(body.schwarzschild_radius, body)


def test_clock_resolved_separation():
    assert clock_resolved_separation(1e15) == pytest.approx(2.99792458e-7, rel=1e-15)
    with pytest.raises(DomainError):
        clock_resolved_separation(0.0)


def test_validate_windows():
    schedule = ProtocolSchedule.solved(earth(), 1.0, D)
    report = validate_windows(schedule, 1e-17, 1e-19)
    assert report.passed
    assert report.photon_window_margin == pytest.approx(100.0, rel=1e-3)
    assert report.decay_window_margin == pytest.approx(100.0, rel=1e-12)
    assert report.failures() == []
    assert report.table()["passed"].to_list() == [True, True, True]


def test_validate_windows_failures():
    schedule = ProtocolSchedule.solved(earth(), 1.0, D)
    decay = D / schedule.constants.c
    report = validate_windows(schedule, decay, 1e-19)
    assert not report.photon_window_ok
    assert report.decay_window_ok
    report = validate_windows(schedule, 1e-17, 1e-17)
    assert report.photon_window_ok
    assert not report.decay_window_ok
    assert len(report.failures()) == 1
    with pytest.raises(DomainError):
        validate_windows(schedule, -1.0, 1e-19)


def test_schedule_events():
    schedule = ProtocolSchedule(body=earth(), h=1.0, d=D, dt_v=1.0, dt_s=2.0)
    assert schedule.t1 == 1.0
    assert schedule.t2 == 3.0
    assert schedule.t3 == 4.0
    assert schedule.t4 == pytest.approx(4.0 + D / schedule.constants.c, rel=1e-15)
    assert schedule.t_b_prepare == pytest.approx(4.0 + D / (2.0 * schedule.constants.c), rel=1e-15)
    assert experiment_duration(schedule) == schedule.dt_r + schedule.dt_v + schedule.transit_time


def test_schedule_validation():
    with pytest.raises(DomainError):
        ProtocolSchedule(body=earth(), h=0.0, d=D)
    with pytest.raises(DomainError):
        ProtocolSchedule(body=earth(), h=1.0, d=D, dt_v=-1.0)
    with pytest.raises(DomainError):
        ProtocolSchedule(body=earth(), h=1.0, d=D, dt_c=0.0)
    with pytest.raises(DomainError) as e:
        ProtocolSchedule.solved(earth(), 1.0, D, dt_v=100.0)
    assert "exceeds the matching interval" in str(e.value)


def test_solve_matching_rejects_long_ascent():
    with pytest.raises(DomainError) as e:
        solve_matching(earth(), 1.0, D, dt_v=100.0)
    assert "exceeds the matching interval" in str(e.value)


def test_solve_matching_agrees_with_solved_schedule():
    solution = solve_matching(earth(), 1.0, D, dt_v=2.0)
    schedule = ProtocolSchedule.solved(earth(), 1.0, D, dt_v=2.0)
    assert schedule.dt_r == solution.dt_r
    assert schedule.tau_star == solution.tau_star
    assert ProtocolSchedule.solved(earth(), 1.0, D, dt_v=solution.dt_r).dt_s == 0.0


@pytest.mark.parametrize("ascent", [0.0, 0.25, 0.5, 0.9])
@pytest.mark.parametrize("h", np.geomspace(1e-3, 1e3, 25).tolist())
def test_solved_schedule_matches(h: float, ascent: float):
    dt_v = ascent * solve_matching(earth(), h, D).dt_r
    schedule = ProtocolSchedule.solved(earth(), h, D, dt_v=dt_v)
    residual = matching_residual(schedule)
    assert abs(residual) / schedule.tau_star < 1e-12
    assert abs(residual) < 1e-9 * schedule.tau_c

    a_first, b_first = build_paths(schedule)
    assert a_first.duration == pytest.approx(schedule.t4, rel=1e-15)
    assert b_first.duration == pytest.approx(schedule.t4, rel=1e-15)
    assert proper_time(a_first.truncated(schedule.t3), schedule.body) == pytest.approx(schedule.tau_star, rel=1e-12)
    assert proper_time(b_first, schedule.body) == pytest.approx(schedule.tau_star, rel=1e-12)


def test_unsolved_schedule_residual():
    body = earth()
    schedule = ProtocolSchedule(body=body, h=1.0, d=D, dt_s=5.0)
    expect = dilation_difference(EARTH_RADIUS + 1.0, EARTH_RADIUS, body) * 5.0 - schedule.tau_c
    assert matching_residual(schedule) == pytest.approx(expect, rel=1e-9)
    assert matching_residual(schedule) < 0.0


def test_degenerate_paths_coincide():
    body = earth()
    p = path(Hold(radius=EARTH_RADIUS, duration=7.0))
    assert proper_time_difference(p, p, body) == 0.0


def test_build_paths_shape():
    schedule = ProtocolSchedule(body=earth(), h=1.0, d=D, dt_v=1.0, dt_s=2.0)
    a_first, b_first = build_paths(schedule)
    assert isinstance(a_first.segments[0], LinearAscent)
    assert a_first.segments[1] == Hold(radius=EARTH_RADIUS + 1.0, duration=3.0 + schedule.transit_time)
    assert b_first.segments[0] == Hold(radius=EARTH_RADIUS, duration=3.0)
    assert isinstance(b_first.segments[1], LinearAscent)
    assert b_first.segments[2] == Hold(radius=EARTH_RADIUS + 1.0, duration=schedule.transit_time)
