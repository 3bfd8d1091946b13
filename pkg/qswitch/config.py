"""Scenario configuration.

A scenario is a TOML document with the sections listed in ``SECTION_KEYS``. Values start from a
named preset and are overridden key by key. Unknown sections and keys are rejected with the line
number of the offending entry.
"""

import logging
import math
import re
import tomllib
from dataclasses import dataclass, field, fields, replace
from enum import StrEnum
from pathlib import Path
from typing import Any, Self, overload

import numpy as np

from qswitch.constants import PhysicalConstants, load_constants
from qswitch.error import ConfigError, DomainError
from qswitch.spacetime import EARTH_MASS, EARTH_RADIUS, SMALL_MASS, SMALL_MASS_RADIUS, CentralBody
from qswitch.switch_model import AmplitudeModel, parse_complex
from qswitch.timing import DEFAULT_THRESHOLD, ProtocolSchedule
from qswitch.trigger import DEFAULT_VALIDITY_FACTOR, VALIDITY_THRESHOLD, GridSpec, TriggerParams

logger = logging.getLogger(__name__)

MAX_SWEEP_POINTS = 1_000_000
YEAR = 365.25 * 86400.0

_MODEL_KEYS = frozenset(f.name for f in fields(AmplitudeModel))

SECTION_KEYS: dict[str, frozenset[str]] = {
    "scenario": frozenset({"name", "preset"}),
    "body": frozenset({"mass", "radius"}),
    "protocol": frozenset({"h", "d", "dt_v", "dt_s", "dt_c", "decay_time", "trigger_window", "threshold", "static_radius"}),
    "model": _MODEL_KEYS,
    "input": frozenset({"alpha"}),
    "trigger": frozenset(
        {
            "mass",
            "omega",
            "width",
            "potential",
            "amplitude",
            "spread_factor",
            "amplitude_factor",
            "grid_spacing",
            "grid_half_width",
            "time_step",
            "substeps",
            "samples",
            "numeric",
            "before_threshold",
            "after_threshold",
            "validity_threshold",
        },
    ),
    "sweep": frozenset({"target", "parameter", "min", "max", "count", "scale", "parameter2", "min2", "max2", "count2", "scale2"}),
    "output": frozenset({"dir", "stem"}),
    "constants": frozenset({"c", "G", "hbar"}),
}

_HEADER = re.compile(r"^\[\s*([^\[\]]+?)\s*\]")
_KEY = re.compile(r"""^(?:"([^"]+)"|'([^']+)'|([A-Za-z0-9_\-]+))\s*=""")
_DECODE_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True, slots=True)
class Preset:
    name: str
    mass: float
    radius: float
    h: float
    d: float
    decay_time: float | None = None
    trigger_window: float | None = None
    # literature durations the computed ones are compared against, in seconds
    references: tuple[tuple[str, float], ...] = ()


PRESETS: dict[str, Preset] = {
    "earth": Preset(
        name="earth",
        mass=EARTH_MASS,
        radius=EARTH_RADIUS,
        h=1.0,
        d=0.3e-6,
        decay_time=1e-17,
        trigger_window=1e-19,
        references=(("dt_exp[s]", 9.0), ("static_tau[s]", YEAR)),
    ),
    "small-mass": Preset(
        name="small-mass",
        mass=SMALL_MASS,
        radius=SMALL_MASS_RADIUS,
        h=1e-7,
        d=SMALL_MASS_RADIUS,
        references=(("dt_exp[s]", 5e-2), ("static_protocol[s]", 10.0 * 3600.0)),
    ),
}
DEFAULT_PRESET = "earth"


class SweepTarget(StrEnum):
    TIMING = "timing"
    SWITCH = "switch"


class Scale(StrEnum):
    LINEAR = "linear"
    LOG = "log"


TIMING_PARAMETERS = ("h", "d", "dt_v", "dt_c", "mass", "radius")
SWITCH_PARAMETERS = tuple(f.name for f in fields(AmplitudeModel))


@dataclass(frozen=True, slots=True)
class ProtocolConfig:
    h: float
    d: float
    dt_v: float = 0.0
    dt_s: float | None = None
    dt_c: float | None = None
    decay_time: float | None = None
    trigger_window: float | None = None
    threshold: float = DEFAULT_THRESHOLD
    static_radius: float | None = None


@dataclass(frozen=True, slots=True)
class TriggerConfig:
    mass: float = 1e-26
    omega: float = 2.0 * math.pi * 1e5
    width: float | None = None
    potential: float | None = None
    amplitude: float | None = None
    spread_factor: float = DEFAULT_VALIDITY_FACTOR
    amplitude_factor: float = DEFAULT_VALIDITY_FACTOR
    grid_spacing: float = 1.0 / 16.0
    grid_half_width: float = 32.0
    time_step: float | None = None
    substeps: int = 8
    samples: int = 101
    numeric: bool = True
    before_threshold: float | None = None
    after_threshold: float | None = None
    validity_threshold: float = VALIDITY_THRESHOLD

    def params(self: Self, constants: PhysicalConstants) -> TriggerParams:
        if self.width is None and self.potential is None:
            params = TriggerParams.from_validity_factors(
                self.mass,
                self.omega,
                spread_factor=self.spread_factor,
                amplitude_factor=self.amplitude_factor,
                constants=constants,
            )
            return params if self.amplitude is None else replace(params, amplitude_override=self.amplitude)
        if self.width is None or self.potential is None:
            err = "trigger width and potential must be given together"
            raise ConfigError(err)
        return TriggerParams(
            mass=self.mass,
            omega=self.omega,
            delta=self.width,
            v0=self.potential,
            amplitude_override=self.amplitude,
            constants=constants,
        )

    def grid(self: Self) -> GridSpec:
        points = 2 * math.ceil(self.grid_half_width / self.grid_spacing)
        return GridSpec(points=points, spacing=self.grid_spacing, max_step=self.time_step, substeps=self.substeps)


@dataclass(frozen=True, slots=True)
class SweepAxis:
    parameter: str
    start: float
    stop: float
    count: int
    scale: Scale = Scale.LINEAR

    def values(self: Self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        match self.scale:
            case Scale.LINEAR:
                return np.linspace(self.start, self.stop, self.count)
            case Scale.LOG:
                return np.geomspace(self.start, self.stop, self.count)


@dataclass(frozen=True, slots=True)
class SweepConfig:
    target: SweepTarget
    axes: tuple[SweepAxis, ...]

    @property
    def size(self: Self) -> int:
        return math.prod(a.count for a in self.axes)


@dataclass(frozen=True, slots=True)
class OutputConfig:
    dir: Path = Path()
    stem: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    preset: str | None
    mass: float
    radius: float
    protocol: ProtocolConfig
    model: AmplitudeModel = field(default_factory=AmplitudeModel)
    alpha: tuple[complex, ...] = (1.0, 0.0, 0.0, 0.0, 0.0)
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    sweep: SweepConfig | None = None
    output: OutputConfig = field(default_factory=OutputConfig)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    references: tuple[tuple[str, float], ...] = ()

    @property
    def stem(self: Self) -> str:
        return self.output.stem or self.name

    def body(self: Self) -> CentralBody:
        return CentralBody(mass=self.mass, radius=self.radius, constants=self.constants)

    def schedule(self: Self) -> ProtocolSchedule:
        p = self.protocol
        if p.dt_s is None:
            return ProtocolSchedule.solved(self.body(), p.h, p.d, dt_v=p.dt_v, dt_c=p.dt_c)
        return ProtocolSchedule(body=self.body(), h=p.h, d=p.d, dt_v=p.dt_v, dt_s=p.dt_s, dt_c=p.dt_c)

    @property
    def static_radius(self: Self) -> float:
        return self.radius if self.protocol.static_radius is None else self.protocol.static_radius

    def trigger_params(self: Self) -> TriggerParams:
        return self.trigger.params(self.constants)

    def with_value(self: Self, parameter: str, value: float) -> Self:
        """The scenario with one sweep parameter replaced."""
        if parameter in ("mass", "radius"):
            return replace(self, **{parameter: value})
        if parameter in TIMING_PARAMETERS:
            return replace(self, protocol=replace(self.protocol, **{parameter: value}))
        if parameter in SWITCH_PARAMETERS:
            new: complex | float = value
            if parameter.startswith(("c", "f_")):
                # sweeps set the modulus and keep the configured phase
                old = complex(getattr(self.model, parameter))
                new = complex(value) if old == 0 else value * old / abs(old)
            return replace(self, model=replace(self.model, **{parameter: new}))
        err = f"cannot sweep unknown parameter {parameter!r}"
        raise ConfigError(err)

    def resolved(self: Self) -> dict[str, Any]:
        p = self.protocol
        return {
            "scenario": self.name,
            "preset": self.preset or "",
            "mass[kg]": self.mass,
            "radius[m]": self.radius,
            "h[m]": p.h,
            "d[m]": p.d,
            "dt_v[s]": p.dt_v,
            "dt_s[s]": math.nan if p.dt_s is None else p.dt_s,
            "dt_c[s]": math.nan if p.dt_c is None else p.dt_c,
            "c[m/s]": self.constants.c,
            "G[m3/(kg*s2)]": self.constants.G,
            "hbar[J*s]": self.constants.hbar,
        }


def _preset(name: str, line: int | None = None) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        err = f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}"
        raise ConfigError(err, line=line) from None


def _locate(text: str, section: str | None, key: str | None = None) -> int | None:
    """1-based line of ``key`` in ``[section]``, or of the section header when ``key`` is None."""
    current: str | None = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if m := _HEADER.match(line):
            current = m.group(1)
            if key is None and current == section:
                return n
            continue
        if key is not None and current == section and (m := _KEY.match(line)) and key in m.groups():
            return n
    return None


class _Section:
    def __init__(self: Self, name: str, values: dict[str, Any], text: str) -> None:
        self.name = name
        self.values = values
        self.text = text

    def error(self: Self, key: str | None, msg: str) -> ConfigError:
        return ConfigError(f"[{self.name}] {msg}", line=_locate(self.text, self.name, key))

    def __contains__(self: Self, key: str) -> bool:
        return key in self.values

    @overload
    def number(self: Self, key: str, default: float) -> float: ...
    @overload
    def number(self: Self, key: str, default: None = None) -> float | None: ...
    def number(self: Self, key: str, default: float | None = None) -> float | None:
        if key not in self.values:
            return default
        v = self.values[key]
        if isinstance(v, bool) or not isinstance(v, int | float):
            raise self.error(key, f"{key} must be a number, got {v!r}")
        return float(v)

    def required(self: Self, key: str) -> float:
        v = self.number(key)
        if v is None:
            raise self.error(None, f"missing required key {key}")
        return v

    def integer(self: Self, key: str, default: int) -> int:
        v = self.values.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.error(key, f"{key} must be an integer, got {v!r}")
        return v

    def string(self: Self, key: str, default: str | None = None) -> str | None:
        v = self.values.get(key, default)
        if v is not None and not isinstance(v, str):
            raise self.error(key, f"{key} must be a string, got {v!r}")
        return v

    def boolean(self: Self, key: str, *, default: bool) -> bool:
        v = self.values.get(key, default)
        if not isinstance(v, bool):
            raise self.error(key, f"{key} must be true or false, got {v!r}")
        return v

    def choice[E: StrEnum](self: Self, key: str, enum: type[E], default: E) -> E:
        v = self.string(key, str(default))
        try:
            return enum(v)
        except ValueError:
            raise self.error(key, f"{key} must be one of {', '.join(e.value for e in enum)}, got {v!r}") from None


def _check_keys(data: dict[str, Any], text: str) -> None:
    for name, values in data.items():
        if not isinstance(values, dict):
            err = f"key {name!r} outside of any section"
            raise ConfigError(err, line=_locate(text, None, name))
        if name not in SECTION_KEYS:
            err = f"unknown section [{name}]"
            raise ConfigError(err, line=_locate(text, name))
        for key in values:
            if key not in SECTION_KEYS[name]:
                err = f"[{name}] unknown key {key!r}"
                raise ConfigError(err, line=_locate(text, name, key))


def _parse_model(s: _Section) -> AmplitudeModel:
    for key, v in s.values.items():
        try:
            AmplitudeModel.from_mapping({key: v})
        except (ConfigError, DomainError, TypeError, ValueError) as e:
            raise s.error(key, f"{key}: {e}") from e
    return AmplitudeModel.from_mapping(s.values)


def _parse_alpha(s: _Section) -> tuple[complex, ...] | None:
    if "alpha" not in s:
        return None
    v = s.values["alpha"]
    if not isinstance(v, list) or len(v) != 5:  # noqa: PLR2004
        raise s.error("alpha", "alpha must be a list of 5 amplitudes")
    try:
        return tuple(parse_complex(f"alpha{i + 1}", a) for i, a in enumerate(v))
    except ConfigError as e:
        raise s.error("alpha", str(e)) from e


def _parse_trigger(s: _Section) -> TriggerConfig:
    kw: dict[str, Any] = {}
    for f in fields(TriggerConfig):
        if f.name not in s:
            continue
        match f.name:
            case "substeps" | "samples":
                kw[f.name] = s.integer(f.name, f.default)
            case "numeric":
                kw[f.name] = s.boolean(f.name, default=True)
            case _:
                kw[f.name] = s.number(f.name)
    return TriggerConfig(**kw)


def _parse_sweep(s: _Section) -> SweepConfig:
    target = s.choice("target", SweepTarget, SweepTarget.TIMING)
    allowed = TIMING_PARAMETERS if target == SweepTarget.TIMING else SWITCH_PARAMETERS
    axes = []
    for suffix in ("", "2"):
        keys = [k + suffix for k in ("parameter", "min", "max", "count", "scale")]
        if suffix and not any(k in s for k in keys):
            break
        name = s.string(keys[0])
        if name is None:
            raise s.error(None, f"missing required key {keys[0]}")
        if name not in allowed:
            raise s.error(keys[0], f"cannot sweep {name!r} for target {target}; expected one of {', '.join(allowed)}")
        axis = SweepAxis(
            parameter=name,
            start=s.required(keys[1]),
            stop=s.required(keys[2]),
            count=s.integer(keys[3], 1),
            scale=s.choice(keys[4], Scale, Scale.LINEAR),
        )
        if axis.count < 1:
            raise s.error(keys[3], f"{keys[3]} must be >= 1, got {axis.count}")
        if axis.scale == Scale.LOG and not (axis.start > 0.0 and axis.stop > 0.0):
            raise s.error(keys[4], "log sweeps need positive bounds")
        axes.append(axis)
    if len(axes) == 2 and axes[0].parameter == axes[1].parameter:  # noqa: PLR2004
        raise s.error("parameter2", f"parameter {axes[0].parameter!r} swept twice")
    sweep = SweepConfig(target=target, axes=tuple(axes))
    if sweep.size > MAX_SWEEP_POINTS:
        raise s.error(None, f"sweep grid of {sweep.size} points exceeds the limit of {MAX_SWEEP_POINTS}")
    return sweep


def parse_config(text: str, *, preset: str | None = None, constants: PhysicalConstants | None = None) -> ScenarioConfig:
    """Parse a scenario document; ``preset`` overrides the one named in ``[scenario]``."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = _DECODE_LINE.search(str(e))
        raise ConfigError(str(e), line=None if m is None else int(m.group(1))) from e
    _check_keys(data, text)
    sections = {name: _Section(name, data.get(name, {}), text) for name in SECTION_KEYS}

    scenario = sections["scenario"]
    preset_name = preset or scenario.string("preset") or DEFAULT_PRESET
    base = _preset(preset_name, None if preset else _locate(text, "scenario", "preset"))

    try:
        base_constants = (constants or load_constants()).updated(sections["constants"].values)
    except (TypeError, ValueError) as e:
        raise sections["constants"].error(None, str(e)) from e

    body = sections["body"]
    proto = sections["protocol"]
    protocol = ProtocolConfig(
        h=proto.number("h", base.h),
        d=proto.number("d", base.d),
        dt_v=proto.number("dt_v", 0.0),
        dt_s=proto.number("dt_s"),
        dt_c=proto.number("dt_c"),
        decay_time=proto.number("decay_time", base.decay_time),
        trigger_window=proto.number("trigger_window", base.trigger_window),
        threshold=proto.number("threshold", DEFAULT_THRESHOLD),
        static_radius=proto.number("static_radius"),
    )
    output = sections["output"]
    out_dir = output.string("dir")
    alpha = _parse_alpha(sections["input"])
    config = ScenarioConfig(
        name=scenario.string("name") or base.name,
        preset=base.name,
        mass=body.number("mass", base.mass),
        radius=body.number("radius", base.radius),
        protocol=protocol,
        model=_parse_model(sections["model"]),
        alpha=(1.0, 0.0, 0.0, 0.0, 0.0) if alpha is None else alpha,
        trigger=_parse_trigger(sections["trigger"]),
        sweep=_parse_sweep(sections["sweep"]) if "sweep" in data else None,
        output=OutputConfig(dir=Path(out_dir) if out_dir else Path(), stem=output.string("stem")),
        constants=base_constants,
        # custom bodies are not the literature setups
        references=base.references if "body" not in data else (),
    )
    logger.debug("parsed scenario %s (preset %s)", config.name, config.preset)
    return config


def load_config(path: Path | None = None, *, preset: str | None = None, constants: PhysicalConstants | None = None) -> ScenarioConfig:
    if path is None:
        return parse_config("", preset=preset, constants=constants)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        err = f"cannot read config file {path}: {e}"
        raise ConfigError(err) from e
    return parse_config(text, preset=preset, constants=constants)
