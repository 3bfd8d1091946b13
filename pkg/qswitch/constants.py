import logging
import os
import tomllib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Self

from qswitch.error import ConfigError, DomainError

logger = logging.getLogger(__name__)

CONSTANTS_ENV = "QSWITCH_CONSTANTS"


@dataclass(frozen=True, slots=True)
class PhysicalConstants:
    """CODATA 2018 values in SI units."""

    c: float = 299792458.0
    G: float = 6.67430e-11  # noqa: N815
    hbar: float = 1.054571817e-34

    def __post_init__(self: Self) -> None:
        for f in fields(self):
            if not getattr(self, f.name) > 0.0:
                err = f"constant {f.name} must be strictly positive"
                raise DomainError(err)

    def updated(self: Self, values: dict[str, Any]) -> Self:
        known = {f.name for f in fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            err = f"unknown constant(s): {', '.join(unknown)}"
            raise ConfigError(err)
        return replace(self, **{k: float(v) for k, v in values.items()})


def load_constants(path: Path | None = None) -> PhysicalConstants:
    if path is None:
        env = os.environ.get(CONSTANTS_ENV)
        if not env:
            return PhysicalConstants()
        path = Path(env)
    logger.debug("loading constants from %s", path)
    try:
        values = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        err = f"cannot read constants file {path}: {e}"
        raise ConfigError(err) from e
    except tomllib.TOMLDecodeError as e:
        err = f"{path}: {e}"
        raise ConfigError(err) from e
    return PhysicalConstants().updated(values)
