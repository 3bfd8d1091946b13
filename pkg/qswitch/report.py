import logging
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any, Self

import polars as pl

from qswitch.error import ConfigError

logger = logging.getLogger(__name__)

# 17 significant digits: every double survives a write/read cycle
FLOAT_PRECISION = 16


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"


def write_table(df: pl.DataFrame, path: Path, fmt: OutputFormat = OutputFormat.CSV) -> Path:
    match fmt:
        case OutputFormat.CSV:
            df.write_csv(path, float_scientific=True, float_precision=FLOAT_PRECISION)
        case OutputFormat.JSON:
            df.write_json(path)
    logger.debug("wrote %d rows to %s", df.height, path)
    return path


@dataclass(frozen=True)
class RunReport:
    """Outcome of one command: resolved inputs, a headline table, warnings and extra tables."""

    command: str
    inputs: dict[str, Any]
    headline: pl.DataFrame
    warnings: tuple[str, ...] = ()
    tables: dict[str, pl.DataFrame] = field(default_factory=dict)

    def inputs_table(self: Self) -> pl.DataFrame:
        return pl.DataFrame({k: [v] for k, v in self.inputs.items()})

    def warnings_table(self: Self) -> pl.DataFrame:
        return pl.DataFrame({"warning": list(self.warnings)}, schema={"warning": pl.String})

    def write(self: Self, out_dir: Path, stem: str, fmt: OutputFormat = OutputFormat.CSV) -> list[Path]:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            err = f"cannot create output directory {out_dir}: {e}"
            raise ConfigError(err) from e
        base = f"{stem}_{self.command}"
        written = [
            write_table(self.headline, out_dir / f"{base}.{fmt}", fmt),
            write_table(self.inputs_table(), out_dir / f"{base}_inputs.{fmt}", fmt),
        ]
        if self.warnings:
            written.append(write_table(self.warnings_table(), out_dir / f"{base}_warnings.{fmt}", fmt))
        written.extend(write_table(df, out_dir / f"{base}_{name}.{fmt}", fmt) for name, df in self.tables.items())
        return written
