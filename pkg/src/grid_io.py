"""
Polyharmonic Field Toolkit - Grid IO Module

Grid files, CSV tables, JSON reports and PGM heatmaps.

A grid file starts with one UTF-8 JSON header line (sorted keys) followed by
M^n little-endian binary64 values in row-major order, last axis fastest.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from src.config import IO_CONFIG
from src.transform import GridFunction

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

PathLike = Union[str, Path]


@dataclass
class GridFile:
    grid: GridFunction
    L: Optional[int]
    kind: str
    seed: Optional[int]
    meta: Dict[str, Any] = field(default_factory=dict)


def _header(grid: GridFunction, L: Optional[int], kind: str, seed: Optional[int], meta: Optional[dict]) -> bytes:
    header = {
        "format": IO_CONFIG["grid_format"],
        "version": IO_CONFIG["grid_version"],
        "n": grid.n,
        "M": grid.M,
        "L": L,
        "kind": kind,
        "seed": seed,
        "meta": meta or {},
    }
    return (json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def write_grid(
    path: PathLike,
    grid: GridFunction,
    kind: str,
    L: Optional[int] = None,
    seed: Optional[int] = None,
    meta: Optional[dict] = None,
) -> Path:
    """Write a real grid; the bytes depend only on the arguments."""
    if np.iscomplexobj(grid.values):
        raise ValueError("Grid files hold real values only")
    path = Path(path)
    values = np.ascontiguousarray(grid.values, dtype="<f8")
    with open(path, "wb") as handle:
        handle.write(_header(grid, L, kind, seed, meta))
        handle.write(values.tobytes(order="C"))
    logging.info(f"Wrote {grid.M}^{grid.n} grid ({kind}) to {path}")
    return path


def read_grid(path: PathLike) -> GridFile:
    path = Path(path)
    with open(path, "rb") as handle:
        header_line = handle.readline()
        payload = handle.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{path} does not start with a JSON grid header: {e}") from None
    if header.get("format") != IO_CONFIG["grid_format"]:
        raise ValueError(f"{path} is not a {IO_CONFIG['grid_format']} file")
    if header.get("version") != IO_CONFIG["grid_version"]:
        raise ValueError(f"Unsupported grid version {header.get('version')} in {path}")
    n, M = int(header["n"]), int(header["M"])
    values = np.frombuffer(payload, dtype="<f8")
    if values.size != M ** n:
        raise ValueError(f"{path} holds {values.size} values, header announces {M}^{n}")
    grid = GridFunction(n, M, values.astype(np.float64).reshape((M,) * n))
    return GridFile(grid, header.get("L"), header.get("kind", ""), header.get("seed"), header.get("meta", {}))


def write_table(path: PathLike, table: pd.DataFrame) -> Path:
    """RFC-4180 CSV with a header row and CRLF line ends."""
    path = Path(path)
    table.to_csv(path, index=False, lineterminator="\r\n", float_format=IO_CONFIG["float_format"])
    logging.info(f"Wrote {len(table)} rows to {path}")
    return path


def table_records(table: pd.DataFrame) -> list:
    """Rows as plain dicts with NaN mapped to None."""
    cleaned = table.astype(object).where(pd.notna(table), None)
    return [{key: _plain(value) for key, value in row.items()} for row in cleaned.to_dict(orient="records")]


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    return value


def write_report(path: PathLike, report: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, sort_keys=True, indent=2, default=_plain) + "\n", encoding="utf-8")
    logging.info(f"Wrote report to {path}")
    return path


def write_pgm(path: PathLike, grid: GridFunction) -> Path:
    """
    16-bit binary PGM (P5) of a 2-D grid, rows along the first axis.

    Values are scaled linearly from [min, max] to [0, 65535]; the range is
    kept in a comment line.
    """
    if grid.n != 2:
        raise ValueError(f"Heatmaps need a 2-D grid, got n={grid.n}")
    values = np.real(grid.values)
    low, high = float(values.min()), float(values.max())
    span = high - low
    scaled = np.zeros_like(values) if span == 0 else (values - low) / span
    pixels = np.round(scaled * 65535).astype(">u2")
    path = Path(path)
    header = f"P5\n# min={low!r} max={high!r}\n{grid.M} {grid.M}\n65535\n".encode("ascii")
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(pixels.tobytes(order="C"))
    return path
