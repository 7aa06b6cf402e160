"""Curve, table and level-ensemble files (JSON and CSV) with embedded run metadata.

Every file written here carries the schema version, the resolved run config and the build
fingerprint. Floats are written with ``repr`` so a file read back reproduces
the in-memory arrays exactly.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from powerspec.build_info import build_fingerprint
from powerspec.errors import DataError
from powerspec.spectra import SpectrumCurve

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_HEADER_PREFIX = "# powerspec "


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays (possibly nested) to plain Python values."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    with open(temp_path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    temp_path.replace(path)


def _header(kind: str, meta: dict, config: dict | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "meta": _jsonable(meta),
        "config": _jsonable(config or {}),
        "build": build_fingerprint(),
    }


def _check_schema(header: dict, path: Path) -> None:
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema version {version!r}")


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def write_table(
    path: str | Path,
    columns: dict[str, Any],
    kind: str = "table",
    meta: dict | None = None,
    config: dict | None = None,
) -> Path:
    """Write equal-length columns to ``.json`` or ``.csv`` (chosen by suffix).

    Missing values (None) are written as empty CSV cells / JSON nulls.
    """
    path = Path(path)
    names = list(columns)
    data = {name: [None if v is None else float(v) for v in columns[name]] for name in names}
    lengths = {len(v) for v in data.values()}
    if len(lengths) > 1:
        raise DataError(f"Columns have different lengths: {sorted(lengths)}")
    header = _header(kind, meta or {}, config)

    if path.suffix == ".json":
        text = json.dumps({**header, "columns": data}, indent=2)
    elif path.suffix == ".csv":
        rows = [_HEADER_PREFIX + json.dumps(header), ",".join(names)]
        for row in zip(*(data[name] for name in names)):
            rows.append(",".join("" if v is None else repr(v) for v in row))
        text = "\n".join(rows) + "\n"
    else:
        raise DataError(f"Unsupported output format '{path.suffix}' (use .json or .csv)")

    _atomic_write(path, text)
    logger.info("Wrote %s (%d rows)", path, lengths.pop() if lengths else 0)
    return path


def read_table(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a table written by :func:`write_table`.

    Returns:
        (columns, header) with columns as float arrays (NaN for missing cells).

    Raises:
        DataError: If the file is missing, malformed or of another schema version.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}") from e

    try:
        if path.suffix == ".json":
            payload = json.loads(text)
            header = {k: v for k, v in payload.items() if k != "columns"}
            raw = payload["columns"]
        elif path.suffix == ".csv":
            lines = text.splitlines()
            if not lines or not lines[0].startswith(_HEADER_PREFIX):
                raise DataError(f"{path}: missing powerspec header line")
            header = json.loads(lines[0][len(_HEADER_PREFIX):])
            reader = csv.reader(lines[1:])
            names = next(reader)
            raw = {name: [] for name in names}
            for row in reader:
                for name, cell in zip(names, row):
                    raw[name].append(None if cell == "" else float(cell))
        else:
            raise DataError(f"Unsupported file format '{path.suffix}'")
    except (json.JSONDecodeError, KeyError, StopIteration, ValueError) as e:
        raise DataError(f"Malformed file {path}: {e}") from e

    _check_schema(header, path)
    columns = {
        name: np.array([np.nan if v is None else v for v in values], dtype=float)
        for name, values in raw.items()
    }
    return columns, header


# ---------------------------------------------------------------------------
# Spectrum curves
# ---------------------------------------------------------------------------


def write_curve(
    curve: SpectrumCurve,
    stem: str | Path,
    fmt: str = "both",
    config: dict | None = None,
) -> list[Path]:
    """Write *curve* to ``<stem>.json`` and/or ``<stem>.csv``."""
    stem = Path(stem)
    columns: dict[str, Any] = {"x": curve.x, "value": curve.values}
    if curve.stderr is not None:
        columns["stderr"] = curve.stderr
    meta = {**curve.meta, "provenance": str(curve.provenance), "quantity": str(curve.quantity)}
    suffixes = [".json", ".csv"] if fmt == "both" else [f".{fmt}"]
    return [
        write_table(stem.with_name(stem.name + suffix), columns, "spectrum-curve", meta, config)
        for suffix in suffixes
    ]


def read_curve(path: str | Path) -> tuple[SpectrumCurve, dict]:
    """Read a curve file back into a :class:`SpectrumCurve`.

    Raises:
        DataError: If the file is not a spectrum-curve file.
    """
    columns, header = read_table(path)
    if header.get("kind") != "spectrum-curve":
        raise DataError(f"{path} is not a spectrum-curve file (kind={header.get('kind')!r})")
    meta = dict(header.get("meta", {}))
    provenance = meta.pop("provenance")
    quantity = meta.pop("quantity")
    curve = SpectrumCurve(
        x=columns["x"],
        values=columns["value"],
        provenance=provenance,
        quantity=quantity,
        stderr=columns.get("stderr"),
        meta=meta,
    )
    return curve, header


# ---------------------------------------------------------------------------
# Level ensembles
# ---------------------------------------------------------------------------


def write_levels(
    path: str | Path,
    blocks: np.ndarray | Iterable[np.ndarray],
    meta: dict | None = None,
    config: dict | None = None,
) -> Path:
    """Write level sequences to CSV, one realization per row.

    *blocks* is an (R, N) array or an iterable of (B, N) blocks written in
    order, so an ensemble can be streamed without holding it in memory.

    Raises:
        DataError: If the blocks do not share one N.
    """
    path = Path(path)
    if isinstance(blocks, np.ndarray):
        blocks = [blocks]
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    rows, width = 0, None
    try:
        with open(temp_path, "w", encoding="utf-8", newline="") as f:
            f.write(_HEADER_PREFIX + json.dumps(_header("level-ensemble", meta or {}, config)))
            f.write("\n")
            for block in blocks:
                block = np.atleast_2d(np.asarray(block, dtype=float))
                if width is None:
                    width = block.shape[1]
                elif block.shape[1] != width:
                    raise DataError(f"Level blocks mix N={width} and N={block.shape[1]}")
                for row in block:
                    f.write(",".join(repr(float(v)) for v in row))
                    f.write("\n")
                rows += block.shape[0]
        temp_path.replace(path)
    finally:
        temp_path.unlink(missing_ok=True)
    logger.info("Wrote %s (%d realizations, N=%s)", path, rows, width)
    return path


def read_levels(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read level sequences from CSV, one realization per row.

    The ``# powerspec`` header line written by :func:`write_levels` is
    optional; other ``#`` lines and blank lines are skipped.

    Returns:
        (levels, header): an (R, N) float array and the header ({} if absent).

    Raises:
        DataError: If the file is missing, ragged, non-numeric, non-finite or
            holds a decreasing realization.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}") from e

    header: dict = {}
    rows: list[list[float]] = []
    lines = text.splitlines()
    try:
        if lines and lines[0].startswith(_HEADER_PREFIX):
            header = json.loads(lines[0][len(_HEADER_PREFIX):])
            _check_schema(header, path)
            lines = lines[1:]
        body = [line for line in lines if line.strip() and not line.startswith("#")]
        for row in csv.reader(body):
            rows.append([float(cell) for cell in row])
    except (json.JSONDecodeError, ValueError) as e:
        raise DataError(f"Malformed level file {path}: {e}") from e

    if not rows:
        raise DataError(f"{path}: no realizations")
    widths = {len(row) for row in rows}
    if len(widths) > 1:
        raise DataError(f"{path}: realizations have different lengths {sorted(widths)}")
    levels = np.array(rows, dtype=float)
    if not np.all(np.isfinite(levels)):
        raise DataError(f"{path}: non-finite level values")
    decreasing = np.flatnonzero(np.any(np.diff(levels, axis=1) < 0, axis=1))
    if decreasing.size:
        raise DataError(f"{path}: realization {decreasing[0] + 1} is not ordered")
    logger.debug("Read %s: R=%d, N=%d", path, *levels.shape)
    return levels, header


def write_report(path: str | Path, report: dict) -> Path:
    """Write a JSON report (compare/verify/diagnostics) with the standard header."""
    path = Path(path)
    payload = {**_header("report", {}, None), "report": _jsonable(report)}
    _atomic_write(path, json.dumps(payload, indent=2))
    logger.info("Wrote report %s", path)
    return path
