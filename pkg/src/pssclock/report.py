"""CSV and JSON emission for run results."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path

import numpy as np

from pssclock import __version__
from pssclock.config import RunConfig
from pssclock.errors import ClockError

logger = logging.getLogger(__name__)


def format_cell(value) -> str:
    """Deterministic text for one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def csv_text(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(row.get(col)) for col in header])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def json_text(data) -> str:
    return json.dumps(_jsonable(data), indent=2, ensure_ascii=False) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ClockError(f"{path}: {exc.strerror or exc}") from exc
    logger.info("wrote %s", path)
    return path


def covariance_rows(t_grid, cov) -> tuple[list[str], list[dict]]:
    """Covariance matrix as CSV rows with t_grid row and column headers."""
    labels = [format_cell(float(t)) for t in t_grid]
    header = ["t", *labels]
    rows = [{"t": float(t), **{label: float(c) for label, c in zip(labels, row)}}
            for t, row in zip(t_grid, np.asarray(cov))]
    return header, rows


def summary(cfg: RunConfig, passed: bool, runtime: float | None = None, **extra) -> dict:
    """JSON summary: verdict, resolved config and seed for replay."""
    data = {
        "command": cfg.command,
        "pass": bool(passed),
        "seed": cfg.seed,
        "config": cfg.to_mapping(),
        "version": __version__,
    }
    if runtime is not None:
        data["runtime_seconds"] = round(runtime, 3)
    data.update(extra)
    return data


def emit_report(name: str, header: list[str], rows: list[dict], summary_data: dict,
                output: str | Path, fmt: str = "csv",
                extra_tables: dict[str, tuple[list[str], list[dict]]] | None = None) -> list[Path]:
    """Write ``<name>.csv`` (or ``<name>.json``), any extra tables and ``<name>_summary.json``."""
    out = Path(output)
    written = []
    if fmt == "csv":
        written.append(_write(out / f"{name}.csv", csv_text(header, rows)))
        for table, (t_header, t_rows) in (extra_tables or {}).items():
            written.append(_write(out / f"{name}_{table}.csv", csv_text(t_header, t_rows)))
    elif fmt == "json":
        tables = {table: t_rows for table, (_, t_rows) in (extra_tables or {}).items()}
        written.append(_write(out / f"{name}.json", json_text({"rows": rows, **tables})))
    else:
        raise ClockError(f"unknown report format {fmt!r}")
    written.append(_write(out / f"{name}_summary.json", json_text(summary_data)))
    return written
