"""
Report writers: convergence CSV, metric and monitor CSV, legacy VTK point data.
"""
import csv
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import structlog

from errors import InvalidParameter
from problems import BenchmarkReport, FieldReport

logger = structlog.get_logger()

REPORT_COLUMNS = ["resolution", "N", "h", "eps2", "slope", "iters", "seconds"]


def _number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "nan" if math.isnan(value) else repr(value)


def write_report_csv(report: BenchmarkReport, path: Union[str, Path]) -> Path:
    """
    One row per resolution with the fixed columns, then the union of the
    level metrics in sorted order. The fitted slope repeats on every row.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra = sorted({key for level in report.levels for key in level.metrics})
    slope = report.slope

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS + extra + ["converged", "error"])
        for level in report.levels:
            writer.writerow(
                [level.resolution, level.n_points, _number(level.h), _number(level.eps2), _number(slope),
                 level.iterations, _number(round(level.seconds, 3))]
                + [_number(level.metrics.get(key)) for key in extra]
                + [int(level.converged), level.error_type or ""]
            )
    logger.debug("report_written", path=str(path), levels=len(report.levels))
    return path


def write_metrics_csv(metrics: Dict[str, float], path: Union[str, Path]) -> Path:
    """Two-column `metric,value` table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value"])
        for key in sorted(metrics):
            writer.writerow([key, _number(metrics[key])])
    return path


def write_monitors_csv(monitors: Dict[str, List[float]], path: Union[str, Path],
                       times: Optional[Iterable[float]] = None) -> Path:
    """One row per recorded step; monitors of unequal length are padded with blanks."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = sorted(monitors)
    n_rows = max((len(values) for values in monitors.values()), default=0)
    times = list(times) if times is not None else None

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step"] + (["t"] if times is not None else []) + names)
        for row in range(n_rows):
            cells = [row]
            if times is not None:
                cells.append(_number(times[row]) if row < len(times) else "")
            cells += [_number(monitors[name][row]) if row < len(monitors[name]) else "" for name in names]
            writer.writerow(cells)
    return path


def write_vtk(path: Union[str, Path], positions: np.ndarray, fields: Optional[Dict[str, np.ndarray]] = None,
              title: str = "surface GFDM point data") -> Path:
    """
    Legacy ASCII VTK POLYDATA with one vertex cell per point and one SCALARS
    array per field. 2D positions are padded with z = 0.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[1] not in (2, 3):
        raise InvalidParameter("VTK output needs (N, 2) or (N, 3) positions", shape=positions.shape)
    if positions.shape[1] == 2:
        positions = np.column_stack([positions, np.zeros(len(positions))])
    n_points = len(positions)
    fields = fields or {}
    for name, values in fields.items():
        if np.shape(values) != (n_points,):
            raise InvalidParameter(f"field '{name}' must have one value per point", shape=np.shape(values))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as out:
        out.write(f"# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\n")
        out.write(f"POINTS {n_points} double\n")
        for x, y, z in positions.tolist():
            out.write(f"{x!r} {y!r} {z!r}\n")
        out.write(f"VERTICES {n_points} {2 * n_points}\n")
        for i in range(n_points):
            out.write(f"1 {i}\n")
        if fields:
            out.write(f"POINT_DATA {n_points}\n")
            for name, values in fields.items():
                out.write(f"SCALARS {_vtk_name(name)} double 1\nLOOKUP_TABLE default\n")
                for value in np.asarray(values, dtype=float).tolist():
                    out.write(f"{value!r}\n")
    return path


def _vtk_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch == "_" else "_" for ch in name) or "field"


def write_benchmark(report: BenchmarkReport, directory: Union[str, Path]) -> List[Path]:
    """Report CSV plus per-level VTK fields and monitor tables."""
    directory = Path(directory)
    written = [write_report_csv(report, directory / f"{report.label}.csv")]
    for level in report.levels:
        if level.positions is not None and level.fields:
            written.append(write_vtk(directory / f"{report.label}_r{level.resolution}.vtk",
                                     level.positions, level.fields))
        if level.monitors:
            written.append(write_monitors_csv(level.monitors,
                                              directory / f"{report.label}_r{level.resolution}_monitors.csv"))
    return written


def write_field_report(report: FieldReport, directory: Union[str, Path]) -> List[Path]:
    """Metrics CSV, monitors CSV, final fields and checkpoint snapshots as VTK."""
    directory = Path(directory)
    metrics = dict(report.metrics, N=report.n_points, h=report.h, iters=report.iterations,
                   seconds=round(report.seconds, 3))
    written = [write_metrics_csv(metrics, directory / f"{report.label}_metrics.csv")]
    if report.monitors:
        written.append(write_monitors_csv(report.monitors, directory / f"{report.label}_monitors.csv"))
    if report.positions is not None and report.fields:
        written.append(write_vtk(directory / f"{report.label}.vtk", report.positions, report.fields))
    if report.positions is not None:
        for idx, (t, state) in enumerate(report.checkpoints):
            written.append(write_vtk(directory / f"{report.label}_{idx:04d}.vtk", report.positions,
                                     {"state": state}, title=f"t = {t:.6g}"))
    return written
