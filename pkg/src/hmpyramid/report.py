"""Writing experiment results to disk.

Every experiment produces one ``metrics.csv`` (the deterministic, comparable
artifact: identical configuration and seed give identical bytes), one
``manifest.txt`` (configuration echo, stream ids, wall-clock timings, and
timestamps; the only place time-dependent values appear), and optionally PGM
images of generated samples.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Report", "emit_report", "write_pgm"]


@dataclass
class Report:
    """Results of one experiment run, not yet on disk.

    ``rows`` are flat dicts; the CSV column order is first-appearance order
    across them.  ``config_echo`` holds flattened ``key = value`` pairs,
    ``timings`` named wall-clock durations in seconds, ``samples`` pairs of
    (relative path, grayscale image in [0, 1]) to write as PGM.
    """

    experiment: str
    seed: int
    rows: list[dict] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)
    timings: list[tuple[str, float]] = field(default_factory=list)
    samples: list[tuple[str, np.ndarray]] = field(default_factory=list)
    started: str = ""
    finished: str = ""


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_bytes(rows: list[dict]) -> bytes:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row[c]) if c in row else "" for c in columns])
    return buf.getvalue().encode("utf-8")


def write_pgm(path, image: np.ndarray) -> None:
    """Write a [0, 1] grayscale image as binary PGM (maxval 255, rounding
    half up)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PGM needs a 2-D image, got shape {image.shape}")
    levels = np.clip(np.floor(image * 255.0 + 0.5), 0, 255).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + levels.tobytes())


def emit_report(report: Report, out_dir) -> list[Path]:
    """Write the report under ``out_dir`` (created if needed); returns the
    paths written, metrics first."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    metrics = out / "metrics.csv"
    metrics.write_bytes(_csv_bytes(report.rows))
    paths.append(metrics)

    lines = [
        f"experiment = {report.experiment}",
        f"seed = {report.seed}",
        f"started = {report.started}",
        f"finished = {report.finished}",
        f"rows = {len(report.rows)}",
    ]
    for name, seconds in report.timings:
        lines.append(f"timing.{name}_s = {seconds:.3f}")
    for key in sorted(report.config_echo):
        lines.append(f"config.{key} = {_format_cell(report.config_echo[key])}")
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths.append(manifest)

    for rel, image in report.samples:
        target = out / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(target, image)
        paths.append(target)
    return paths
