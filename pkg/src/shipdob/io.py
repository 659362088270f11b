"""Run outputs: trace.csv, metrics.json and manifest.json.

Floats are written with ``repr``, the shortest decimal string that parses
back to the same IEEE-754 double, so :func:`read_trace` recovers the
in-memory trace exactly. Every file is written to a temporary name and
renamed into place, so a directory never holds a half-written output.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .sim import RunMetrics, ScenarioConfig, Trace, relative_error

TRACE_COLUMNS = (
    "t",
    "u", "v", "r",
    "u_m", "v_m", "r_m",
    "u_hat", "v_hat", "r_hat",
    "x", "y", "psi",
    "tau_d1", "tau_d2", "tau_d3",
    "tau_hat1", "tau_hat2", "tau_hat3",
    "z1", "z2", "z3",
    "zr1", "zr2", "zr3",
    "p_u", "p_v", "p_r",
)
_BLOCKS = ("nu", "nu_meas", "nu_hat", "eta", "tau_d", "tau_hat", "z")

TRACE_FILE = "trace.csv"
METRICS_FILE = "metrics.json"
MANIFEST_FILE = "manifest.json"
MANIFEST_FORMAT = "shipdob-run-manifest/1"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_table(trace: Trace, zr: np.ndarray = None) -> np.ndarray:
    """All CSV columns as one ``(n, 28)`` array."""
    if zr is None:
        zr = relative_error(trace)
    cols = [trace.t[:, None]] + [getattr(trace, b) for b in _BLOCKS] + [zr, trace.p_diag]
    return np.hstack(cols) if len(trace) else np.zeros((0, len(TRACE_COLUMNS)))


def format_trace(trace: Trace, zr: np.ndarray = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in trace_table(trace, zr).tolist():
        writer.writerow([repr(x) for x in row])
    return buf.getvalue()


def read_trace(path) -> tuple[Trace, np.ndarray]:
    """Parse a trace.csv back into a Trace and its z_r columns."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise ValueError(f"{path}: unexpected header")
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    data = data.reshape(len(rows) - 1, len(TRACE_COLUMNS))
    blocks = [data[:, 1 + 3 * i: 4 + 3 * i] for i in range(len(_BLOCKS))]
    zr = data[:, 22:25]
    p_diag = data[:, 25:28]
    trace = Trace(data[:, 0].copy(), *(b.copy() for b in blocks), p_diag.copy())
    return trace, zr.copy()


def metrics_document(metrics: RunMetrics) -> dict:
    """metrics.json content. Wall-clock time is kept out so reruns compare equal."""
    doc = metrics.summary()
    doc.pop("runtime_s", None)
    return doc


def manifest_document(
    cfg: ScenarioConfig,
    runtime_s: float,
    files: dict,
    source: dict = None,
) -> dict:
    from .config import config_to_dict

    return {
        "format": MANIFEST_FORMAT,
        "software_version": __version__,
        "config": config_to_dict(cfg),
        "seeds": {"plant": cfg.seeds[0], "measurement": cfg.seeds[1], "disturbance": cfg.seeds[2]},
        "runtime_s": runtime_s,
        "files": files,
        "source": source,
    }


def emit_trace(
    trace: Trace,
    metrics: RunMetrics,
    out_dir,
    cfg: ScenarioConfig,
    source: dict = None,
) -> dict:
    """Write trace.csv, metrics.json and manifest.json into ``out_dir``.

    The manifest is written last, so its presence marks a complete output set.
    Returns the mapping of output kinds to file paths.
    """
    out = Path(out_dir)
    files = {"trace": str(out / TRACE_FILE), "metrics": str(out / METRICS_FILE)}
    _atomic_write(out / TRACE_FILE, format_trace(trace, metrics.zr))
    _atomic_write(out / METRICS_FILE, json.dumps(metrics_document(metrics), indent=2) + "\n")
    manifest = manifest_document(cfg, metrics.runtime_s, files, source)
    _atomic_write(out / MANIFEST_FILE, json.dumps(manifest, indent=2) + "\n")
    return {**files, "manifest": str(out / MANIFEST_FILE)}


def is_manifest(document) -> bool:
    return isinstance(document, dict) and document.get("format") == MANIFEST_FORMAT
