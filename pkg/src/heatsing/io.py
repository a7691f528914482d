"""Artifact writers: atomic files, deterministic CSV, versioned JSON manifests."""

from __future__ import annotations

import json
import math
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np

OUTPUT_ENV = "HEATSING_OUTPUT"
MANIFEST_SCHEMA = "heatsing.manifest/1"


def output_root(override: str | None = None) -> Path:
    """Output directory: explicit override, else $HEATSING_OUTPUT, else ./heatsing-out."""
    root = override or os.environ.get(OUTPUT_ENV) or "heatsing-out"
    return Path(root)


def atomic_write(path: str | Path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def jsonable(obj):
    """Recursively convert numpy containers and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def fmt(x: float) -> str:
    """Round-trip float formatting used in every CSV."""
    return f"{float(x):.17g}"


def csv_text(header: tuple, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def solution_csv(solution) -> str:
    """Snapshots as long-format rows (t, r, u)."""
    r = solution.r
    rows = ((t, ri, ui) for t, u in zip(solution.times, solution.snapshots) for ri, ui in zip(r, u))
    return csv_text(("t", "r", "u"), rows)


def versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {
        "heatsing": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "platform": platform.platform(),
    }


def manifest(command: str, config: dict, outputs: list, wall_time: float, status: str, extra: dict | None = None) -> dict:
    """Run manifest. Timing lives here only, never in data files."""
    out = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config": config,
        "outputs": sorted(str(p) for p in outputs),
        "versions": versions(),
        "wall_time_s": wall_time,
        "status": status,
    }
    if extra:
        out.update(extra)
    return out
