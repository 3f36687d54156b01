"""JSON reports with an embedded run manifest.

Reports contain only deterministic content so that identical manifests
give byte-identical files. Wall-clock timings go to a sidecar
``<name>.timings.json`` next to the report.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__

OUT_ENV = "DKGLAB_OUT"
DEFAULT_OUT = "dkglab-out"


def output_dir(flag: str | None) -> Path:
    """``--out`` if given, else ``$DKGLAB_OUT``, else ``./dkglab-out``."""
    return Path(flag or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def manifest(command: str, config: dict, seed: int, inputs=(), outputs=()) -> dict:
    return {
        "command": command,
        "config": dict(sorted(config.items())),
        "seed": seed,
        "version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(path, body: dict, run_manifest: dict, timings: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps({"manifest": run_manifest, "report": body}))
    if timings is not None:
        path.with_name(path.stem + ".timings.json").write_text(dumps(timings))
    return path
