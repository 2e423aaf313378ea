"""Flat-file outputs: CSV tables and JSON run records."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np

from .. import __version__
from ..reflection import ReflectionSpectrum
from .sweep import SweepResult, SweepSpec, _fmt, run_sweep

SPECTRUM_COLUMNS = ("omega", "re_R", "im_R", "abs_R", "arg_R")


def spectrum_csv_text(spec: ReflectionSpectrum) -> str:
    lines = [",".join(SPECTRUM_COLUMNS)]
    for w, r in zip(spec.omega, spec.values):
        lines.append(",".join(_fmt(v) for v in (w, r.real, r.imag, abs(r), np.angle(r))))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else (str(v) if math.isinf(v) else v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_text(text: str, path=None) -> None:
    if path is None:
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")


def write_json(obj, path=None) -> None:
    write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", path)


def write_sweep(result: SweepResult, path) -> Path:
    """CSV table at ``path`` plus the JSON run record beside it."""
    Path(path).write_text(result.csv_text(), encoding="utf-8")
    side = sidecar_path(path)
    write_json(result.run_record(), side)
    return side


def load_run_record(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def rerun(record: dict, threads: int = 1) -> SweepResult:
    """Repeat a sweep from the configuration embedded in its run record."""
    if record.get("code_version") != __version__:
        logging.getLogger(__name__).warning(
            "record written by version %s, running %s", record.get("code_version"), __version__
        )
    return run_sweep(SweepSpec.from_config(record["config"]), threads=threads)
