"""Artifact writers: CSV with 17 significant digits, JSON in fixed key order."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError

FLOAT_FMT = "%.17g"


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def scenario_hash(canonical: dict) -> str:
    """sha256 (first 16 hex digits) of the canonical scenario."""
    return hashlib.sha256(canonical_json(canonical).encode()).hexdigest()[:16]


def _plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def write_json(path, obj) -> Path:
    """Write `obj` keeping its insertion order (callers build dicts in a fixed order)."""
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n",
                    encoding="utf-8", newline="\n")
    return path


def write_csv(path, columns: dict, scenario: str, comments: tuple = ()) -> Path:
    """Columns of equal length, '%.17g', LF endings, '# scenario <hash>' first."""
    path = Path(path)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float).ravel() for n in names])
    head = [f"# scenario {scenario}"] + [f"# {c}" for c in comments] + [",".join(names)]
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(head) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",", newline="\n")
    return path


def read_csv(path) -> tuple:
    """Inverse of `write_csv`: (scenario hash or None, {name: array})."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"field file not found: {path}")
    scen, names, nskip = None, None, 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            nskip += 1
            s = line.strip()
            if s.startswith("#"):
                if s.startswith("# scenario "):
                    scen = s.split()[2]
                continue
            names = [c.strip() for c in s.split(",")]
            break
    if not names:
        raise ConfigError(f"{path}: missing header row")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=nskip, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.shape[1] != len(names):
        raise ConfigError(f"{path}: {data.shape[1]} columns but {len(names)} names")
    return scen, {n: data[:, i] for i, n in enumerate(names)}
