"""Deterministic JSON/CSV output with a schema version and separate run metadata."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
import platform

import numpy as np

from .errors import MissingStageOutput

SCHEMA_VERSION = "1.0"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, kind, payload):
    """Write ``payload`` under a schema header; identical inputs give identical bytes."""
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, **payload}
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dumps(doc))
    return doc


def read_json(path, stage=None):
    if not os.path.exists(path):
        raise MissingStageOutput(f"{path} not found" + (f"; run '{stage}' first" if stage else ""))
    with open(path) as fh:
        return json.load(fh)


def write_metadata(out_dir, stage, extra=None):
    """Timestamps and environment go here, never into the stage outputs."""
    from . import __version__

    path = os.path.join(out_dir, "metadata.json")
    meta = {}
    if os.path.exists(path):
        with open(path) as fh:
            meta = json.load(fh)
    meta["schema_version"] = SCHEMA_VERSION
    meta.setdefault("stages", {})[stage] = {
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        **(_clean(extra) if extra else {}),
    }
    with open(path, "w") as fh:
        fh.write(dumps(meta))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
