"""
Compact binary event logs.

Each event is a fixed-width little-endian record

    f8 time | u1 tag | d x f8 displacement of X | d x f8 displacement of Y

(9 + 16 d bytes, no padding).  Marginal paths use tag 255 and a zero Y
displacement.  A JSON sidecar next to the ``.bin`` file carries the
dimension, record count, starting points, coupling summary and the config
hash, so a log can be replayed without the producing configuration.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .paths import CoupledPath, MarginalPath

__all__ = ["MARGINAL_TAG", "record_dtype", "write_event_log", "read_event_log"]

MARGINAL_TAG = 255
FORMAT = "stablelike-eventlog-1"


def record_dtype(d):
    return np.dtype([("t", "<f8"), ("tag", "u1"), ("ux", "<f8", (d,)), ("uy", "<f8", (d,))])


def _json_float(v):
    return None if not math.isfinite(v) else float(v)


def write_event_log(path, p, config_hash="", version=""):
    """Write ``p`` (MarginalPath or CoupledPath) to ``path`` (.bin) plus ``path``.json.

    :returns: (binary path, sidecar path)
    """
    path = Path(path)
    d = p.x0.size
    rec = np.zeros(p.times.size, dtype=record_dtype(d))
    rec["t"] = p.times
    meta = {"format": FORMAT, "d": d, "records": int(p.times.size), "record_bytes":
            rec.dtype.itemsize, "config_hash": config_hash, "version": version,
            "t_max": float(p.t_max), "x0": p.x0.tolist()}
    if isinstance(p, CoupledPath):
        rec["tag"] = p.tags
        rec["ux"] = p.ux
        rec["uy"] = p.uy
        meta.update(kind="coupled", y0=p.y0.tolist(), T=_json_float(p.T), eta=p.eta,
                    S={repr(e): _json_float(s) for e, s in p.S.items()},
                    drift_x=p.drift_x.tolist(), drift_y=p.drift_y.tolist())
    elif isinstance(p, MarginalPath):
        rec["tag"] = MARGINAL_TAG
        rec["ux"] = p.jumps
        meta.update(kind="marginal", drift=p.drift_total.tolist())
    else:
        raise TypeError("expected a MarginalPath or CoupledPath")
    path.parent.mkdir(parents=True, exist_ok=True)
    rec.tofile(path)
    side = path.with_suffix(path.suffix + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def read_event_log(path):
    """Read a log written by :func:`write_event_log`; returns (records, metadata)."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    if meta.get("format") != FORMAT:
        raise ValueError(f"{path}: unknown event log format {meta.get('format')!r}")
    rec = np.fromfile(path, dtype=record_dtype(meta["d"]))
    if rec.size != meta["records"]:
        raise ValueError(f"{path}: expected {meta['records']} records, found {rec.size}")
    return rec, meta
