"""JSON report envelope shared by every diagnostic."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def digest(inputs) -> str:
    return hashlib.sha256(canonical_json(inputs).encode()).hexdigest()


def make_report(operation: str, inputs, estimates, ci=None, bias_bound=None, verdict=None, **extra) -> dict:
    rep = {
        "operation": operation,
        "inputs_digest": digest(inputs),
        "estimates": estimates,
        "ci": ci,
        "bias_bound": bias_bound,
        "verdict": verdict,
    }
    rep.update(extra)
    return _jsonable(rep)


def dumps_report(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
