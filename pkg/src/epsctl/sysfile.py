"""JSON system files.

A system file is a UTF-8 JSON object with a ``kind`` and row-major nested
arrays for each matrix::

    {"kind": "lti", "A": [[0.5]], "B": [[1]], "C": [[1]], "alpha": 0.5}

========================  ==================================
kind                      matrices
========================  ==================================
``lti``                   A, B, C, (D optional)
``state_feedback``        A, B, Bw, C, D
``filter``                A, B, C, D, Cz
``output_feedback``       A, B1, B2, C1, D1, C2, D2
========================  ==================================
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .errors import EpsCtlError, SchemaError
from .sysmodel import FilterPlant, LtiSystem, OutputFeedbackPlant, StateFeedbackPlant

FIELDS = {
    "lti": (LtiSystem, ("A", "B", "C"), ("D",)),
    "state_feedback": (StateFeedbackPlant, ("A", "B", "Bw", "C", "D"), ()),
    "filter": (FilterPlant, ("A", "B", "C", "D", "Cz"), ()),
    "output_feedback": (OutputFeedbackPlant, ("A", "B1", "B2", "C1", "D1", "C2", "D2"), ()),
}
KIND_OF = {cls: kind for kind, (cls, _, _) in FIELDS.items()}


@dataclass(frozen=True, eq=False)
class SystemFile:
    kind: str
    system: object
    alpha: Optional[float] = None


def _reject_constant(name):
    raise SchemaError(f"non-finite literal {name} is not allowed")


def _matrix(doc, name):
    value = doc[name]
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise SchemaError(f"{name}: expected a non-empty array of rows", field=name)
    width = len(value[0])
    if width == 0 or any(len(r) != width for r in value):
        raise SchemaError(f"{name}: rows must be non-empty and of equal length", field=name)
    for row in value:
        for x in row:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise SchemaError(f"{name}: entries must be numbers", field=name)
            if not math.isfinite(x):
                raise SchemaError(f"{name}: entries must be finite", field=name)
    return np.array(value, dtype=np.float64)


def parse_system(text) -> SystemFile:
    """Parse a system file from a string or bytes."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"system file is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("system file must be a JSON object")
    kind = doc.get("kind")
    if kind not in FIELDS:
        raise SchemaError(f"kind must be one of {sorted(FIELDS)}, got {kind!r}", field="kind")
    cls, required, optional = FIELDS[kind]
    mats = {}
    for name in required:
        if name not in doc:
            raise SchemaError(f"missing field {name} for kind {kind}", field=name)
        mats[name] = _matrix(doc, name)
    for name in optional:
        if name in doc:
            mats[name] = _matrix(doc, name)
    alpha = doc.get("alpha")
    if alpha is not None:
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not 0 < alpha < 1:
            raise SchemaError(f"alpha must be a number in (0, 1), got {alpha!r}", field="alpha")
        alpha = float(alpha)
    try:
        system = cls(**mats)
    except EpsCtlError as exc:
        raise SchemaError(str(exc)) from None
    return SystemFile(kind, system, alpha)


def load_system(path) -> tuple:
    """Read ``path``; returns ``(SystemFile, sha256 hex digest of the bytes)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_system(data), hashlib.sha256(data).hexdigest()


def system_to_dict(system, alpha=None) -> dict:
    try:
        kind = KIND_OF[type(system)]
    except KeyError:
        raise SchemaError(f"cannot serialize {type(system).__name__}") from None
    _, required, optional = FIELDS[kind]
    doc = {"kind": kind}
    for name in required + optional:
        doc[name] = np.asarray(getattr(system, name)).tolist()
    if alpha is not None:
        doc["alpha"] = float(alpha)
    return doc


def dump_system(system, alpha=None) -> str:
    """Serialize; floats use shortest round-trip repr so re-parsing is exact."""
    return json.dumps(system_to_dict(system, alpha), indent=2) + "\n"


def bundled_path(name):
    """Filesystem path of a file shipped in ``epsctl/data``."""
    return resources.files("epsctl") / "data" / name


def load_bundled(name) -> SystemFile:
    return parse_system(bundled_path(name).read_bytes())


def reference_table() -> dict:
    """Published output-feedback gains and norms for the bundled example plant."""
    return json.loads(bundled_path("table1_reference.json").read_text())
