"""
Output formatting shared by reports, trajectories and sweeps.

Floats are written with 17 significant digits so every value survives a
text round trip bit for bit. Non-finite values have no JSON form and are
written as null.
"""
import json
import math
import re
from enum import Enum
from typing import Any

import numpy as np


def format_float(value: float) -> str:
    """17-significant-digit text form of a float ('' for None)."""
    if value is None:
        return ""
    return format(float(value), ".17g")


def to_jsonable(value: Any) -> Any:
    """
    Convert a report structure to plain JSON types.

    Args:
        value: Nested dicts/lists/tuples of numbers, numpy scalars/arrays, enums
            or objects exposing to_dict()

    Returns:
        Structure accepted by json.dumps with non-finite floats replaced by None
    """
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


# Finite floats travel through json as tagged strings and are unquoted afterwards
_FLOAT_TAG = "\x1ffloat:"
_TAGGED_FLOAT = re.compile(r'"\\u001ffloat:([^"]+)"')


def _tag_floats(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _tag_floats(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_tag_floats(v) for v in value]
    if isinstance(value, float):
        text = format_float(value)
        return _FLOAT_TAG + (text if any(c in text for c in ".e") else text + ".0")
    return value


def dumps(value: Any) -> str:
    """Deterministic JSON text of a report (sorted keys, 2-space indent, 17-digit floats)."""
    text = json.dumps(_tag_floats(to_jsonable(value)), indent=2, sort_keys=True, allow_nan=False)
    return _TAGGED_FLOAT.sub(r"\1", text)
