"""One JSON serializer for every surface.

The CLI and the HTTP service must emit byte-identical payloads for the
same request, so both funnel through dumps() here.
"""

from __future__ import annotations

import json

import numpy as np


def _default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def dumps(payload) -> str:
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False, default=_default)
