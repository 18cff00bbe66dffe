"""Canonical serialization.

One text form per value: JSON with lexicographically sorted map keys, no
insignificant whitespace, UTF-8, no NaN/Infinity. Equal values serialize
to equal bytes, which is what snapshot comparison and the log format
rely on.
"""

from __future__ import annotations

import json
from typing import Any


def dumps(value: Any) -> str:
    return json.dumps(
        value,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def loads(text: str) -> Any:
    return json.loads(text)
