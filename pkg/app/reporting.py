"""Canonical JSON and CSV rendering for reports."""

import json
import math
from pathlib import Path
from typing import Any, TextIO, Union

import numpy as np
import pandas as pd

CSV_FLOAT_FORMAT = "%.17g"


def plain(value: Any) -> Any:
    """Convert numpy scalars/arrays to built-ins; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def canonical_json(payload: Any) -> str:
    """Sorted keys, two-space indent, shortest round-trip floats."""
    return json.dumps(plain(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def frame_to_csv(
    frame: pd.DataFrame, target: Union[str, Path, TextIO, None] = None
) -> str:
    """Render a frame as CSV with 17 significant digits; write to `target` if given."""
    text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    if target is not None:
        if isinstance(target, (str, Path)):
            Path(target).write_text(text, encoding="utf-8")
        else:
            target.write(text)
    return text
