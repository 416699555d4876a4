import json
import math
import os

import numpy as np
import pandas as pd

CSV_FLOAT_FORMAT = "%.17g"


def _plain(value):
    """Numpy scalars become Python numbers; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_csv(table: pd.DataFrame, path: str) -> str:
    """
    Deterministic CSV: 17 significant digits, no index, '\\n' line endings.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    table.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(payload: dict, path: str) -> str:
    """Floats keep Python's shortest round-trip repr, so identical runs give identical bytes."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(payload), f, indent=2, allow_nan=False, ensure_ascii=False)
        f.write("\n")
    return path
