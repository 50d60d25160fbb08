"""
scripts/outputs.py — Result Files
=================================
Every result is a CSV with a header row and a sibling `<name>.meta.json`
holding the run timestamp and provenance. Timestamps never go inside the
data file, so reruns of the same scenario produce byte-identical CSVs.

Writes go to a temporary file in the target directory and are moved into
place with os.replace, so a crashed run never leaves a half-written CSV.
"""

import json
import os
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg


def serialize_results(obj):
    """Recursively convert numpy types to Python types for JSON serialization."""
    if isinstance(obj, dict):
        return {str(k): serialize_results(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [serialize_results(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return serialize_results(obj.tolist())
    return obj


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_table(df: pd.DataFrame, out_dir: str, filename: str, meta: dict | None = None) -> str:
    """
    Write df as CSV (17 significant digits, no index) plus its metadata file.

    Returns
    -------
    str — path of the CSV
    """
    path = os.path.join(out_dir, filename)
    _atomic_write(path, df.to_csv(index=False, float_format=cfg.CSV_FLOAT_FORMAT, lineterminator="\n"))
    info = {
        "file":      filename,
        "rows":      int(len(df)),
        "columns":   list(df.columns),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **(meta or {}),
    }
    _atomic_write(path + cfg.METADATA_SUFFIX, json.dumps(serialize_results(info), indent=2) + "\n")
    return path
