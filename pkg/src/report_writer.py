"""
Artifact writer: CSV/JSON files in the output directory and named sheets in one Excel workbook
"""
import json
import math
import os
import threading

import numpy as np
import pandas as pd

from src.exceptions import DataError
from src.logger_utils import ColoredLogger as log

INVALID_SHEET_CHARS = ['\\', '/', '*', '?', ':', '[', ']']


def sheet_name(name):
    """Sanitized for Excel and limited to 31 chars"""
    name = str(name) or "Sheet"
    for char in INVALID_SHEET_CHARS:
        name = name.replace(char, '_')
    return name[:31]


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, pd.Timestamp):
        return value.strftime("%Y-%m-%d")
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _finite_json(value):
    """inf/nan become strings so the file stays valid JSON"""
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _finite_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_json(v) for v in value]
    return value


class ArtifactWriter:
    """Write run artifacts - Thread-safe"""

    _lock = threading.Lock()  # Class-level lock for file access

    def __init__(self, out_dir, report_file="report.xlsx"):
        self.out_dir = out_dir
        self.report_file = os.path.join(out_dir, report_file)
        self.written = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def exists(self, name):
        return os.path.exists(self.path(name))

    def record(self, name):
        if name not in self.written:
            self.written.append(name)

    def take_written(self):
        """Names written since the last call"""
        names, self.written = self.written, []
        return names

    def write_csv(self, name, frame: pd.DataFrame, index=False):
        with ArtifactWriter._lock:
            frame.to_csv(self.path(name), index=index, float_format="%.12g")
        self.record(name)
        return self.path(name)

    def write_json(self, name, payload):
        with ArtifactWriter._lock:
            with open(self.path(name), 'w', encoding='utf-8') as f:
                json.dump(_finite_json(payload), f, indent=2, sort_keys=True, default=_json_default)
        self.record(name)
        return self.path(name)

    def read_csv(self, name, **kwargs):
        if not self.exists(name):
            raise DataError(f"missing artifact {self.path(name)}; run the upstream stage first")
        return pd.read_csv(self.path(name), **kwargs)

    def read_json(self, name):
        if not self.exists(name):
            raise DataError(f"missing artifact {self.path(name)}; run the upstream stage first")
        with open(self.path(name), 'r', encoding='utf-8') as f:
            return json.load(f)

    def write_sheets(self, sheets):
        """Replace the named sheets in the workbook, keeping the others"""
        with ArtifactWriter._lock:
            if os.path.exists(self.report_file):
                all_sheets = pd.read_excel(self.report_file, sheet_name=None)
            else:
                all_sheets = {}
            for name, frame in sheets.items():
                all_sheets[sheet_name(name)] = frame
            with pd.ExcelWriter(self.report_file, engine='openpyxl') as writer:
                for sname, sdata in all_sheets.items():
                    sdata.to_excel(writer, sheet_name=sname, index=False)
        log.log("report", f"Wrote {len(sheets)} sheet(s) to {self.report_file}", 'SUCCESS')
        self.record(os.path.basename(self.report_file))
        return self.report_file
