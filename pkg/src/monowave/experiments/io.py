"""CSV tables and the sidecar JSON manifest."""
import csv
import io
import json
import math
import platform
from pathlib import Path

import numpy as np
import scipy


def format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    if value is None:
        return ""
    return str(value)


class Table:
    """Rows with a fixed column order."""

    def __init__(self, name, columns):
        self.name = name
        self.columns = list(columns)
        self.rows = []

    def add(self, **row):
        missing = set(self.columns) - set(row)
        extra = set(row) - set(self.columns)
        if missing or extra:
            raise KeyError(f"{self.name}: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self.rows.append(row)

    def column(self, name):
        return [row[name] for row in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def write(self, directory):
        path = Path(directory) / f"{self.name}.csv"
        path.write_text(self.to_csv(), encoding="utf-8")
        return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_manifest(directory, name, config, tables, summary, wall_times):
    from .. import __version__

    manifest = {
        "experiment": name,
        "config": config.to_dict(),
        "seed": config.seed,
        "tables": [t.name + ".csv" for t in tables],
        "summary": _jsonable(summary),
        "wall_times_s": _jsonable(wall_times),
        "versions": {
            "monowave": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    path = Path(directory) / f"{name}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path
