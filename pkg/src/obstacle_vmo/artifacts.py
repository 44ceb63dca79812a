"""Artifact emission: fixed-format CSV, solution persistence, run manifest."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .complementarity import ObstacleSolution, free_boundary_cells
from .grid import CellSet, GridError, ScalarField, read_fields, write_fields


def format_value(v) -> str:
    """17 significant digits for floats so reruns compare byte for byte."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def save_solution(stem, sol: ObstacleSolution) -> list[Path]:
    """``stem.field`` holds w, active and contact channels; ``stem.json`` the diagnostics."""
    stem = Path(stem)
    field_path = stem.with_suffix(".field")
    write_fields(field_path, sol.grid, [sol.w.values, sol.active.mask.astype(float),
                                        sol.contact.mask.astype(float)])
    diag_path = stem.with_suffix(".json")
    diag_path.write_text(json.dumps(sol.diagnostics, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return [field_path, diag_path]


def load_solution(stem) -> ObstacleSolution:
    stem = Path(stem)
    grid, chans = read_fields(stem.with_suffix(".field"))
    if len(chans) != 3:
        raise GridError(f"{stem}: expected 3 channels, found {len(chans)}")
    w, act, con = chans
    active, contact = act > 0.5, con > 0.5
    diag = json.loads(stem.with_suffix(".json").read_text())
    return ObstacleSolution(ScalarField(grid, w), CellSet(grid, active), CellSet(grid, contact),
                            CellSet(grid, free_boundary_cells(active, contact)), diag)


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


class Manifest:
    """Records every emitted file with its checksum, stage timings and assertion outcomes."""

    def __init__(self, out_dir, config_text: str = ""):
        self.out_dir = Path(out_dir)
        self.config_text = config_text
        self.files: list[Path] = []
        self.timings: dict = {}
        self.assertions: dict = {}

    def add(self, *paths):
        for p in paths:
            p = Path(p)
            if p not in self.files:
                self.files.append(p)

    def as_dict(self) -> dict:
        return {
            "config": self.config_text,
            "files": [{"path": str(p.relative_to(self.out_dir)) if p.is_relative_to(self.out_dir) else str(p),
                       "sha256": sha256_of(p)} for p in self.files],
            "timings": self.timings,
            "assertions": self.assertions,
        }

    def write(self, name: str = "manifest.json") -> Path:
        path = self.out_dir / name
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)
