import json

import numpy as np

from obstacle_vmo.artifacts import (
    Manifest, format_value, load_solution, read_csv, save_solution, sha256_of, write_csv,
)


def test_format_value():
    assert format_value(True) == "1"
    assert format_value(np.int64(3)) == "3"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("nan")) == "nan"
    assert float(format_value(np.pi)) == np.pi


def test_csv_round_trip(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 0.25], [2, 1.0 / 3.0]])
    header, rows = read_csv(p)
    assert header == ["a", "b"]
    assert float(rows[1][1]) == 1.0 / 3.0


def test_solution_round_trip(tmp_path, halfspace_solution):
    paths = save_solution(tmp_path / "sol", halfspace_solution)
    back = load_solution(tmp_path / "sol")
    assert np.array_equal(back.w.values, halfspace_solution.w.values)
    assert np.array_equal(back.contact.mask, halfspace_solution.contact.mask)
    assert np.array_equal(back.fb_cells.mask, halfspace_solution.fb_cells.mask)
    assert back.diagnostics["iterations"] == halfspace_solution.diagnostics["iterations"]
    assert all(p.exists() for p in paths)


def test_manifest_checksums(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["a"], [[1]])
    m = Manifest(tmp_path, "[grid]\n")
    m.add(p, p)
    m.assertions = {"ok": True}
    data = json.loads(m.write().read_text())
    assert data["files"] == [{"path": "x.csv", "sha256": sha256_of(p)}]
    assert data["config"] == "[grid]\n"
    assert data["assertions"] == {"ok": True}
