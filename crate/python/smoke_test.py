"""Smoke test for the mtms extension module.

Build and install first:

    pip install --no-build-isolation ./crates/py
"""

import csv
import io
import math

import mtms


def main():
    rows = [mtms.run(devices=120, variant=v, malicious_fraction=0.4, seed=3) for v in ("d2d", "std2d")]
    d2d, std2d = rows
    assert d2d["variant"] == "d2d" and std2d["variant"] == "std2d"
    assert 0.0 <= d2d["wasted_capacity_pct"] <= 100.0
    assert d2d["relay_sec_pct"] == 0.0
    again = mtms.run(devices=120, variant="std2d", malicious_fraction=0.4, seed=3)
    assert again == std2d, "same seed must reproduce the row"

    try:
        mtms.validate_config("malicious_fraction = 1.5\n")
    except ValueError as e:
        assert "malicious_fraction" in str(e)
    else:
        raise AssertionError("bad fraction accepted")

    toml = mtms.default_config()
    assert len(mtms.validate_config(toml)) == 16

    grid = (
        "devices = 60\n[sweep]\nvariants = [\"d2d\", \"std2d\"]\n"
        "malicious_fractions = [0.0, 0.3]\nfile_bits = [50000]\nseeds = [1, 2]\n"
    )
    table = mtms.sweep(grid)
    assert len(table) == 8
    text = mtms.sweep_csv(grid, parallel=False)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0].keys()) == list(mtms.RESULT_COLUMNS)
    assert len(parsed) == 8
    for row in table:
        k = row["mean_noncorrupted_kbits"]
        assert math.isnan(k) or 0.0 <= k <= 50.0

    print("smoke test ok:", len(table), "sweep rows,", f"d2d waste {d2d['wasted_capacity_pct']:.1f}%")


if __name__ == "__main__":
    main()
