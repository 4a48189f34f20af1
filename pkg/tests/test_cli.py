from __future__ import annotations

import json
from pathlib import Path

import pytest

from sand.cli import (
    EXIT_CONDITION,
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_PROPERTY,
    EXIT_USAGE,
    ConfigError,
    main,
    validate_config,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def cfg(name):
    return str(CONFIGS / name)


@pytest.mark.parametrize(
    "cmd,name,code",
    [
        ("analyze", "grid_two_faults.json", EXIT_CONDITION),
        ("analyze", "grid_sparse.json", EXIT_CONDITION),
        ("simulate", "random_no_fault.json", EXIT_OK),
        ("simulate", "grid_fabricate.json", EXIT_OK),
        ("simulate", "discredit.json", EXIT_PROPERTY),
        ("simulate", "flood.json", EXIT_INCONCLUSIVE),
    ],
)
def test_exit_codes(tmp_path, cmd, name, code):
    assert main([cmd, "--config", cfg(name), "--out", str(tmp_path), "--resolution", "0.05"]) == code


def test_analyze_report(tmp_path):
    main(["analyze", "--config", cfg("grid_two_faults.json"), "--out", str(tmp_path), "--resolution", "0.05", "--svg"])
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["range_condition_ok"] is False and not rep["snare_free"]
    assert rep["foci"][0]["label"] == "u5" and rep["foci"][0]["perfect"] > 0
    assert (tmp_path / "layout.svg").read_text().startswith("<svg")


def test_analyze_clean_layout(tmp_path):
    c = {"layout": {"grid": {"rows": 2, "cols": 2, "s": 1.0}}, "radio": {"r_t": 3.0, "d_n": 1.5}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c))
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK


@pytest.mark.parametrize(
    "bad",
    [
        {"radio": {"r_t": 1.0}},
        {"layout": {"grid": {"rows": 2, "cols": 2}}, "bogus": 1},
        {"layout": {"grid": {"rows": -1, "cols": 2}}},
        {"layout": {"grid": {"rows": 2, "cols": 2}}, "detector": {"kind": "psychic"}},
        {"layout": {"grid": {"rows": 2, "cols": 2}}, "scheduler": {"policy": "chaos"}},
    ],
)
def test_schema_rejects(bad):
    with pytest.raises(ConfigError):
        validate_config(bad)


def test_bad_config_exit(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["generate", "random", "--n", "12", "--area", "3", "--seed", "4", "--faulty", "u2", "--out", str(out)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert sum(n["role"] == "faulty" for n in doc["nodes"]) == 1


def test_generated_layout_feeds_simulate(tmp_path):
    lay = tmp_path / "grid.json"
    main(["generate", "grid", "--rows", "2", "--cols", "3", "--r-t", "2", "--d-n", "1.2", "--out", str(lay)])
    c = tmp_path / "run.json"
    c.write_text(json.dumps({"layout": {"file": "grid.json"}, "radio": {"r_t": 2.0, "d_n": 1.2}, "detector": {"kind": "topology", "s": 1.0}}))
    assert main(["simulate", "--config", str(c), "--out", str(tmp_path / "o")]) == EXIT_OK
    res = json.loads((tmp_path / "o" / "result.json").read_text())
    assert res["quiesced"] and res["verdicts"][0]["variant"] == "SNDP"
