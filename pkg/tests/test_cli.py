import csv
import io
import json

import numpy as np
import pytest

from gaussfrac.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main, read_config, to_json, UsageError
from gaussfrac.gauss_core import make_grid
from gaussfrac.registry import corpus, make_function, parse_function


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- registry


@pytest.mark.parametrize("name", ["mode:1", "mode:2,1", "indicator:-0.5", "gauss-bump:1.5", "random:7"])
def test_registry_names(name):
    spec = parse_function(name)
    assert spec.name == name and spec.is_indicator == name.startswith("indicator")


@pytest.mark.parametrize("name", ["mode", "mode:-1", "indicator:x", "gauss-bump:0", "random:-2", "sine:1", "indicator:inf"])
def test_registry_rejects(name):
    with pytest.raises(ValueError):
        parse_function(name)


def test_registry_values():
    g = make_grid(2, 10)
    x = g.points()
    assert np.allclose(make_function("mode:1", g).values, x[..., 0], atol=1e-12)
    assert np.allclose(make_function("mode:1,1", g).values, x[..., 0] * x[..., 1], atol=1e-11)
    assert np.array_equal(make_function("indicator:0.2", g).values, (x[..., 0] < 0.2).astype(float))
    assert np.allclose(make_function("gauss-bump:2", g).values, np.exp(-np.sum(x * x, axis=-1)))
    a, b = make_function("random:3", g), make_function("random:3", g)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, make_function("random:4", g).values)
    with pytest.raises(ValueError):
        make_function("mode:1,1,1", g)


def test_corpus_reproducible():
    a, b = corpus(5, 20, 2, 12), corpus(5, 20, 2, 12)
    assert [n for n, _ in a] == [n for n, _ in b] and len(a) == 20
    assert all(np.array_equal(f.values, g.values) for (_, f), (_, g) in zip(a, b))
    labels = {n.split(":")[1].split("[")[0] for n, _ in a}
    assert {"band", "halfspace", "strip", "ball", "quadrant", "level-set"} <= labels


# ---------------------------------------------------------------- config


def test_read_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\ns = 0.3\n\ngrid=20  # trailing\nextension-dump = x\n")
    assert read_config(p) == {"s": "0.3", "grid": "20", "extension_dump": "x"}
    p.write_text("s 0.3\n")
    with pytest.raises(UsageError):
        read_config(p)


def test_config_then_flags(tmp_path, capsys):
    p = tmp_path / "run.cfg"
    p.write_text("s = 0.3\ngrid = 24\nfunction = mode:2\n")
    code, out, _ = _run(capsys, "seminorm", "--config", str(p))
    rep = json.loads(out)
    assert code == EXIT_OK and rep["s"] == 0.3 and rep["grid"] == [24] and rep["function"] == "mode:2"
    code, out, _ = _run(capsys, "seminorm", "--config", str(p), "--s", "0.5", "--grid", "32")
    rep = json.loads(out)
    assert rep["s"] == 0.5 and rep["grid"] == [32] and rep["function"] == "mode:2"


@pytest.mark.parametrize("text", ["bogus = 1\n", "s = abc\n", "iters = 3\n", "check = maybe\n"])
def test_bad_config_is_usage_error(tmp_path, capsys, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    code, out, err = _run(capsys, "seminorm", "--config", str(p))
    assert code == EXIT_USAGE and out == "" and "error" in err


# ---------------------------------------------------------------- exit codes


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nonsense"],
        ["seminorm", "--s", "1.2"],
        ["seminorm", "--s", "0"],
        ["seminorm", "--function", "wave:1"],
        ["seminorm", "--function", "mode:1,2"],
        ["seminorm", "--dim", "4"],
        ["seminorm", "--format", "xml"],
        ["seminorm", "--ygrid", "4"],
        ["seminorm", "--config", "/nonexistent/run.cfg"],
        ["isoscan", "--s", "0.5", "--mass", "0.3"],
        ["isoscan", "--mass", "1.5"],
        ["isoscan", "--dim", "1", "--mass", "0.3"],
        ["isoscan", "--mass", "0.3", "--families", "hexagon"],
        ["flow", "--directions", "diagonal"],
        ["allencahn", "--potential", "cubic"],
        ["seminorm", "--iters", "3"],
    ],
)
def test_usage_errors(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code == EXIT_USAGE and out == "" and "usage" in err


def test_seminorm_mode_ok(capsys):
    code, out, _ = _run(capsys, "seminorm", "--function", "mode:1", "--s", "0.5")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["passed"]
    assert rep["spectral"] == pytest.approx(1.0, rel=1e-12) and rep["extension"] == pytest.approx(1.0, rel=1e-3)
    assert list(rep)[:4] == ["command", "function", "s", "dim"]


def test_seminorm_indicator_routes(capsys):
    code, out, _ = _run(capsys, "seminorm", "--function", "indicator:0", "--s", "0.25")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["route_gap"] < 0.02


def test_route_violation_exits_one(capsys):
    # a two-cell y-grid cannot resolve the extension
    code, out, err = _run(capsys, "seminorm", "--ygrid", "8,1")
    assert code == EXIT_VIOLATION and not json.loads(out)["passed"] and "route gap" in err


def test_flow_outputs(tmp_path, capsys):
    code, out, _ = _run(capsys, "flow", "--seed", "3", "--iters", "4", "--format", "csv", "--out", str(tmp_path))
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["step", "direction", "l2_norm", "seminorm", "residual_1d"] and len(rows) == 6
    assert (tmp_path / "flow.csv").read_text() == out
    rep = json.loads((tmp_path / "flow.json").read_text())
    assert rep["violations"] == [] and rep["final_seminorm"] <= rep["initial_seminorm"]


def test_isoscan_and_extension_dump(tmp_path, capsys):
    code, out, _ = _run(capsys, "isoscan", "--mass", "0.3", "--families", "halfspace,strip,ball")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["passed"] and rep["rotation_spread"] < 1e-6
    assert {c["family"] for c in rep["candidates"]} == {"halfspace", "strip", "ball"}
    code, out, _ = _run(capsys, "extension-dump", "--function", "gauss-bump:1", "--out", str(tmp_path), "--check", "--format", "csv")
    assert code == EXIT_OK and out.splitlines()[0] == "node,y,value"
    rep = json.loads((tmp_path / "extension.json").read_text())
    assert rep["passed"] and rep["flux_error"] < 1e-2


def test_allencahn_one_dimensional(capsys):
    code, out, _ = _run(capsys, "allencahn", "--dim", "1", "--degree", "10", "--format", "json", "--check")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["converged_1d"] and "energy_nd" not in rep


# ---------------------------------------------------------------- determinism


@pytest.mark.parametrize("argv", [["flow", "--seed", "11", "--iters", "3"], ["seminorm", "--function", "random:2", "--dim", "2"]])
def test_reports_byte_identical(tmp_path, capsys, argv):
    texts = []
    for k in range(2):
        out_dir = tmp_path / f"run{k}"
        code, out, _ = _run(capsys, *argv, "--out", str(out_dir))
        texts.append((out, sorted((p.name, p.read_bytes()) for p in out_dir.iterdir())))
    assert texts[0] == texts[1]


def test_json_non_finite_and_order():
    text = to_json({"b": float("inf"), "a": np.float64(1.5), "c": np.arange(2)})
    assert text == '{\n  "b": "inf",\n  "a": 1.5,\n  "c": [\n    0,\n    1\n  ]\n}\n'
