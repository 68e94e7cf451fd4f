import json
import subprocess
import sys

import numpy as np
import pytest

from projcells import load_example
from projcells.cli import dumps, main
from projcells.decomp import CellDecomposition

from test_deform import fixed_point_free


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    torus, fig8 = load_example("modular_torus"), load_example("figure_eight")
    (d / "torus.json").write_text(json.dumps(torus.to_json()))
    (d / "fig8.json").write_text(json.dumps(fig8.to_json()))
    (d / "fig8_bad.json").write_text(json.dumps(fixed_point_free(fig8).to_json()))
    (d / "orthant.json").write_text(json.dumps({"variant": "orthant", "dim": 3}))
    (d / "lorentz.json").write_text(json.dumps({"variant": "lorentz", "dim": 3}))
    (d / "ident.json").write_text(json.dumps({"generators": {"a": np.eye(3).tolist()}, "cusps": []}))
    assert main(["decompose", "--rep", str(d / "torus.json"), "--out", str(d / "torus_dec.json"),
                 "--svg", str(d / "torus.svg")]) == 0
    assert main(["decompose", "--rep", str(d / "fig8.json"), "--out", str(d / "fig8_dec.json")]) == 0
    return d


def test_decompose_torus(work):
    out = json.loads((work / "torus_dec.json").read_text())
    assert out["quotient_counts"] == {"0": 1, "1": 3, "2": 2}
    assert out["certified"] is True
    svg = (work / "torus.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polygon") >= 2 and "<circle" in svg


def test_decompose_fig8(work):
    out = json.loads((work / "fig8_dec.json").read_text())
    assert out["quotient_counts"]["3"] == 2


def test_decompose_shallow(work, tmp_path):
    code = main(["decompose", "--rep", str(work / "torus.json"), "--word-length", "1", "--out", str(tmp_path / "o.json")])
    assert code in (1, 2)
    if code == 2:
        out = json.loads((tmp_path / "o.json").read_text())
        assert out["provisional"] and out["certified"] is False


def test_decompose_errors(work, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"generators": {"a": [[1, 0], [0, 1]]},\n  oops}')
    assert main(["decompose", "--rep", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["decompose", "--rep", str(work / "torus.json"), "--word-length", "17"]) == 1
    assert main(["decompose", "--rep", str(work / "torus.json"), "--tol-geom", "-1"]) == 1
    assert main(["decompose", "--rep", str(tmp_path / "missing.json")]) == 1


def test_deform_commands(work, tmp_path, capsys):
    out = tmp_path / "d.json"
    assert main(["deform", "--base", str(work / "torus_dec.json"), "--rep", str(work / "torus.json"), "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["valid"] and res["max_pairing_residual"] < 1e-9
    code = main(["deform", "--base", str(work / "fig8_dec.json"), "--rep", str(work / "fig8_bad.json"), "--out", str(out)])
    assert code == 2
    assert json.loads(out.read_text())["hypothesis_violated"] == "c0"
    assert main(["deform", "--base", str(tmp_path / "nope.json"), "--rep", str(work / "torus.json")]) == 1


def test_vinberg(work, capsys):
    code = main(["vinberg", "--cone", str(work / "orthant.json"), "--point", "1,1,1", "--point", "1,0,1",
                 "--point", "8,1,1", "--phi", "1,0,0"])
    assert code == 0
    rows = [r.split("\t") for r in capsys.readouterr().out.strip().splitlines()]
    assert rows[0][:4] == ["x", "f", "lift", "f(2x)/f(x)"]
    assert float(rows[1][1]) == pytest.approx(1.0)
    assert rows[2][1].startswith("ERROR")
    assert [float(v) for v in rows[3][2].split(",")] == pytest.approx([4, 0.5, 0.5])
    assert float(rows[3][3]) == pytest.approx(2.0**-3, rel=1e-12)
    assert float(rows[3][4]) == pytest.approx(4.0)


def test_orbit(work, tmp_path, torus_rep):
    out = tmp_path / "o.json"
    assert main(["orbit", "--rep", str(work / "torus.json"), "--word-length", "5", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["min_pairwise_distance"] > 0 and len(d["points"]) == len(d["words"]) > 1
    w, v = np.linalg.eig(torus_rep.word_matrix("a"))
    seed = np.real(v[:, np.argmax(np.abs(w))])
    seed *= np.sign(seed[2])
    arg = "--seed=" + ",".join(repr(float(c)) for c in seed)
    assert main(["orbit", "--rep", str(work / "torus.json"), arg, "--word-length", "8", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["min_norm_ratio"] < 0.05
    assert main(["orbit", "--rep", str(work / "ident.json"), "--seed=0,0,1", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["points"]) == 1
    assert main(["orbit", "--rep", str(work / "torus.json"), "--seed=2,0,1"]) == 1


def test_render(work, tmp_path):
    out = tmp_path / "r.svg"
    assert main(["render", "--decomp", str(work / "torus_dec.json"), "--svg", str(out)]) == 0
    assert out.read_text().count("<polygon") == len(
        [c for c in json.loads((work / "torus_dec.json").read_text())["cells"] if c["dim"] == 2])
    assert main(["render", "--decomp", str(work / "fig8_dec.json"), "--svg", str(out)]) == 1


def test_determinism(work, tmp_path):
    for k in range(2):
        assert main(["decompose", "--rep", str(work / "torus.json"), "--out", str(tmp_path / f"{k}.json")]) == 0
    assert (tmp_path / "0.json").read_bytes() == (tmp_path / "1.json").read_bytes()
    assert (tmp_path / "0.json").read_bytes() == (work / "torus_dec.json").read_bytes()


def test_roundtrip(work):
    d = json.loads((work / "torus_dec.json").read_text())
    d.pop("certified")
    assert CellDecomposition.from_json(d).to_json() == d


def test_dumps_format():
    assert dumps({"a": 0.1, "b": [1, float("nan")], "c": np.float64(2.0)}) == '{"a": 0.10000000000000001, "b": [1, null], "c": 2.0}\n'
    assert json.loads(dumps({"x": 1 / 3}))["x"] == 1 / 3


def test_module_entry_point(work):
    r = subprocess.run([sys.executable, "-m", "projcells", "vinberg", "--cone", str(work / "lorentz.json"),
                        "--point", "0,0,1"], capture_output=True, text=True)
    assert r.returncode == 0
    assert float(r.stdout.splitlines()[1].split("\t")[1]) == pytest.approx(2 * np.pi)
