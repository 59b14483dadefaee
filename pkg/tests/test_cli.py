import csv
import io
import json
import math

import pytest

from kleinz.cli import main
from kleinz.graph import lattice, save_graph


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


@pytest.mark.parametrize("name", ["square_2x1", "square_1x2", "hexagonal", "triangular"])
def test_verify_bundled(capsys, name):
    code, out, _ = run(capsys, "verify", name)
    assert code == 0 and json.loads(out)["ok"]


def test_verify_ising(capsys):
    code, out, _ = run(capsys, "verify", "ising_square", "--ising", "--beta", "0.5")
    assert code == 0, out


def test_verify_rejects_bad_parity(capsys, tmp_path):
    path = tmp_path / "bad.json"
    save_graph(lattice("square_2x1"), path)
    data = json.loads(path.read_text())
    data["edges"][2]["a"] = 1
    path.write_text(json.dumps(data))
    code, out, _ = run(capsys, "verify", str(path))
    assert code == 1
    assert not json.loads(out)["ok"]


def test_z_methods_agree(capsys):
    for method in ("product", "pfaffian", "brute"):
        d = run_json(capsys, "z", "square_2x1", "--m", "2", "--n", "1", "--method", method)
        assert d["Z"] == pytest.approx(10.0, rel=1e-9)


def test_z_even_n_refused(capsys):
    code, _, err = run(capsys, "z", "square_2x1", "--m", "2", "--n", "2")
    assert code == 2 and "torus tooling" in err


def test_unknown_graph(capsys):
    code, _, err = run(capsys, "z", "no_such_lattice")
    assert code == 2 and "no_such_lattice" in err


def test_weights_by_label(capsys):
    d = run_json(capsys, "z", "square_2x1", "--weights", "x1=2,x2=2,y1=1,y2=1", "--method", "brute")
    plain = run_json(capsys, "z", "square_2x1", "--method", "brute")
    assert d["Z"] > plain["Z"]


def test_f0_square(capsys):
    d = run_json(capsys, "f0", "square_2x1")
    assert d["f0"] == pytest.approx(4 * 0.915965594177219 / math.pi, abs=1e-6)


def test_fsc_triangular(capsys):
    d = run_json(capsys, "fsc", "triangular", "--m", "5", "--n", "7")
    assert d["fsc"] == pytest.approx(math.log(2), abs=1e-9)


def test_fsc_aspect(capsys):
    d = run_json(capsys, "fsc", "hexagonal", "--m", "3", "--aspect", "0.6")
    assert d["taus"][0] == pytest.approx(0.6 * math.sqrt(3) / 3)


def test_ising_critical(capsys):
    d = run_json(capsys, "ising", "ising_square", "--critical", "--m", "4", "--n", "9")
    assert d["beta_c"] == pytest.approx(0.5 * math.log(1 + math.sqrt(2)), abs=1e-6)
    assert d["regime"] == "critical"


def test_ratio_case(capsys):
    d = run_json(capsys, "ratio", "--case", "square-odd")
    assert d["limit"] == 2.0


def test_charpoly(capsys):
    d = run_json(capsys, "charpoly", "triangular")
    assert {"R(z,1)", "R(z,-1)", "P", "branch"} <= set(d)


def _rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_sweep_figure_2(capsys):
    code, out, _ = run(capsys, "sweep", "--figure", "2")
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 3 * 121
    assert {r["case"] for r in rows} == {"even-odd", "odd-even", "even-even"}
    assert sum(line.startswith("#") for line in out.splitlines()) >= 2


def test_sweep_figure_4(capsys):
    code, out, _ = run(capsys, "sweep", "--figure", "4", "--steps", "11")
    rows = _rows(out)
    assert code == 0 and len(rows) == 11 and all(float(r["fsc"]) > 0 for r in rows)


def test_sweep_empty_range(capsys):
    code, _, err = run(capsys, "sweep", "--figure", "2", "--lo", "1", "--hi", "1")
    assert code == 2 and "lo < hi" in err


def test_sweep_deterministic_across_threads(capsys, monkeypatch, tmp_path):
    argv = ["sweep", "triangular", "--param", "weight:" + lattice("triangular").labels[0],
            "--lo", "0.5", "--hi", "1.5", "--steps", "5", "--m", "3", "--n", "5", "--grid", "64"]
    outs = []
    for k in ("1", "4"):
        monkeypatch.setenv("KLEINZ_THREADS", k)
        code, out, _ = run(capsys, *argv)
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]


def test_bad_thread_count(capsys, monkeypatch):
    monkeypatch.setenv("KLEINZ_THREADS", "zero")
    code, _, err = run(capsys, "sweep", "triangular", "--param", "log-aspect", "--steps", "3")
    assert code == 2 and "KLEINZ_THREADS" in err
