import numpy as np
import pytest

from carpetdim import (CellSpec, Poly, RowSpec, CarpetSpec, make_sierpinski,
                       write_carpet)
from carpetdim.cli import main


@pytest.fixture(scope="module")
def s1_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("carpets") / "S1.carpet"
    write_carpet(make_sierpinski(0.2, 0.45, (3, 2)), str(path))
    return str(path)


@pytest.fixture(scope="module")
def broken_file(tmp_path_factory):
    S1 = make_sierpinski(0.2, 0.45, (3, 2))
    rows = list(S1.rows)
    cells = list(rows[0].cells)
    cells[1] = CellSpec(a_tilde=cells[1].a_tilde, u=Poly.const(0.1))  # overlap
    rows[0] = RowSpec(b=rows[0].b, cells=tuple(cells))
    path = tmp_path_factory.mktemp("carpets") / "broken.carpet"
    write_carpet(CarpetSpec(tuple(rows)), str(path))
    return str(path)


def test_validate_ok(s1_file, capsys):
    assert main(["validate", s1_file]) == 0
    assert "pass" in capsys.readouterr().out


def test_validate_broken(broken_file, capsys):
    assert main(["validate", broken_file]) == 1
    assert "H3" in capsys.readouterr().out


def test_missing_file_exit_3(capsys):
    assert main(["validate", "/nonexistent/nope.carpet"]) == 3
    assert main(["dim", "/nonexistent/nope.carpet"]) == 3


def test_parse_error_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.carpet"
    bad.write_text("carpet v2\n")
    assert main(["validate", str(bad)]) == 3


def test_dim(s1_file, capsys, tmp_path):
    out = tmp_path / "sol.txt"
    assert main(["dim", s1_file, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    d = float([l for l in text.splitlines() if l.startswith("D=")][0][2:])
    t = float([l for l in text.splitlines() if l.startswith("t_star=")][0][7:])
    assert d == pytest.approx(1.4310189624616765, abs=1e-5)
    assert t == pytest.approx(0.569259, abs=1e-4)
    assert out.read_text().startswith("# carpetdim")


def test_measure(s1_file, capsys):
    assert main(["measure", s1_file, "--words", "1.1,2.2 1.1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    vals = {l.split("\t")[0]: float(l.split("\t")[1]) for l in lines}
    assert vals["1.1"] == pytest.approx(0.18337, abs=1e-4)
    assert 0 < vals["2.2 1.1"] < vals["1.1"]


def test_uniqueness_csv(s1_file, capsys, tmp_path):
    csv = tmp_path / "uniq.csv"
    assert main(["uniqueness", s1_file, "--grid", "10", "--csv", str(csv)]) == 0
    assert "unique=true" in capsys.readouterr().out
    lines = csv.read_text().splitlines()
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "t,P,dPdt,d2Pdt2,beta,rho"
    data = [l for l in lines if not l.startswith("#")][1:]
    assert len(data) == 10
    assert all(float(r.split(",")[3]) < 0 for r in data)


def test_uniqueness_deterministic(s1_file, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["uniqueness", s1_file, "--grid", "6", "--csv", str(a)])
    main(["uniqueness", s1_file, "--grid", "6", "--csv", str(b)])
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_variational_cmd(s1_file, capsys):
    assert main(["variational", s1_file, "--n", "1"]) == 0
    out = capsys.readouterr().out
    v = float([l for l in out.splitlines() if l.startswith("value=")][0][6:])
    assert v == pytest.approx(1.4310189624616765, abs=1e-6)


def test_render_cmd(s1_file, capsys, tmp_path):
    out = tmp_path / "regions.csv"
    assert main(["render", s1_file, "--depth", "1", "--out", str(out)]) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "word,x0,y0,x1,y1"
    assert len(lines) == 6


def test_boxcount_cmd(s1_file, capsys, tmp_path):
    out = tmp_path / "counts.csv"
    assert main(["boxcount", s1_file, "--samples", "20000", "--depth", "10",
                 "--scale-min", "3", "--scale-max", "6", "--seed", "1",
                 "--out", str(out)]) == 0
    est = float(capsys.readouterr().out.split("estimate=")[1].splitlines()[0])
    assert 1.0 < est < 2.0
    data = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert data[0] == "scale,count"
    assert len(data) == 5
