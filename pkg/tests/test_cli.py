import csv
import io
import json

import pytest

from qcw.cli import main
from qcw.series import Series

BC = {
    "T": [[1, 0, 0, 0], [0, 1, 1, 0], [0, 1, -1, 0], [0, 0, 0, 1]],
    "q_subst": {"q1": {"qh": "1/2", "qd": "1/2"}, "q2": {"qh": "1/2", "qd": "-1/2"}},
    "new_q_vars": ["qh", "qd"],
}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_catalog_list(capsys):
    assert run(capsys, "catalog", "list") == (0, "p1\np1xp1\npoint\n", "")


def test_catalog_show(capsys):
    code, out, _ = run(capsys, "catalog", "show", "p1", "--format", "text")
    assert code == 0 and "potential: q\n" in out and "c1: 2*H" in out
    code, out, _ = run(capsys, "catalog", "show", "p1xp1", "--format", "text")
    assert "q1*q2*tp^3/6" in out
    code, out, _ = run(capsys, "catalog", "show", "p1xp1")
    assert json.loads(out)["name"] == "p1xp1"


def test_kmatrix_json_round_trip(capsys):
    code, out, _ = run(capsys, "kmatrix", "--model", "p1xp1", "--q-order", "3", "--t-degree", "5",
                       "--order", "1,H1,H2,pt")
    assert code == 0
    doc = json.loads(out)
    assert doc["basis"] == ["1", "H1", "H2", "pt"]
    assert doc["matrix"][0] == ["0", "2*q1", "2*q2", "2*q1*q2*tp"]
    assert doc["matrix"][3] == ["-2*tp", "2", "2", "0"]
    for row in doc["matrix"]:
        for e in row:
            assert str(Series.parse(e, doc["q_vars"], doc["t_vars"])) == e


def test_kmatrix_with_potential_file(capsys, tmp_path, catalog):
    pot = catalog.potential("p1xp1").to_json()
    path = tmp_path / "pot.json"
    path.write_text(json.dumps(pot))
    code, out, _ = run(capsys, "kmatrix", "--model", "p1xp1", "--potential", str(path))
    assert code == 0
    code2, out2, _ = run(capsys, "kmatrix", "--model", "p1xp1")
    assert out == out2


def test_deterministic(capsys):
    a = run(capsys, "spectrum", "--model", "p1xp1", "--point", "q1=1/10,q2=1/5,tp=1")
    b = run(capsys, "spectrum", "--model", "p1xp1", "--point", "q1=1/10,q2=1/5,tp=1")
    assert a == b and a[0] == 0


def test_converge_csv(capsys, tmp_path):
    out = tmp_path / "conv.csv"
    code, _, _ = run(capsys, "converge", "--x", "p1", "--y", "p1", "--nu", "1,1", "--t", "tp=1",
                     "--eps0", "1e-2", "--factor", "0.5", "--steps", "20", "--out", str(out))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    d = [float(r["distance"]) for r in rows]
    assert len(d) == 20 and all(b < a for a, b in zip(d, d[1:])) and d[-1] <= 1e-8


def test_check_suites(capsys):
    assert run(capsys, "check", "--suite", "associativity", "--model", "p1xp1")[0] == 0
    assert run(capsys, "check", "--suite", "frobenius", "--model", "p1")[0] == 0
    assert run(capsys, "check", "--suite", "dimension", "--model", "p1xp1")[0] == 0
    code, out, _ = run(capsys, "check", "--suite", "hom", "--x", "p1", "--y", "p1", "--t", "tp=1")
    doc = json.loads(out)
    assert code == 0 and doc["decreasing"] and doc["skipped"][0]["status"].startswith("SKIPPED")


def test_check_failing_suites_exit_one(capsys):
    code, out, _ = run(capsys, "check", "--suite", "purity", "--model", "p1xp1")
    assert code == 1 and json.loads(out)["checked"] == 64
    code, out, _ = run(capsys, "check", "--suite", "decomposition", "--model", "p1xp1")
    doc = json.loads(out)
    assert code == 1 and doc["order_violations"] == [] and doc["not_mixed"] == [["pt", "1"]]


def test_basechange_matrix_input(capsys, tmp_path):
    bc = tmp_path / "bc.json"
    bc.write_text(json.dumps(BC))
    code, out, _ = run(capsys, "kmatrix", "--model", "p1xp1", "--order", "1,H1,H2,pt")
    k = tmp_path / "k.json"
    k.write_text(out)
    code, out, _ = run(capsys, "basechange", "--matrix", str(k), "--bc", str(bc))
    doc = json.loads(out)
    assert code == 0 and doc["q_vars"] == ["qh", "qd"]
    assert doc["matrix"][0][3] == "2*qh*tp"
    assert doc["matrix"][3] == ["-2*tp", "4", "0", "0"]


def test_atom_and_phi(capsys):
    code, out, _ = run(capsys, "atom", "--model", "p1", "--point", "q=1")
    items = json.loads(out)["atom"]["items"]
    assert code == 0 and [(i["re"], i["mult"]) for i in items] == [(-2.0, 1), (2.0, 1)]
    code, out, _ = run(capsys, "phi", "--expr", "[P1]*[P1] - [P1xP1] + 2*[pt]",
                       "--point", "p1:q=1", "--point", "p1xp1:q1=1,q2=1")
    doc = json.loads(out)
    assert code == 0 and len(doc["terms"]) == 1 and doc["terms"][0]["coeff"] == 2


def test_validate(capsys, tmp_path, catalog):
    assert run(capsys, "validate", "--model", "p1xp1")[0] == 0
    doc = catalog.document("p1")
    doc["pairing"] = [["0", "1"], ["2", "0"]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", "--model", str(path))
    assert code == 1 and "pairing not symmetric" in json.loads(out)["model_issues"]


@pytest.mark.parametrize("argv", [
    ["kmatrix", "--model", "nope"],
    ["spectrum", "--model", "p1xp1", "--point", "q1=1"],
    ["spectrum", "--model", "p1", "--point", "q=abc"],
    ["phi", "--expr", "[P1"],
    ["kmatrix", "--model", "/nonexistent/model.json"],
    ["converge", "--x", "p1", "--y", "p1", "--nu", "1,0"],
])
def test_input_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("qcw:")


def test_schema_violation_names_field(capsys, tmp_path, catalog):
    doc = catalog.document("p1")
    del doc["cup"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "kmatrix", "--model", str(path))
    assert code == 2 and "cup" in err
