import json

import pytest

from convexinner.cli import main
from convexinner.fixtures import egg, empty


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def lines(text):
    return [json.loads(l) for l in text.splitlines() if l.strip()]


def test_certify_egg_file(tmp_path, capsys):
    egg().save(tmp_path / "egg.json")
    code, out, _ = run(capsys, "certify", "--file", str(tmp_path / "egg.json"), "--max-order", "3")
    assert code == 0
    recs = lines(out)
    assert recs[-1]["final"] and recs[-1]["status"] == 1
    assert recs[-1]["bound"] == pytest.approx(2.0, abs=1e-3)
    assert [r["order"] for r in recs[:-1]] == [2, 3]


def test_certify_empty_is_status_minus_one(tmp_path, capsys):
    empty().save(tmp_path / "e.json")
    code, out, _ = run(capsys, "certify", "--file", str(tmp_path / "e.json"))
    assert code == 0 and lines(out)[-1]["status"] == -1 and lines(out)[-1]["bound"] is None


def test_bad_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"n\": 2}")
    assert run(capsys, "certify", "--file", str(bad))[0] == 2
    assert run(capsys, "certify", "--file", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "certify", "--set", "egg", "--piece", "4")[0] == 2
    with pytest.raises(SystemExit):
        main(["certify", "--set", "nosuch"])


def test_inner_egg_unchanged(tmp_path, capsys):
    out = tmp_path / "Sbar.json"
    code, text, _ = run(capsys, "inner", "--set", "egg", "--eps", "0", "--out", str(out),
                        "--plot", str(tmp_path / "egg.svg"))
    assert code == 0 and lines(text)[0]["n_cuts"] == 0
    assert json.loads(out.read_text()) == egg().to_json()
    assert (tmp_path / "Sbar_log.json").exists()
    assert (tmp_path / "egg.svg").read_text().lstrip().startswith("<?xml")
    manifest = json.loads((tmp_path / "Sbar.json.manifest.json").read_text())
    assert manifest["subcommand"] == "inner" and manifest["options"]["eps"] == 0.0


def test_inner_hyperbola_two_cuts(tmp_path, capsys):
    code, text, _ = run(capsys, "inner", "--set", "hyperbola", "--eps", "0", "--max-order", "3",
                        "--out", str(tmp_path / "h.json"))
    res = lines(text)[0]
    assert code == 0 and res["n_cuts"] == 2 and res["final_status"] == "convex_certified"


def test_stab_center(tmp_path, capsys):
    code, text, _ = run(capsys, "stab", "--kind", "schur4", "--a", "0", "--center", "--resolution", "60",
                        "--out", str(tmp_path / "r.json"), "--plot", str(tmp_path / "r.svg"))
    rep = lines(text)[0]
    assert code == 0
    assert rep["center"]["x"] == pytest.approx([0.57975, 0.13657], abs=1e-3)
    assert rep["sampling"]["n_violations"] == 0


def test_trajopt_csv(tmp_path, capsys):
    csv_path = tmp_path / "t.csv"
    code, text, _ = run(capsys, "trajopt", "--set", "waterdrop-inner", "--n", "100", "--csv", str(csv_path))
    summary = lines(text)[0]
    assert code == 0 and 1.60 <= summary["cost"] <= 1.77
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "t,x1,x2,u" and len(rows) == 202


def test_raster_reruns_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "raster", "--set", "waterdrop", "--resolution", "50", "--csv", str(a))
    run(capsys, "raster", "--set", "waterdrop", "--resolution", "50", "--csv", str(b))
    assert a.read_bytes() == b.read_bytes()
