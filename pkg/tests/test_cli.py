import csv
import json

import pytest

from qitomo.cli import main, parse_chi, parse_kappa, parse_time
from qitomo.errors import ValidationError


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["design", "--out", str(d / "design.json")]) == 0
    assert main(["simulate", "--gateset", "published", "--design", str(d / "design.json"),
                 "--shots", "1024", "--seed", "7", "--out", str(d / "data.json")]) == 0
    return d


def test_unit_parsing():
    assert parse_time("500ns") == 5e-07
    assert parse_time("2.02us") == pytest.approx(2.02e-6)
    assert parse_time("1e-6") == 1e-6
    assert parse_kappa("242ns") == pytest.approx(1 / 242e-9)
    assert parse_chi("-0.27MHz") == pytest.approx(-2 * 3.141592653589793 * 0.27e6)
    with pytest.raises(ValidationError):
        parse_time("5 parsecs")


def test_design_prints_counts(capsys, tmp_path):
    code, out, _ = run(capsys, "design", "--out", tmp_path / "d.json")
    assert code == 0
    assert "instrument circuits: 36" in out
    assert "circuits: 128" in out


def test_rank_deficient_fiducials_exit(capsys, tmp_path):
    f = tmp_path / "fids.json"
    f.write_text(json.dumps({"preps": ["{}", "Gx", "Gx:Gx"], "meas": ["{}", "Gx", "Gx:Gx"]}))
    code, _, err = run(capsys, "design", "--fiducials", f, "--out", tmp_path / "d.json")
    assert code == 2
    assert json.loads(err)["error"] == "InformationalCompletenessError"


def test_simulate_deterministic_and_round_trip(capsys, files, tmp_path):
    out = tmp_path / "again.json"
    code, _, _ = run(capsys, "simulate", "--gateset", "published", "--design", files / "design.json",
                     "--shots", 1024, "--seed", 7, "--out", out)
    assert code == 0
    assert out.read_bytes() == (files / "data.json").read_bytes()


def test_simulate_rejects_zero_shots(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--shots", 0, "--seed", 1, "--out", tmp_path / "x.json")
    assert code == 2
    assert "shot" in json.loads(err)["message"]


def test_exact_estimate_reports_zero_error(capsys, tmp_path):
    run(capsys, "simulate", "--exact", "--out", tmp_path / "exact.json")
    assert main(["estimate", "--data", str(tmp_path / "exact.json"), "--out", str(tmp_path / "e.json")]) == 0
    assert main(["report", "--estimate", str(tmp_path / "e.json"), "--out", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["epsilon_diamond"] < 1e-8


def test_mle_raises_likelihood(files, tmp_path):
    args = ["estimate", "--data", str(files / "data.json"), "--design", str(files / "design.json")]
    assert main(args + ["--out", str(tmp_path / "lgst.json")]) == 0
    assert main(args + ["--mle", "--out", str(tmp_path / "mle.json")]) == 0
    a = json.loads((tmp_path / "lgst.json").read_text())
    b = json.loads((tmp_path / "mle.json").read_text())
    assert b["loglikelihood"] >= a["loglikelihood"]
    assert len(b["gauge"]) == 16


def test_missing_circuits_named(capsys, files, tmp_path):
    data = json.loads((files / "data.json").read_text())
    del data["counts"]["Gy:Q:Gx"]
    (tmp_path / "partial.json").write_text(json.dumps(data))
    code, _, err = run(capsys, "estimate", "--data", tmp_path / "partial.json", "--out", tmp_path / "e.json")
    assert code == 2
    assert "Gy:Q:Gx" in json.loads(err)["message"]


def test_report_published(capsys, tmp_path):
    code, _, _ = run(capsys, "report", "--estimate", "published", "--out", tmp_path / "r.json")
    assert code == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["epsilon_diamond"] == pytest.approx(0.081, abs=0.02)
    assert rep["instrument"]["p"]["0|0"] == pytest.approx(0.997, abs=0.002)


def test_report_target_is_zero(capsys, tmp_path):
    run(capsys, "report", "--estimate", "target", "--out", tmp_path / "r.json")
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["epsilon_diamond"] == pytest.approx(0.0, abs=1e-9)
    assert all(abs(v) < 1e-9 for v in rep["epsilon_diamond_gates"].values())


def test_report_bootstrap_fields(capsys, tmp_path):
    code, _, _ = run(capsys, "report", "--estimate", "published", "--bootstrap", 50,
                     "--shots", 512, "--seed", 2, "--out", tmp_path / "r.json")
    assert code == 0
    bs = json.loads((tmp_path / "r.json").read_text())["bootstrap"]
    assert bs["replicas"] + len(bs["failed"]) == 50
    assert bs["intervals"]["epsilon_diamond"] > 0
    assert set(bs["intervals"]) >= {"epsilon_diamond", "readout_fidelity", "p0|0", "p1|1"}


def test_stark_data_fail_markovian_fit(capsys, files, tmp_path):
    d = files / "design.json"
    run(capsys, "simulate", "--gateset", "published", "--design", d, "--shots", 1024, "--seed", 3,
        "--stark", "500ns", "--out", tmp_path / "s.json")
    assert main(["estimate", "--data", str(tmp_path / "s.json"), "--design", str(d), "--mle",
                 "--out", str(tmp_path / "e.json")]) == 0
    assert main(["report", "--estimate", str(tmp_path / "e.json"), "--data", str(tmp_path / "s.json"),
                 "--design", str(d), "--out", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["model_violation"]["n_sigma"] > 5


def test_scaling_csv_deterministic(capsys, tmp_path):
    for name in ("a.csv", "b.csv"):
        code, out, _ = run(capsys, "scaling", "--models", 2, "--shots", "64,256", "--seed", 1,
                           "--out", tmp_path / name)
        assert code == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a.csv")))
    assert [(r["model"], r["N"]) for r in rows] == [("0", "64"), ("0", "256"), ("1", "64"), ("1", "256")]
    assert "slope" in json.loads(out)


def test_stark_zero_photons_models_agree(capsys, tmp_path):
    out = tmp_path / "st.json"
    code, _, _ = run(capsys, "stark", "--seed", 4, "--stark", "500ns,2020ns", "--n0", 0, "--n1", 0,
                     "--out", out)
    assert code == 0
    recs = json.loads(out.read_text())
    assert len(recs) == 2
    for rec in recs:
        for v in rec["n_sigma"].values():
            assert abs(v) < 4
    phi = list(csv.DictReader(open(tmp_path / "st.phi.csv")))
    assert len(phi) == 2 * 2 * 3


def test_stark_compat_flag_switches_prefactor(capsys, tmp_path):
    rows = {}
    for flag in ([], ["--compat-phase"]):
        out = tmp_path / f"st{len(flag)}.json"
        code, _, _ = run(capsys, "stark", "--seed", 4, "--stark", "2020ns", "--out", out, *flag)
        assert code == 0
        rows[len(flag)] = json.loads(out.read_text())[0]["predicted"]["alpha0"]
    assert rows[0] != rows[1]


def test_stark_data_count_must_match(capsys, files, tmp_path):
    code, _, err = run(capsys, "stark", "--stark", "500ns,2020ns", "--data", files / "data.json",
                       "--out", tmp_path / "x.json")
    assert code == 2


def test_gateset_export(capsys, tmp_path):
    assert main(["gateset", "--gateset", "published", "--out", str(tmp_path / "g.json")]) == 0
    assert main(["report", "--estimate", str(tmp_path / "g.json"), "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["epsilon_diamond"] == pytest.approx(0.081, abs=0.002)
