import csv
import json

import numpy as np
import pytest

from densiscore.cli import main
from densiscore.metrics import MetricReport


def write_csv(path, columns):
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    return str(path)


@pytest.fixture
def pred_file(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(-4, 4, 400)
    a = 2 * x + rng.uniform(0, 0.1, 400)
    return write_csv(tmp_path / "pred.csv", {"x0": x, "actual": a, "predicted": a + rng.standard_normal(400)})


def records_by_mode(out):
    recs = json.loads(out)["records"]
    by = {}
    for r in recs:
        by.setdefault((r["mode"], r["mean_convention"]), {})[r["metric"]] = r
    return by


class TestDensityFit:
    def test_scott_summary_and_curve(self, tmp_path):
        x = np.random.default_rng(1).standard_normal(1000)
        path = write_csv(tmp_path / "y.csv", {"actual": x})
        out = tmp_path / "fit.json"
        assert main(["density", "fit", path, "--method", "scott", "--out", str(out)]) == 0
        summary = json.loads(out.read_text())
        sigma = min(np.std(x, ddof=1), (np.percentile(x, 75) - np.percentile(x, 25)) / 1.349)
        assert summary["bandwidth"] == pytest.approx(sigma * 1000 ** -0.2, rel=1e-12)
        assert summary["n"] == 1000 and summary["method"] == "scott"
        assert 0.999 <= summary["integral_check"] <= 1.001
        lines = (tmp_path / "fit_curve.csv").read_text().splitlines()
        assert lines[0] == "t,density" and len(lines) == 513

    def test_histogram(self, tmp_path):
        x = np.random.default_rng(2).standard_normal(300)
        path = write_csv(tmp_path / "y.csv", {"actual": x})
        out = tmp_path / "h.json"
        assert main(["density", "fit", path, "--method", "histogram", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["integral_check"] == pytest.approx(1.0, abs=1e-12)

    def test_empty_file_names_column(self, tmp_path, caplog):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert main(["density", "fit", str(path)]) == 2
        assert "actual" in caplog.text

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("actual\n1.0\nabc\n")
        assert main(["density", "fit", str(path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["density", "fit", str(tmp_path / "nope.csv")]) == 2

    def test_constant_column_is_degenerate(self, tmp_path):
        path = write_csv(tmp_path / "c.csv", {"actual": np.full(50, 3.0)})
        assert main(["density", "fit", path, "--out", str(tmp_path / "c.json")]) == 3


class TestScore:
    def test_full_report(self, pred_file, capsys):
        assert main(["score", pred_file]) == 0
        by = records_by_mode(capsys.readouterr().out)
        assert {k[0] for k in by} == {"nw", "yw", "xw"}
        assert by[("xw", "weighted")]["MSE"]["bandwidth"] is not None

    def test_perfect_predictions(self, tmp_path, capsys, caplog):
        a = np.random.default_rng(3).standard_normal(100)
        path = write_csv(tmp_path / "p.csv", {"actual": a, "predicted": a})
        assert main(["score", path]) == 0
        captured = capsys.readouterr()
        assert "xw skipped" in caplog.text
        by = records_by_mode(captured.out)
        for mode in ("nw", "yw"):
            v = {m: r["value"] for m, r in by[(mode, "weighted")].items()}
            assert v["MSE"] == v["RMSE"] == v["MAE"] == 0.0
            assert v["COD"] == v["EVS"] == v["PCC"] == 1.0

    def test_constant_actual(self, tmp_path, capsys):
        p = np.linspace(0, 1, 50)
        path = write_csv(tmp_path / "c.csv", {"actual": np.full(50, 2.0), "predicted": p})
        assert main(["score", path]) == 4
        captured = capsys.readouterr()
        payload = json.loads(captured.out)
        assert any("yw skipped" in w for w in payload["warnings"])
        nw = records_by_mode(captured.out)[("nw", "weighted")]
        for m in ("RSE", "RRSE", "RAE", "PCC", "COD", "EVS"):
            assert nw[m]["value"] is None and nw[m]["error"] == "ZeroDenominator"
        assert np.isfinite(nw["MSE"]["value"]) and np.isfinite(nw["MAE"]["value"])

    def test_duplicate_rows_match_weight_column(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        a = rng.standard_normal(60)
        p = a + rng.standard_normal(60)
        k = rng.integers(1, 4, 60)
        dup = write_csv(tmp_path / "dup.csv", {"actual": np.repeat(a, k), "predicted": np.repeat(p, k)})
        wtd = write_csv(tmp_path / "w.csv", {"actual": a, "predicted": p, "count": k})
        assert main(["score", dup, "--modes", "nw"]) == 0
        r_dup = records_by_mode(capsys.readouterr().out)[("nw", "weighted")]
        assert main(["score", wtd, "--modes", "nw", "--weight-column", "count"]) == 0
        r_wtd = records_by_mode(capsys.readouterr().out)[("nw", "weighted")]
        for m in r_dup:
            assert r_wtd[m]["value"] == pytest.approx(r_dup[m]["value"], rel=1e-12, abs=1e-15)

    def test_csv_format_and_round_trip(self, pred_file, capsys):
        assert main(["score", pred_file, "--format", "csv", "--modes", "nw,xw"]) == 0
        rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
        assert len(rows) >= 18
        assert main(["score", pred_file, "--modes", "nw,xw"]) == 0
        recs = json.loads(capsys.readouterr().out)["records"]
        by_csv = {(r["mode"], r["mean_convention"], r["metric"]): r["value"] for r in rows}
        for rec in recs:
            assert float(by_csv[(rec["mode"], rec["mean_convention"], rec["metric"])]) == rec["value"]
        xw = [r for r in recs if r["mode"] == "xw" and r["mean_convention"] == "weighted"]
        back = MetricReport.from_records(json.loads(json.dumps(xw)))
        assert back.to_records() == xw

    def test_unknown_mode(self, pred_file):
        assert main(["score", pred_file, "--modes", "nw,zw"]) == 2

    def test_missing_predicted(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", {"actual": np.arange(5.0)})
        assert main(["score", path]) == 2


class TestBench:
    def test_synthetic_files(self, tmp_path, capsys):
        out = tmp_path / "syn"
        assert main(["bench", "synthetic", "--seed", "3", "--out", str(out)]) == 0
        lines = (tmp_path / "syn.csv").read_text().splitlines()
        assert lines[0] == "study,dataset_index,metric,mode,mean_convention,value"
        assert len(lines) == 7 * 3 * 9 + 1
        data = json.loads((tmp_path / "syn.json").read_text())
        assert len(data["datasets"]) == 7
        table = capsys.readouterr().err
        assert "spread" in table
        spreads = {(s["metric"], s["mode"]): s["spread"] for s in data["spreads"]}
        assert spreads[("MSE", "xw")] < spreads[("MSE", "nw")]

    def test_synthetic_is_repeatable(self, tmp_path):
        for name in ("a", "b"):
            assert main(["bench", "synthetic", "--function", "f3", "--seed", "1",
                         "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_stress_from_file(self, tmp_path):
        rng = np.random.default_rng(5)
        x = rng.uniform(-4, 4, 1000)
        a = x * np.abs(x)
        path = write_csv(tmp_path / "s.csv", {"x0": x, "actual": a, "predicted": a + rng.standard_normal(1000)})
        assert main(["bench", "stress", "--input", path, "--out", str(tmp_path / "st"), "--oracle-weights"]) == 0
        data = json.loads((tmp_path / "st.json").read_text())
        assert data["config"]["augmented_sizes"] == [2000] * 5
        spreads = {(s["metric"], s["mode"]): s["spread"] for s in data["spreads"]}
        for m in ("MSE", "MAE", "RSE", "COD"):
            assert spreads[(m, "ow")] <= 1e-12

    def test_stress_zero_reps(self, capsys):
        assert main(["bench", "stress", "--reps", "0", "--n", "300"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert all(s["spread"] == 0.0 for s in data["spreads"])

    def test_stress_input_needs_x(self, tmp_path):
        path = write_csv(tmp_path / "n.csv", {"actual": np.arange(10.0), "predicted": np.arange(10.0)})
        assert main(["bench", "stress", "--input", path]) == 2

    def test_stdout_csv(self, capsys):
        assert main(["bench", "stress", "--n", "300", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 5 * 3 * 9 + 1
