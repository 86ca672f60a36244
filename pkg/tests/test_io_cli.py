"""File formats, reports, manifests and the command-line surface."""

import os

import numpy as np
import pytest

from helpers import default_fit, planted_average_network
from slpm.cli import main
from slpm.data import DataError, WeightMatrix
from slpm.io import (
    matrix_to_csv,
    parse_fit_report,
    read_weight_matrix,
    render_fit_report,
    write_weight_matrix,
)


class TestCsvFormat:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,0\n0,1\n")
        wm = read_weight_matrix(str(path))
        assert wm.shape == (2, 2)
        np.testing.assert_array_equal(wm.values, np.eye(2))
        assert wm.mask.all()

    def test_round_trip_exact(self, tmp_path, rng):
        scales = 10.0 ** rng.integers(-8, 8, (7, 4))
        wm = WeightMatrix(rng.exponential(1.0, (7, 4)) * scales)
        path = str(tmp_path / "m.csv")
        write_weight_matrix(wm, path)
        back = read_weight_matrix(path)
        np.testing.assert_array_equal(back.values, wm.values)

    def test_ragged_rejected_with_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3\n4,5\n")
        with pytest.raises(DataError, match="line 2"):
            read_weight_matrix(str(path))

    def test_negative_rejected_with_position(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,-4\n")
        with pytest.raises(DataError, match="row 1, column 1"):
            read_weight_matrix(str(path))

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,nan\n")
        with pytest.raises(DataError, match="non-finite"):
            read_weight_matrix(str(path))


class TestMatrixMarketFormat:
    def test_sparse_default_densifies(self, tmp_path):
        path = tmp_path / "m.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n"
                        "2 2 1\n1 2 3.5\n")
        wm = read_weight_matrix(str(path), fmt_name="mm")
        assert wm.values[0, 1] == 3.5
        assert wm.values.sum() == 3.5
        assert wm.mask.all()

    def test_absent_as_missing(self, tmp_path):
        path = tmp_path / "m.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n"
                        "2 2 2\n1 2 3.5\n2 1 0\n")
        wm = read_weight_matrix(str(path), fmt_name="mm", absent_as_missing=True)
        assert wm.n_observed == 2
        assert wm.mask[0, 1] and wm.mask[1, 0]
        assert not wm.mask[0, 0]

    def test_round_trip_with_mask(self, tmp_path, rng):
        mask = rng.random((5, 6)) < 0.6
        mask[0, 0] = True
        wm = WeightMatrix(rng.exponential(1.0, (5, 6)) * mask, mask=mask)
        path = str(tmp_path / "m.mtx")
        write_weight_matrix(wm, path, fmt_name="mm")
        back = read_weight_matrix(path, fmt_name="mm", absent_as_missing=True)
        np.testing.assert_array_equal(back.values, wm.values)
        np.testing.assert_array_equal(back.mask, wm.mask)

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "m.mtx"
        path.write_text("1 2 3\n")
        with pytest.raises(DataError, match="header"):
            read_weight_matrix(str(path), fmt_name="mm")

    def test_entry_bounds_checked(self, tmp_path):
        path = tmp_path / "m.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n"
                        "2 2 1\n3 1 1.0\n")
        with pytest.raises(DataError, match="outside"):
            read_weight_matrix(str(path), fmt_name="mm")


class TestReportFormat:
    def test_render_and_parse(self, tmp_path):
        data, _ = planted_average_network(8, 7, seed=4)
        state, report = default_fit(data, K=4, max_iter=40)
        text = render_fit_report(data, state, report, manifest_hash="cafe")
        assert "manifest_hash: cafe" in text
        path = str(tmp_path / "report.txt")
        with open(path, "w") as fh:
            fh.write(text)
        parsed = parse_fit_report(path)
        assert parsed["header"]["rows"] == "8"
        assert parsed["header"]["effective_K"] == str(report.effective_K)
        mixing = parsed["sections"]["mixing"]["rows"]
        assert len(mixing) == 4
        props = np.array([float(r[2]) for r in mixing])
        np.testing.assert_allclose(props, report.sorted_mixing, rtol=1e-15)
        nodes = parsed["sections"]["nodes"]["rows"]
        assert len(nodes) == 8 + 7
        fe = parsed["sections"]["free_energy"]["rows"]
        assert len(fe) == report.free_energy_trace.size

    def test_17_digit_round_trip(self):
        vals = np.array([[np.pi * 1e-7, 1.0 / 3.0], [123456.789, 2 ** -40]])
        text = matrix_to_csv(WeightMatrix(vals))
        back = np.array([[float(v) for v in line.split(",")]
                         for line in text.strip().split("\n")])
        np.testing.assert_array_equal(back, vals)


def run_cli(*argv):
    return main(list(argv))


class TestCli:
    def test_simulate_fit_evaluate_export(self, tmp_path):
        mat = str(tmp_path / "X.csv")
        assert run_cli("simulate", "--output", mat, "--model", "slpm-average",
                       "--M", "12", "--N", "12", "--Ktrue", "3",
                       "--mixing", "uniform", "--seed", "7") == 0
        assert os.path.exists(mat)
        assert os.path.exists(mat + ".truth")
        assert os.path.exists(mat + ".manifest")

        report = str(tmp_path / "fit.txt")
        recon = str(tmp_path / "Xhat.csv")
        assert run_cli("fit", mat, "--output", report, "--dims", "6",
                       "--max-iter", "150", "--seed", "1",
                       "--reconstruction-out", recon) == 0
        parsed = parse_fit_report(report)
        trace = np.array([float(r[1]) for r in
                          parsed["sections"]["free_energy"]["rows"]])
        diffs = np.diff(trace)
        assert np.all(diffs >= -1e-8 * np.maximum(1, np.abs(trace[:-1])))
        assert int(parsed["header"]["effective_K"]) <= 6

        out = str(tmp_path / "eval.txt")
        assert run_cli("evaluate", "--observed", mat, "--predicted", recon,
                       "--report", report, "--output", out) == 0
        body = open(out).read()
        assert "loss:" in body and "effective_K:" in body

        emb = str(tmp_path / "emb.tsv")
        assert run_cli("export-embedding", "--report", report,
                       "--output", emb) == 0
        lines = [l for l in open(emb).read().strip().split("\n")
                 if not l.startswith("#")]
        assert len(lines) == 1 + 12 + 12  # header + senders + receivers
        cells = lines[1].split("\t")
        assert cells[0] == "U0" and cells[1] == "sender"

    def test_identical_runs_are_byte_identical(self, tmp_path):
        mat = str(tmp_path / "X.csv")
        run_cli("simulate", "--output", mat, "--model", "slpm-average",
                "--M", "10", "--N", "10", "--Ktrue", "2", "--seed", "3")
        r1 = str(tmp_path / "r1.txt")
        r2 = str(tmp_path / "r2.txt")
        for rpt in (r1, r2):
            assert run_cli("fit", mat, "--output", rpt, "--dims", "4",
                           "--max-iter", "60", "--seed", "5") == 0
        assert open(r1, "rb").read() == open(r2, "rb").read()
        # manifests agree except for the wall-time line
        m1 = [l for l in open(r1 + ".manifest").read().splitlines()
              if not l.startswith("wall_time_s:")]
        m2 = [l for l in open(r2 + ".manifest").read().splitlines()
              if not l.startswith("wall_time_s:")]
        assert m1 == m2

    def test_self_evaluation_hits_clamp(self, tmp_path):
        mat = str(tmp_path / "X.csv")
        run_cli("simulate", "--output", mat, "--model", "homogeneous",
                "--M", "5", "--N", "5", "--seed", "2")
        out = str(tmp_path / "eval.txt")
        assert run_cli("evaluate", "--observed", mat, "--predicted", mat,
                       "--output", out) == 0
        loss = float([l for l in open(out).read().splitlines()
                      if l.startswith("loss:")][0].split(":")[1])
        assert loss == pytest.approx(np.log(1e-12), rel=1e-12)

    def test_flag_dependency_enforced(self, tmp_path):
        mat = str(tmp_path / "X.csv")
        run_cli("simulate", "--output", mat, "--model", "homogeneous",
                "--M", "4", "--N", "4", "--seed", "0")
        code = run_cli("fit", mat, "--output", str(tmp_path / "r.txt"),
                       "--no-self-loops")
        assert code == 2

    def test_missing_input_is_io_error(self, tmp_path):
        code = run_cli("fit", str(tmp_path / "nope.csv"),
                       "--output", str(tmp_path / "r.txt"))
        assert code == 3

    def test_square_flags(self, tmp_path):
        mat = str(tmp_path / "X.csv")
        run_cli("simulate", "--output", mat, "--model", "homogeneous",
                "--M", "6", "--N", "6", "--seed", "1")
        rpt = str(tmp_path / "r.txt")
        assert run_cli("fit", mat, "--output", rpt, "--dims", "3",
                       "--max-iter", "30", "--square", "--no-self-loops") == 0
        parsed = parse_fit_report(rpt)
        assert parsed["header"]["observed"] == "30"

    def test_no_partial_outputs_on_failure(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,-4\n")
        rpt = str(tmp_path / "r.txt")
        assert run_cli("fit", str(bad), "--output", rpt) == 3
        assert not os.path.exists(rpt)
        leftovers = [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]
        assert leftovers == []
