import json

import numpy as np
import pytest
import scipy.sparse as sp

from stark import io
from stark.cli import main


@pytest.fixture
def tiny_dataset(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--grid", "8", "8", "--genes", "12", "--regions", "2",
                 "--reads-per-pixel-target", "60", "--seed", "3", "--out", str(out)]) == 0
    return out


class TestFormats:
    def test_mtx_fixture(self, tmp_path):
        path = tmp_path / "c.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate integer general\n"
            "2 2 3\n1 1 4\n1 2 1\n2 2 7\n"
        )
        np.testing.assert_array_equal(io.load_counts(path).toarray(), [[4, 1], [0, 7]])

    def test_sparse_round_trip(self, tmp_path, rng):
        C = sp.random(50, 200, density=0.05, format="csr", random_state=1)
        C.data = rng.integers(1, 1000, size=C.nnz).astype(np.int64)
        io.write_counts(tmp_path / "r.mtx", C)
        back = io.load_counts(tmp_path / "r.mtx")
        assert back.shape == C.shape
        assert (back != C).nnz == 0

    def test_real_matrix_round_trip(self, tmp_path, rng):
        X = rng.dirichlet(np.ones(5), size=7)
        io.write_matrix(tmp_path / "x.mtx", X)
        np.testing.assert_array_equal(io.load_matrix(tmp_path / "x.mtx"), X)

    def test_dimension_mismatch(self, tmp_path):
        io.write_coordinates(tmp_path / "xy.csv", np.zeros((3, 2)))
        C = sp.csr_matrix(np.ones((4, 2), dtype=int))
        with pytest.raises(ValueError):
            io.check_dimensions(C, io.load_coordinates(tmp_path / "xy.csv"))

    def test_csv_counts(self, tmp_path):
        (tmp_path / "c.csv").write_text("g1,g2\n1,2\n0,5\n")
        np.testing.assert_array_equal(io.load_counts(tmp_path / "c.csv").toarray(), [[1, 2], [0, 5]])

    @pytest.mark.parametrize("body, line", [
        ("g1,g2\n1,2\n3,-1\n", 3),
        ("g1,g2\n1,2\n3\n", 3),
        ("g1,g2\n1,x\n", 2),
        ("1,2\n3,4\n", 1),
    ])
    def test_csv_errors_name_lines(self, tmp_path, body, line):
        (tmp_path / "c.csv").write_text(body)
        with pytest.raises(io.FormatError, match=f":{line}:"):
            io.load_counts(tmp_path / "c.csv")

    def test_negative_mtx(self, tmp_path):
        (tmp_path / "n.mtx").write_text(
            "%%MatrixMarket matrix coordinate integer general\n2 2 1\n2 1 -3\n"
        )
        with pytest.raises(io.FormatError, match="row 2, column 1"):
            io.load_counts(tmp_path / "n.mtx")

    def test_coordinates_header(self, tmp_path):
        (tmp_path / "xy.csv").write_text("a,b\n1,2\n")
        with pytest.raises(io.FormatError):
            io.load_coordinates(tmp_path / "xy.csv")

    def test_report_is_canonical(self):
        assert io.dump_report({"b": 1, "a": [1.5]}) == io.dump_report({"a": [1.5], "b": 1})
        with pytest.raises(ValueError):
            io.dump_report({"x": float("nan")})


class TestCli:
    def test_simulate_outputs(self, tiny_dataset):
        for name in ("counts.mtx", "coords.csv", "labels.csv", "reads.csv", "truth.mtx", "report.json"):
            assert (tiny_dataset / name).exists()
        C = io.load_counts(tiny_dataset / "counts.mtx")
        assert C.shape == (64, 12)

    def _args(self, data, *extra):
        return ["--counts", str(data / "counts.mtx"), "--coords", str(data / "coords.csv"),
                "--labels", str(data / "labels.csv"), *extra]

    def test_missing_file_is_validation_error(self, tmp_path, capsys):
        rc = main(["denoise-test", "--counts", str(tmp_path / "nope.mtx"),
                   "--coords", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
        assert rc == 2
        assert "load" in capsys.readouterr().err

    def test_dimension_mismatch_exit(self, tiny_dataset, tmp_path):
        io.write_coordinates(tmp_path / "xy.csv", np.zeros((3, 2)))
        rc = main(["denoise", "--counts", str(tiny_dataset / "counts.mtx"),
                   "--coords", str(tmp_path / "xy.csv"), "--out", str(tmp_path)])
        assert rc == 2

    def test_bad_config_key(self, tiny_dataset, tmp_path):
        (tmp_path / "cfg.json").write_text(json.dumps({"grid": [2, 2]}))
        with pytest.raises(SystemExit) as exc:
            main(["denoise-test", *self._args(tiny_dataset), "--config", str(tmp_path / "cfg.json")])
        assert exc.value.code == 2

    def test_repeat_aggregation(self, tiny_dataset, tmp_path):
        out = tmp_path / "rep"
        assert main(["denoise-test", *self._args(tiny_dataset, "--reads-per-pixel-target", "20",
                                                  "--repeats", "5", "--seed", "1",
                                                  "--out", str(out))]) == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["repeats"]) == 5
        for key, agg in report["summary"].items():
            vals = [r["metrics"][key] for r in report["repeats"]]
            assert agg["mean"] == float(np.mean(vals))
            assert agg["std"] == float(np.std(vals))
        alphas = {r["hyperparameters"]["alpha"] for r in report["repeats"]}
        assert len(alphas) > 1
        F = io.load_matrix(out / "denoised.mtx")
        assert F.shape == (64, 12)
        np.testing.assert_allclose(F.sum(axis=1), 1.0, atol=1e-12)

    def test_config_file_and_override(self, tiny_dataset, tmp_path):
        (tmp_path / "cfg.json").write_text(json.dumps({
            "reads-per-pixel-target": 20, "iters": 2, "seed": 4, "variant": "spatial",
        }))
        out = tmp_path / "cfg"
        assert main(["denoise-test", *self._args(tiny_dataset), "--config", str(tmp_path / "cfg.json"),
                     "--iters", "3", "--out", str(out)]) == 0
        cfg = json.loads((out / "report.json").read_text())["config"]
        assert cfg["n_iter"] == 3 and cfg["seed"] == 4 and cfg["variant"] == "spatial"

    def test_full_depth_run(self, tiny_dataset, tmp_path):
        out = tmp_path / "full"
        assert main(["denoise-test", *self._args(tiny_dataset, "--alpha", "1e-6", "--out", str(out))]) == 0
        report = json.loads((out / "report.json").read_text())
        rep = report["repeats"][0]
        assert rep["reads"] == report["total_reads"]
        assert np.isfinite(rep["metrics"]["relative_error"])
        assert rep["metrics"]["relative_error"] < 0.5
        assert report["provenance"]["prng"]

    def test_interp_and_plot(self, tiny_dataset, tmp_path):
        out = tmp_path / "interp"
        assert main(["interp-test", *self._args(tiny_dataset, "--reads-per-pixel-target", "30",
                                                 "--pixels-keep", "0.5", "--plot", "--out", str(out))]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["repeats"][0]["pixels_kept"] == 32
        svg = (out / "labels_denoised.svg").read_text()
        assert svg.startswith("<svg") or svg.startswith("<?xml")
        assert svg.count("<circle") == 64

    def test_denoise_evaluate_downsample(self, tiny_dataset, tmp_path):
        assert main(["downsample", "--counts", str(tiny_dataset / "counts.mtx"),
                     "--reads-total", "640", "--out", str(tmp_path / "ds")]) == 0
        ds = io.load_counts(tmp_path / "ds" / "counts.mtx")
        assert ds.sum() == 640
        assert main(["denoise", "--counts", str(tmp_path / "ds" / "counts.mtx"),
                     "--coords", str(tiny_dataset / "coords.csv"), "--iters", "3",
                     "--out", str(tmp_path / "dn")]) == 0
        assert main(["evaluate", "--counts", str(tiny_dataset / "counts.mtx"),
                     "--labels", str(tiny_dataset / "labels.csv"),
                     "--denoised", str(tmp_path / "dn" / "denoised.mtx"),
                     "--out", str(tmp_path / "ev")]) == 0
        metrics = json.loads((tmp_path / "ev" / "report.json").read_text())["metrics"]
        assert 0 <= metrics["label_transfer_accuracy"] <= 1
        assert metrics["relative_error"] > 0

    def test_oracle_needs_truth(self, tiny_dataset, tmp_path):
        rc = main(["denoise", "--counts", str(tiny_dataset / "counts.mtx"),
                   "--coords", str(tiny_dataset / "coords.csv"), "--variant", "oracle",
                   "--out", str(tmp_path)])
        assert rc == 2

    def test_autotune_stdout(self, tiny_dataset, capsys):
        assert main(["autotune", "--counts", str(tiny_dataset / "counts.mtx"),
                     "--coords", str(tiny_dataset / "coords.csv")]) == 0
        hp = json.loads(capsys.readouterr().out)["hyperparameters"]
        assert hp["alpha"] > 0 and hp["n_iter"] == 7
