import json

import numpy as np
import pytest

from int8mm import (
    DenseMatrix,
    Int8Matrix,
    read_tensor,
    save_stack,
    seeded_random_matrix,
    synthetic_stack,
    write_tensor,
)
from int8mm.cli import main


def _strip_timing(csv_text: str) -> list[str]:
    lines = csv_text.splitlines()
    out = [lines[0]]
    for line in lines[1:]:
        out.append(",".join(line.split(",")[:-1]))
    return out


class TestQuantizeCommand:
    def test_zero_tensor_reports_zero_error(self, tmp_path, capsys):
        src = tmp_path / "zero.qt8"
        write_tensor(src, DenseMatrix(np.zeros((4, 4), dtype=np.float32)))
        out = tmp_path / "codes.qt8"
        assert main(["quantize", "--scheme", "absmax", "--in", str(src), "--out", str(out)]) == 0
        assert "round-trip max error: 0" in capsys.readouterr().out
        codes = read_tensor(out)
        assert isinstance(codes, Int8Matrix)
        assert not codes.data.any()
        params = json.loads((tmp_path / "codes.qt8.params.json").read_text())
        assert params == {"source_shape": [4, 4], "scheme": "absmax", "scale": 1.0}

    def test_grid_aligned_tensor_reports_zero_error(self, tmp_path, capsys):
        src = tmp_path / "grid.qt8"
        write_tensor(src, DenseMatrix([[-127.0, 0.0, 64.0, 127.0]]))
        out = tmp_path / "codes.qt8"
        assert main(["quantize", "--scheme", "absmax", "--in", str(src), "--out", str(out)]) == 0
        assert "round-trip max error: 0" in capsys.readouterr().out

    @pytest.mark.parametrize("scheme", ["zeropoint", "rowwise"])
    def test_other_schemes(self, tmp_path, scheme):
        src = tmp_path / "x.qt8"
        write_tensor(src, seeded_random_matrix(5, 5, seed=1, stddev=2.0))
        out = tmp_path / "codes.qt8"
        assert main(["quantize", "--scheme", scheme, "--in", str(src), "--out", str(out)]) == 0
        params = json.loads((tmp_path / "codes.qt8.params.json").read_text())
        assert params["scheme"] == scheme

    def test_unknown_scheme_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["quantize", "--scheme", "bogus", "--in", "x", "--out", "y"])
        assert excinfo.value.code == 2

    def test_missing_input_is_runtime_error(self, tmp_path, capsys):
        rc = main(["quantize", "--scheme", "absmax", "--in", str(tmp_path / "nope.qt8"),
                   "--out", str(tmp_path / "y.qt8")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_int8_input_is_runtime_error(self, tmp_path, capsys):
        src = tmp_path / "codes.qt8"
        write_tensor(src, Int8Matrix([[1, 2]]))
        rc = main(["quantize", "--scheme", "absmax", "--in", str(src), "--out", str(tmp_path / "y.qt8")])
        assert rc == 1


class TestSweepCommand:
    def test_exact_rows_are_zero(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", "--shapes", "8x32x8", "--schemes", "exact",
                   "--outlier-cols", "2", "--outlier-scale", "20", "--seeds", "1..3",
                   "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2 + 3
        for line in lines[2:]:
            fields = line.split(",")
            assert float(fields[7]) == 0.0 and float(fields[8]) == 0.0

    def test_deterministic_apart_from_timing(self, tmp_path):
        args = ["sweep", "--shapes", "8x32x8", "--schemes", "absmax,llmint8",
                "--outlier-cols", "2", "--outlier-scale", "20", "--seeds", "1..5"]
        main(args + ["--out", str(tmp_path / "a.csv")])
        main(args + ["--out", str(tmp_path / "b.csv")])
        a = _strip_timing((tmp_path / "a.csv").read_text())
        b = _strip_timing((tmp_path / "b.csv").read_text())
        assert a == b

    def test_summary_reports_scheme_ordering(self, tmp_path, capsys):
        rc = main(["sweep", "--shapes", "16x64x16", "--schemes", "absmax,vectorwise,llmint8",
                   "--outlier-cols", "2", "--outlier-scale", "20", "--seeds", "0..9",
                   "--out", str(tmp_path / "s.csv")])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        order = [line.split()[0] for line in lines if line.startswith("  ")]
        assert order == ["absmax", "vectorwise", "llmint8"]

    def test_unknown_scheme_is_runtime_error(self, tmp_path):
        rc = main(["sweep", "--shapes", "4x8x4", "--schemes", "fp4", "--seeds", "1",
                   "--out", str(tmp_path / "s.csv")])
        assert rc == 1


class TestAnalyzeCommand:
    def test_noise_only_stack_gives_empty_body(self, tmp_path, capsys):
        stack = synthetic_stack(4, 16, 8, noise_std=1.0, noise_clip=5.0, seed=0)
        save_stack(tmp_path / "stack", stack)
        out = tmp_path / "report.csv"
        assert main(["analyze", "--stack", str(tmp_path / "stack"), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1  # header only

    def test_planted_stack_end_to_end(self, tmp_path):
        stack = synthetic_stack(
            4, 20, 8, outlier_dims=(3,), magnitude=8.0, sign="negative",
            layer_coverage=0.5, noise_clip=5.0, seed=1,
        )
        save_stack(tmp_path / "stack", stack)
        out = tmp_path / "report.csv"
        assert main(["analyze", "--stack", str(tmp_path / "stack"), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        fields = lines[1].split(",")
        assert fields[0] == "3" and fields[2] == "1"  # dim 3, one-sided
        payload = json.loads((tmp_path / "report.csv.json").read_text())
        assert payload["dimensions"][0]["dim"] == 3

    def test_full_layer_threshold_empties_partial_plant(self, tmp_path):
        stack = synthetic_stack(
            4, 20, 8, outlier_dims=(3,), magnitude=8.0, layer_coverage=0.5,
            noise_clip=5.0, seed=1,
        )
        save_stack(tmp_path / "stack", stack)
        out = tmp_path / "report.csv"
        assert main(["analyze", "--stack", str(tmp_path / "stack"), "--layer-frac", "1.0",
                     "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 1

    def test_bad_stack_dir_is_runtime_error(self, tmp_path, capsys):
        rc = main(["analyze", "--stack", str(tmp_path / "missing"), "--out", str(tmp_path / "r.csv")])
        assert rc == 1


class TestAblateCommand:
    @pytest.fixture()
    def config_path(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({
            "layers": 2, "hidden": 128, "heads": 4, "vocab": 32, "seed": 3,
            "outlier_injection": {"dims": [5], "scale": 20.0},
        }))
        return path

    def test_detected_dims_hurt(self, tmp_path, config_path):
        out = tmp_path / "ablate.json"
        rc = main(["ablate", "--config", str(config_path), "--dims", "detected",
                   "--control", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert 5 in payload["detected_dims"]
        iso, cas = payload["isolate_layers"], payload["cascade"]
        assert iso["mean_top1_without"] < iso["mean_top1_with"]
        assert cas["ppl_proxy_without"] > cas["ppl_proxy_with"]
        ctrl = payload["control"]["isolate_layers"]
        assert ctrl["control"] is True
        assert abs(ctrl["mean_top1_with"] - ctrl["mean_top1_without"]) < abs(
            iso["mean_top1_with"] - iso["mean_top1_without"]
        )

    def test_empty_random_control_changes_nothing(self, tmp_path, config_path):
        out = tmp_path / "ablate.json"
        assert main(["ablate", "--config", str(config_path), "--dims", "random:0",
                     "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        for block in ("isolate_layers", "cascade"):
            assert payload[block]["mean_top1_with"] == payload[block]["mean_top1_without"]
            assert payload[block]["ppl_proxy_with"] == payload[block]["ppl_proxy_without"]

    def test_random_control_is_reproducible(self, tmp_path, config_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["ablate", "--config", str(config_path), "--dims", "random:3", "--out", str(a)])
        main(["ablate", "--config", str(config_path), "--dims", "random:3", "--out", str(b)])
        assert a.read_text() == b.read_text()

    def test_explicit_dim_list(self, tmp_path, config_path):
        out = tmp_path / "ablate.json"
        assert main(["ablate", "--config", str(config_path), "--dims", "1,5", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["isolate_layers"]["dims_zeroed"] == [1, 5]

    def test_oversized_control_is_runtime_error(self, tmp_path, config_path):
        rc = main(["ablate", "--config", str(config_path), "--dims", "random:999",
                   "--out", str(tmp_path / "x.json")])
        assert rc == 1


class TestMemCommand:
    def test_report(self, capsys):
        assert main(["mem", "--params", "1000", "--hidden", "100", "--outliers", "0"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ratio"] == 2.0

    def test_invalid_outliers(self, capsys):
        assert main(["mem", "--params", "10", "--hidden", "10", "--outliers", "11"]) == 1


class TestBenchCommand:
    def test_writes_csv(self, tmp_path):
        out = tmp_path / "bench.csv"
        rc = main(["bench", "--shapes", "16x64x16", "--schemes", "exact,llmint8",
                   "--reps", "3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2 + 2

    def test_too_few_reps_is_runtime_error(self, tmp_path):
        rc = main(["bench", "--shapes", "4x8x4", "--schemes", "exact", "--reps", "2",
                   "--out", str(tmp_path / "b.csv")])
        assert rc == 1
