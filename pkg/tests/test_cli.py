"""End-to-end CLI workflows: exit codes, outputs, determinism."""

from __future__ import annotations

import pytest
from helpers import measurements_from, static_truth_model, swap_truth_model

from swapsim import io
from swapsim.cli import EXIT_INFEASIBLE, EXIT_MISMATCH, EXIT_OK, EXIT_VALIDATION, main

CONFIG = """
device:
  resources: {lut: 117120, ff: 234240, dsp: 1248, bram: 144, uram: 64}
  n_ports: 4
  per_port_bw: 4.8e9
  peak_flops: 1.2e12
  peak_bw: 1.92e10
model:
  n_layers: 24
  hidden_dim: 1536
  n_heads: 16
  l_prefill: 768
  l_sweep: [64, 128, 256]
  n_gen: 8
dse:
  alpha: 0.7
  l_long: 2048
  l_short: 64
  routability_margin: 0.87
reconfig:
  t_reconfig: 0.045
  trigger: after_last_attention
calibration:
  measurements: measurements.csv
"""


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "tool.yaml").write_text(CONFIG)
    io.write_measurements_csv(tmp_path / "measurements.csv", measurements_from(swap_truth_model()))
    return tmp_path


class TestVerifyKernels:
    def test_passes_on_defaults(self, capsys):
        assert main(["verify-kernels", "--seed", "3", "--sizes", "1x1,64x160,128x512"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "tlmm" in out and "attention" in out and "decode" in out

    def test_injected_fault_is_detected(self, capsys):
        code = main(["verify-kernels", "--seed", "3", "--sizes", "64x160", "--inject-fault"])
        assert code == EXIT_MISMATCH

    def test_bad_sizes_flag(self):
        assert main(["verify-kernels", "--sizes", "64by160"]) == EXIT_VALIDATION


class TestCalibrate:
    def test_writes_model_and_report(self, workspace, capsys):
        out = workspace / "out"
        code = main(["calibrate", "--config", str(workspace / "tool.yaml"), "--out-dir", str(out)])
        assert code == EXIT_OK
        model = io.load_model(out / "model.yaml")
        truth = swap_truth_model()
        assert model.coefficients() == pytest.approx(truth.coefficients(), rel=1e-9)
        assert (out / "calibration_report.txt").exists()

    def test_missing_config_is_validation_error(self, tmp_path):
        assert main(["calibrate", "--config", str(tmp_path / "none.yaml"), "--out-dir", str(tmp_path)]) == EXIT_VALIDATION

    def test_degenerate_measurements_rejected(self, workspace):
        ms = [m for m in measurements_from(swap_truth_model()) if m.phase == "prefill"]
        io.write_measurements_csv(workspace / "measurements.csv", ms)
        code = main(["calibrate", "--config", str(workspace / "tool.yaml"), "--out-dir", str(workspace)])
        assert code == EXIT_VALIDATION


class TestDseCommand:
    def _calibrated(self, workspace):
        out = workspace / "out"
        main(["calibrate", "--config", str(workspace / "tool.yaml"), "--out-dir", str(out)])
        return out / "model.yaml"

    def test_search_emits_design_and_points(self, workspace, capsys):
        model = self._calibrated(workspace)
        out = workspace / "dse"
        code = main(["dse", "--config", str(workspace / "tool.yaml"), "--model", str(model), "--out-dir", str(out)])
        assert code == EXIT_OK
        design = io.load_design(out / "best_design.yaml")
        assert design.pe_count_pre == 4
        assert (out / "dse_points.csv").read_text().count("\n") > 1

    def test_alpha_override_reflected_in_report(self, workspace, capsys):
        model = self._calibrated(workspace)
        out = workspace / "dse"
        main(["dse", "--config", str(workspace / "tool.yaml"), "--model", str(model),
              "--alpha", "0.25", "--out-dir", str(out)])
        assert "alpha = 0.25" in (out / "dse_report.txt").read_text()

    def test_infeasible_budget_exit_code(self, workspace, capsys):
        model = self._calibrated(workspace)
        crippled = CONFIG.replace("lut: 117120", "lut: 10")
        (workspace / "small.yaml").write_text(crippled)
        code = main(["dse", "--config", str(workspace / "small.yaml"), "--model", str(model),
                     "--out-dir", str(workspace / "dse2")])
        assert code == EXIT_INFEASIBLE
        assert "no feasible design" in (workspace / "dse2" / "dse_report.txt").read_text()

    def test_shrink_mode_runs(self, workspace, capsys):
        model = self._calibrated(workspace)
        out = workspace / "dse3"
        code = main(["dse", "--config", str(workspace / "tool.yaml"), "--model", str(model),
                     "--shrink", "--out-dir", str(out)])
        assert code == EXIT_OK
        assert io.load_design(out / "best_design.yaml").total.fits_within(
            io.load_model(model).baseline.r_proj.scale(1e9)  # sanity: loads fine
        )


class TestSimulateAndCompare:
    def _prepared(self, workspace):
        out = workspace / "out"
        main(["calibrate", "--config", str(workspace / "tool.yaml"), "--out-dir", str(out)])
        main(["dse", "--config", str(workspace / "tool.yaml"), "--model", str(out / "model.yaml"),
              "--out-dir", str(out)])
        return out / "model.yaml", out / "best_design.yaml"

    def test_simulate_outputs(self, workspace, capsys):
        model, design = self._prepared(workspace)
        out = workspace / "sim"
        code = main(["simulate", "--config", str(workspace / "tool.yaml"), "--model", str(model),
                     "--design", str(design), "--out-dir", str(out)])
        assert code == EXIT_OK
        timeline = (out / "timeline.csv").read_text()
        assert timeline.startswith("event,index,start_s,end_s")
        assert "reconfig_start" in timeline and "decode_step" in timeline
        curves = (out / "curves.csv").read_text().strip().splitlines()
        assert len(curves) == 1 + 3  # header + sweep rows

    def test_simulate_byte_identical_reruns(self, workspace, capsys):
        model, design = self._prepared(workspace)
        out_a, out_b = workspace / "sim_a", workspace / "sim_b"
        for out in (out_a, out_b):
            main(["simulate", "--config", str(workspace / "tool.yaml"), "--model", str(model),
                  "--design", str(design), "--out-dir", str(out)])
        assert (out_a / "timeline.csv").read_bytes() == (out_b / "timeline.csv").read_bytes()
        assert (out_a / "curves.csv").read_bytes() == (out_b / "curves.csv").read_bytes()

    def test_sweep_override_row_per_length(self, workspace, capsys):
        model, design = self._prepared(workspace)
        out = workspace / "sim"
        main(["simulate", "--config", str(workspace / "tool.yaml"), "--model", str(model),
              "--design", str(design), "--sweep", "64,512,1024,2048", "--out-dir", str(out)])
        assert len((out / "curves.csv").read_text().strip().splitlines()) == 5

    def test_compare_ratio_column(self, workspace, capsys):
        model, design = self._prepared(workspace)
        static = workspace / "static_model.yaml"
        io.save_model(static, static_truth_model())
        out = workspace / "cmp"
        code = main(["compare", "--config", str(workspace / "tool.yaml"),
                     "--model", str(model), "--design", str(design),
                     "--baseline-model", str(static), "--baseline-design", str(design),
                     "--sweep", "64,2048", "--out-dir", str(out)])
        assert code == EXIT_OK
        lines = (out / "compare.csv").read_text().strip().splitlines()
        assert lines[0].split(",")[0] == "l"
        ratios = [float(line.split(",")[-1]) for line in lines[1:]]
        assert ratios[1] >= ratios[0]  # larger gain at longer context
