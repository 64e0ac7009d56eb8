import json
import struct

import numpy as np
import pytest

from eflash_nmc.cli import main
from eflash_nmc.model import model_from_dict, save_model


@pytest.fixture
def toy_model_path(tmp_path):
    rng = np.random.default_rng(0)
    doc = {
        "name": "toy",
        "task": "classify",
        "layers": [
            {
                "in": 32, "out": 8,
                "weights": rng.integers(-8, 8, 32 * 8).tolist(),
                "bias": rng.integers(-50, 50, 8).tolist(),
                "input_scale": 1 / 255.0, "input_zp": -128,
                "requant_scales": [0.01] * 8, "output_zp": 0,
                "activation": "relu",
            },
            {
                "in": 8, "out": 4,
                "weights": rng.integers(-8, 8, 32).tolist(),
                "bias": [0, 0, 0, 0],
                "input_scale": 0.01, "input_zp": 0,
                "requant_scales": [0.05] * 4, "output_zp": 0,
                "activation": "none",
            },
        ],
    }
    path = tmp_path / "toy.json"
    save_model(model_from_dict(doc), path)
    return path


@pytest.fixture
def quiet_config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "banks": 1, "rows_per_bank": 8,
        "erased_sigma_mv": 0.0, "step_sigma_mv": 0.0, "seed": 17,
    }))
    return path


@pytest.fixture
def idx_paths(tmp_path):
    rng = np.random.default_rng(1)
    images = rng.integers(0, 256, (30, 32, 1)).astype(np.uint8)
    labels = rng.integers(0, 4, 30).astype(np.uint8)
    img = tmp_path / "img-idx3"
    lbl = tmp_path / "lbl-idx1"
    img.write_bytes(struct.pack(">iiii", 0x803, *images.shape) + images.tobytes())
    lbl.write_bytes(struct.pack(">ii", 0x801, 30) + labels.tobytes())
    return img, lbl


class TestProgramCommand:
    def test_success_writes_report_and_state(self, tmp_path, toy_model_path, quiet_config_path):
        out = tmp_path / "report.json"
        state = tmp_path / "state.bin"
        code = main(["program", "--config", str(quiet_config_path),
                     "--model", str(toy_model_path),
                     "--out", str(out), "--state-out", str(state)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["placement"]["base_rows"] == [0, 1]
        assert state.exists() and (tmp_path / "state.bin.json").exists()

    def test_missing_model_exits_3(self, tmp_path, quiet_config_path):
        code = main(["program", "--config", str(quiet_config_path),
                     "--model", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "r.json")])
        assert code == 3

    def test_bad_config_exits_2(self, tmp_path, toy_model_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"banks": 0}))
        code = main(["program", "--config", str(cfg),
                     "--model", str(toy_model_path),
                     "--out", str(tmp_path / "r.json")])
        assert code == 2

    def test_capacity_exceeded_exits_4(self, tmp_path, toy_model_path):
        cfg = tmp_path / "tiny.json"
        cfg.write_text(json.dumps({
            "banks": 1, "rows_per_bank": 1,
            "erased_sigma_mv": 0.0, "step_sigma_mv": 0.0,
        }))
        code = main(["program", "--config", str(cfg),
                     "--model", str(toy_model_path),
                     "--out", str(tmp_path / "r.json")])
        assert code == 4

    def test_conventional_driver_exits_6(self, tmp_path, toy_model_path):
        cfg = tmp_path / "conv.json"
        cfg.write_text(json.dumps({
            "banks": 1, "rows_per_bank": 8,
            "erased_sigma_mv": 0.0, "step_sigma_mv": 0.0,
            "driver_variant": "conventional",
        }))
        code = main(["program", "--config", str(cfg),
                     "--model", str(toy_model_path),
                     "--out", str(tmp_path / "r.json")])
        assert code == 6


class TestBakeCommand:
    def _programmed_state(self, tmp_path, toy_model_path, quiet_config_path):
        state = tmp_path / "state.bin"
        assert main(["program", "--config", str(quiet_config_path),
                     "--model", str(toy_model_path),
                     "--out", str(tmp_path / "r.json"),
                     "--state-out", str(state)]) == 0
        return state

    def test_zero_drift_zero_misreads(self, tmp_path, toy_model_path, quiet_config_path):
        state = self._programmed_state(tmp_path, toy_model_path, quiet_config_path)
        out = tmp_path / "bake.json"
        code = main(["bake", "--config", str(quiet_config_path),
                     "--state", str(state), "--loss-fraction", "0",
                     "--sigma-mv", "0", "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["misreads"] == 0

    def test_large_sigma_reports_misreads(self, tmp_path, toy_model_path, quiet_config_path):
        state = self._programmed_state(tmp_path, toy_model_path, quiet_config_path)
        out = tmp_path / "bake.json"
        main(["bake", "--config", str(quiet_config_path),
              "--state", str(state), "--loss-fraction", "0.2",
              "--sigma-mv", "400", "--out", str(out)])
        assert json.loads(out.read_text())["misreads"] > 0

    def test_rerun_is_byte_identical(self, tmp_path, toy_model_path, quiet_config_path):
        state = self._programmed_state(tmp_path, toy_model_path, quiet_config_path)
        outs = []
        for name in ("a.json", "b.json"):
            main(["bake", "--config", str(quiet_config_path),
                  "--state", str(state), "--loss-fraction", "0.1",
                  "--sigma-mv", "30", "--out", str(tmp_path / name)])
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]


class TestInferCommand:
    def test_infer_matches_between_runs(self, tmp_path, toy_model_path,
                                        quiet_config_path, idx_paths):
        img, lbl = idx_paths
        payloads = []
        for name in ("e1.json", "e2.json"):
            code = main(["infer", "--config", str(quiet_config_path),
                         "--model", str(toy_model_path),
                         "--images", str(img), "--labels", str(lbl),
                         "--out", str(tmp_path / name)])
            assert code == 0
            payloads.append((tmp_path / name).read_bytes())
        assert payloads[0] == payloads[1]

    def test_infer_from_saved_state_matches_fresh(self, tmp_path, toy_model_path,
                                                  quiet_config_path, idx_paths):
        img, lbl = idx_paths
        state = tmp_path / "s.bin"
        main(["program", "--config", str(quiet_config_path),
              "--model", str(toy_model_path),
              "--out", str(tmp_path / "r.json"), "--state-out", str(state)])
        main(["infer", "--config", str(quiet_config_path),
              "--model", str(toy_model_path), "--state", str(state),
              "--images", str(img), "--labels", str(lbl),
              "--out", str(tmp_path / "from_state.json")])
        main(["infer", "--config", str(quiet_config_path),
              "--model", str(toy_model_path),
              "--images", str(img), "--labels", str(lbl),
              "--out", str(tmp_path / "fresh.json")])
        a = json.loads((tmp_path / "from_state.json").read_text())
        b = json.loads((tmp_path / "fresh.json").read_text())
        assert a["predictions"] == b["predictions"]

    def test_jobs_sharding_matches_single(self, tmp_path, toy_model_path,
                                          quiet_config_path, idx_paths):
        img, lbl = idx_paths
        for name, jobs in (("j1.json", "1"), ("j4.json", "4")):
            main(["infer", "--config", str(quiet_config_path),
                  "--model", str(toy_model_path), "--jobs", jobs,
                  "--images", str(img), "--labels", str(lbl),
                  "--out", str(tmp_path / name)])
        a = json.loads((tmp_path / "j1.json").read_text())
        b = json.loads((tmp_path / "j4.json").read_text())
        assert a["predictions"] == b["predictions"]
        assert a["value"] == b["value"]


class TestHistAndPumptrace:
    def test_hist_erased_macro_single_cluster(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"banks": 1, "rows_per_bank": 4,
                                   "erased_sigma_mv": 0.0}))
        out = tmp_path / "hist.csv"
        assert main(["hist", "--config", str(cfg), "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "bin_left_mv,count"
        nonzero = [l for l in lines[1:] if not l.endswith(",0")]
        assert len(nonzero) == 1

    def test_pumptrace_reaches_target(self, tmp_path):
        out = tmp_path / "trace.csv"
        assert main(["pumptrace", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("step,vpp1")
        vpp4 = [float(l.split(",")[4]) for l in lines[1:]]
        assert max(vpp4) >= 0.98 * 10000.0
        assert vpp4[-1] <= 1.0  # fully discharged at the end


class TestSelftest:
    def test_selftest_passes(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
