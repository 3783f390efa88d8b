import json
import math
from pathlib import Path

import numpy as np
import pytest

from spectro.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, EXIT_RUNTIME, main
from spectro.vipa import grid_from_csv, profile_fwhm_um

REPO = Path(__file__).resolve().parents[1]
CURRENT = REPO / "configs" / "current_setup.ini"
REDESIGNED = REPO / "configs" / "redesigned.ini"


def rewrite_config(path, out_dir, replacements=None, extra_pulses=None):
    """Copy a shipped config with a test-local output directory."""
    text = CURRENT.read_text() if path is None else Path(path).read_text()
    for old, new in (replacements or {}).items():
        assert old in text
        text = text.replace(old, new)
    text = text.replace("out_dir = runs/current", f"out_dir = {out_dir}")
    text = text.replace("out_dir = runs/redesigned", f"out_dir = {out_dir}")
    if extra_pulses is not None:
        text = text.replace("n_pulses = 2550", f"n_pulses = {extra_pulses}")
    cfg = Path(out_dir).parent / (Path(out_dir).name + ".ini")
    cfg.write_text(text)
    return cfg


class TestDesignCommand:
    def test_current_setup_report(self, tmp_path, capsys):
        cfg = rewrite_config(None, tmp_path / "out")
        assert main(["design", "--config", str(cfg)]) == EXIT_OK
        doc = json.loads((tmp_path / "out" / "design.json").read_text())
        assert doc["theta_in_deg"] == pytest.approx(0.68, abs=0.1)
        assert doc["f_x_mm"] == pytest.approx(1016.0, rel=0.02)
        assert doc["f_in_min_mm"] == pytest.approx(57.0, rel=0.10)
        assert doc["f_in_max_mm"] == pytest.approx(415.0, rel=0.10)
        report = capsys.readouterr().out
        assert "0.68" in report and "f_in" in report

    def test_fwhm_target_flag_adds_thickness(self, tmp_path):
        cfg = rewrite_config(None, tmp_path / "out")
        assert main(["design", "--config", str(cfg), "--fwhm-target", "120"]) == EXIT_OK
        doc = json.loads((tmp_path / "out" / "design.json").read_text())
        assert doc["t_mm"] == pytest.approx(16.5, rel=0.01)

    def test_infeasible_spacing_exit_code(self, tmp_path, capsys):
        cfg = rewrite_config(None, tmp_path / "out", {"delta_nu_mhz = 120": "delta_nu_mhz = 99000"})
        assert main(["design", "--config", str(cfg)]) == EXIT_INFEASIBLE
        assert "FSR" in capsys.readouterr().err

    def test_flags_configured_f_in_outside_interval(self, tmp_path, capsys):
        cfg = rewrite_config(REDESIGNED, tmp_path / "out")
        assert main(["design", "--config", str(cfg)]) == EXIT_OK
        assert "OUTSIDE" in capsys.readouterr().out  # the 498 mm lens misses the interval


class TestProfileCommand:
    def test_profiles_and_fwhm_ratio(self, tmp_path):
        out_a, out_b = tmp_path / "cur", tmp_path / "new"
        assert main(["profile", "--config", str(rewrite_config(None, out_a))]) == EXIT_OK
        assert main(["profile", "--config", str(rewrite_config(REDESIGNED, out_b))]) == EXIT_OK
        cur = grid_from_csv(out_a / "profile_+0MHz.csv")
        new = grid_from_csv(out_b / "profile_+0MHz.csv")
        ratio = profile_fwhm_um(cur.x_um, cur.values[0]) / profile_fwhm_um(new.x_um, new.values[0])
        assert ratio > 1.5
        peak = cur.x_um[int(np.argmax(cur.values[0]))]
        assert abs(peak) < 2.0

    def test_emitted_csv_matches_memory(self, tmp_path):
        import spectro.vipa as vp
        from spectro.config import load_config

        cfg_path = rewrite_config(None, tmp_path / "out")
        assert main(["profile", "--config", str(cfg_path)]) == EXIT_OK
        cfg = load_config(cfg_path)
        lam = vp.resonance_aligned_wavelength(cfg.vipa, cfg.layout, 120.0)
        grid = vp.intensity_grid(cfg.vipa, cfg.layout, lam, (-150.0, 150.0), None, 2048)
        back = grid_from_csv(tmp_path / "out" / "profile_+120MHz.csv")
        np.testing.assert_array_equal(grid.values, back.values)


class TestSimulateCommand:
    def test_seed_reproducibility(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            cfg = rewrite_config(None, out, extra_pulses=300)
            assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
        for name in ("events_+0MHz.csv", "events_+120MHz.csv", "events_+240MHz.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_worker_invariance(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cfg_a = rewrite_config(None, out_a, extra_pulses=300)
        cfg_b = rewrite_config(None, out_b, extra_pulses=300)
        assert main(["simulate", "--config", str(cfg_a), "--workers", "1"]) == EXIT_OK
        assert main(["simulate", "--config", str(cfg_b), "--workers", "4"]) == EXIT_OK
        assert (out_a / "events_+0MHz.csv").read_bytes() == (out_b / "events_+0MHz.csv").read_bytes()

    def test_zero_pulses_empty_files(self, tmp_path):
        cfg = rewrite_config(None, tmp_path / "out")
        assert main(["simulate", "--config", str(cfg), "--pulses", "0"]) == EXIT_OK
        text = (tmp_path / "out" / "events_+0MHz.csv").read_text()
        assert text == "pulse_index,element,time_tag_ns\n"

    def test_seed_flag_changes_output(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cfg_a = rewrite_config(None, out_a, extra_pulses=300)
        cfg_b = rewrite_config(None, out_b, extra_pulses=300)
        assert main(["simulate", "--config", str(cfg_a)]) == EXIT_OK
        assert main(["simulate", "--config", str(cfg_b), "--seed", "99"]) == EXIT_OK
        assert (out_a / "events_+0MHz.csv").read_bytes() != (out_b / "events_+0MHz.csv").read_bytes()


class TestAnalyzeCommand:
    def test_end_to_end_shift(self, tmp_path, capsys):
        import time

        cfg = rewrite_config(None, tmp_path / "out")
        t0 = time.perf_counter()
        assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
        assert time.perf_counter() - t0 < 10.0  # 2550 pulses x 3 detunings budget
        assert main(["analyze", "--config", str(cfg)]) == EXIT_OK
        shifts = json.loads((tmp_path / "out" / "shifts.json").read_text())
        by_det = {row["detuning_mhz"]: row["shift_elements"] for row in shifts}
        assert by_det[0.0] == 0.0
        assert by_det[120.0] == pytest.approx(1.0, abs=0.4)
        fits = json.loads((tmp_path / "out" / "fits.json").read_text())
        assert set(fits) == {"+0MHz", "+120MHz", "+240MHz"}
        assert all(f["converged"] for f in fits.values())
        for name in ("time_histograms_+0MHz.csv", "spatial_profile_+0MHz.csv"):
            assert (tmp_path / "out" / name).exists()

    def test_malformed_events_exit_code(self, tmp_path, capsys):
        cfg = rewrite_config(None, tmp_path / "out")
        out = tmp_path / "out"
        out.mkdir()
        for det in ("+0MHz", "+120MHz", "+240MHz"):
            (out / f"events_{det}.csv").write_text("pulse_index,element,time_tag_ns\n0,5,banana\n")
        assert main(["analyze", "--config", str(cfg)]) == EXIT_RUNTIME
        assert "line 2" in capsys.readouterr().err


class TestHeraldCommand:
    def test_crossovers_and_sweep(self, tmp_path):
        cfg = rewrite_config(None, tmp_path / "out")
        assert main(["herald", "--config", str(cfg)]) == EXIT_OK
        cross = json.loads((tmp_path / "out" / "herald_crossovers.json").read_text())
        assert cross == {"s2": 188, "s3": 17, "s4": 5}
        lines = (tmp_path / "out" / "herald_sweep.csv").read_text().splitlines()
        assert lines[0] == "M,p_single,p_multi_s2,p_multi_s3,p_multi_s4"
        assert len(lines) == 1 + 250
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(1.8e-3, rel=1e-12)

    def test_idempotent_outputs(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            cfg = rewrite_config(None, out)
            assert main(["herald", "--config", str(cfg)]) == EXIT_OK
        assert (out_a / "herald_sweep.csv").read_bytes() == (out_b / "herald_sweep.csv").read_bytes()


class TestConfigHandling:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = rewrite_config(None, tmp_path / "out", {"eta_chain = 0.69": "eta_chainz = 0.69"})
        assert main(["design", "--config", str(cfg)]) == EXIT_CONFIG
        assert "eta_chainz" in capsys.readouterr().err

    def test_invalid_value_rejected_before_output(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = rewrite_config(None, out, {"pde = 0.5": "pde = 1.5"})
        assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG
        assert not (out / "events_+0MHz.csv").exists()

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["design", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG

    def test_env_var_overrides_out(self, tmp_path, monkeypatch):
        cfg = rewrite_config(None, tmp_path / "ignored")
        target = tmp_path / "env_out"
        monkeypatch.setenv("SPECTRO_OUT", str(target))
        assert main(["herald", "--config", str(cfg)]) == EXIT_OK
        assert (target / "herald_sweep.csv").exists()
        assert not (tmp_path / "ignored").exists()
