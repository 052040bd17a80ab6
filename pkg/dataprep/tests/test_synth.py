import subprocess
import sys

import pytest

from dataprep.synth import SynthError, SyntheticSpec, generate, generate_to_dir, teacher_stats


def spec_with(**kw):
    defaults = dict(
        name="synthetic",
        class_names=("a", "b", "c"),
        online_size=1500,
        test_size=500,
        teacher_accuracy=0.85,
        seed=0,
    )
    defaults.update(kw)
    return SyntheticSpec(**defaults)


class TestCalibration:
    def test_accuracy_within_tolerance_at_scale(self):
        spec = spec_with(online_size=8000, test_size=2000, teacher_accuracy=0.9, seed=3)
        online, test = generate(spec)
        stats = teacher_stats(online + test)
        assert abs(stats["accuracy"] - 0.9) <= 0.01

    def test_wrong_margins_below_correct(self):
        online, test = generate(spec_with(seed=5))
        stats = teacher_stats(online + test)
        assert stats["mean_margin_wrong"] < stats["mean_margin_correct"]

    def test_various_targets(self):
        for target in (0.6, 0.75, 0.95):
            online, test = generate(spec_with(online_size=4000, test_size=1000,
                                              teacher_accuracy=target, seed=7))
            stats = teacher_stats(online + test)
            assert abs(stats["accuracy"] - target) <= 0.01, target


class TestValidation:
    def test_accuracy_one_with_noise_infeasible(self):
        with pytest.raises(SynthError, match="infeasible"):
            spec_with(teacher_accuracy=1.0).validate()

    def test_below_chance_infeasible(self):
        with pytest.raises(SynthError, match="chance"):
            spec_with(teacher_accuracy=0.3, class_names=("a", "b", "c")).validate()

    def test_zero_noise_rejected(self):
        with pytest.raises(SynthError, match="noise"):
            spec_with(noise_scale=0.0).validate()


class TestDeterminism:
    def test_same_spec_identical_files(self, tmp_path):
        spec = spec_with(online_size=200, test_size=50)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        generate_to_dir(spec, str(d1))
        generate_to_dir(spec, str(d2))
        for name in ("manifest.json", "online.jsonl", "test.jsonl"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


class TestSimulatorInterop:
    def test_emitted_directory_passes_simulator_validate(self, tmp_path):
        out = tmp_path / "ds"
        generate_to_dir(spec_with(online_size=300, test_size=80), str(out))
        proc = subprocess.run(
            [sys.executable, "-m", "neucache.cli", "validate", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "OK" in proc.stdout
