from __future__ import annotations

import numpy as np
import pytest

from wavecaster import restore
from wavecaster.restore import (
    ArModel,
    InsufficientContextError,
    RestoreError,
    burg_coefficients,
    extrapolate,
    gap_fill,
)


class TestBurg:
    def test_constant_signal_perfect_predictor(self):
        model = burg_coefficients(np.full(100, 3.0), 1)
        assert model.coefficients[0] == pytest.approx(1.0, abs=1e-9)
        assert model.error_variance == pytest.approx(0.0, abs=1e-12)

    def test_sinusoid_recovers_ar2(self):
        omega = 0.1
        x = np.cos(omega * np.arange(32768))
        model = burg_coefficients(x, 2)
        assert model.coefficients[0] == pytest.approx(2 * np.cos(omega), abs=1e-6)
        assert model.coefficients[1] == pytest.approx(-1.0, abs=1e-6)

    def test_white_noise_error_near_variance(self):
        rng = np.random.default_rng(42)
        noise = rng.standard_normal(8192)
        model = burg_coefficients(noise, 8)
        assert abs(model.error_variance - noise.var()) / noise.var() < 0.10

    def test_reflection_bounded_and_error_monotone(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = rng.integers(40, 400)
            order = int(rng.integers(1, 16))
            signal = rng.standard_normal(n) * rng.uniform(0.01, 100)
            if n <= 2 * order:
                continue
            model = burg_coefficients(signal, order)
            assert np.all(np.abs(model.reflection) <= 1.0)
            assert np.all(np.diff(model.error_variances) <= 1e-9)
            assert model.error_variances[-1] >= -1e-12

    def test_too_short_input(self):
        with pytest.raises(InsufficientContextError):
            burg_coefficients(np.ones(8), 4)

    def test_non_finite_rejected(self):
        bad = np.ones(64)
        bad[10] = np.nan
        with pytest.raises(RestoreError):
            burg_coefficients(bad, 2)

    def test_bad_order(self):
        with pytest.raises(RestoreError):
            burg_coefficients(np.ones(64), 0)


class TestExtrapolate:
    def test_continues_sinusoid(self):
        omega = 0.2
        n = 32768
        x = np.cos(omega * np.arange(n))
        model = burg_coefficients(x, 2)
        continued = extrapolate(model, x[-2:], 100)
        expected = np.cos(omega * (np.arange(n, n + 100)))
        assert np.max(np.abs(continued - expected)) < 1e-3

    def test_short_seed_rejected(self):
        model = burg_coefficients(np.cos(0.3 * np.arange(256)), 4)
        with pytest.raises(InsufficientContextError):
            extrapolate(model, np.ones(2), 10)


class TestGapFill:
    def test_zero_length_gap_is_identity(self):
        signal = np.sin(0.05 * np.arange(500))
        out = gap_fill(signal, 200, 0, 8)
        assert np.array_equal(out, signal)

    def test_sinusoid_gap_under_one_percent(self):
        omega = 2 * np.pi * 440 / 44100
        signal = np.sin(omega * np.arange(11025))
        start, length = 5000, 256
        repaired = gap_fill(signal, start, length, 32)
        truth = signal[start:start + length]
        err = np.sqrt(np.mean((repaired[start:start + length] - truth) ** 2))
        assert err / np.sqrt(np.mean(truth ** 2)) < 0.01

    def test_untouched_outside_gap(self):
        rng = np.random.default_rng(5)
        signal = rng.standard_normal(2000)
        out = gap_fill(signal, 900, 120, 16)
        assert np.array_equal(out[:900], signal[:900])
        assert np.array_equal(out[1020:], signal[1020:])

    def test_noise_output_bounded(self):
        rng = np.random.default_rng(11)
        signal = rng.standard_normal(4000)
        out = gap_fill(signal, 1800, 400, 32)
        assert np.all(np.isfinite(out))
        assert np.max(np.abs(out)) <= 4 * np.max(np.abs(signal))

    def test_time_reversal_symmetry(self):
        rng = np.random.default_rng(9)
        signal = np.cumsum(rng.standard_normal(3000)) * 0.01
        start, length = 1400, 150
        forward = gap_fill(signal, start, length, 20)
        reversed_fill = gap_fill(
            signal[::-1], len(signal) - start - length, length, 20
        )[::-1]
        assert np.max(np.abs(forward - reversed_fill)) < 1e-9

    def test_insufficient_context(self):
        signal = np.sin(0.1 * np.arange(300))
        with pytest.raises(InsufficientContextError):
            gap_fill(signal, 10, 50, 32)  # only 10 samples before the gap
        with pytest.raises(InsufficientContextError):
            gap_fill(signal, 280, 15, 32)  # only 5 samples after

    def test_gap_outside_signal(self):
        with pytest.raises(RestoreError):
            gap_fill(np.ones(100), 90, 20, 4)


class TestWavCli:
    def test_round_trip(self, tmp_path):
        from wavecaster.cli import main, read_mono_wav, write_mono_wav

        omega = 2 * np.pi * 440 / 44100
        signal = 0.5 * np.sin(omega * np.arange(11025))
        src = tmp_path / "in.wav"
        dst = tmp_path / "out.wav"
        write_mono_wav(str(src), signal, 44100)

        code = main([
            "restore",
            "--in", str(src),
            "--gap-start", "5000",
            "--gap-len", "256",
            "--order", "32",
            "--out", str(dst),
        ])
        assert code == 0
        repaired, rate = read_mono_wav(str(dst))
        assert rate == 44100
        window = repaired[5000:5256]
        truth = signal[5000:5256]
        err = np.sqrt(np.mean((window - truth) ** 2)) / np.sqrt(np.mean(truth ** 2))
        assert err < 0.01
