import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seiswarp.errors import ConfigError, DegenerateFilterbankError, ShapeError
from seiswarp.signal_io import Segment
from seiswarp.spectral import (
    LINEAR,
    MEL,
    Filterbank,
    FrequencyScale,
    Spectrogram,
    StftConfig,
    apply_filterbank,
    build_filterbank,
    compute_spectrogram,
    hz_to_warped,
    load_spectrogram_csv,
    log_compress,
    read_pgm,
    save_spectrogram_csv,
    spectrogram_to_image,
    stft,
    warped_to_hz,
    write_pgm,
)

RECT = StftConfig(n_fft=256, hop=64, window="rectangular")


class TestScale:
    def test_zero_maps_to_zero(self):
        for scale in (MEL, FrequencyScale.warped(17.0, 0.3), LINEAR):
            assert hz_to_warped(0.0, scale) == 0.0
            assert warped_to_hz(0.0, scale) == 0.0

    def test_mel_at_700(self):
        assert abs(hz_to_warped(700.0) - 2595 * math.log10(2)) < 1e-9
        assert abs(hz_to_warped(700.0) - 781.1728) < 1e-4
        assert abs(warped_to_hz(2595 * math.log10(2)) - 700.0) < 1e-9

    @pytest.mark.parametrize("c1, c2", [(1.0, 1.0), (300.0, 2.5), (9000.0, 0.2)])
    def test_at_c2(self, c1, c2):
        s = FrequencyScale.warped(c1, c2)
        assert hz_to_warped(c2, s) == pytest.approx(c1 * math.log10(2), rel=1e-12)

    def test_mel_matches_textbook_formula(self, rng):
        f = rng.uniform(0, 20000, 1000)
        np.testing.assert_allclose(hz_to_warped(f, FrequencyScale.warped(2595, 700)),
                                   2595 * np.log10(1 + f / 700), rtol=1e-12)

    def test_linear_identity(self):
        f = np.array([0.0, 1.5, 44.0])
        np.testing.assert_array_equal(hz_to_warped(f, LINEAR), f)
        np.testing.assert_array_equal(warped_to_hz(f, LINEAR), f)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            hz_to_warped(-1.0)
        with pytest.raises(ValueError):
            warped_to_hz(-1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1.0, 1e5), st.floats(1e-2, 1e4),
           st.lists(st.floats(0, 1e5), min_size=2, max_size=20, unique=True))
    def test_monotone_and_invertible(self, c1, c2, freqs):
        s = FrequencyScale.warped(c1, c2)
        grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e5, 300)])
        assert np.all(np.diff(hz_to_warped(grid, s)) > 0)
        f = np.array(freqs)
        np.testing.assert_allclose(warped_to_hz(hz_to_warped(f, s), s), f, rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("text, expected", [
        ("linear", LINEAR), ("mel", MEL), ("warped:2595,700", MEL),
        ("warped: 10, 0.5", FrequencyScale.warped(10, 0.5)),
    ])
    def test_parse(self, text, expected):
        assert FrequencyScale.parse(text) == expected

    @pytest.mark.parametrize("text", ["log", "warped:1", "warped:-1,2", "warped:a,b", "warped:1,0"])
    def test_parse_rejects(self, text):
        with pytest.raises(ConfigError):
            FrequencyScale.parse(text)


class TestStft:
    def test_zero_signal(self):
        assert not stft(np.zeros(1024)).any()

    def test_shape(self):
        p = stft(np.ones(1000), StftConfig(256, 64))
        assert p.shape == ((1000 - 256) // 64 + 1, 129)

    def test_bin_centered_sinusoid(self):
        n = RECT.n_fft
        x = np.cos(2 * np.pi * 8 * np.arange(4 * n) / n)
        p = stft(x, RECT)
        np.testing.assert_allclose(p[:, 8], (n / 2) ** 2, rtol=1e-9)
        assert np.all(p[:, 8] / p.sum(axis=1) > 0.999)

    def test_parseval(self, rng):
        n = RECT.n_fft
        for _ in range(20):
            x = rng.standard_normal(n)
            p = stft(x, RECT)[0]
            total = p[0] + p[-1] + 2 * p[1:-1].sum()
            assert total == pytest.approx(n * np.sum(x ** 2), rel=1e-9)

    def test_frames_follow_hop(self, rng):
        x = rng.standard_normal(600)
        cfg = StftConfig(128, 50, "hann")
        p = stft(x, cfg)
        w = cfg.window_values()
        for t in range(p.shape[0]):
            ref = np.abs(np.fft.rfft(x[t * 50:t * 50 + 128] * w)) ** 2
            np.testing.assert_allclose(p[t], ref, rtol=1e-10, atol=1e-10)

    def test_hann_is_periodic(self):
        w = StftConfig(16, 4).window_values()
        np.testing.assert_allclose(w, 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(16) / 16), atol=1e-15)

    @pytest.mark.parametrize("kw", [dict(n_fft=100), dict(n_fft=8), dict(hop=0), dict(hop=300),
                                    dict(window="hamming")])
    def test_bad_config(self, kw):
        with pytest.raises(ConfigError):
            StftConfig(**kw)

    def test_too_short(self):
        with pytest.raises(Exception):
            stft(np.zeros(10))


class TestFilterbank:
    def test_single_linear_triangle(self):
        fb = build_filterbank(LINEAR, 1, StftConfig(256), 100.0)
        assert fb.centers_hz[0] == pytest.approx(25.0)
        assert np.argmax(fb.weights[0]) == 64
        assert fb.weights[0, 64] == pytest.approx(1.0)

    def test_uniform_warped_breaks(self):
        fb = build_filterbank(MEL, 3, StftConfig(256), 16000.0, 0.0, 8000.0)
        w = hz_to_warped(8000.0)
        np.testing.assert_allclose(hz_to_warped(fb.breaks_hz), [0, w / 4, w / 2, 3 * w / 4, w], rtol=1e-12)

    def test_linear_limit(self):
        cfg = StftConfig(256)
        lin = build_filterbank(LINEAR, 20, cfg, 100.0)
        far = build_filterbank(FrequencyScale.warped(1000.0, 1e9), 20, cfg, 100.0)
        np.testing.assert_allclose(far.weights, lin.weights, atol=1e-3)

    def test_c1_does_not_move_breaks(self):
        cfg = StftConfig(256)
        a = build_filterbank(FrequencyScale.warped(100.0, 5.0), 10, cfg, 100.0)
        b = build_filterbank(FrequencyScale.warped(9000.0, 5.0), 10, cfg, 100.0)
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(10, 5000), st.floats(2.0, 2000), st.integers(1, 30))
    def test_structure(self, c1, c2, n_filters):
        fb = build_filterbank(FrequencyScale.warped(c1, c2), n_filters, StftConfig(512), 100.0)
        W = fb.weights
        assert np.all(W >= 0) and np.all(W <= 1 + 1e-12)
        # no bin is covered by more than two filters, and only by neighbours
        for k in range(W.shape[1]):
            nz = np.flatnonzero(W[:, k] > 0)
            assert len(nz) <= 2
            if len(nz) == 2:
                assert nz[1] - nz[0] == 1
        c = fb.centers_hz
        assert np.all(np.diff(c) > 0)

    def test_area_norm(self):
        cfg = StftConfig(256)
        peak = build_filterbank(MEL, 8, cfg, 100.0)
        area = build_filterbank(MEL, 8, cfg, 100.0, norm="area")
        scale = 2 / (peak.breaks_hz[2:] - peak.breaks_hz[:-2])
        np.testing.assert_allclose(area.weights, peak.weights * scale[:, None])

    def test_degenerate(self):
        with pytest.raises(DegenerateFilterbankError):
            build_filterbank(FrequencyScale.warped(2595.0, 0.1), 24, StftConfig(256), 100.0)

    @pytest.mark.parametrize("kw", [dict(n_filters=0), dict(fmin_hz=30.0, fmax_hz=20.0),
                                    dict(fmax_hz=80.0), dict(norm="slaney")])
    def test_bad_arguments(self, kw):
        args = dict(scale=MEL, n_filters=4, cfg=StftConfig(256), sample_rate=100.0)
        args.update(kw)
        with pytest.raises(ConfigError):
            build_filterbank(**args)

    def test_apply_zero_and_ones(self):
        fb = build_filterbank(MEL, 6, StftConfig(128), 100.0)
        assert not apply_filterbank(np.zeros((3, 65)), fb).any()
        np.testing.assert_allclose(apply_filterbank(np.ones((1, 65)), fb)[0], fb.weights.sum(axis=1))

    def test_apply_one_hot(self, rng):
        picks = np.array([5, 0, 12, 3])
        W = np.zeros((4, 17))
        W[np.arange(4), picks] = 1.0
        fb = Filterbank(W, LINEAR, 0.0, 8.0, 16.0, np.linspace(0, 8, 6))
        power = rng.random((7, 17))
        np.testing.assert_array_equal(apply_filterbank(power, fb), power[:, picks])

    def test_apply_shape_mismatch(self):
        fb = build_filterbank(MEL, 6, StftConfig(128), 100.0)
        with pytest.raises(ShapeError):
            apply_filterbank(np.zeros((3, 64)), fb)

    def test_weights_read_only(self):
        fb = build_filterbank(MEL, 4, StftConfig(128), 100.0)
        with pytest.raises(ValueError):
            fb.weights[0, 0] = 3.0


class TestLogCompress:
    def test_unit_power(self):
        s = log_compress(np.ones((2, 3)))
        np.testing.assert_allclose(s.values, 10 * np.log10(1 + 1e-12))

    def test_floor(self):
        assert np.all(log_compress(np.zeros((2, 2)), -100.0).values == -100.0)
        assert np.all(log_compress(np.zeros((1, 1)), -150.0).values == pytest.approx(-120.0))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1e6), min_size=4, max_size=4), st.lists(st.floats(0, 1e6), min_size=4, max_size=4))
    def test_monotone(self, a, b):
        lo = np.minimum(a, b).reshape(2, 2)
        hi = np.maximum(a, b).reshape(2, 2)
        assert np.all(log_compress(lo).values <= log_compress(hi).values)

    def test_negative_rejected(self):
        with pytest.raises(Exception):
            log_compress(np.array([[-1.0]]))


def _segment(rng, n=1200, rate=100.0):
    return Segment(rng.standard_normal(n), rate)


class TestPipelineAndIO:
    def test_deterministic(self, rng):
        seg = _segment(rng)
        fb = build_filterbank(MEL, 16, StftConfig(), 100.0)
        a = compute_spectrogram(seg, fb)
        b = compute_spectrogram(seg, fb)
        assert a.values.tobytes() == b.values.tobytes()
        assert a.shape == (StftConfig().n_frames(1200), 16)
        np.testing.assert_allclose(a.frame_times_s[0], 128 / 100.0)

    def test_mel_equals_warped_2595_700(self, rng):
        seg = _segment(rng)
        a = compute_spectrogram(seg, build_filterbank(MEL, 10, StftConfig(), 100.0))
        b = compute_spectrogram(seg, build_filterbank(FrequencyScale.warped(2595, 700), 10, StftConfig(), 100.0))
        assert a.values.tobytes() == b.values.tobytes()

    def test_csv_round_trip(self, rng, tmp_path):
        seg = _segment(rng)
        scale = FrequencyScale.warped(123.4, 5.6)
        spec = compute_spectrogram(seg, build_filterbank(scale, 12, StftConfig(), 100.0))
        back = load_spectrogram_csv(save_spectrogram_csv(spec, tmp_path / "s.csv"))
        np.testing.assert_allclose(back.values, spec.values, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(back.frame_times_s, spec.frame_times_s, rtol=1e-12)
        np.testing.assert_allclose(back.channel_centers_hz, spec.channel_centers_hz, rtol=1e-12)
        assert back.scale == scale

    def test_image_of_silence(self, tmp_path):
        seg = Segment(np.zeros(1000), 100.0)
        spec = compute_spectrogram(seg, build_filterbank(MEL, 8, StftConfig(), 100.0))
        img = read_pgm(write_pgm(spec, tmp_path / "z.pgm"))
        assert img.shape == (8, spec.n_frames)
        assert len(np.unique(img)) == 1

    def test_image_mapping(self):
        vals = np.array([[-100.0, -50.0], [0.0, -100.0]])
        s = Spectrogram(vals, np.arange(2.0), np.array([1.0, 2.0]))
        img = spectrogram_to_image(s, -100.0)
        # rows are channels with the highest frequency on top
        np.testing.assert_array_equal(img, [[128, 0], [0, 255]])

    def test_pgm_round_trip(self, rng, tmp_path):
        s = Spectrogram(rng.uniform(-100, 0, (9, 5)), np.arange(9.0), np.arange(5.0))
        img = read_pgm(write_pgm(s, tmp_path / "r.pgm"))
        np.testing.assert_array_equal(img, spectrogram_to_image(s))

    def test_spectrogram_validation(self):
        with pytest.raises(ShapeError):
            Spectrogram(np.zeros((2, 2)), np.zeros(3), np.zeros(2))
