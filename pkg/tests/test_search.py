import math
from dataclasses import replace

import numpy as np
import pytest

from seiswarp.cluster import fit, nll
from seiswarp.errors import DataError
from seiswarp.features import extract_features, init_cnn
from seiswarp.pipeline import FeatureScaler, featurize, run_pipeline
from seiswarp.search import (
    SearchConfig,
    SearchFailedError,
    Trial,
    evaluate_constants,
    load_trial_log,
    sample_constants,
    save_trial_log,
    search_constants,
)
from seiswarp.spectral import MEL, FrequencyScale, build_filterbank, compute_spectrogram


class TestPipeline:
    def test_run_shapes(self, small_dataset, small_settings):
        run = run_pipeline(small_dataset, MEL, small_settings)
        assert run.features.shape == (20, small_settings.cnn.feature_dim)
        assert run.cnn.config.input_shape == run.spectrograms[0].shape
        np.testing.assert_allclose(run.features.mean(axis=0), 0, atol=1e-10)
        assert run.final_loss == pytest.approx(nll(run.model, run.features), rel=1e-12)

    def test_augmented_rows_follow_originals(self, small_dataset, small_settings):
        settings = replace(small_settings, augment=replace(small_settings.augment, copies_per_item=1))
        _, specs, *_ , feats = featurize(small_dataset, MEL, settings)
        assert len(specs) == feats.shape[0] == 40

    def test_scaler_round_trip(self, tmp_path, rng):
        s = FeatureScaler.fit(rng.standard_normal((10, 3)) * [1, 2, 0])
        assert s.std[2] == 1.0
        back = FeatureScaler.load(s.save(tmp_path / "s.csv"))
        np.testing.assert_array_equal(back.mean, s.mean)
        np.testing.assert_array_equal(back.std, s.std)

    def test_mixed_rates_rejected(self, small_dataset, small_settings):
        other = replace(small_dataset[0], sample_rate=50.0)
        with pytest.raises(DataError):
            run_pipeline([small_dataset[1], other], MEL, small_settings)


class TestEvaluate:
    def test_mel_identity(self, small_dataset, small_settings):
        assert evaluate_constants(2595.0, 700.0, small_dataset, small_settings) == \
            run_pipeline(small_dataset, MEL, small_settings).final_loss

    def test_deterministic(self, small_dataset, small_settings):
        a = evaluate_constants(500.0, 3.0, small_dataset, small_settings)
        assert a == evaluate_constants(500.0, 3.0, small_dataset, small_settings)

    def test_compositional(self, small_dataset, small_settings):
        data = small_dataset[:10]
        st = replace(small_settings, train=replace(small_settings.train, batch_size=5))
        scale = FrequencyScale.warped(800.0, 4.0)
        fb = build_filterbank(scale, st.n_filters, st.stft, 100.0)
        specs = [compute_spectrogram(s, fb, st.stft, st.floor_db) for s in data]
        cnn = init_cnn(replace(st.cnn, input_shape=specs[0].shape))
        raw = extract_features(cnn, specs)
        std = raw.std(axis=0)
        feats = (raw - raw.mean(axis=0)) / np.where(std > 0, std, 1.0)
        _, hist = fit(feats, st.train)
        assert evaluate_constants(800.0, 4.0, data, st) == pytest.approx(hist[-1], rel=1e-12)

    def test_empty(self, small_settings):
        with pytest.raises(DataError):
            evaluate_constants(100.0, 1.0, [], small_settings)


class TestSearch:
    def test_sampling_in_range(self):
        scfg = SearchConfig(c1_range=(5.0, 6.0), c2_range=(1e-3, 1e3), n_trials=500, trials_seed=2)
        d = sample_constants(scfg)
        assert d.shape == (500, 2)
        assert d[:, 0].min() >= 5.0 and d[:, 0].max() <= 6.0
        assert d[:, 1].min() >= 1e-3 and d[:, 1].max() <= 1e3
        # log-uniform: about half the draws fall below the geometric midpoint
        assert 0.4 < np.mean(d[:, 1] < 1.0) < 0.6

    def test_single_trial(self, small_dataset, small_settings):
        scfg = SearchConfig(c2_range=(2.0, 50.0), n_trials=1, inner_max_epochs=10, settings=small_settings)
        res = search_constants(small_dataset, scfg)
        assert len(res.trial_log) == 1
        assert (res.best_c1, res.best_c2) == (res.trial_log[0].c1, res.trial_log[0].c2)

    def test_argmin_and_determinism(self, small_dataset, small_settings, tmp_path):
        scfg = SearchConfig(c2_range=(0.1, 50.0), n_trials=6, trials_seed=1, inner_max_epochs=10,
                            settings=small_settings)
        a = search_constants(small_dataset, scfg)
        b = search_constants(small_dataset, replace(scfg, workers=3))
        text_a = save_trial_log(a.trial_log, tmp_path / "a.csv").read_bytes()
        assert text_a == save_trial_log(b.trial_log, tmp_path / "b.csv").read_bytes()
        assert any(not t.ok for t in a.trial_log)
        assert [t.index for t in a.trial_log] == list(range(6))
        good = [t for t in a.trial_log if t.ok]
        best = min(good, key=lambda t: t.loss)
        assert (a.best_c1, a.best_c2, a.best_loss) == (best.c1, best.c2, best.loss)

    def test_failed_trials_logged(self, small_dataset, small_settings):
        scfg = SearchConfig(c2_range=(0.01, 0.02), n_trials=2, inner_max_epochs=5, settings=small_settings)
        with pytest.raises(SearchFailedError) as info:
            search_constants(small_dataset, scfg)
        assert all("DegenerateFilterbankError" in t.error for t in info.value.trials)

    def test_trial_log_round_trip(self, tmp_path):
        trials = [Trial(0, 123.0, 4.5, 9.75), Trial(1, 9.0, 0.1, math.nan, "Boom: a, b")]
        back = load_trial_log(save_trial_log(trials, tmp_path / "t.csv"))
        assert back[0] == trials[0]
        assert math.isnan(back[1].loss) and back[1].error == "Boom: a; b"
