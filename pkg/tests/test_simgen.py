"""Generator-level tests: known limits, Monte Carlo oracles, determinism."""

import json

import numpy as np
import pytest

from trendlab import simgen
from trendlab.simgen import (
    ConfigError,
    DegenerateLabelError,
    MarkovSwitchConfig,
    NoisyLineConfig,
    OuConfig,
    generate_markov_switch,
    generate_noisy_line,
    generate_piecewise_ou,
    load_dataset,
    make_dataset,
    save_dataset,
)


class TestNoisyLine:
    def test_noise_free_line_is_straight(self):
        cfg = NoisyLineConfig(gamma=1.0, n_slopes=1, sigma_max=1e-9,
                              n_segments_range=(1, 1), segment_len_range=(30, 30))
        # find a seed whose single slope draw is +gamma
        for seed in range(50):
            s = generate_noisy_line(cfg, seed)
            if s.gen_params["slopes"][0] == cfg.gamma:
                break
        else:
            pytest.fail("no seed drew the +gamma slope")
        np.testing.assert_allclose(s.y, s.y[0] + s.t, atol=1e-6)
        assert (s.labels == 1).all()

    def test_zero_slope_labels_flat(self):
        cfg = NoisyLineConfig(gamma=1.0, n_slopes=1, sigma_max=2.0,
                              n_segments_range=(1, 1), segment_len_range=(40, 40))
        for seed in range(80):
            s = generate_noisy_line(cfg, seed)
            if s.gen_params["slopes"][0] == 0.0:
                assert (s.labels == 0).all()
                return
        pytest.fail("no seed drew the zero slope")

    def test_segment_increment_means_match_slopes(self):
        # baseline-style training scale: slopes up to 1.4, noise up to 0.07
        cfg = NoisyLineConfig(gamma=1.4, n_slopes=5, sigma_max=0.07,
                              n_segments_range=(1, 4), segment_len_range=(40, 120))
        for seed in range(1000):
            s = generate_noisy_line(cfg, seed)
            pos = 1
            anchor = s.gen_params["y0"]
            for mu, sig, length in zip(s.gen_params["slopes"],
                                       s.gen_params["sigmas"],
                                       s.gen_params["lengths"]):
                # mean per-step increment measured from the segment anchor
                mean_inc = (s.y[pos + length - 1] - anchor) / length
                assert abs(mean_inc - mu) <= 3.0 * sig / np.sqrt(length)
                anchor += mu * length
                pos += length

    def test_slope_sign_matches_label_at_tiny_noise(self):
        cfg = NoisyLineConfig(gamma=1.0, n_slopes=5, sigma_max=1e-6,
                              n_segments_range=(2, 4), segment_len_range=(30, 60))
        for seed in range(20):
            s = generate_noisy_line(cfg, seed)
            pos = 1
            for mu, length in zip(s.gen_params["slopes"], s.gen_params["lengths"]):
                seg_t = s.t[pos:pos + length]
                seg_y = s.y[pos:pos + length]
                slope = np.polyfit(seg_t, seg_y, 1)[0]
                # ols slope of the segment agrees in sign with the label
                if mu != 0.0:
                    assert np.sign(slope) == s.labels[pos]
                else:
                    assert abs(slope) < 1e-6
                pos += length

    def test_gluing_continuity_at_boundaries(self):
        cfg = NoisyLineConfig(gamma=1.0, n_slopes=3, sigma_max=1e-12,
                              n_segments_range=(3, 5), segment_len_range=(10, 20))
        s = generate_noisy_line(cfg, 11)
        # with sigma ~ 0 the whole path is the continuous skeleton
        assert np.max(np.abs(np.diff(s.y))) <= cfg.gamma + 1e-9

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            generate_noisy_line(NoisyLineConfig(gamma=-1.0), 0)
        with pytest.raises(ConfigError):
            generate_noisy_line(NoisyLineConfig(sigma_max=0.0), 0)
        with pytest.raises(ConfigError):
            generate_noisy_line(NoisyLineConfig(n_segments_range=(3, 2)), 0)


class TestPiecewiseOu:
    def test_noiseless_relaxation_to_attractor(self):
        cfg = OuConfig(a_range=(2.0, 2.0), sigma=0.0, mu_range=(20.0, 20.0),
                       n_segments_range=(1, 1), segment_len_range=(20, 20), y0=1.0)
        s = generate_piecewise_ou(cfg, 0)
        assert (s.labels == 1).all()
        assert np.all(np.diff(s.y) >= 0)
        assert np.all(np.diff(s.y[:10]) > 0)
        assert abs(s.y[-1] - 10.0) < 1e-8

    def test_attractor_equal_anchor_labels_flat(self):
        # y0 = 1, a = 0.5, mu = 0.5 -> attractor exactly equals the anchor
        cfg = OuConfig(a_range=(0.5, 0.5), sigma=0.3, mu_range=(0.5, 0.5),
                       n_segments_range=(1, 1), segment_len_range=(50, 50), y0=1.0)
        s = generate_piecewise_ou(cfg, 4)
        assert (s.labels == 0).all()

    def test_single_step_conditional_variance(self):
        # Monte Carlo oracle for the exact-discretization step variance
        a, sigma, dt = 1.0, 1.0, 1.0
        cfg = OuConfig(a_range=(a, a), sigma=sigma, mu_range=(1.0, 1.0),
                       n_segments_range=(1, 1), segment_len_range=(1, 1), y0=1.0)
        draws = np.array([generate_piecewise_ou(cfg, seed).y[1]
                          for seed in range(100_000)])
        expected_var = sigma**2 * (1.0 - np.exp(-2 * a * dt)) / (2 * a)
        assert abs(draws.var() / expected_var - 1.0) < 0.02

    def test_zero_anchor_raises(self):
        cfg = OuConfig(a_range=(0.5, 0.5), sigma=0.0, mu_range=(0.0, 0.0),
                       n_segments_range=(1, 1), segment_len_range=(5, 5), y0=0.0)
        with pytest.raises(DegenerateLabelError):
            generate_piecewise_ou(cfg, 0)

    def test_nonpositive_a_rejected(self):
        with pytest.raises(ConfigError):
            generate_piecewise_ou(OuConfig(a_range=(0.0, 0.5)), 0)

    def test_noiseless_gluing_is_continuous(self):
        cfg = OuConfig(a_range=(0.2, 0.8), sigma=0.0, mu_range=(0.1, 2.0),
                       n_segments_range=(3, 4), segment_len_range=(15, 30))
        s = generate_piecewise_ou(cfg, 9)
        # each step moves at most the single-step deterministic pull
        assert np.all(np.isfinite(np.diff(s.y)))
        assert np.max(np.abs(np.diff(s.y))) < np.max(s.y) + 1.0


class TestMarkovSwitch:
    def test_zero_gamma_gives_pure_random_walk(self):
        cfg = MarkovSwitchConfig(gamma=0.0, sigma=0.01, length_range=(400, 400))
        s = generate_markov_switch(cfg, 5)
        lr = np.diff(np.log(s.y))
        assert abs(lr.mean()) < 5 * 0.01 / np.sqrt(len(lr))
        # the chain still produces non-trivial labels
        assert set(np.unique(s.labels)) <= {-1, 0, 1}

    def test_absorbing_chain_exponential_growth(self):
        eye = tuple(tuple(1.0 if i == j else 0.0 for j in range(3)) for i in range(3))
        cfg = MarkovSwitchConfig(transition=eye, gamma=0.02, sigma=1e-300,
                                 initial_dist=(0.0, 0.0, 1.0),
                                 length_range=(100, 100))
        s = generate_markov_switch(cfg, 1)
        assert (s.labels == 1).all()
        np.testing.assert_allclose(s.y, np.exp(0.02 * s.t), rtol=1e-9)

    def test_state_occupancy_matches_stationary_distribution(self):
        P = np.array([[0.90, 0.05, 0.05],
                      [0.10, 0.80, 0.10],
                      [0.05, 0.15, 0.80]])
        # oracle: left eigenvector of the transition matrix
        w, v = np.linalg.eig(P.T)
        stat = np.real(v[:, np.argmin(np.abs(w - 1.0))])
        stat = stat / stat.sum()
        cfg = MarkovSwitchConfig(transition=tuple(map(tuple, P)),
                                 gamma=0.01, sigma=0.01,
                                 length_range=(100_000, 100_000))
        s = generate_markov_switch(cfg, 123)
        occ = np.array([(s.labels == lab).mean() for lab in (-1, 0, 1)])
        np.testing.assert_allclose(occ, stat, atol=0.01)

    def test_per_state_return_moments(self):
        cfg = MarkovSwitchConfig(gamma=0.05, sigma=0.02, length_range=(100_000, 100_000))
        s = generate_markov_switch(cfg, 77)
        lr = np.diff(np.log(s.y))
        states = s.labels[1:]
        for lab in (-1, 0, 1):
            sel = lr[states == lab]
            se = cfg.sigma / np.sqrt(len(sel))
            assert abs(sel.mean() - cfg.gamma * lab) < 3 * se
            assert abs(sel.std() / cfg.sigma - 1.0) < 0.02

    def test_bad_transition_rejected(self):
        bad = ((0.5, 0.5, 0.5), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8))
        with pytest.raises(ConfigError):
            generate_markov_switch(MarkovSwitchConfig(transition=bad), 0)


class TestDatasets:
    def test_validation_defaults_compose_100_per_dynamic(self):
        ds = make_dataset("validation", seed=7)
        assert len(ds) == 300
        assert ds.composition == {"noisy_line": 100, "piecewise_ou": 100,
                                  "markov_switch": 100}
        assert all(500 <= len(s) <= 1001 for s in ds)

    def test_mixed_round_robin_split(self):
        ds = make_dataset("train", seed=1, dynamic="mixed", count=9)
        assert ds.composition == {"noisy_line": 3, "piecewise_ou": 3,
                                  "markov_switch": 3}

    def test_same_seed_serializes_identically(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(make_dataset("train", seed=5, count=6), p1)
        save_dataset(make_dataset("train", seed=5, count=6), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_roundtrip_preserves_series(self, tmp_path):
        ds = make_dataset("validation", seed=2, count=6)
        path = tmp_path / "ds.jsonl"
        save_dataset(ds, path)
        back = load_dataset(path, role="validation")
        assert len(back) == len(ds)
        for a, b in zip(ds, back):
            np.testing.assert_array_equal(a.y, b.y)
            np.testing.assert_array_equal(a.labels, b.labels)
            assert a.dynamic == b.dynamic and a.seed == b.seed

    def test_unknown_dynamic_rejected(self):
        with pytest.raises(ConfigError):
            make_dataset("train", seed=0, dynamic="sine_wave")

    def test_generators_are_pure_functions_of_seed(self):
        cfg = OuConfig()
        a = generate_piecewise_ou(cfg, 42)
        b = generate_piecewise_ou(cfg, 42)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_noise_scale_multiplies_sigma(self):
        cfg = NoisyLineConfig(sigma_max=0.5)
        assert cfg.with_noise_scale(5.0).sigma_max == 2.5
        assert MarkovSwitchConfig(sigma=0.1).with_noise_scale(5.0).sigma == 0.5

    def test_csv_export_shape(self, tmp_path):
        s = generate_noisy_line(NoisyLineConfig(n_segments_range=(1, 1),
                                                segment_len_range=(5, 5)), 3)
        path = tmp_path / "s.csv"
        simgen.export_series_csv(s, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,y,label"
        assert len(lines) == len(s) + 1

    def test_config_json_roundtrip(self):
        for cfg in (NoisyLineConfig(gamma=2.0), OuConfig(sigma=0.5),
                    MarkovSwitchConfig(gamma=0.01)):
            doc = json.loads(json.dumps(simgen.config_to_dict(cfg)))
            assert simgen.config_from_dict(doc) == cfg
