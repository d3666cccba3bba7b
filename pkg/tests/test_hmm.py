"""Baum-Welch fitting and posterior-decoding classification."""

import numpy as np
import pytest

from trendlab.hmm import (
    HmmInputError,
    HmmModel,
    hmm_classify,
    hmm_fit,
    load_hmm,
    save_hmm,
    state_label_order,
)
from trendlab.simgen import MarkovSwitchConfig, generate_markov_switch, make_dataset


def switching_series(gamma, sigma, n, seeds, stay=0.95):
    cfg = MarkovSwitchConfig(
        transition=tuple(tuple(stay if i == j else (1 - stay) / 2 for j in range(3))
                         for i in range(3)),
        gamma=gamma, sigma=sigma, length_range=(n, n))
    return [generate_markov_switch(cfg, s) for s in seeds]


class TestFit:
    def test_recovers_well_separated_means(self):
        series = switching_series(gamma=0.1, sigma=0.01, n=400, seeds=range(10))
        model, history = hmm_fit(series, seed=0)
        recovered = np.sort(model.means)
        for got, want in zip(recovered, (-0.1, 0.0, 0.1)):
            assert abs(got - want) <= 0.1 * 0.1 + 1e-3

    def test_loglik_monotone_nondecreasing(self):
        series = switching_series(gamma=0.05, sigma=0.05, n=300, seeds=range(6))
        _, history = hmm_fit(series, seed=1)
        diffs = np.diff(history)
        assert np.all(diffs >= -1e-9)

    def test_iid_data_symmetric_start_is_em_fixed_point(self):
        # with indistinguishable states the posteriors stay uniform, so the
        # M-step pins every state at the pooled sample moments
        rng = np.random.default_rng(2)
        returns = rng.normal(0.002, 0.01, size=2000)
        y = np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
        sym = HmmModel(initial=np.full(3, 1 / 3),
                       transition=np.full((3, 3), 1 / 3),
                       means=np.full(3, returns.mean()),
                       vars=np.full(3, returns.var()))
        model, _ = hmm_fit([y], max_iters=10, seed=3, init=sym)
        np.testing.assert_allclose(model.means, returns.mean(), atol=1e-12)
        np.testing.assert_allclose(model.vars, returns.var(), rtol=1e-10)

    def test_nonpositive_series_rejected(self):
        with pytest.raises(HmmInputError):
            hmm_fit([np.array([1.0, -2.0, 3.0])])

    def test_fit_accepts_dataset(self):
        ds = make_dataset("train", seed=3, dynamic="markov_switch", count=3)
        model, history = hmm_fit(ds, max_iters=10, seed=0)
        model.validate()
        assert len(history) >= 1


class TestClassify:
    def test_near_noiseless_decoding_is_exact(self):
        series = switching_series(gamma=0.05, sigma=0.002, n=400, seeds=[11])[0]
        model, _ = hmm_fit([series], max_iters=60, seed=0)
        labels, probs = hmm_classify(model, series)
        assert np.mean(labels == series.labels) > 0.99
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_well_separated_accuracy(self):
        train = switching_series(gamma=0.1, sigma=0.01, n=400, seeds=range(8))
        test = switching_series(gamma=0.1, sigma=0.01, n=400, seeds=range(100, 108))
        model, _ = hmm_fit(train, seed=4)
        accs = []
        for s in test:
            labels, _ = hmm_classify(model, s)
            accs.append(np.mean(labels == s.labels))
        assert np.mean(accs) >= 0.95

    def test_state_order_maps_sorted_means(self):
        model = HmmModel(initial=np.full(3, 1 / 3),
                         transition=np.full((3, 3), 1 / 3),
                         means=np.array([0.05, -0.05, 0.0]),
                         vars=np.array([1e-4, 1e-4, 1e-4]))
        order = state_label_order(model)
        np.testing.assert_array_equal(order, [1, 2, 0])

    def test_posterior_scaling_survives_long_sequences(self):
        series = switching_series(gamma=0.02, sigma=0.02, n=100_000, seeds=[5])[0]
        model, _ = hmm_fit([series.y[:5_000]], max_iters=10, seed=6)
        labels, probs = hmm_classify(model, series)
        assert np.all(np.isfinite(probs))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        series = switching_series(gamma=0.05, sigma=0.02, n=200, seeds=[0, 1])
        model, _ = hmm_fit(series, max_iters=20, seed=1)
        path = tmp_path / "hmm.json"
        save_hmm(path, model, meta={"train_dynamic": "markov_switch"})
        back = load_hmm(path)
        np.testing.assert_allclose(back.transition, model.transition)
        np.testing.assert_allclose(back.means, model.means)
