"""Cell math, optimizers, training loop and model serialization."""

import numpy as np
import pytest

from trendlab import tensornet as tn
from trendlab.modelio import ModelFormatError
from trendlab.simgen import NoisyLineConfig, make_dataset


def fd_worst_error(cell, layers, hidden, length, seed, step=1e-5):
    """Worst floored relative error between BPTT and central differences."""
    rng = np.random.default_rng(seed)
    spec = tn.RnnSpec(cell=cell, n_layers=layers, hidden_dim=hidden, dropout=0.0)
    params = tn.init_params(spec, rng)
    x = rng.normal(size=length)
    labels = rng.integers(-1, 2, size=length)
    _, cache = tn.forward(params, spec, x)
    grads = tn.backward(params, spec, cache, labels)
    worst = 0.0
    for name, arr in params.items():
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            lp = tn.sequence_loss(tn.forward(params, spec, x)[0], labels)
            arr[idx] = orig - step
            lm = tn.sequence_loss(tn.forward(params, spec, x)[0], labels)
            arr[idx] = orig
            fd = (lp - lm) / (2 * step)
            an = grads[name][idx]
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-6))
    return worst


class TestForward:
    def test_zero_weights_give_uniform_probs(self):
        spec = tn.RnnSpec(cell="gru", n_layers=2, hidden_dim=6)
        params = {k: np.zeros(s) for k, s in tn.param_shapes(spec).items()}
        probs, _ = tn.forward(params, spec, np.random.default_rng(0).normal(size=15))
        np.testing.assert_allclose(probs, 1.0 / 3.0, atol=1e-12)

    def test_single_unit_vanilla_unrolls_tanh(self):
        spec = tn.RnnSpec(cell="vanilla", n_layers=1, hidden_dim=1)
        params = {k: np.zeros(s) for k, s in tn.param_shapes(spec).items()}
        params["l0.Wx"][0, 0] = 1.0
        params["out.W"][2, 0] = 1.0
        x = np.array([0.3, -1.2, 0.0, 2.5])
        _, cache = tn.forward(params, spec, x)
        np.testing.assert_allclose(cache["top"][:, 0], np.tanh(x), atol=1e-12)

    def test_outputs_normalized(self):
        rng = np.random.default_rng(3)
        spec = tn.RnnSpec(cell="gru", n_layers=1, hidden_dim=8)
        params = tn.init_params(spec, rng)
        probs, _ = tn.forward(params, spec, rng.normal(size=20))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(probs >= 0)

    def test_nan_input_rejected(self):
        spec = tn.RnnSpec(cell="vanilla", n_layers=1, hidden_dim=2)
        params = tn.init_params(spec, np.random.default_rng(0))
        with pytest.raises(tn.InputError):
            tn.forward(params, spec, np.array([1.0, np.nan]))

    def test_inference_is_pure(self):
        rng = np.random.default_rng(5)
        spec = tn.RnnSpec(cell="lstm", n_layers=2, hidden_dim=4, dropout=0.5)
        params = tn.init_params(spec, rng)
        x = rng.normal(size=30)
        p1, _ = tn.forward(params, spec, x)
        p2, _ = tn.forward(params, spec, x)
        np.testing.assert_array_equal(p1, p2)


class TestBackward:
    @pytest.mark.parametrize("cell", ["vanilla", "gru", "lstm"])
    def test_gradients_match_finite_differences(self, cell):
        rng = np.random.default_rng(42)
        for _ in range(5):
            layers = int(rng.integers(1, 3))
            hidden = int(rng.integers(2, 9))
            length = int(rng.integers(5, 13))
            err = fd_worst_error(cell, layers, hidden, length,
                                 int(rng.integers(0, 2**31)))
            assert err < 1e-4

    def test_saturated_perfect_fit_has_tiny_gradient(self):
        spec = tn.RnnSpec(cell="vanilla", n_layers=1, hidden_dim=2)
        params = {k: np.zeros(s) for k, s in tn.param_shapes(spec).items()}
        params["out.b"][:] = [0.0, 0.0, 60.0]  # saturates the up class
        x = np.random.default_rng(1).normal(size=10)
        labels = np.ones(10, dtype=int)
        _, cache = tn.forward(params, spec, x)
        grads = tn.backward(params, spec, cache, labels)
        total = sum(float(np.abs(g).sum()) for g in grads.values())
        assert total < 1e-6

    def test_small_step_descends(self):
        rng = np.random.default_rng(7)
        spec = tn.RnnSpec(cell="gru", n_layers=1, hidden_dim=5)
        params = tn.init_params(spec, rng)
        x = rng.normal(size=25)
        labels = rng.integers(-1, 2, size=25)
        probs, cache = tn.forward(params, spec, x)
        before = tn.sequence_loss(probs, labels)
        grads = tn.backward(params, spec, cache, labels)
        stepped = {k: v - 1e-3 * grads[k] for k, v in params.items()}
        after = tn.sequence_loss(tn.forward(stepped, spec, x)[0], labels)
        assert after < before

    def test_target_length_mismatch(self):
        spec = tn.RnnSpec(cell="vanilla", n_layers=1, hidden_dim=2)
        params = tn.init_params(spec, np.random.default_rng(0))
        _, cache = tn.forward(params, spec, np.ones(6))
        with pytest.raises(ValueError):
            tn.backward(params, spec, cache, np.zeros(5, dtype=int))


class TestOptimizers:
    def test_adam_first_step_is_signed_lr(self):
        params = {"w": np.array([1.0])}
        adam = tn.Adam(lr=0.1)
        tn.adam_step(adam, params, {"w": np.array([0.5])})
        assert abs((params["w"][0] - 1.0) + 0.1) < 1e-6

    def test_adam_zero_gradient_no_move(self):
        params = {"w": np.arange(4.0)}
        tn.Adam(lr=0.1).step(params, {"w": np.zeros(4)})
        np.testing.assert_array_equal(params["w"], np.arange(4.0))

    def test_adam_constant_gradient_equal_displacements(self):
        # with constant g the bias-corrected moments are exactly g and g^2,
        # so every step has the same magnitude
        params = {"w": np.array([0.0])}
        adam = tn.Adam(lr=0.05)
        g = {"w": np.array([0.3])}
        adam.step(params, g)
        d1 = params["w"][0]
        adam.step(params, g)
        d2 = params["w"][0] - d1
        assert abs(abs(d1) - abs(d2)) < 1e-9

    def test_rmsprop_zero_gradient_no_move(self):
        params = {"w": np.ones(3)}
        tn.Rmsprop(lr=0.1).step(params, {"w": np.zeros(3)})
        np.testing.assert_array_equal(params["w"], np.ones(3))

    def test_rmsprop_first_step_value(self):
        params = {"w": np.array([0.0])}
        rms = tn.Rmsprop(lr=0.1)
        tn.rmsprop_step(rms, params, {"w": np.array([1.0])})
        # v = 0.01, step = 0.1 / sqrt(0.01 + 1e-8) ~= 1.0
        assert abs(-params["w"][0] - 1.0) < 1e-4

    def test_rmsprop_constant_gradient_converges_to_lr(self):
        params = {"w": np.array([0.0])}
        rms = tn.Rmsprop(lr=0.1)
        g = {"w": np.array([1.0])}
        prev = 0.0
        for _ in range(1000):
            prev = params["w"][0]
            rms.step(params, g)
        last_step = abs(params["w"][0] - prev)
        assert abs(last_step - 0.1) / 0.1 < 0.01

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            tn.Adam(lr=0.1).step({"w": np.zeros(3)}, {"w": np.zeros(4)})


class TestTraining:
    def test_zero_epochs_returns_initialization(self):
        ds = make_dataset("train", seed=1, dynamic="noisy_line", count=3,
                          configs={"noisy_line": NoisyLineConfig(
                              n_segments_range=(1, 1), segment_len_range=(20, 30))})
        spec = tn.RnnSpec(cell="gru", n_layers=1, hidden_dim=4)
        opts = tn.TrainOpts(epochs=0, seed=9)
        params, log = tn.train(spec, ds, opts)
        expected = tn.init_params(spec, np.random.default_rng(9))
        for k in expected:
            np.testing.assert_array_equal(params[k], expected[k])
        assert log == []

    def test_easy_dataset_reaches_low_loss(self):
        cfg = NoisyLineConfig(gamma=1.0, n_slopes=2, sigma_max=1e-6,
                              n_segments_range=(1, 2), segment_len_range=(40, 60))
        ds = make_dataset("train", seed=3, dynamic="noisy_line", count=20,
                          configs={"noisy_line": cfg})
        spec = tn.RnnSpec(cell="gru", n_layers=2, hidden_dim=20, dropout=0.0)
        params, log = tn.train(spec, ds, tn.TrainOpts(lr=0.01, epochs=30, seed=0))
        assert log[-1]["loss"] < 0.1

    def test_training_is_deterministic(self):
        ds = make_dataset("train", seed=2, dynamic="noisy_line", count=4,
                          configs={"noisy_line": NoisyLineConfig(
                              n_segments_range=(1, 2), segment_len_range=(15, 25))})
        spec = tn.RnnSpec(cell="lstm", n_layers=2, hidden_dim=3, dropout=0.2)
        opts = tn.TrainOpts(lr=0.01, epochs=3, seed=11)
        p1, l1 = tn.train(spec, ds, opts)
        p2, l2 = tn.train(spec, ds, opts)
        assert l1 == l2
        for k in p1:
            np.testing.assert_array_equal(p1[k], p2[k])

    def test_divergence_raises_training_failure(self):
        ds = make_dataset("train", seed=4, dynamic="noisy_line", count=3,
                          configs={"noisy_line": NoisyLineConfig(
                              n_segments_range=(1, 1), segment_len_range=(30, 40))})
        spec = tn.RnnSpec(cell="vanilla", n_layers=1, hidden_dim=8)
        with pytest.raises(tn.TrainingFailure) as err:
            tn.train(spec, ds, tn.TrainOpts(lr=1e4, epochs=30, seed=0))
        assert len(err.value.log) >= 1

    def test_requires_train_role(self):
        ds = make_dataset("validation", seed=1, count=3)
        with pytest.raises(ValueError):
            tn.train(tn.RnnSpec(), ds, tn.TrainOpts(epochs=1))


class TestSerialization:
    def _random_model(self, seed=0):
        rng = np.random.default_rng(seed)
        spec = tn.RnnSpec(cell="gru", n_layers=2, hidden_dim=5, dropout=0.1)
        return spec, tn.init_params(spec, rng)

    def test_roundtrip_equality(self, tmp_path):
        spec, params = self._random_model()
        path = tmp_path / "m.json"
        tn.save_model(path, spec, params, meta={"note": "test"})
        spec2, params2, meta = tn.load_model(path)
        assert spec2 == spec and meta["note"] == "test"
        for k in params:
            np.testing.assert_array_equal(params[k], params2[k])

    def test_forward_identical_after_roundtrip(self, tmp_path):
        spec, params = self._random_model(7)
        path = tmp_path / "m.json"
        tn.save_model(path, spec, params)
        _, params2, _ = tn.load_model(path)
        rng = np.random.default_rng(123)
        for _ in range(100):
            x = rng.normal(size=int(rng.integers(2, 40)))
            p1, _ = tn.forward(params, spec, x)
            p2, _ = tn.forward(params2, spec, x)
            np.testing.assert_array_equal(p1, p2)

    def test_shape_tampering_detected(self, tmp_path):
        import json
        spec, params = self._random_model()
        path = tmp_path / "m.json"
        tn.save_model(path, spec, params)
        doc = json.loads(path.read_text())
        doc["spec"]["hidden_dim"] = 9  # arrays no longer match the header
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError):
            tn.load_model(path)

    def test_corrupt_file_detected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json")
        with pytest.raises(ModelFormatError):
            tn.load_model(path)


class TestPreprocessing:
    def test_scale_invariance_of_classification(self):
        rng = np.random.default_rng(8)
        spec = tn.RnnSpec(cell="gru", n_layers=1, hidden_dim=6)
        params = tn.init_params(spec, rng)
        y = np.cumsum(rng.normal(size=80)) + 5.0
        lab1, _ = tn.classify_series(params, spec, y)
        lab2, _ = tn.classify_series(params, spec, 1e-4 * y)
        np.testing.assert_array_equal(lab1, lab2)

    def test_constant_series_falls_back_to_unit_scale(self):
        inputs, scale = tn.series_to_inputs(np.full(10, 3.0))
        assert scale == 1.0
        np.testing.assert_array_equal(inputs, np.zeros(10))
