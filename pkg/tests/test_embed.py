import numpy as np
import pytest

from stationprint.embed import (
    Autoencoder,
    AutoencoderConfig,
    DESK_PROFILE,
    PAPER_PROFILE,
    encode,
    gradient_check,
    load_model,
    reconstruct,
    rmse,
    save_model,
    train_autoencoder,
)
from stationprint.errors import ShapeError

TINY = AutoencoderConfig(
    num_layers=1, units=4, bidirectional_encoder=True, dropout=0.0,
    learning_rate=0.01, batch_size=4, epochs=4, seed=11,
)


def tiny_model(config=TINY, shape=(3, 4), dtype=np.float64):
    return Autoencoder(config, input_shape=shape, dtype=dtype)


class TestConfig:
    def test_paper_profile_dimensions(self):
        assert PAPER_PROFILE.num_layers == 2
        assert PAPER_PROFILE.units == 256
        assert PAPER_PROFILE.embedding_dim == 1024
        assert PAPER_PROFILE.epochs == 64
        assert PAPER_PROFILE.batch_size == 64
        assert PAPER_PROFILE.learning_rate == 0.001
        assert PAPER_PROFILE.dropout == 0.2

    def test_desk_profile_same_architecture(self):
        assert DESK_PROFILE.embedding_dim == 1024
        assert DESK_PROFILE.epochs <= 20

    @pytest.mark.parametrize("layers", [1, 2, 3])
    @pytest.mark.parametrize("units", [3, 8])
    @pytest.mark.parametrize("bidi", [True, False])
    def test_embedding_dim_formula(self, layers, units, bidi):
        config = AutoencoderConfig(num_layers=layers, units=units, bidirectional_encoder=bidi)
        model = Autoencoder(config, input_shape=(5, 6))
        emb = encode(model, np.random.default_rng(0).normal(size=(5, 6)))
        assert emb.shape == (layers * (2 if bidi else 1) * units,)
        assert emb.shape == (config.embedding_dim,)


class TestGradients:
    def test_finite_difference_check(self):
        model = tiny_model()
        rng = np.random.default_rng(3)
        sample = rng.uniform(-1, 1, size=(2, 3, 4))
        err = gradient_check(model, sample, epsilon=1e-5, n_coords=250)
        assert err < 1e-4

    def test_finite_difference_two_layer(self):
        config = AutoencoderConfig(
            num_layers=2, units=3, bidirectional_encoder=True, dropout=0.0, seed=5
        )
        model = tiny_model(config, shape=(4, 3))
        sample = np.random.default_rng(9).uniform(-1, 1, size=(2, 4, 3))
        err = gradient_check(model, sample, epsilon=1e-5, n_coords=300)
        assert err < 1e-4

    def test_output_bias_gradient_closed_form(self):
        # zero input, zeroed output projection: y == out_b everywhere, so
        # loss = |b| / sqrt(M) and d(loss)/db = b / (M * loss)
        model = tiny_model()
        M = 4
        model.params["out_W"][:] = 0.0
        b = np.array([0.3, -0.2, 0.5, 0.1])
        model.params["out_b"][:] = b
        x = np.zeros((2, 3, M))
        loss, grads = model.loss_and_grads(x)
        expected_loss = np.linalg.norm(b) / np.sqrt(M)
        assert np.isclose(loss, expected_loss)
        np.testing.assert_allclose(grads["out_b"], b / (M * loss), rtol=1e-10)

    def test_epsilon_halving_stays_second_order(self):
        model = tiny_model()
        sample = np.random.default_rng(3).uniform(-1, 1, size=(2, 3, 4))
        err_full = gradient_check(model, sample, epsilon=1e-5, n_coords=150, seed=2)
        err_half = gradient_check(model, sample, epsilon=5e-6, n_coords=150, seed=2)
        assert err_half <= max(err_full * 4, 1e-6)


class TestTraining:
    def test_constant_dataset_converges(self):
        config = AutoencoderConfig(
            num_layers=1, units=8, bidirectional_encoder=True, dropout=0.0,
            learning_rate=0.01, batch_size=32, epochs=64, seed=1,
        )
        data = np.full((128, 6, 5), 0.25)
        model = train_autoencoder(data, config)
        assert model.training_history[-1] < 0.01
        assert len(model.training_history) == 64

    def test_seeded_training_bitwise_reproducible(self):
        config = AutoencoderConfig(
            num_layers=1, units=6, bidirectional_encoder=True, dropout=0.2,
            learning_rate=0.005, batch_size=8, epochs=3, seed=42,
        )
        data = np.random.default_rng(0).uniform(-1, 1, size=(24, 5, 7))
        m1 = train_autoencoder(data.copy(), config)
        m2 = train_autoencoder(data.copy(), config)
        assert m1.training_history == m2.training_history
        for key in m1.params:
            np.testing.assert_array_equal(m1.params[key], m2.params[key])

    def test_empty_dataset_rejected(self):
        with pytest.raises(ShapeError):
            train_autoencoder(np.zeros((0, 4, 4)), TINY)

    def test_reconstruction_beats_constant_baseline(self):
        rng = np.random.default_rng(7)
        data = np.clip(rng.normal(0.0, 0.4, size=(64, 6, 5)) + rng.uniform(-0.5, 0.5, size=(64, 1, 5)), -1, 1)
        config = AutoencoderConfig(
            num_layers=1, units=12, bidirectional_encoder=True, dropout=0.0,
            learning_rate=0.01, batch_size=16, epochs=40, seed=3,
        )
        model = train_autoencoder(data, config)
        recon = np.stack([reconstruct(model, s) for s in data])
        baseline = rmse(data, np.broadcast_to(data.mean(axis=0), data.shape))
        assert rmse(recon, data) <= baseline

    def test_untrained_model_reconstruction_is_finite(self):
        model = tiny_model(dtype=np.float32)
        out = reconstruct(model, np.random.default_rng(1).uniform(-1, 1, size=(3, 4)))
        assert out.shape == (3, 4)
        assert np.isfinite(out).all()


def test_epoch_loss_trend_on_corpus(trained_corpus):
    # smoothed (window 5) epoch losses must be non-increasing over >= 80%
    # of the epochs on the synthetic corpus
    model, _, _, _ = trained_corpus
    history = np.asarray(model.training_history)
    smoothed = np.convolve(history, np.ones(5) / 5, mode="valid")
    steps = np.diff(smoothed)
    assert (steps <= 1e-12).mean() >= 0.8


class TestEncode:
    def test_encode_deterministic(self):
        model = tiny_model(dtype=np.float32)
        spec = np.random.default_rng(2).uniform(-1, 1, size=(3, 4))
        np.testing.assert_array_equal(encode(model, spec), encode(model, spec))

    def test_encode_shape_mismatch_rejected(self):
        model = tiny_model()
        with pytest.raises(ShapeError):
            encode(model, np.zeros((4, 4)))
        with pytest.raises(ShapeError):
            reconstruct(model, np.zeros((3, 5)))

    def test_small_perturbation_stays_bounded(self):
        model = tiny_model(dtype=np.float64)
        spec = np.random.default_rng(4).uniform(-1, 1, size=(3, 4))
        e1 = encode(model, spec)
        e2 = encode(model, spec + 1e-9)
        assert np.isfinite(e2).all()
        assert np.linalg.norm(e1 - e2) < 1e-6

    def test_batch_matches_single(self):
        model = tiny_model(dtype=np.float64)
        specs = np.random.default_rng(5).uniform(-1, 1, size=(3, 3, 4))
        batch = model.encode_batch(specs)
        for i in range(3):
            np.testing.assert_allclose(batch[i], encode(model, specs[i]), atol=1e-12)


class TestSerialization:
    def test_save_load_round_trip(self, tmp_path):
        config = AutoencoderConfig(
            num_layers=2, units=5, bidirectional_encoder=True, dropout=0.1,
            learning_rate=0.01, batch_size=8, epochs=2, seed=9,
        )
        data = np.random.default_rng(1).uniform(-1, 1, size=(16, 4, 6)).astype(np.float32)
        model = train_autoencoder(data, config)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.config == config
        assert loaded.input_shape == (4, 6)
        assert loaded.training_history == pytest.approx(model.training_history)
        spec = data[0]
        np.testing.assert_allclose(encode(loaded, spec), encode(model, spec), atol=1e-7)
