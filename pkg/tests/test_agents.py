import numpy as np
import pytest

from semeq.agents import (
    Agent,
    Dataset,
    Decoder,
    Encoder,
    accuracy,
    cross_entropy_gradient,
    cross_entropy_loss,
    decode,
    encode,
    gen_gaussian_mixture,
    init_decoder,
    make_encoder,
    split_dataset,
    train_agent,
    train_decoder,
)
from semeq.errors import InvalidArgumentError
from semeq.numerics import finite_diff_gradient, relative_error


@pytest.fixture(scope="module")
def separable():
    return gen_gaussian_mixture(10, 16, 200, separation=8.0, seed=7)


class TestDatasets:
    def test_single_class(self):
        data = gen_gaussian_mixture(1, 3, 5, seed=0)
        np.testing.assert_array_equal(data.labels, np.zeros(5))

    def test_deterministic(self):
        first = gen_gaussian_mixture(3, 4, 10, seed=5)
        second = gen_gaussian_mixture(3, 4, 10, seed=5)
        np.testing.assert_array_equal(first.samples, second.samples)
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_balanced(self):
        data = gen_gaussian_mixture(4, 3, 25, seed=1)
        np.testing.assert_array_equal(np.bincount(data.labels), [25, 25, 25, 25])

    def test_nearest_mean_accuracy(self, separable):
        means = np.stack(
            [separable.samples[separable.labels == c].mean(axis=0) for c in range(10)]
        )
        distances = np.linalg.norm(separable.samples[:, None, :] - means[None], axis=-1)
        assert np.mean(np.argmin(distances, axis=1) == separable.labels) > 0.99

    def test_split(self):
        data = gen_gaussian_mixture(3, 2, 10, seed=2)
        train, test = split_dataset(data, 4)
        assert train.size == 18 and test.size == 12
        np.testing.assert_array_equal(np.bincount(test.labels), [4, 4, 4])

    def test_invalid_labels(self):
        with pytest.raises(InvalidArgumentError):
            Dataset(samples=np.zeros((2, 2)), labels=[0, 3], class_count=2, seed=0)


class TestEncoders:
    def test_orthogonal_isometry(self, rng):
        encoder = make_encoder("orthogonal", 8, 8, seed=3)
        x = rng.standard_normal((20, 8))
        z = encode(encoder, x)
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), np.linalg.norm(x, axis=1), rtol=1e-10)
        np.testing.assert_allclose(z @ z.T, x @ x.T, atol=1e-10)

    def test_orthogonal_needs_square(self):
        with pytest.raises(InvalidArgumentError):
            make_encoder("orthogonal", 8, 4, seed=0)

    def test_seeds_differ(self, rng):
        x = rng.standard_normal(6)
        for kind in ("orthogonal", "affine", "mlp"):
            first = encode(make_encoder(kind, 6, 6, seed=1), x)
            second = encode(make_encoder(kind, 6, 6, seed=2), x)
            assert not np.allclose(first, second)

    def test_batch_shape(self, rng):
        encoder = make_encoder("mlp", 5, 3, seed=0)
        assert encode(encoder, rng.standard_normal((7, 5))).shape == (7, 3)
        assert encode(encoder, rng.standard_normal(5)).shape == (3,)

    def test_zero_affine_returns_bias(self, rng):
        encoder = Encoder(
            kind="affine",
            input_dim=3,
            latent_dim=2,
            seed=0,
            weights=np.zeros((2, 3)),
            bias=[1.0, -2.0],
        )
        latents = encode(encoder, rng.standard_normal((4, 3)))
        np.testing.assert_array_equal(latents, [[1.0, -2.0]] * 4)

    def test_affine_full_rank(self):
        encoder = make_encoder("affine", 6, 6, seed=4)
        assert np.linalg.matrix_rank(encoder.weights) == 6

    def test_mlp_output_bounded_by_final_layer(self, rng):
        encoder = make_encoder("mlp", 4, 3, seed=9)
        z = encode(encoder, 100.0 * rng.standard_normal((50, 4)))
        bound = np.abs(encoder.output_weights).sum(axis=1) + np.abs(encoder.output_bias)
        assert np.all(np.abs(z) <= bound + 1e-12)
        assert encoder.hidden_dim == 6

    def test_scale(self, rng):
        x = rng.standard_normal((5, 4))
        plain = make_encoder("mlp", 4, 4, seed=2)
        scaled = make_encoder("mlp", 4, 4, seed=2, scale=3.0)
        np.testing.assert_allclose(encode(scaled, x), 3.0 * encode(plain, x), rtol=1e-12)
        assert scaled.name == "mlp-4x4-s2-c3"
        assert plain.name == "mlp-4x4-s2"

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            encode(make_encoder("affine", 4, 2, seed=0), np.zeros(3))


class TestDecoders:
    def test_identity_decoder(self):
        decoder = Decoder(weights=np.eye(5), bias=np.zeros(5))
        assert decode(decoder, np.eye(5)[3]) == 3

    def test_ties_go_to_lowest_index(self):
        decoder = Decoder(weights=np.zeros((4, 3)), bias=np.zeros(4))
        assert decode(decoder, np.array([1.0, 2.0, 3.0])) == 0

    def test_bias_shift_invariance(self, rng):
        decoder = Decoder(weights=rng.standard_normal((4, 3)), bias=rng.standard_normal(4))
        shifted = Decoder(weights=decoder.weights, bias=decoder.bias + 5.0)
        z = rng.standard_normal((30, 3))
        np.testing.assert_array_equal(decode(decoder, z), decode(shifted, z))

    def test_trained_accuracy(self, separable):
        encoder = make_encoder("orthogonal", 16, 16, seed=1)
        decoder = train_decoder(encoder, separable, epochs=300, lr=0.05, seed=0)
        assert accuracy(decoder, encode(encoder, separable.samples), separable.labels) >= 0.95

    def test_untrained_is_chance_level(self, separable):
        encoder = make_encoder("orthogonal", 16, 16, seed=1)
        latents = encode(encoder, separable.samples)
        rates = [
            accuracy(init_decoder(16, 10, seed), latents, separable.labels) for seed in range(10)
        ]
        assert abs(np.mean(rates) - 0.1) <= 0.1

    def test_training_deterministic(self):
        data = gen_gaussian_mixture(3, 4, 20, seed=0)
        encoder = make_encoder("affine", 4, 4, seed=0)
        first = train_decoder(encoder, data, epochs=20, seed=5)
        second = train_decoder(encoder, data, epochs=20, seed=5)
        np.testing.assert_array_equal(first.weights, second.weights)
        np.testing.assert_array_equal(first.bias, second.bias)

    def test_single_class_rejected(self):
        data = gen_gaussian_mixture(1, 3, 10, seed=0)
        with pytest.raises(InvalidArgumentError):
            train_decoder(make_encoder("affine", 3, 3, seed=0), data, epochs=5)

    def test_cross_entropy_gradient_matches_finite_differences(self, rng):
        latents = rng.standard_normal((12, 3))
        labels = rng.integers(0, 4, size=12)
        decoder = Decoder(weights=rng.standard_normal((4, 3)), bias=rng.standard_normal(4))

        def loss(params):
            candidate = Decoder(weights=params[:12].reshape(4, 3), bias=params[12:])
            return cross_entropy_loss(candidate, latents, labels)

        grad_weights, grad_bias = cross_entropy_gradient(decoder, latents, labels)
        analytic = np.concatenate([grad_weights.ravel(), grad_bias])
        params = np.concatenate([decoder.weights.ravel(), decoder.bias])
        numeric = finite_diff_gradient(loss, params)
        assert relative_error(analytic, numeric) < 1e-4


class TestAgents:
    def test_latent_dims_must_match(self):
        encoder = make_encoder("affine", 4, 3, seed=0)
        with pytest.raises(InvalidArgumentError):
            Agent(encoder=encoder, decoder=init_decoder(5, 2, 0), id="broken")

    def test_mismatch_premise(self, standard_split):
        train, test = standard_split
        first = train_agent("a", train, "mlp", 16, seed=1, epochs=5)
        second = train_agent("b", train, "mlp", 16, seed=2, epochs=5)
        diff = encode(first.encoder, test.samples) - encode(second.encoder, test.samples)
        assert np.mean(np.sum(diff * diff, axis=1)) > 0.1

    @pytest.mark.slow
    def test_matched_accuracy_on_standard_config(self, standard_split):
        train, test = standard_split
        for kind, seed in (("orthogonal", 1), ("affine", 2), ("mlp", 3)):
            agent = train_agent(kind, train, kind, 16, seed=seed)
            assert accuracy(agent.decoder, encode(agent.encoder, test.samples), test.labels) >= 0.95

    @pytest.mark.slow
    def test_cross_decoding_without_equalization_is_chance(self, standard_split):
        train, test = standard_split
        rates = []
        for pair in range(10):
            tx = train_agent("tx", train, "orthogonal", 16, seed=100 + 2 * pair, epochs=100)
            rx = train_agent("rx", train, "orthogonal", 16, seed=101 + 2 * pair, epochs=100)
            rates.append(accuracy(rx.decoder, encode(tx.encoder, test.samples), test.labels))
        assert abs(np.mean(rates) - 0.1) <= 0.1
