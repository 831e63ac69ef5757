import numpy as np
import pytest

from semeq.agents import Decoder, encode, train_agent
from semeq.anchors import select_random_support, select_support
from semeq.errors import InvalidArgumentError, InvalidConfigurationError
from semeq.evaluation import (
    Equalizer,
    EvaluationReport,
    InverseMethod,
    SampleRecord,
    SweepCell,
    SweepRow,
    build_equalizer,
    equalize,
    equalize_batch,
    error_accuracy_correlation,
    evaluate_cell,
    evaluate_pair,
    g_go,
    g_se,
    mean_accuracy_by_setting,
    noise_tolerance,
    perturbed_accuracy,
    perturbed_agreement,
    reconstruction_inversions,
    scatter_correlation,
    sweep_anchor_counts,
)
from semeq.inverse import InverseConfig
from semeq.relative import AbsoluteAnchors, SimilarityKind

FAST = InverseConfig(max_iterations=200)


@pytest.fixture(scope="module")
def small_agents(small_split):
    train, _ = small_split
    tx = train_agent("tx", train, "mlp", 8, seed=1, epochs=100)
    rx = train_agent("rx", train, "mlp", 8, seed=2, epochs=100)
    return tx, rx


def fake_row(method, count, accuracy, error, seed=0, records=()):
    report = EvaluationReport(
        matched_accuracy=1.0,
        cross_accuracy_unequalized=0.1,
        cross_accuracy_equalized=accuracy,
        decoder_agreement=accuracy,
        mean_reconstruction_error=error,
        anchor_count=count,
        per_sample_records=tuple(records),
    )
    cell = SweepCell(method, count, "gradient", seed)
    return SweepRow("tx", "rx", SimilarityKind.COSINE, cell, report)


class TestMetrics:
    def test_g_se(self):
        assert g_se([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert g_se([1.0, 0.0], [0.0, 1.0]) == 2.0
        assert g_se([3.0, 1.0], [0.0, -1.0]) == g_se([0.0, -1.0], [3.0, 1.0])

    def test_g_se_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            g_se([1.0], [1.0, 2.0])

    def test_g_go(self):
        decoder = Decoder(weights=np.eye(2), bias=np.zeros(2))
        assert g_go(decoder, [1.0, 0.0], [1.0, 0.0]) == 1
        assert g_go(decoder, [1.0, 0.0], [0.0, 1.0]) == 0
        assert g_go(decoder, [5.0, 0.1], [1.0, 0.0]) == 1

    def test_zero_noise_keeps_every_decision(self, rng):
        decoder = Decoder(weights=rng.standard_normal((3, 4)), bias=np.zeros(3))
        assert perturbed_agreement(decoder, rng.standard_normal((50, 4)), 0.0) == 1.0

    def test_noise_tolerance(self):
        decoder = Decoder(weights=np.eye(2), bias=np.zeros(2))
        latents = np.tile([[10.0, 0.0], [0.0, 10.0]], (100, 1))
        assert noise_tolerance(decoder, latents, powers=[0.01, 1.0, 1e6]) == 1.0
        assert noise_tolerance(decoder, latents, powers=[1e6]) == 0.0

    def test_noise_tolerance_level(self):
        decoder = Decoder(weights=np.eye(2), bias=np.zeros(2))
        with pytest.raises(InvalidArgumentError):
            noise_tolerance(decoder, np.ones((2, 2)), level=0.0)

    def test_perturbed_accuracy_without_noise(self):
        decoder = Decoder(weights=np.eye(3), bias=np.zeros(3))
        latents = 5.0 * np.eye(3)
        assert perturbed_accuracy(decoder, latents, [0, 1, 2], 0.0) == 1.0
        assert perturbed_accuracy(decoder, latents, [0, 0, 0], 0.0) == pytest.approx(1 / 3)


class TestEqualizer:
    def test_anchor_count_mismatch(self, gaussian_anchors):
        with pytest.raises(InvalidConfigurationError):
            Equalizer(gaussian_anchors(4, 3), gaussian_anchors(5, 3), "cosine")

    def test_support_mismatch(self, rng):
        first = AbsoluteAnchors(matrix=rng.standard_normal((4, 3)), support_id="a")
        second = AbsoluteAnchors(matrix=rng.standard_normal((4, 3)), support_id="b")
        with pytest.raises(InvalidConfigurationError):
            Equalizer(first, second, "cosine")

    def test_closed_form_needs_cosine(self, gaussian_anchors):
        with pytest.raises(InvalidConfigurationError):
            Equalizer(
                gaussian_anchors(4, 3),
                gaussian_anchors(4, 3, seed=1),
                "normalized_euclidean",
                inverse_method="closed_form_cosine",
            )

    def test_identity_channel_keeps_direction(self, orthogonal_pair, reduced_split):
        tx, _ = orthogonal_pair
        _, test = reduced_split
        support = select_support("proto", tx.encoder, test, 32, seed=0)
        eq = build_equalizer(tx, tx, support, "cosine", InverseMethod.CLOSED_FORM_COSINE)
        z = encode(tx.encoder, test.samples[0])
        z_hat = equalize(z, eq)
        cosine = z_hat @ z / (np.linalg.norm(z_hat) * np.linalg.norm(z))
        assert cosine > 1.0 - 1e-9
        assert np.linalg.norm(z_hat) == pytest.approx(eq.receiver_anchors.mean_norm)

    def test_orthogonal_pair_recovers_receiver_direction(self, orthogonal_pair, reduced_split):
        tx, rx = orthogonal_pair
        _, test = reduced_split
        support = select_random_support(test, 32, seed=3)
        eq = build_equalizer(tx, rx, support, "cosine", InverseMethod.CLOSED_FORM_COSINE)
        z_hat = equalize_batch(encode(tx.encoder, test.samples[:20]), eq)
        z_gamma = encode(rx.encoder, test.samples[:20])
        cosines = np.sum(z_hat * z_gamma, axis=1) / (
            np.linalg.norm(z_hat, axis=1) * np.linalg.norm(z_gamma, axis=1)
        )
        assert np.all(cosines > 1.0 - 1e-9)

    def test_batch_row_matches_single_call(self, small_agents, small_split):
        tx, rx = small_agents
        _, test = small_split
        support = select_random_support(test, 12, seed=0)
        eq = build_equalizer(tx, rx, support, "normalized_euclidean", inverse_config=FAST)
        z = encode(tx.encoder, test.samples[:3])
        np.testing.assert_allclose(equalize_batch(z, eq)[0], equalize(z[0], eq), atol=1e-12)


class TestEvaluatePair:
    def test_report_fields(self, small_agents, small_split):
        tx, rx = small_agents
        _, test = small_split
        support = select_random_support(test, 12, seed=0)
        eq = build_equalizer(tx, rx, support, "normalized_euclidean", inverse_config=FAST)
        report = evaluate_pair(tx, rx, eq, test)
        assert len(report.per_sample_records) == test.size
        assert report.anchor_count == 12
        for rate in (report.matched_accuracy, report.cross_accuracy_equalized):
            assert 0.0 <= rate <= 1.0
        gse = [record.gse for record in report.per_sample_records]
        ggo = [record.ggo for record in report.per_sample_records]
        assert report.mean_reconstruction_error == pytest.approx(np.mean(gse), abs=1e-12)
        assert report.decoder_agreement == pytest.approx(np.mean(ggo), abs=1e-12)
        assert isinstance(report.per_sample_records[0], SampleRecord)

    def test_unequalized_not_applicable_across_dimensions(self, small_split):
        train, test = small_split
        tx = train_agent("narrow", train, "mlp", 6, seed=3, epochs=50)
        rx = train_agent("wide", train, "mlp", 10, seed=4, epochs=50)
        support = select_random_support(test, 12, seed=0)
        eq = build_equalizer(tx, rx, support, "cosine", inverse_config=FAST)
        assert evaluate_pair(tx, rx, eq, test).cross_accuracy_unequalized is None

    def test_provenance_mismatch(self, orthogonal_pair, reduced_split):
        tx, rx = orthogonal_pair
        _, test = reduced_split
        support = select_random_support(test, 16, seed=0)
        eq = build_equalizer(tx, rx, support, "cosine", InverseMethod.CLOSED_FORM_COSINE)
        with pytest.raises(InvalidConfigurationError):
            evaluate_pair(rx, tx, eq, test)

    def test_full_agreement_reproduces_matched_accuracy(self, orthogonal_pair, reduced_split):
        tx, rx = orthogonal_pair
        _, test = reduced_split
        support = select_support("proto", tx.encoder, test, 32, seed=0)
        eq = build_equalizer(tx, rx, support, "cosine", InverseMethod.CLOSED_FORM_COSINE)
        report = evaluate_pair(tx, rx, eq, test)
        if report.decoder_agreement == 1.0:
            assert report.cross_accuracy_equalized == report.matched_accuracy
        agreeing = [r for r in report.per_sample_records if r.ggo == 1]
        assert len(agreeing) == round(report.decoder_agreement * test.size)

    @pytest.mark.slow
    def test_self_channel_on_standard_config(self, standard_split):
        train, test = standard_split
        agent = train_agent("self", train, "orthogonal", 16, seed=5)
        support = select_support("proto", agent.encoder, test, 32, seed=1)
        eq = build_equalizer(agent, agent, support, "normalized_euclidean")
        report = evaluate_pair(agent, agent, eq, test)
        assert report.cross_accuracy_equalized >= report.matched_accuracy - 0.02

        latents = encode(agent.encoder, test.samples)
        tolerance = noise_tolerance(agent.decoder, latents)
        if report.mean_reconstruction_error <= tolerance:
            noisy = perturbed_accuracy(agent.decoder, latents, test.labels, tolerance)
            assert report.decoder_agreement >= noisy


class TestSweep:
    def test_cell_seeds(self):
        cell = SweepCell("proto", 16, "gradient", 3)
        other_inverse = SweepCell("proto", 16, "closed_form_cosine", 3)
        assert cell.support_seed() == other_inverse.support_seed()
        assert cell.support_seed() != SweepCell("random", 16, "gradient", 3).support_seed()
        assert cell.inverse_seed("cosine") != cell.inverse_seed("normalized_euclidean")

    def test_invalid_cell(self):
        with pytest.raises(ValueError):
            SweepCell("nearest", 16, "gradient", 0)
        with pytest.raises(InvalidArgumentError):
            SweepCell("proto", 0, "gradient", 0)

    def test_single_cell_sweep_equals_cell_evaluation(self, small_agents, small_split):
        tx, rx = small_agents
        _, test = small_split
        rows = sweep_anchor_counts(
            tx, rx, [10], ["proto"], "cosine", ["gradient"], [4], test, base_config=FAST
        )
        cell = SweepCell("proto", 10, "gradient", 4)
        expected = evaluate_cell(tx, rx, cell, "cosine", test, base_config=FAST)
        assert len(rows) == 1
        assert rows[0].cell == cell
        assert rows[0].report.per_sample_records == expected.report.per_sample_records

    def test_threads_do_not_change_results(self, small_agents, small_split):
        tx, rx = small_agents
        train, test = small_split
        inverses = ["gradient", "closed_form_cosine"]
        args = (tx, rx, [8, 12], ["random", "proto"], "cosine", inverses)
        serial = sweep_anchor_counts(*args, [0, 1], test, train, base_config=FAST)
        threaded = sweep_anchor_counts(*args, [0, 1], test, train, base_config=FAST, workers=3)
        assert [row.cell for row in serial] == sorted(row.cell for row in serial)
        assert len(serial) == 16
        for first, second in zip(serial, threaded):
            assert first.cell == second.cell
            assert first.report.per_sample_records == second.report.per_sample_records

    def test_closed_form_rejected_for_distances(self, small_agents, small_split):
        tx, rx = small_agents
        _, test = small_split
        with pytest.raises(InvalidConfigurationError):
            sweep_anchor_counts(
                tx, rx, [8], ["random"], "normalized_euclidean", ["closed_form_cosine"], [0], test
            )

    def test_empty_axis(self, small_agents, small_split):
        tx, rx = small_agents
        _, test = small_split
        with pytest.raises(InvalidArgumentError):
            sweep_anchor_counts(tx, rx, [], ["random"], "cosine", ["gradient"], [0], test)


class TestAnalysis:
    def test_mean_accuracy_by_setting(self):
        rows = [
            fake_row("proto", 8, 0.5, 1.0, seed=0),
            fake_row("proto", 8, 0.7, 1.0, seed=1),
            fake_row("random", 8, 0.2, 1.0),
        ]
        means = mean_accuracy_by_setting(rows)
        assert means[("proto", 8, "gradient")] == pytest.approx(0.6)
        assert means[("random", 8, "gradient")] == pytest.approx(0.2)

    def test_error_accuracy_correlation(self):
        rows = [fake_row("proto", 8 * (i + 1), 0.5 + 0.1 * i, 3.0 - i) for i in range(4)]
        assert error_accuracy_correlation(rows) == pytest.approx(-1.0)
        assert error_accuracy_correlation(rows[:1]) is None
        flat = [fake_row("proto", 8 * (i + 1), 0.5, 3.0 - i) for i in range(3)]
        assert error_accuracy_correlation(flat) is None

    def test_scatter_correlation(self):
        records = [
            SampleRecord(0.1, 1, 0, 0),
            SampleRecord(0.2, 1, 1, 1),
            SampleRecord(2.0, 0, 1, 0),
            SampleRecord(3.0, 0, 0, 1),
        ]
        rows = [fake_row("proto", 8, 0.5, 1.3, records=records)]
        assert scatter_correlation(rows) < 0.0
        assert scatter_correlation([]) is None

    def test_reconstruction_inversions(self):
        low_error = fake_row("proto", 8, 0.6, 0.5)
        high_error = fake_row("proto", 16, 0.8, 0.9)
        assert reconstruction_inversions([low_error, high_error]) == [
            (low_error.cell, high_error.cell)
        ]
        assert reconstruction_inversions([low_error]) == []


@pytest.mark.slow
class TestEqualizationClaims:
    def test_orthogonal_pair_is_equalized(self, standard_orthogonal_pair, standard_split):
        tx, rx = standard_orthogonal_pair
        _, test = standard_split
        rows = sweep_anchor_counts(
            tx, rx, [32], ["proto"], "normalized_euclidean", ["gradient"], range(5), test
        )
        equalized = np.mean([row.report.cross_accuracy_equalized for row in rows])
        matched = np.mean([row.report.matched_accuracy for row in rows])
        assert equalized >= 0.9 * matched
        assert abs(rows[0].report.cross_accuracy_unequalized - 0.1) <= 0.1

    def test_prototypical_anchors_beat_random(self, standard_split):
        train, test = standard_split
        tx = train_agent("tx", train, "mlp", 16, seed=21)
        rx = train_agent("rx", train, "mlp", 16, seed=22)
        rows = sweep_anchor_counts(
            tx,
            rx,
            [10, 20, 32],
            ["proto", "random"],
            "cosine",
            ["gradient"],
            range(5),
            test,
            workers=2,
        )
        means = mean_accuracy_by_setting(rows)
        for count in (10, 20, 32):
            assert means[("proto", count, "gradient")] >= means[("random", count, "gradient")]

    def test_accuracy_grows_with_anchor_count(self, orthogonal_pair, reduced_split):
        tx, rx = orthogonal_pair
        _, test = reduced_split
        rows = sweep_anchor_counts(
            tx,
            rx,
            [8, 16, 32, 64],
            ["proto"],
            "normalized_euclidean",
            ["gradient"],
            range(3),
            test,
        )
        means = mean_accuracy_by_setting(rows)
        curve = [means[("proto", count, "gradient")] for count in (8, 16, 32, 64)]
        for before, after in zip(curve, curve[1:]):
            assert after >= before - 0.05
        assert scatter_correlation(rows) < 0.0
        # recorded only: lower error does not always mean higher accuracy
        reconstruction_inversions(rows)
