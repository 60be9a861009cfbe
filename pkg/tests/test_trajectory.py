import numpy as np
import pytest

from spdpool.trajectory import (
    Dataset,
    FeatureTrajectory,
    SequenceRecord,
    TrajectoryKind,
    WeightProfile,
    apply_weights,
    average_pool,
    coactivation_pairs,
    load_dataset,
    load_labels,
    load_trajectory,
    max_pool,
    normalize_scores,
    save_labels,
    save_trajectory,
    synth_coactivation,
)


class TestTypes:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="row 0, column 1"):
            FeatureTrajectory([[1.0, np.nan]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FeatureTrajectory(np.zeros((0, 3)))

    def test_values_immutable(self):
        t = FeatureTrajectory([[1.0, 2.0]])
        with pytest.raises(ValueError):
            t.values[0, 0] = 5.0

    def test_weight_rows_must_sum_to_one(self):
        with pytest.raises(ValueError, match="row 0"):
            WeightProfile([[0.5, 0.6]])

    def test_weights_nonnegative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            WeightProfile([[1.5, -0.5]])

    def test_uniform_profile(self):
        w = WeightProfile.uniform(3, 4)
        assert np.allclose(w.weights, 0.25)

    def test_dataset_label_range(self):
        rec = SequenceRecord(FeatureTrajectory([[1.0]]), 3)
        with pytest.raises(ValueError, match="outside"):
            Dataset((rec,), num_classes=2)


class TestFileIO:
    def test_csv_identity_layout(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("# d=2 kind=scores\n1,0\n0,1\n")
        t = load_trajectory(p, "csv")
        assert t.kind is TrajectoryKind.SCORES
        assert np.array_equal(t.values, np.eye(2))

    def test_csv_without_header(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2,3\n4,5,6\n")
        t = load_trajectory(p, "csv")
        # two frames of three channels each
        assert t.values.shape == (3, 2)
        assert np.array_equal(t.values[:, 0], [1, 2, 3])

    def test_binary_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        t = FeatureTrajectory(rng.standard_normal((3, 5)), TrajectoryKind.SCORES, "x")
        p = tmp_path / "t.trj"
        save_trajectory(t, p, "trj-binary")
        back = load_trajectory(p, "trj-binary")
        assert np.array_equal(back.values, t.values)
        assert back.kind is TrajectoryKind.SCORES
        # byte-level round trip as well
        raw = p.read_bytes()
        save_trajectory(back, p, "trj-binary")
        assert p.read_bytes() == raw

    def test_csv_ragged_row_reports_index(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2\n1,2,3\n")
        with pytest.raises(ValueError, match="ragged row 1"):
            load_trajectory(p, "csv")

    def test_csv_non_numeric_cell_location(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,2\n1,abc\n")
        with pytest.raises(ValueError, match="row 1, column 1"):
            load_trajectory(p, "csv")

    def test_csv_rejects_inf(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1,inf\n")
        with pytest.raises(ValueError, match="row 0, column 1"):
            load_trajectory(p, "csv")

    def test_csv_single_value_body(self, tmp_path):
        p = tmp_path / "t.csv"
        save_trajectory(FeatureTrajectory([[0.5]]), p, "csv")
        body = [line for line in p.read_text().splitlines() if not line.startswith("#")]
        assert body == ["0.5"]

    def test_csv_round_trip_preserves_kind(self, tmp_path):
        t = FeatureTrajectory([[0.25, 0.75]], TrajectoryKind.SCORES, "s")
        p = tmp_path / "t.csv"
        save_trajectory(t, p, "csv")
        assert load_trajectory(p, "csv").kind is TrajectoryKind.SCORES

    def test_csv_round_trip_error(self, tmp_path):
        rng = np.random.default_rng(7)
        t = FeatureTrajectory(rng.standard_normal((2, 3)))
        p = tmp_path / "t.csv"
        save_trajectory(t, p, "csv")
        back = load_trajectory(p, "csv")
        assert np.abs(back.values - t.values).max() < 1e-12

    def test_binary_truncation_detected(self, tmp_path):
        p = tmp_path / "t.trj"
        save_trajectory(FeatureTrajectory([[1.0, 2.0]]), p, "trj-binary")
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(ValueError, match="expected"):
            load_trajectory(p, "trj-binary")

    def test_labels_round_trip(self, tmp_path):
        p = tmp_path / "labels.csv"
        save_labels([("a", 1), ("b", 2)], p)
        assert load_labels(p) == [("a", 1), ("b", 2)]

    def test_load_dataset(self, tmp_path):
        ds = synth_coactivation(2, 4, 1, 6, 2, seed=3)
        for rec in ds.records:
            save_trajectory(rec.trajectory, tmp_path / f"{rec.trajectory.sequence_id}.trj")
        save_labels(
            [(r.trajectory.sequence_id, r.label) for r in ds.records],
            tmp_path / "labels.csv",
        )
        back = load_dataset(tmp_path)
        assert back.num_classes == 2
        assert len(back) == len(ds)
        assert np.array_equal(back.labels(), ds.labels())


class TestNormalize:
    def test_softmax_symmetry(self):
        t = FeatureTrajectory([[2.0], [2.0]])
        out = normalize_scores(t, "softmax")
        assert np.allclose(out.values[:, 0], [0.5, 0.5])

    def test_minmax_hand_case(self):
        t = FeatureTrajectory([[0.0], [1.0], [3.0]])
        out = normalize_scores(t, "minmax")
        assert np.allclose(out.values[:, 0], [0.0, 1.0 / 3.0, 1.0])

    def test_simplex_divide_by_sum(self):
        t = FeatureTrajectory([[1.0], [3.0]])
        out = normalize_scores(t, "simplex")
        assert np.allclose(out.values[:, 0], [0.25, 0.75])

    def test_simplex_shifts_negative_columns(self):
        t = FeatureTrajectory([[-3.0], [1.0]])
        out = normalize_scores(t, "simplex")
        assert np.allclose(out.values[:, 0], [0.0, 1.0])

    def test_simplex_constant_column_uniform(self):
        t = FeatureTrajectory([[0.0], [0.0], [0.0]])
        out = normalize_scores(t, "simplex")
        assert np.allclose(out.values[:, 0], 1.0 / 3.0)

    def test_simplex_columns_sum_to_one(self):
        rng = np.random.default_rng(1)
        t = FeatureTrajectory(rng.standard_normal((5, 40)))
        out = normalize_scores(t, "simplex")
        assert np.abs(out.values.sum(axis=0) - 1.0).max() < 1e-9
        assert out.values.min() >= 0.0 and out.values.max() <= 1.0

    def test_minmax_zero_range_maps_to_zero(self):
        t = FeatureTrajectory([[2.0], [2.0]])
        out = normalize_scores(t, "minmax")
        assert np.array_equal(out.values[:, 0], [0.0, 0.0])

    def test_minmax_sequence_scope(self):
        t = FeatureTrajectory([[0.0, 2.0], [4.0, 2.0]])
        out = normalize_scores(t, "minmax", minmax_scope="sequence")
        assert np.allclose(out.values, [[0.0, 0.5], [1.0, 0.5]])

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            normalize_scores(FeatureTrajectory([[1.0]]), "l2")


class TestWeightingAndPooling:
    def test_uniform_weights_hand_case(self):
        t = FeatureTrajectory([[0.8, 0.4]])
        out = apply_weights(t, WeightProfile.uniform(1, 2))
        assert np.allclose(out.values, [[0.4, 0.2]])

    def test_selector_weights(self):
        t = FeatureTrajectory([[0.8, 0.4]])
        out = apply_weights(t, WeightProfile([[1.0, 0.0]]))
        assert np.array_equal(out.values, [[0.8, 0.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            apply_weights(FeatureTrajectory([[1.0, 2.0]]), WeightProfile.uniform(2, 2))

    def test_kind_preserved(self):
        t = FeatureTrajectory([[0.5, 0.5]], TrajectoryKind.SCORES)
        assert apply_weights(t, WeightProfile.uniform(1, 2)).kind is TrajectoryKind.SCORES

    def test_average_pool_row_sums(self):
        assert average_pool(FeatureTrajectory([[0.4, 0.2]]))[0] == pytest.approx(0.6)

    def test_average_pool_zero_matrix(self):
        assert np.array_equal(average_pool(FeatureTrajectory(np.zeros((3, 4)))), np.zeros(3))

    def test_average_pool_single_frame(self):
        t = FeatureTrajectory([[2.0], [3.0]])
        assert np.array_equal(average_pool(apply_weights(t, WeightProfile.uniform(2, 1))), [2.0, 3.0])

    def test_max_pool(self):
        assert max_pool(FeatureTrajectory([[0.1, 0.9, 0.3]]))[0] == 0.9
        assert max_pool(FeatureTrajectory([[0.4, 0.4]]))[0] == 0.4
        assert max_pool(FeatureTrajectory([[0.7]]))[0] == 0.7

    def test_uniform_weighting_is_scaling(self):
        rng = np.random.default_rng(2)
        t = FeatureTrajectory(rng.random((4, 7)))
        out = apply_weights(t, WeightProfile.uniform(4, 7))
        assert np.abs(out.values - t.values / 7).max() < 1e-15

    def test_weighted_average_pool_is_frame_mean(self):
        rng = np.random.default_rng(3)
        t = FeatureTrajectory(rng.random((5, 9)))
        pooled = average_pool(apply_weights(t, WeightProfile.uniform(5, 9)))
        assert np.abs(pooled - t.values.mean(axis=1)).max() < 1e-12


class TestSynthCoactivation:
    def test_deterministic(self):
        a = synth_coactivation(3, 8, 1, 10, 4, 0.1, 0.4, seed=5)
        b = synth_coactivation(3, 8, 1, 10, 4, 0.1, 0.4, seed=5)
        assert all(
            np.array_equal(x.trajectory.values, y.trajectory.values)
            for x, y in zip(a.records, b.records)
        )

    def test_invalid_probability(self):
        with pytest.raises(ValueError, match="activation_prob"):
            synth_coactivation(2, 4, 1, 5, 2, activation_prob=1.5)

    def test_values_clipped(self):
        ds = synth_coactivation(2, 6, 1, 20, 5, noise_sigma=0.5, seed=8)
        for rec in ds.records:
            assert rec.trajectory.values.min() >= 0.0
            assert rec.trajectory.values.max() <= 1.0

    def test_coactivation_statistics(self):
        # 2 classes * 2 pairs over 8 channels: pairs are disjoint across classes.
        p = 0.35
        ds = synth_coactivation(2, 8, 2, 50, 50, noise_sigma=0.0, activation_prob=p, seed=13)
        pairs = coactivation_pairs(2, 2, 8, seed=13)
        used = [c for cls in pairs for pair in cls for c in pair]
        assert len(set(used)) == len(used)  # globally disjoint here

        frames = {1: [], 2: []}
        for rec in ds.records:
            frames[rec.label].append(rec.trajectory.values)
        stacked = {c: np.concatenate(frames[c], axis=1) > 0.5 for c in frames}
        n_frames = stacked[1].shape[1]
        assert n_frames >= 2000  # >= 4000 frames over both classes

        for cls in (1, 2):
            own = pairs[cls - 1]
            other = pairs[2 - cls]
            x = stacked[cls]
            for a, b in own:
                rate = np.mean(x[a] & x[b])
                assert abs(rate - p) < 0.02
            for a, b in other:
                cross = np.mean(x[a] & x[b])
                own_rates = [np.mean(x[a2] & x[b2]) for a2, b2 in own]
                assert min(own_rates) > cross

    def test_marginals_identical_across_classes(self):
        p = 0.35
        ds = synth_coactivation(2, 8, 2, 50, 50, noise_sigma=0.0, activation_prob=p, seed=13)
        means = {1: [], 2: []}
        for rec in ds.records:
            means[rec.label].append(rec.trajectory.values)
        m1 = np.concatenate(means[1], axis=1).mean(axis=1)
        m2 = np.concatenate(means[2], axis=1).mean(axis=1)
        assert np.abs(m1 - m2).max() < 0.02
        # within 3 sigma of the binomial standard error per channel
        n = 50 * 50
        se = np.sqrt(p * (1 - p) * 2 / n)
        assert np.abs(m1 - m2).max() < 3 * se
