import numpy as np
import pytest

from ota_ensemble.errors import DataFormatError, ParameterError
from ota_ensemble.providers import (
    ScoreDataset,
    SyntheticModelSpec,
    generate_synthetic,
    load_score_dataset,
    save_score_dataset,
    select_best_client,
)

# Regression constants for seed 424242 (skill 1.0, logit noise 1.0, k=10, m=5000).
GENERATOR_REGRESSION_ACCS = (0.3488, 0.3302, 0.3406)


def tiny_dataset(tags=("validation", "test")):
    scores = np.array(
        [
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.4, 0.6], [0.5, 0.5]],
        ]
    )
    return ScoreDataset(scores=scores, labels=np.array([1, 2]), split_tags=np.array(tags))


class TestScoreDataset:
    def test_shape_properties(self):
        ds = tiny_dataset()
        assert (ds.num_clients, ds.num_samples, ds.num_classes) == (2, 2, 2)
        assert ds.validation_indices.tolist() == [0]
        assert ds.test_indices.tolist() == [1]

    def test_rejects_bad_row_sum_with_location(self):
        scores = np.array([[[0.9, 0.1], [0.4, 0.4]]])
        with pytest.raises(DataFormatError, match="client 1, sample 2"):
            ScoreDataset(scores=scores, labels=np.array([1, 1]), split_tags=np.array(["test", "test"]))

    def test_rejects_label_out_of_range(self):
        scores = np.array([[[0.9, 0.1]]])
        with pytest.raises(DataFormatError, match="label"):
            ScoreDataset(scores=scores, labels=np.array([3]), split_tags=np.array(["test"]))

    def test_rejects_negative_score(self):
        scores = np.array([[[1.1, -0.1]]])
        with pytest.raises(DataFormatError, match="negative"):
            ScoreDataset(scores=scores, labels=np.array([1]), split_tags=np.array(["test"]))

    def test_rejects_unknown_tag(self):
        scores = np.array([[[0.5, 0.5]]])
        with pytest.raises(DataFormatError, match="tags"):
            ScoreDataset(scores=scores, labels=np.array([1]), split_tags=np.array(["train"]))

    def test_rows_renormalized_exactly(self):
        scores = np.array([[[0.5, 0.5 + 5e-7]]])
        ds = ScoreDataset(scores=scores, labels=np.array([2]), split_tags=np.array(["test"]))
        assert abs(ds.scores[0, 0].sum() - 1.0) <= 1e-9


class TestFileRoundtrip:
    def test_minimal_valid_file(self, tmp_path):
        path = tmp_path / "min.txt"
        path.write_text("1,1,2\n2\n0.4,0.6\n")
        ds = load_score_dataset(path)
        assert ds.scores[0, 0].tolist() == [0.4, 0.6]
        assert ds.labels.tolist() == [2]
        assert ds.split_tags.tolist() == ["test"]  # 10% of 1 sample is 0

    def test_bad_row_sum_names_row(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1,1,2\n1\n0.4,0.4\n")
        with pytest.raises(DataFormatError, match="client 1, sample 1"):
            load_score_dataset(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "hdr.txt"
        path.write_text("1,2\n")
        with pytest.raises(DataFormatError, match="header"):
            load_score_dataset(path)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "fields.txt"
        path.write_text("1,1,3\n1\n0.4,0.6\n")
        with pytest.raises(DataFormatError, match="expected 3 scores"):
            load_score_dataset(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("2,2,2\n1\n2\n0.4,0.6\n")
        with pytest.raises(DataFormatError, match="lines"):
            load_score_dataset(path)

    def test_roundtrip_bit_exact(self, tmp_path):
        spec = SyntheticModelSpec(per_client_skill=(1.5, 0.5), logit_noise_std=0.7, rng_seed=9)
        ds = generate_synthetic(spec, 30, 4)
        path = tmp_path / "ds.txt"
        save_score_dataset(ds, path)
        back = load_score_dataset(path)
        assert np.array_equal(back.scores, ds.scores)
        assert np.array_equal(back.labels, ds.labels)
        assert np.array_equal(back.split_tags, ds.split_tags)


class TestGenerateSynthetic:
    def test_deterministic(self):
        spec = SyntheticModelSpec(per_client_skill=(1.0, 2.0), logit_noise_std=1.0, rng_seed=3)
        a = generate_synthetic(spec, 50, 5)
        b = generate_synthetic(spec, 50, 5)
        assert np.array_equal(a.scores, b.scores)
        assert np.array_equal(a.labels, b.labels)

    def test_zero_signal_is_uniform(self):
        spec = SyntheticModelSpec(per_client_skill=(0.0,), logit_noise_std=0.0, rng_seed=1)
        ds = generate_synthetic(spec, 20, 4)
        assert np.allclose(ds.scores, 0.25)

    def test_dominant_logit_is_perfect(self):
        spec = SyntheticModelSpec(per_client_skill=(50.0,), logit_noise_std=0.0, rng_seed=1)
        ds = generate_synthetic(spec, 200, 6)
        preds = np.argmax(ds.scores[0], axis=1) + 1
        assert np.array_equal(preds, ds.labels)

    def test_regression_accuracy(self):
        spec = SyntheticModelSpec(per_client_skill=(1.0,) * 3, logit_noise_std=1.0, rng_seed=424242)
        ds = generate_synthetic(spec, 5000, 10)
        for i, expected in enumerate(GENERATOR_REGRESSION_ACCS):
            acc = float(np.mean(np.argmax(ds.scores[i], axis=1) + 1 == ds.labels))
            assert 0.2 < acc < 0.9
            assert acc == pytest.approx(expected, abs=1e-12)

    def test_monotone_skill(self):
        betas = (0.0, 0.5, 1.0, 2.0, 4.0)
        means = []
        for beta in betas:
            accs = []
            for seed in range(10):
                spec = SyntheticModelSpec(
                    per_client_skill=(beta,) * 2, logit_noise_std=1.0, rng_seed=seed
                )
                ds = generate_synthetic(spec, 400, 10)
                accs.append(float(np.mean(np.argmax(ds.scores, axis=2) + 1 == ds.labels)))
            means.append(np.mean(accs))
        assert all(b >= a for a, b in zip(means, means[1:]))

    def test_class_balance(self):
        spec = SyntheticModelSpec(per_client_skill=(1.0,), logit_noise_std=1.0, rng_seed=5)
        ds = generate_synthetic(spec, 5000, 3, class_balance=[0.8, 0.2, 0.0])
        counts = np.bincount(ds.labels, minlength=4)[1:]
        assert counts[2] == 0
        assert counts[0] / 5000 == pytest.approx(0.8, abs=0.02)

    def test_bad_balance_rejected(self):
        spec = SyntheticModelSpec(per_client_skill=(1.0,), logit_noise_std=1.0, rng_seed=5)
        with pytest.raises(ParameterError):
            generate_synthetic(spec, 10, 3, class_balance=[0.5, 0.4])
        with pytest.raises(ParameterError):
            generate_synthetic(spec, 10, 3, class_balance=[0.5, 0.4, 0.2])

    def test_generated_slices_are_valid_score_vectors(self):
        from ota_ensemble.ensemble import ScoreVector

        spec = SyntheticModelSpec(per_client_skill=(1.0, 2.5), logit_noise_std=1.5, rng_seed=21)
        ds = generate_synthetic(spec, 25, 6)
        for i in range(ds.num_clients):
            for t in range(0, ds.num_samples, 5):
                ScoreVector(ds.scores[i, t])  # raises if any invariant fails

    def test_adding_clients_keeps_existing_scores(self):
        base = SyntheticModelSpec(per_client_skill=(1.0, 2.0), logit_noise_std=1.0, rng_seed=77)
        more = SyntheticModelSpec(per_client_skill=(1.0, 2.0, 0.5), logit_noise_std=1.0, rng_seed=77)
        a = generate_synthetic(base, 40, 4)
        b = generate_synthetic(more, 40, 4)
        assert np.array_equal(a.scores, b.scores[:2])


class TestSelectBestClient:
    def test_perfect_client_wins(self):
        labels = np.array([1, 2, 1, 2, 1, 2])
        k = 2
        rng = np.random.default_rng(0)
        noise = rng.dirichlet(np.ones(k), size=6)
        perfect = np.eye(k)[labels - 1]
        scores = np.stack([noise, perfect, noise[::-1]])
        ds = ScoreDataset(
            scores=scores, labels=labels, split_tags=np.array(["validation"] * 3 + ["test"] * 3)
        )
        assert select_best_client(ds) == 2

    def test_single_client(self):
        ds = tiny_dataset()
        assert select_best_client(ds.__class__(
            scores=ds.scores[:1], labels=ds.labels, split_tags=ds.split_tags
        )) == 1

    def test_tie_goes_low(self):
        labels = np.array([1, 2])
        same = np.array([[0.9, 0.1], [0.1, 0.9]])
        ds = ScoreDataset(
            scores=np.stack([same, same]),
            labels=labels,
            split_tags=np.array(["validation", "validation"]),
        )
        assert select_best_client(ds) == 1

    def test_requires_validation_samples(self):
        ds = tiny_dataset(tags=("test", "test"))
        with pytest.raises(ParameterError):
            select_best_client(ds)

    def test_invariant_under_sample_permutation(self):
        spec = SyntheticModelSpec(per_client_skill=(0.4, 1.2, 0.9), logit_noise_std=1.0, rng_seed=15)
        ds = generate_synthetic(spec, 60, 4, validation_fraction=0.5)
        best = select_best_client(ds)
        perm = np.random.default_rng(1).permutation(60)
        shuffled = ScoreDataset(
            scores=ds.scores[:, perm], labels=ds.labels[perm], split_tags=ds.split_tags[perm]
        )
        assert select_best_client(shuffled) == best
