"""Dataset drawing, aggregation invariants, and the text container format."""

import numpy as np
import pytest

from ttomo.errors import DataFormatError, ValidationError
from ttomo.sampling import (
    SampleSet,
    load_samples,
    sample_dataset,
    save_samples,
    split_train_test,
)


def _uniform_dist(L):
    return np.full(4**L, 1.0 / 4**L)


def test_counts_sum_to_total_exactly():
    samples = sample_dataset(_uniform_dist(3), 123457, seed=0)
    assert samples.counts.sum() == 123457
    assert samples.total == 123457
    assert samples.L == 3


def test_strings_are_sorted_and_distinct():
    samples = sample_dataset(_uniform_dist(2), 5000, seed=1)
    codes = samples.codes()
    assert np.all(np.diff(codes) > 0)


def test_same_seed_reproduces_same_dataset():
    a = sample_dataset(_uniform_dist(2), 10000, seed=7)
    b = sample_dataset(_uniform_dist(2), 10000, seed=7)
    assert np.array_equal(a.strings, b.strings)
    assert np.array_equal(a.counts, b.counts)


def test_streams_are_independent():
    a = sample_dataset(_uniform_dist(2), 10000, seed=7, stream=0)
    b = sample_dataset(_uniform_dist(2), 10000, seed=7, stream=1)
    assert not (
        a.strings.shape == b.strings.shape
        and np.array_equal(a.strings, b.strings)
        and np.array_equal(a.counts, b.counts)
    )


def test_point_mass_yields_single_string():
    dist = np.zeros(4**3)
    dist[27] = 1.0
    samples = sample_dataset(dist, 999, seed=3)
    assert samples.n_distinct == 1
    assert samples.counts[0] == 999
    assert int("".join(map(str, samples.strings[0])), 4) == 27


def test_frequencies_follow_the_distribution():
    rng = np.random.default_rng(11)
    dist = rng.uniform(0.1, 1.0, size=16)
    dist /= dist.sum()
    samples = sample_dataset(dist, 400_000, seed=5)
    freq = np.zeros(16)
    freq[samples.codes()] = samples.weights
    assert np.max(np.abs(freq - dist)) < 5e-3


def test_weights_sum_to_one():
    samples = sample_dataset(_uniform_dist(2), 999, seed=2)
    assert samples.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_rejects_bad_distributions():
    with pytest.raises(ValidationError):
        sample_dataset(np.full(5, 0.2), 10, seed=0)  # not a power of 4
    with pytest.raises(ValidationError):
        sample_dataset(np.array([0.5, 0.6, -0.2, 0.1]), 10, seed=0)
    with pytest.raises(ValidationError):
        sample_dataset(np.array([0.1, 0.1, 0.1, 0.1]), 10, seed=0)  # sums to 0.4
    with pytest.raises(ValidationError):
        sample_dataset(_uniform_dist(1), 0, seed=0)


def test_split_train_test_streams_and_sources():
    train, test = split_train_test(_uniform_dist(2), 4000, seed=9)
    assert train.source == "train" and test.source == "test"
    assert (train.seed, train.stream) == (9, 0)
    assert (test.seed, test.stream) == (9, 1)
    again = sample_dataset(_uniform_dist(2), 4000, seed=9, stream=0, source="train")
    assert np.array_equal(train.strings, again.strings)
    assert np.array_equal(train.counts, again.counts)


def test_sampleset_validation():
    strings = np.array([[0, 1], [0, 1]], dtype=np.uint8)
    with pytest.raises(ValidationError):
        SampleSet(L=2, total=4, strings=strings, counts=np.array([2, 2]))
    with pytest.raises(ValidationError):
        SampleSet(
            L=2,
            total=5,
            strings=np.array([[0, 1]], dtype=np.uint8),
            counts=np.array([4]),
        )
    with pytest.raises(ValidationError):
        SampleSet(
            L=2,
            total=4,
            strings=np.array([[0, 7]], dtype=np.uint8),
            counts=np.array([4]),
        )


def test_save_load_roundtrip(tmp_path):
    samples = sample_dataset(_uniform_dist(3), 12345, seed=13, stream=1, source="test")
    path = tmp_path / "x.samples"
    save_samples(samples, path)
    back = load_samples(path)
    assert back.L == samples.L
    assert back.total == samples.total
    assert back.seed == samples.seed
    assert back.stream == samples.stream
    assert back.source == samples.source
    assert np.array_equal(back.strings, samples.strings)
    assert np.array_equal(back.counts, samples.counts)


def test_save_is_byte_deterministic(tmp_path):
    samples = sample_dataset(_uniform_dist(2), 999, seed=4)
    save_samples(samples, tmp_path / "a")
    save_samples(samples, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


@pytest.mark.parametrize(
    "mutation",
    [
        lambda lines: ["bogus header"] + lines[1:],
        lambda lines: lines[:1] + ["L x"] + lines[2:],
        lambda lines: lines + ["123 not-a-count"],
        lambda lines: lines + ["99 5"],  # symbol out of range
        lambda lines: lines[:-1],  # drop a record: totals disagree
    ],
)
def test_load_rejects_malformed_files(tmp_path, mutation):
    samples = sample_dataset(_uniform_dist(2), 50, seed=6)
    path = tmp_path / "x.samples"
    save_samples(samples, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(mutation(lines)) + "\n")
    with pytest.raises(DataFormatError):
        load_samples(path)


def test_load_error_carries_line_number(tmp_path):
    path = tmp_path / "x.samples"
    path.write_text("ttsamples 1\nL 2\nN 5\nseed 0\nstream 0\nsource -\noops\n")
    with pytest.raises(DataFormatError) as err:
        load_samples(path)
    assert "7" in str(err.value)
