import io

import numpy as np
import pytest

from skewlearn import (
    LabeledInstance,
    LibsvmParseError,
    RowMatrix,
    SparseVector,
    apply_normalizer,
    fit_normalizer,
    format_libsvm_line,
    loads_libsvm,
    parse_libsvm_line,
    stream_minibatches,
)
from synth import random_sparse_vector


def sv(*pairs):
    return SparseVector.from_pairs(pairs)


class TestSparseVector:
    def test_rejects_unsorted_indices(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([3, 1]), np.array([1.0, 2.0]))

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([1, 1]), np.array([1.0, 2.0]))

    def test_rejects_stored_zero(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([1]), np.array([0.0]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            SparseVector(np.array([1]), np.array([np.inf]))

    def test_dot_commutes_and_matches_dense(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = random_sparse_vector(rng, 30, rng.integers(0, 10))
            b = random_sparse_vector(rng, 30, rng.integers(0, 10))
            dense = float(a.to_dense(30) @ b.to_dense(30))
            assert a.dot(b) == pytest.approx(dense, abs=1e-12)
            assert a.dot(b) == b.dot(a)

    def test_dot_dense_ignores_out_of_range(self):
        x = sv((1, 2.0), (9, 5.0))
        w = np.array([1.0, 3.0])
        assert x.dot_dense(w) == 6.0

    def test_value_equality(self):
        assert sv((0, 1.0), (3, -2.0)) == sv((0, 1.0), (3, -2.0))
        assert sv((0, 1.0)) != sv((0, 2.0))
        assert sv((0, 1.0)) != sv((1, 1.0))
        inst = LabeledInstance(sv((2, 4.0)), -1)
        assert inst == LabeledInstance(sv((2, 4.0)), -1)
        assert inst != LabeledInstance(sv((2, 4.0)), 1)


class TestParsing:
    def test_basic_line(self):
        inst = parse_libsvm_line("+1 3:0.5 7:1.2")
        assert inst.label == 1
        assert inst.features.pairs() == [(2, 0.5), (6, 1.2)]

    def test_label_only_line(self):
        inst = parse_libsvm_line("-1")
        assert inst.label == -1
        assert inst.features.nnz == 0

    def test_malformed_value(self):
        with pytest.raises(LibsvmParseError, match="column"):
            parse_libsvm_line("+1 3:abc")

    def test_label_zero_maps_to_negative(self):
        assert parse_libsvm_line("0 1:1").label == -1

    def test_bare_one_label(self):
        assert parse_libsvm_line("1 1:1").label == 1

    def test_unknown_label(self):
        with pytest.raises(LibsvmParseError):
            parse_libsvm_line("2 1:1")

    def test_non_increasing_indices(self):
        with pytest.raises(LibsvmParseError, match="non-increasing"):
            parse_libsvm_line("+1 3:1 3:2")
        with pytest.raises(LibsvmParseError, match="non-increasing"):
            parse_libsvm_line("+1 3:1 2:2")

    def test_non_finite_value(self):
        with pytest.raises(LibsvmParseError, match="non-finite"):
            parse_libsvm_line("+1 3:inf")

    def test_zero_index(self):
        with pytest.raises(LibsvmParseError):
            parse_libsvm_line("+1 0:1")

    def test_zero_values_dropped(self):
        inst = parse_libsvm_line("+1 1:0.0 2:3")
        assert inst.features.pairs() == [(1, 3.0)]

    def test_round_trip_random_instances(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            feats = random_sparse_vector(rng, 40, rng.integers(0, 12))
            inst = LabeledInstance(feats, 1 if rng.random() < 0.5 else -1)
            again = parse_libsvm_line(format_libsvm_line(inst))
            assert again.label == inst.label
            assert np.array_equal(again.features.indices, inst.features.indices)
            assert np.array_equal(again.features.values, inst.features.values)


class TestStreaming:
    def make_file(self, lines):
        return io.BytesIO(("\n".join(lines) + "\n").encode())

    def test_batch_sizes(self):
        lines = [f"+1 1:{i + 1}" for i in range(10)]
        batches = list(stream_minibatches(self.make_file(lines), 4))
        assert [len(b) for b in batches] == [4, 4, 2]

    def test_empty_file(self):
        assert list(stream_minibatches(io.BytesIO(b""), 4)) == []

    def test_singleton_batches(self):
        lines = [f"+1 1:{i + 1}" for i in range(10)]
        batches = list(stream_minibatches(self.make_file(lines), 1))
        assert [len(b) for b in batches] == [1] * 10

    def test_no_trailing_newline(self):
        batches = list(stream_minibatches(io.BytesIO(b"+1 1:1\n-1 2:2"), 8))
        assert len(batches[0]) == 2

    def test_concatenation_matches_whole_parse(self):
        rng = np.random.default_rng(2)
        lines = []
        for _ in range(23):
            feats = random_sparse_vector(rng, 15, rng.integers(0, 6))
            lines.append(format_libsvm_line(LabeledInstance(feats, -1)))
        text = "\n".join(lines) + "\n"
        whole = loads_libsvm(text)
        for batch_size in range(1, 18):
            streamed = [
                inst
                for batch in stream_minibatches(io.BytesIO(text.encode()), batch_size)
                for inst in batch
            ]
            assert len(streamed) == len(whole)
            for a, b in zip(streamed, whole):
                assert np.array_equal(a.features.values, b.features.values)

    def test_error_carries_line_and_offset(self):
        data = b"+1 1:1\n+1 2:zz\n"
        with pytest.raises(LibsvmParseError) as excinfo:
            list(stream_minibatches(io.BytesIO(data), 4))
        assert excinfo.value.line_number == 2
        assert excinfo.value.byte_offset == 7

    def test_bad_batch_size(self):
        with pytest.raises(ValueError):
            list(stream_minibatches(io.BytesIO(b""), 0))


class TestNormalizer:
    def test_max_abs_tally(self):
        data = loads_libsvm("+1 1:-2\n-1 1:4\n")
        stats = fit_normalizer(data)
        assert stats.per_feature_max_abs[0] == 4.0
        assert stats.positive_count == 1
        assert stats.negative_count == 1

    def test_empty_input(self):
        with pytest.raises(ValueError):
            fit_normalizer([])

    def test_scaling(self):
        stats = fit_normalizer(loads_libsvm("+1 1:4\n"))
        out = apply_normalizer(stats, sv((0, 4.0)))
        assert out.values[0] == 1.0
        out = apply_normalizer(stats, sv((0, -2.0)))
        assert out.values[0] == -0.5

    def test_unseen_feature_passes_through(self):
        stats = fit_normalizer(loads_libsvm("+1 1:4\n"))
        out = apply_normalizer(stats, sv((5, 7.0)))
        assert out.values[0] == 7.0

    def test_noop_when_already_unit(self):
        data = loads_libsvm("+1 1:1 2:-1\n-1 1:0.5\n")
        stats = fit_normalizer(data)
        for inst in data:
            out = apply_normalizer(stats, inst.features)
            assert np.array_equal(out.values, inst.features.values)

    def test_train_rows_bounded_after_apply(self):
        rng = np.random.default_rng(3)
        data = [
            LabeledInstance(random_sparse_vector(rng, 25, 8, scale=5.0), -1)
            for _ in range(50)
        ]
        stats = fit_normalizer(data)
        for inst in data:
            out = apply_normalizer(stats, inst.features)
            if out.nnz:
                assert np.abs(out.values).max() <= 1.0 + 1e-12


class TestRowMatrix:
    def test_matches_dense_linear_algebra(self):
        rng = np.random.default_rng(4)
        data = [
            LabeledInstance(random_sparse_vector(rng, 12, rng.integers(1, 6)), -1)
            for _ in range(20)
        ]
        mat = RowMatrix.from_instances(data, 12)
        dense = np.vstack([inst.features.to_dense(12) for inst in data])
        w = rng.normal(size=12)
        coef = rng.normal(size=20)
        assert np.allclose(mat.dot(w), dense @ w)
        assert np.allclose(mat.transpose_dot(coef), dense.T @ coef)
        assert np.allclose(mat.row_norm_sq, (dense**2).sum(axis=1))
        assert np.allclose(mat.column_sq_weighted(coef), (dense**2).T @ coef)

    def test_empty_rows_allowed(self):
        data = [LabeledInstance(SparseVector(np.zeros(0, np.int64), np.zeros(0)), 1)]
        mat = RowMatrix.from_instances(data, 3)
        assert np.array_equal(mat.dot(np.ones(3)), [0.0])

    def test_width_check(self):
        data = loads_libsvm("+1 5:1\n")
        with pytest.raises(ValueError):
            RowMatrix.from_instances(data, 2)
