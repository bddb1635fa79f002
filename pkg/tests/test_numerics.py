"""Correlation matrix, spectral decomposition and component scores."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from juryselect.numerics import component_scores, correlation_matrix, decompose

votes_strategy = arrays(
    np.int8,
    st.tuples(st.integers(3, 25), st.integers(1, 12)),
    elements=st.sampled_from([-1, 1]),
)


class TestCorrelation:
    @settings(max_examples=60, deadline=None)
    @given(votes_strategy)
    def test_symmetric_unit_diagonal_trace(self, votes):
        c = correlation_matrix(votes)
        n = votes.shape[1]
        assert np.array_equal(c, c.T)
        assert np.all(np.diag(c) == 1.0)
        assert abs(np.trace(c) - n) < 1e-12
        assert np.all(np.abs(c) <= 1.0)

    def test_matches_numpy_corrcoef(self, rng):
        votes = rng.choice([-1, 1], size=(80, 6))
        assert np.allclose(correlation_matrix(votes), np.corrcoef(votes.T), atol=1e-12)

    def test_constant_column(self):
        votes = np.array([[1, 1], [1, -1], [1, 1], [1, -1]])
        c = correlation_matrix(votes)
        assert c[0, 1] == 0.0 and c[0, 0] == 1.0

    def test_identical_and_opposite_columns(self):
        x = np.array([1, -1, 1, 1, -1])
        c = correlation_matrix(np.c_[x, x, -x])
        assert np.allclose(c, [[1, 1, -1], [1, 1, -1], [-1, -1, 1]])

    def test_needs_two_rounds(self):
        with pytest.raises(ValueError):
            correlation_matrix(np.ones((1, 3)))


class TestDecomposition:
    @settings(max_examples=60, deadline=None)
    @given(votes_strategy)
    def test_reconstruction_and_order(self, votes):
        c = correlation_matrix(votes)
        d = decompose(c)
        assert np.max(np.abs(d.reconstruct() - c)) <= 1e-8
        assert np.all(np.diff(d.D) <= 0) and np.all(d.D >= 0)
        assert np.allclose(d.U.T @ d.U, np.eye(len(d.D)), atol=1e-10)

    def test_sign_convention(self, rng):
        votes = rng.choice([-1, 1], size=(40, 7))
        d = decompose(correlation_matrix(votes))
        pivots = d.U[np.argmax(np.abs(d.U), axis=0), np.arange(7)]
        assert np.all(pivots > 0)

    def test_agrees_with_svd(self, rng):
        # For a PSD matrix, singular values equal eigenvalues.
        votes = rng.choice([-1, 1], size=(50, 9))
        c = correlation_matrix(votes)
        assert np.allclose(decompose(c).D, np.linalg.svd(c, compute_uv=False), atol=1e-10)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            decompose(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestScores:
    def test_scaled_columns(self, rng):
        d = decompose(correlation_matrix(rng.choice([-1, 1], size=(30, 5))))
        s = component_scores(d, 2)
        assert s.shape == (5, 2)
        assert np.allclose(s, d.U[:, :2] * d.D[:2])

    def test_two_blocs_separate(self, rng):
        base = rng.choice([-1, 1], size=200)
        flip = rng.random((200, 20)) < 0.1
        votes = np.where(flip, -1, 1) * base[:, None]
        votes[:, 10:] = rng.choice([-1, 1], size=(200, 10))
        s = component_scores(decompose(correlation_matrix(votes)), 2)
        assert s[:10, 0].min() > np.abs(s[10:, 0]).max()

    def test_bad_q(self, rng):
        d = decompose(np.eye(3))
        with pytest.raises(ValueError):
            component_scores(d, 4)
