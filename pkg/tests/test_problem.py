import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanillamc.problem import (
    GroundTruth,
    SamplingMask,
    condition_number,
    generate_ground_truth,
    incoherence,
    mask_from_indices,
    project_omega,
    project_omega_restricted,
    project_row_or_column,
    sample_mask,
)


class TestGroundTruth:
    def test_square_isotropic(self):
        gt = generate_ground_truth(5, 5, 5, kappa=1.0, seed=1)
        np.testing.assert_allclose(gt.singulars, np.ones(5))
        np.testing.assert_allclose(gt.M @ gt.M.T, np.eye(5), atol=1e-12)
        assert gt.kappa == 1.0

    def test_rank_one_incoherence(self):
        gt = generate_ground_truth(30, 20, 1, kappa=1.0, seed=2)
        u = gt.U[:, 0]
        v = gt.V[:, 0]
        np.testing.assert_allclose(gt.M, np.outer(u, v))
        expected = max(30 * np.max(u**2) / (u @ u), 20 * np.max(v**2) / (v @ v))
        assert gt.mu == pytest.approx(expected, rel=1e-12)

    def test_balanced_and_conditioned(self):
        gt = generate_ground_truth(40, 30, 4, kappa=8.0, seed=3)
        np.testing.assert_allclose(gt.U.T @ gt.U, np.diag(gt.singulars), atol=1e-12)
        np.testing.assert_allclose(gt.V.T @ gt.V, np.diag(gt.singulars), atol=1e-12)
        np.testing.assert_allclose(np.linalg.svd(gt.M, compute_uv=False)[:4], gt.singulars, rtol=1e-12)
        assert gt.kappa == pytest.approx(8.0)
        assert gt.sigma1 == pytest.approx(8.0) and gt.sigmar == pytest.approx(1.0)

    def test_deterministic(self):
        a = generate_ground_truth(12, 9, 2, 3.0, seed=7)
        b = generate_ground_truth(12, 9, 2, 3.0, seed=7)
        assert np.array_equal(a.U, b.U) and np.array_equal(a.V, b.V)
        assert not np.array_equal(a.U, generate_ground_truth(12, 9, 2, 3.0, seed=8).U)

    def test_serialisation(self):
        gt = generate_ground_truth(12, 9, 2, 3.0, seed=7)
        back = GroundTruth.loads(gt.dumps())
        assert np.array_equal(back.U, gt.U) and np.array_equal(back.V, gt.V)
        assert back.mu == gt.mu and back.seed == 7

    def test_errors(self):
        with pytest.raises(ValueError):
            generate_ground_truth(3, 4, 4)
        with pytest.raises(ValueError):
            generate_ground_truth(5, 4, 2, kappa=0.5)


class TestIncoherence:
    def test_coherent(self):
        assert incoherence(np.eye(10)[:, :3]) == pytest.approx(10 / 3)

    def test_flat(self):
        H = np.array([[1.0]])
        for _ in range(3):
            H = np.block([[H, H], [H, -H]])
        Q = H[:, :5] / math.sqrt(8)
        assert incoherence(Q) == pytest.approx(1.0)

    def test_loop_oracle(self, rng):
        Q, _ = np.linalg.qr(rng.standard_normal((200, 4)))
        best = 0.0
        for i in range(200):
            best = max(best, sum(Q[i, k] ** 2 for k in range(4)))
        assert incoherence(Q) == pytest.approx(200 / 4 * best, rel=1e-12)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            incoherence(np.ones((4, 2)))


class TestConditionNumber:
    def test_values(self):
        assert condition_number([4, 2, 1]) == 4
        assert condition_number([3.3, 3.3, 3.3]) == 1
        g, r = 1.7, 5
        assert condition_number(g ** np.arange(r - 1, -1, -1)) == pytest.approx(g ** (r - 1))

    def test_generator_spacing(self):
        gt = generate_ground_truth(20, 20, 5, kappa=16.0, seed=0)
        np.testing.assert_allclose(gt.singulars[:-1] / gt.singulars[1:], 2.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            condition_number([1.0, 0.0])
        with pytest.raises(ValueError):
            condition_number([1.0, -2.0])


class TestMask:
    def test_full(self):
        m = sample_mask(7, 5, 1.0, seed=0)
        assert m.count == 35 and m.observed.all()

    def test_binomial_count(self):
        m = sample_mask(50, 50, 0.3, seed=11)
        sd = math.sqrt(2500 * 0.3 * 0.7)
        assert abs(m.count - 750) <= 4 * sd

    def test_mean_rate(self):
        rates = [sample_mask(30, 30, 0.25, seed=s).empirical_rate for s in range(200)]
        assert abs(np.mean(rates) - 0.25) <= 0.01

    def test_deterministic_and_views(self):
        a = sample_mask(9, 6, 0.4, seed=5)
        b = sample_mask(9, 6, 0.4, seed=5)
        assert np.array_equal(a.observed, b.observed)
        assert np.array_equal(np.argwhere(a.observed), a.indices)
        i, j = a.indices[0]
        assert (i, j) in a
        with pytest.raises(ValueError):
            a.observed[0, 0] = True

    def test_serialisation(self):
        m = sample_mask(9, 6, 0.4, seed=5)
        back = SamplingMask.loads(m.dumps())
        assert np.array_equal(back.observed, m.observed) and back.p == m.p and back.seed == 5

    def test_errors(self):
        for p in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                sample_mask(3, 3, p)
        with pytest.raises(ValueError):
            mask_from_indices(2, 2, [(0, 0), (0, 0)], 0.5)
        with pytest.raises(IndexError):
            mask_from_indices(2, 2, [(2, 0)], 0.5)


class TestProjectors:
    def test_full_and_empty(self, rng):
        M = rng.standard_normal((4, 3))
        assert np.array_equal(project_omega(M, sample_mask(4, 3, 1.0)), M)
        empty = SamplingMask(np.zeros((4, 3), dtype=bool), 0.5)
        assert not project_omega(M, empty).any()

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            project_omega(rng.standard_normal((4, 3)), sample_mask(3, 4, 0.5))

    def test_restricted_examples(self, rng):
        M = rng.standard_normal((5, 4))
        full = sample_mask(5, 4, 1.0)
        only = project_omega_restricted(M, full, "row", 2, "only")
        expected = np.zeros_like(M)
        expected[2] = M[2]
        assert np.array_equal(only, expected)
        M2 = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = project_omega_restricted(M2, sample_mask(2, 2, 1.0), "row", 0, "exclude")
        assert np.array_equal(out, [[0.0, 0.0], [3.0, 4.0]])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10**6), axis=st.sampled_from(["row", "column"]), p=st.floats(0.05, 1.0))
    def test_partition(self, seed, axis, p):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((6, 5))
        mask = sample_mask(6, 5, p, seed)
        l = int(rng.integers(6 if axis == "row" else 5))
        parts = project_omega_restricted(M, mask, axis, l, "exclude") + project_omega_restricted(M, mask, axis, l, "only")
        assert np.array_equal(parts, project_omega(M, mask))

    def test_row_projector(self, rng):
        M = rng.standard_normal((6, 5))
        P = project_row_or_column(M, "row", 3)
        assert np.array_equal(project_row_or_column(P, "row", 3), P)
        assert np.allclose(sum(project_row_or_column(M, "row", l) for l in range(6)), M)
        assert np.allclose(sum(project_row_or_column(M, "column", l) for l in range(5)), M)

    def test_index_errors(self, rng):
        M = rng.standard_normal((3, 2))
        with pytest.raises(IndexError):
            project_row_or_column(M, "row", 3)
        with pytest.raises(IndexError):
            project_omega_restricted(M, sample_mask(3, 2, 0.5), "column", -1, "only")
