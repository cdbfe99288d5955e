import io

import numpy as np
import pytest

from vanillamc.leaveoneout import (
    LOO_HEADER,
    LooEnsemble,
    init_ensemble,
    loo_alignments,
    loo_diagnostics,
    loo_init,
    loo_matrix,
    loo_step,
    track,
    write_loo_csv,
)
from vanillamc.linalg import procrustes
from vanillamc.problem import generate_ground_truth, project_omega, sample_mask
from vanillamc.solver import FactorPair, default_step_size, gd_step, spectral_init


def random_orthogonal(rng, r):
    q, rr = np.linalg.qr(rng.standard_normal((r, r)))
    return q * np.sign(np.diag(rr))


@pytest.fixture
def tiny():
    gt = generate_ground_truth(12, 10, 2, 2.0, seed=5)
    return gt, sample_mask(12, 10, 0.6, seed=6)


def test_full_mask_matrix_and_init():
    gt = generate_ground_truth(12, 10, 2, 2.0, seed=5)
    full = sample_mask(12, 10, 1.0)
    F_star = np.vstack([gt.U, gt.V])
    for l in range(22):
        np.testing.assert_array_equal(loo_matrix(gt.M, full, l), gt.M)
    F = np.vstack(loo_init(gt.M, full, 7, 2))
    assert np.linalg.norm(F @ procrustes(F, F_star) - F_star) <= 1e-12


def test_loo_matrix_replaces_row_and_column(tiny):
    gt, mask = tiny
    base = project_omega(gt.M, mask) / mask.p
    A = loo_matrix(gt.M, mask, 3)
    np.testing.assert_array_equal(A[3], gt.M[3])
    np.testing.assert_array_equal(np.delete(A, 3, 0), np.delete(base, 3, 0))
    B = loo_matrix(gt.M, mask, 12 + 4)
    np.testing.assert_array_equal(B[:, 4], gt.M[:, 4])
    with pytest.raises(IndexError):
        loo_matrix(gt.M, mask, 22)


def test_loo_init_rowwise_advantage():
    wins = 0
    for s in range(10):
        gt = generate_ground_truth(150, 130, 2, 1.0, seed=s)
        mask = sample_mask(150, 130, 0.5, seed=s + 1000)
        F_star = np.vstack([gt.U, gt.V])
        F0 = np.vstack(spectral_init(project_omega(gt.M, mask), mask, 2))
        l = 17 * s
        L = np.vstack(loo_init(gt.M, mask, l, 2))
        main_row = np.linalg.norm((F0 @ procrustes(F0, F_star) - F_star)[l])
        loo_row = np.linalg.norm((L @ procrustes(L, F_star) - F_star)[l])
        wins += loo_row < main_row
    assert wins >= 8


def test_full_mask_ensemble_tracks_main():
    gt = generate_ground_truth(12, 10, 2, 2.0, seed=5)
    full = sample_mask(12, 10, 1.0)
    eta = default_step_size(gt.sigma1, gt.sigmar)[1]
    for d in track(gt, full, eta, 50):
        assert d.max_pair_dist_frob == 0.0


def test_eta_zero_and_truth(tiny):
    gt, mask = tiny
    ens = init_ensemble(gt.M, mask, 2)
    same = loo_step(ens, gt.M, mask, 0.0)
    assert np.array_equal(same.X, ens.X) and np.array_equal(same.Y, ens.Y) and same.t == 1
    L = len(ens)
    at = LooEnsemble(ens.indices, np.broadcast_to(gt.U, (L,) + gt.U.shape).copy(),
                     np.broadcast_to(gt.V, (L,) + gt.V.shape).copy())
    nxt = loo_step(at, gt.M, mask, 0.01)
    np.testing.assert_allclose(nxt.X, at.X, atol=1e-14)
    np.testing.assert_allclose(nxt.Y, at.Y, atol=1e-14)


def test_batched_step_matches_single_sequence(tiny):
    gt, mask = tiny
    ens = init_ensemble(gt.M, mask, 2, indices=[0, 5, 15])
    a = loo_step(ens, gt.M, mask, 0.01, chunk=1)
    b = loo_step(ens, gt.M, mask, 0.01, chunk=64)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    # sequence 15 (column 3) by hand: 1/p on Omega, weight 1 on the whole column
    X, Y = ens.pair(15)
    W = mask.observed / mask.p
    W[:, 3] = 1.0
    res = (X @ Y.T - gt.M) * W
    gap = X.T @ X - Y.T @ Y
    np.testing.assert_allclose(a.pair(15).X, X - 0.01 * (res @ Y + 0.5 * X @ gap), rtol=1e-13)
    np.testing.assert_allclose(a.pair(15).Y, Y - 0.01 * (res.T @ X - 0.5 * Y @ gap), rtol=1e-13)


def test_ensemble_cap(tiny):
    gt, mask = tiny
    with pytest.raises(ValueError):
        init_ensemble(gt.M, mask, 2, cap=10)
    ens = init_ensemble(gt.M, mask, 2, indices=[4, 1], cap=10)
    assert list(ens.indices) == [1, 4] and ens.subsampled
    with pytest.raises(KeyError):
        ens.pair(2)


class TestAlignments:
    def test_all_at_truth(self, tiny):
        gt, mask = tiny
        ens = LooEnsemble(np.array([0, 3]), np.stack([gt.U, gt.U]), np.stack([gt.V, gt.V]))
        al = loo_alignments(FactorPair(gt.U, gt.V), ens, gt)
        np.testing.assert_allclose(al.R, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(al.R_loo, np.stack([np.eye(2)] * 2), atol=1e-12)
        np.testing.assert_allclose(al.T, np.stack([np.eye(2)] * 2), atol=1e-12)
        d = loo_diagnostics(FactorPair(gt.U, gt.V), ens, gt)
        assert max(d.main_err_spec, d.max_rowwise_err, d.max_pair_dist_frob, d.main_err_2inf) <= 1e-12

    def test_loo_equal_to_main(self, tiny, rng):
        gt, mask = tiny
        main = FactorPair(gt.U @ random_orthogonal(rng, 2) + 0.1, gt.V @ random_orthogonal(rng, 2))
        ens = LooEnsemble(np.array([2]), main.X[None].copy(), main.Y[None].copy())
        al = loo_alignments(main, ens, gt)
        # T aligns the sequence to the *aligned* main pair, so it equals R
        np.testing.assert_array_equal(al.R_loo[0], al.R)
        np.testing.assert_array_equal(al.T[0], al.R)
        assert loo_diagnostics(main, ens, gt, al).max_pair_dist_frob == 0.0

    def test_optimality(self, tiny, rng):
        gt, mask = tiny
        obs = project_omega(gt.M, mask)
        main = gd_step(spectral_init(obs, mask, 2), obs, mask, 0.01)
        ens = loo_step(init_ensemble(gt.M, mask, 2, indices=[1, 9, 20]), gt.M, mask, 0.01)
        al = loo_alignments(main, ens, gt)
        F = np.vstack(main)
        F_star = np.vstack([gt.U, gt.V])
        S = ens.stacked()
        for _ in range(50):
            Q = random_orthogonal(rng, 2)
            assert np.linalg.norm(F @ al.R - F_star) <= np.linalg.norm(F @ Q - F_star) + 1e-12
            for k in range(3):
                assert np.linalg.norm(S[k] @ al.R_loo[k] - F_star) <= np.linalg.norm(S[k] @ Q - F_star) + 1e-12
                assert np.linalg.norm(F @ al.R - S[k] @ al.T[k]) <= np.linalg.norm(F @ al.R - S[k] @ Q) + 1e-12


def test_norm_ordering_and_decay():
    gt = generate_ground_truth(40, 30, 2, 2.0, seed=9)
    mask = sample_mask(40, 30, 0.6, seed=10)
    _, s0 = spectral_init(project_omega(gt.M, mask), mask, 2, return_singulars=True)
    eta = default_step_size(s0[0], s0[-1])[1]
    rho = 1 - 0.05 * eta * gt.sigmar
    diags = track(gt, mask, eta, 3000, record_every=100)
    for d in diags:
        assert d.main_err_2inf <= d.main_err_spec + 1e-15
    t = np.array([d.t for d in diags])
    for name in ("main_err_spec", "max_rowwise_err", "max_pair_dist_frob", "main_err_2inf"):
        y = np.array([getattr(d, name) for d in diags])
        rate = np.exp(np.polyfit(t[5:], np.log(y[5:]), 1)[0])
        assert rate < 1.0 and rate <= rho


def test_csv(tiny):
    gt, mask = tiny
    diags = track(gt, mask, 0.01, 4, record_every=2, indices=[0, 1])
    buf = io.StringIO()
    write_loo_csv(diags, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(LOO_HEADER) and len(lines) == 4
    assert [int(line.split(",")[0]) for line in lines[1:]] == [0, 2, 4]
