import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from tlbee._rng import make_rng
from tlbee.errors import DomainError
from tlbee.model import (
    SOURCE,
    DomainClassParams,
    JointHyper,
    LabeledDataset,
    bartlett_factor,
    build_scale_matrix,
    generate_dataset,
    mean_from_noise,
    sample_generative_instance,
    sample_joint_precisions,
    sample_wishart,
    synthetic_hyper,
    wishart_from_factor,
)


def test_scale_matrix_blocks():
    M_t, M_s, M_ts = build_scale_matrix(2.0, 0.5, 0.6, 3)
    assert_allclose(M_ts, 0.6 * np.eye(3))
    assert_allclose(M_t, 2 * np.eye(3))
    for bad in (1.0, -1.0, 1.5):
        with pytest.raises(DomainError):
            build_scale_matrix(1, 1, bad, 2)
    with pytest.raises(DomainError):
        build_scale_matrix(0.0, 1, 0.5, 2)


def test_synthetic_hyper_defaults():
    h = synthetic_hyper(3, 0.5, theta=0.7)
    assert_array_equal(h.nu, [23, 23])
    assert_array_equal(h.kappa_t, [100, 100])
    assert_allclose(h.m_t[1], np.full(3, 0.7))
    assert_allclose(h.m_s, h.m_t + 10)
    f = synthetic_hyper(3, 0.5, theta=0.7, flip_source=True)
    assert_allclose(f.m_s[0], h.m_t[1])
    assert_allclose(f.m_s[1], h.m_t[0])


def test_flip_with_symmetric_means_is_same_law():
    plain = synthetic_hyper(2, 0.4, theta=0.0, source_offset=0.0)
    flipped = synthetic_hyper(2, 0.4, theta=0.0, source_offset=0.0, flip_source=True)
    assert_array_equal(plain.m_s, flipped.m_s)
    a = sample_generative_instance(plain, make_rng(5))
    b = sample_generative_instance(flipped, make_rng(5))
    for pa, pb in zip(a.source + a.target, b.source + b.target):
        assert_array_equal(pa.mu, pb.mu)
        assert_array_equal(pa.Lam, pb.Lam)


def test_hyper_validation():
    M_t, M_s, M_ts = build_scale_matrix(1, 1, 0.5, 2)
    with pytest.raises(DomainError):
        JointHyper(nu=3, kappa_t=1, kappa_s=1, m_t=np.zeros(2), m_s=np.zeros(2),
                   M_t=M_t, M_s=M_s, M_ts=M_ts)
    with pytest.raises(DomainError):
        JointHyper(nu=6, kappa_t=1, kappa_s=1, m_t=np.zeros(2), m_s=np.zeros(2),
                   M_t=M_t, M_s=M_s, M_ts=2 * np.eye(2))
    with pytest.raises(DomainError):
        JointHyper(nu=6, kappa_t=0, kappa_s=1, m_t=np.zeros(2), m_s=np.zeros(2),
                   M_t=M_t, M_s=M_s, M_ts=M_ts)
    h = JointHyper(nu=6, kappa_t=1, kappa_s=2, m_t=np.zeros(2), m_s=np.ones(2),
                   M_t=M_t, M_s=M_s, M_ts=M_ts)
    assert h.m_s.shape == (2, 2) and h.kappa_s.tolist() == [2, 2]
    assert not np.any(h.decoupled().M_ts)


def test_wishart_moments():
    scale = np.array([[2.0, 0.3], [0.3, 0.5]])
    W = sample_wishart(scale, 7.0, make_rng(1), size=200_000)
    assert_allclose(W.mean(0), 7 * scale, rtol=0.01, atol=0.02)
    # Var(W_ij) = nu (s_ij^2 + s_ii s_jj)
    assert_allclose(W[:, 0, 1].var(), 7 * (0.09 + 1.0), rtol=0.02)


def test_wishart_from_bartlett_factor_matches_sampler():
    scale = np.array([[1.0, 0.2], [0.2, 3.0]])
    A = bartlett_factor(5.0, 2, make_rng(3), size=4)
    assert_allclose(wishart_from_factor(scale, A), sample_wishart(scale, 5.0, make_rng(3), size=4))
    with pytest.raises(DomainError):
        bartlett_factor(0.5, 2, make_rng(3))


def test_joint_precisions_cross_covariance():
    # d = 1: Cov(W_11, W_22) = 2 nu M_12^2
    M = np.array([[1.0, 0.8], [0.8, 1.0]])
    Lt, Ls = sample_joint_precisions(M, 6.0, make_rng(2), size=200_000)
    c = np.cov(Lt[:, 0, 0], Ls[:, 0, 0])[0, 1]
    assert_allclose(c, 2 * 6 * 0.64, rtol=0.03)


def test_mean_from_noise_covariance():
    Lam = np.array([[4.0, 1.0], [1.0, 2.0]])
    z = make_rng(4).standard_normal((200_000, 2))
    mu = mean_from_noise(np.array([1.0, -1.0]), 5.0, Lam, z)
    assert_allclose(mu.mean(0), [1, -1], atol=0.005)
    assert_allclose(np.cov(mu.T), np.linalg.inv(5 * Lam), rtol=0.02, atol=1e-4)


def test_generate_dataset():
    th = DomainClassParams(np.zeros(2), np.eye(2))
    ds = generate_dataset(th, th, 3, 5, make_rng(0), SOURCE)
    assert ds.counts().tolist() == [3, 5] and ds.domain == SOURCE and ds.d == 2
    empty = generate_dataset(th, th, 0, 0, make_rng(0))
    assert len(empty) == 0


def test_dataset_validation():
    with pytest.raises(DomainError):
        LabeledDataset(np.zeros((3, 2)), [0, 1])
    with pytest.raises(DomainError):
        LabeledDataset(np.zeros((2, 2)), [0, 2])
    with pytest.raises(DomainError):
        LabeledDataset(np.array([[np.nan, 0.0]]), [0])
    with pytest.raises(DomainError):
        LabeledDataset(np.zeros((1, 2)), [0], domain="other")
    with pytest.raises(DomainError):
        DomainClassParams(np.zeros(2), np.eye(3))


def test_rng_streams_are_keyed():
    a = make_rng(1, 2, 3).standard_normal(4)
    assert_array_equal(a, make_rng(1, 2, 3).standard_normal(4))
    assert not np.allclose(a, make_rng(1, 2, 4).standard_normal(4))
