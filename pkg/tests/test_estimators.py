import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from tlbee._rng import make_rng
from tlbee.classifiers import (
    ConstantClassifier,
    LinearClassifier,
    constant_rule,
    lda_rule,
    linear_true_error,
    qda_rule,
)
from tlbee.errors import InsufficientDataError
from tlbee.estimators import (
    BeeConfig,
    _combine,
    bootstrap632,
    cross_validation,
    cv_expectation,
    finish_bee,
    loo,
    prepare_bee,
    resubstitution,
    target_bee,
    tl_bee,
)
from tlbee.model import (
    SOURCE,
    DomainClassParams,
    LabeledDataset,
    generate_dataset,
    sample_generative_instance,
    synthetic_hyper,
)
from tlbee.posterior import compute_stats, lemma1_params, sample_phi


def _data(d=2, n_t=6, n_s=20, seed=0, alpha=0.8):
    h = synthetic_hyper(d, alpha, theta=0.6)
    inst = sample_generative_instance(h, make_rng(seed, 1))
    dt = generate_dataset(*inst.target, n_t, n_t, make_rng(seed, 2))
    ds = generate_dataset(*inst.source, n_s, n_s, make_rng(seed, 3), SOURCE)
    return h, dt, ds


def test_config_validation():
    for bad in (dict(N=1), dict(n_test_per_theta=0), dict(c=1.5)):
        with pytest.raises(ValueError):
            BeeConfig(**bad)


def test_control_variate_mean_is_exact():
    h, dt, _ = _data()
    g = lda_rule(dt)
    for y in (0, 1):
        phi = lemma1_params(h, y, compute_stats(dt.class_points(y), 2))
        draws = sample_phi(phi, 400_000, make_rng(9, y))
        mc = linear_true_error(g, draws, y)
        assert_allclose(cv_expectation(phi, g, y), mc.mean(), atol=4 * mc.std() / np.sqrt(mc.size))


def test_perfect_control_variate_returns_its_mean():
    V = make_rng(0).uniform(size=50)
    est, beta, corr, _ = _combine(V.copy(), np.zeros(50), V, 0.123)
    assert_allclose([est, beta, corr], [0.123, 1.0, 1.0])


def test_sample_lda_target_estimate_is_closed_form():
    # the rule equals its own control variate, so the estimate is exact
    h, dt, _ = _data()
    clf = lda_rule(dt)
    a = target_bee(clf, dt, h, BeeConfig(N=50), make_rng(1)).estimate
    b = target_bee(clf, dt, h, BeeConfig(N=50), make_rng(2)).estimate
    assert_allclose(a, b, rtol=1e-12)


def test_decoupled_transfer_equals_target_only():
    h, dt, ds = _data(alpha=0.0)
    clf = lda_rule(dt)
    a = tl_bee(clf, dt, ds, h, BeeConfig(N=300), make_rng(5))
    b = target_bee(clf, dt, h, BeeConfig(N=300), make_rng(5))
    assert a.estimate == b.estimate
    assert a.per_class == b.per_class


def test_constant_classifier_gives_one_half():
    h, dt, ds = _data()
    res = tl_bee(ConstantClassifier(1, d=2), dt, ds, h, BeeConfig(N=50), make_rng(1))
    assert res.estimate == 0.5 and res.per_class == (1.0, 0.0)
    assert not res.flags
    res = tl_bee(constant_rule(0), dt, ds, h, BeeConfig(N=50, c=0.3), make_rng(1))
    assert_allclose(res.estimate, 0.7)


def test_control_variate_keeps_mean_and_cuts_spread():
    h, dt, ds = _data()
    clf = qda_rule(dt)
    on, off = [], []
    for s in range(30):
        on.append(target_bee(clf, dt, h, BeeConfig(N=200, n_test_per_theta=200), make_rng(s)).estimate)
        off.append(target_bee(clf, dt, h, BeeConfig(N=200, n_test_per_theta=200, use_control_variate=False),
                              make_rng(s)).estimate)
    on, off = np.array(on), np.array(off)
    assert np.std(on) < np.std(off)
    assert abs(on.mean() - off.mean()) < 4 * np.hypot(on.std(), off.std()) / np.sqrt(30)


def test_prepared_draws_serve_any_source():
    h, dt, ds = _data()
    clf = lda_rule(dt)
    cfg = BeeConfig(N=100)
    prep = prepare_bee(clf, dt, h, cfg, make_rng(2))
    direct = tl_bee(clf, dt, ds, h, cfg, make_rng(2))
    assert finish_bee(prep, ds, h, cfg).estimate == direct.estimate
    other = synthetic_hyper(2, 0.8, theta=2.0)
    with pytest.raises(ValueError):
        finish_bee(prep, ds, other, cfg)


@pytest.mark.filterwarnings("ignore::tlbee.errors.ConvergenceWarning")
def test_bee_is_unbiased_for_a_data_independent_rule():
    # prior average of (estimate - true error) vanishes for a fixed rule
    h = synthetic_hyper(1, 0.9, theta=0.5, kappa=2.0)
    clf = LinearClassifier([1.0], -0.25)
    cfg = BeeConfig(N=300, hyp_method="series")
    diffs = []
    for r in range(300):
        inst = sample_generative_instance(h, make_rng(r, 1))
        dt = generate_dataset(*inst.target, 3, 3, make_rng(r, 2))
        ds = generate_dataset(*inst.source, 15, 15, make_rng(r, 3), SOURCE)
        truth = 0.5 * sum(linear_true_error(clf, th, y) for y, th in enumerate(inst.target))
        diffs.append(tl_bee(clf, dt, ds, h, cfg, make_rng(r, 4)).estimate - truth)
    diffs = np.array(diffs)
    assert abs(diffs.mean()) < 4 * diffs.std() / np.sqrt(diffs.size)


def _toy():
    x = np.array([[-2.0], [-1.5], [-1.0], [0.2], [1.0], [1.4], [2.0], [-0.1]])
    return LabeledDataset(x, [0, 0, 0, 0, 1, 1, 1, 1])


def test_resubstitution_and_loo():
    data = _toy()
    rule = lambda d: LinearClassifier([1.0], 0.0)
    assert resubstitution(rule, data) == 0.25
    assert loo(rule, data) == 0.25
    assert resubstitution(constant_rule(1), data) == 0.5
    with pytest.raises(InsufficientDataError):
        loo(rule, data.subset([0]))


def test_cross_validation_folds_and_bounds():
    data = _toy()
    assert_allclose(cross_validation(lda_rule, data, k=4, rng=make_rng(0)),
                    cross_validation(lda_rule, data, k=4, rng=make_rng(0)))
    assert cross_validation(constant_rule(0), data, k=8) == 0.5
    with pytest.raises(InsufficientDataError):
        cross_validation(lda_rule, data, k=9)


def test_bootstrap():
    data = _toy()
    separable = LabeledDataset(np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [3.0]]), [0, 0, 0, 1, 1, 1])
    assert bootstrap632(lambda d: LinearClassifier([1.0], 0.0), separable, B=20, rng=make_rng(0)) == 0.0
    assert bootstrap632(lda_rule, data, B=10, rng=make_rng(4)) == bootstrap632(lda_rule, data, B=10, rng=make_rng(4))
    est = bootstrap632(lda_rule, data, B=30, rng=make_rng(1))
    assert 0.0 <= est <= 1.0
    one_class = LabeledDataset(np.zeros((3, 1)), [0, 0, 0])
    with pytest.raises(InsufficientDataError):
        bootstrap632(constant_rule(0), one_class, B=2, rng=make_rng(0), max_retries=5)
    with pytest.raises(ValueError):
        bootstrap632(lda_rule, data, B=0, rng=make_rng(0))


def test_control_variate_disabled_with_flag():
    h = synthetic_hyper(3, 0.5, theta=0.5)
    th = DomainClassParams(np.zeros(3), np.eye(3))
    dt = generate_dataset(th, th, 1, 2, make_rng(0))
    res = target_bee(ConstantClassifier(0, d=3), dt, h, BeeConfig(N=20), make_rng(0))
    assert any("control variate disabled" in f for f in res.flags)
    assert_array_equal(res.per_class, (0.0, 1.0))
