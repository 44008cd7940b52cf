import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from hawkesmix.engine import SequenceBatch, run_em
from hawkesmix.errors import FitError
from hawkesmix.learning import (
    AsplConfig,
    aspl_fit,
    aspl_objective,
    fit_em,
    initial_model,
    mle_fit,
    objective_gradient,
    select_easy,
    select_from_easiness,
    selection_budget,
    spl_fit,
    update_model,
)
from hawkesmix.model import (
    EventSequence,
    HawkesParams,
    MixtureModel,
    component_loglik,
    easiness_smooth,
    mixture_loglik,
)
from hawkesmix.presets import get_preset
from hawkesmix.simulate import SimConfig, make_rng, simulate_hp, simulate_mixture

from conftest import random_model, random_sequence


def oracle_objective(model, candidates, easy_set, w, alpha):
    """Model-update objective from per-sequence model-core evaluations."""
    f = sum(mixture_loglik(model, s) for s in list(candidates) + list(easy_set))
    return f + alpha * sum(easiness_smooth(model, s) for s, wn in zip(candidates, w) if wn)


def with_param(model, k, which, idx, value):
    comps = list(model.components)
    p = comps[k]
    mu, A = p.mu.copy(), p.A.copy()
    (mu if which == "mu" else A)[idx] = value
    comps[k] = HawkesParams(mu, A, p.beta)
    return MixtureModel(tuple(comps), model.pi)


def fd_gradient(model, candidates, easy_set, w, alpha, h=1e-5):
    out = []
    for k, p in enumerate(model.components):
        grads = {}
        for which, arr in (("mu", p.mu), ("A", p.A)):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                x = arr[idx]
                up = oracle_objective(with_param(model, k, which, idx, x + h), candidates, easy_set, w, alpha)
                dn = oracle_objective(with_param(model, k, which, idx, x - h), candidates, easy_set, w, alpha)
                g[idx] = (up - dn) / (2 * h)
            grads[which] = g
        out.append((grads["mu"], grads["A"]))
    return out


def gradient_instance(seed):
    rng = np.random.default_rng(seed)
    K, C = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    model = random_model(rng, K, C)
    cands = [random_sequence(rng, C, int(rng.integers(1, 7))) for _ in range(4)]
    easy = [random_sequence(rng, C, int(rng.integers(0, 7))) for _ in range(2)]
    w = rng.integers(0, 2, len(cands))
    return model, cands, easy, w


def gradient_rel_error(seed, alpha=10.0):
    model, cands, easy, w = gradient_instance(seed)
    an = objective_gradient(model, cands, easy, w, alpha)
    fd = fd_gradient(model, cands, easy, w, alpha)
    a = np.concatenate([np.concatenate([m.ravel(), A.ravel()]) for m, A in an])
    f = np.concatenate([np.concatenate([m.ravel(), A.ravel()]) for m, A in fd])
    return float(np.max(np.abs(a - f)) / max(np.max(np.abs(f)), 1e-12))


def selection_objective(w, e, zeta):
    return sum((ei if wi else zeta) for wi, ei in zip(w, e))


def brute_force_minimisers(e, zeta):
    best, arg = None, []
    for w in itertools.product((0, 1), repeat=len(e)):
        v = selection_objective(w, e, zeta)
        if best is None or v < best:
            best, arg = v, [w]
        elif v == best:
            arg.append(w)
    return arg


class TestGradient:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        assert gradient_rel_error(seed) <= 1e-4

    def test_alpha_zero_is_loglik_gradient(self, rng):
        model = random_model(rng, 2, 2)
        seqs = [random_sequence(rng, 2, 4) for _ in range(3)]
        g0 = objective_gradient(model, seqs, [], np.ones(3), 0.0)
        g1 = objective_gradient(model, [], seqs, [], 10.0)
        for (m0, a0), (m1, a1) in zip(g0, g1):
            np.testing.assert_allclose(m0, m1, rtol=1e-13)
            np.testing.assert_allclose(a0, a1, rtol=1e-13)


class TestSelection:
    def test_trivial_example(self):
        st = select_from_easiness([-5.0, -1.0, -3.0], [1.0], fraction=1 / 3)
        assert st.L == 1 and list(st.w) == [1, 0, 0] and st.zeta == -5.0

    def test_budget_uniform_k2(self):
        assert selection_budget([0.5, 0.5], 100) == 12

    def test_budget_clamped_to_one(self, caplog):
        st = select_from_easiness([0.3, 0.1, 0.2], [0.5, 0.5])
        assert st.L == 1 and list(st.w) == [0, 1, 0]
        assert "using L=1" in caplog.text

    def test_ties_go_to_lower_index(self):
        st = select_from_easiness([1.0, 0.0, 0.0, 0.0], [1.0], fraction=0.5)
        assert list(st.w) == [0, 1, 1, 0]

    def test_threshold_consistency(self, rng):
        for _ in range(50):
            e = rng.normal(size=int(rng.integers(1, 40)))
            st = select_from_easiness(e, rng.dirichlet(np.ones(3)), fraction=rng.uniform(0.1, 1))
            assert st.w.sum() == st.L
            np.testing.assert_array_equal(st.w == 1, e <= st.zeta)

    def test_empty_candidates_never_selected(self):
        st = select_from_easiness([np.inf, -1.0, np.inf], [1.0], fraction=1.0)
        assert list(st.w) == [0, 1, 0]

    def test_highest_is_reverse_order(self, rng):
        e = rng.normal(size=20)
        lo = select_from_easiness(e, [1.0], fraction=0.25)
        hi = select_from_easiness(-e, [1.0], fraction=0.25, lowest=False)
        np.testing.assert_array_equal(lo.w, hi.w)

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_exhaustive_minimiser(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(4, 13))
        model = random_model(rng, int(rng.integers(1, 4)), 2)
        cands = [random_sequence(rng, 2, int(rng.integers(1, 6))) for _ in range(n)]
        st = select_easy(cands, model, fraction=1.0)
        e = [Fraction(easiness_smooth(model, s)) for s in cands]
        zeta = Fraction(st.zeta)
        minimisers = brute_force_minimisers(e, zeta)
        sized = [w for w in minimisers if sum(w) == st.L]
        assert tuple(int(x) for x in st.w) in minimisers
        assert sized == [tuple(int(x) for x in st.w)]


class TestObjective:
    def test_w_zero(self, rng):
        model = random_model(rng, 2, 2)
        cands = [random_sequence(rng, 2, 3) for _ in range(4)]
        easy = [random_sequence(rng, 2, 2)]
        f = aspl_objective(model, cands, easy, np.zeros(4), 7.0, -1.5)
        base = sum(mixture_loglik(model, s) for s in cands + easy)
        assert f == pytest.approx(base + 7.0 * -1.5 * 4, rel=1e-12)

    def test_alpha_zero(self, rng):
        model = random_model(rng, 2, 2)
        cands = [random_sequence(rng, 2, 3) for _ in range(3)]
        f = aspl_objective(model, cands, [], [1, 0, 1], 0.0, 2.0)
        assert f == pytest.approx(sum(mixture_loglik(model, s) for s in cands), rel=1e-12)

    def test_hand_sum(self, rng):
        model = random_model(rng, 2, 2)
        cands = [random_sequence(rng, 2, 3) for _ in range(2)]
        f = aspl_objective(model, cands, [], [1, 0], 10.0, -0.7)
        expected = sum(mixture_loglik(model, s) for s in cands) + 10.0 * (easiness_smooth(model, cands[0]) - 0.7)
        assert f == pytest.approx(expected, rel=1e-12)


def poisson_like_data(seed, n=30, C=2):
    rng = make_rng(seed, 99)
    p = HawkesParams([0.6, 0.4][:C], np.full((C, C), 0.2), 1.0)
    return [simulate_hp(p, 8.0, make_rng(seed, 98, i)) for i in range(n)]


class TestMle:
    def test_em_monotone(self, rng):
        ds = simulate_mixture(get_preset("k2c2").sim_config(n=40, seed=3))
        res = fit_em(ds.sequences, 2, 1.0, max_iter=60, tol=0)
        diffs = np.diff(res.objective)
        assert np.all(diffs >= -1e-8 * np.abs(np.array(res.objective[1:])))

    def test_recovers_single_process(self):
        truth = HawkesParams([0.5, 0.3], [[0.3, 0.1], [0.05, 0.2]], 1.0)
        seqs = [simulate_hp(truth, 300.0, make_rng(5, 1, i)) for i in range(80)]
        m = mle_fit(seqs, K=1, beta=1.0, tol=1e-10, max_iter=2000).components[0]
        np.testing.assert_allclose(m.mu, truth.mu, rtol=0.1)
        assert np.linalg.norm(m.A - truth.A) <= 0.1 * np.linalg.norm(truth.A)

    def test_duplication_equals_double_weight(self):
        seqs = poisson_like_data(1, n=12)
        init = initial_model(seqs, 2, 1.0, seed=4)
        a = fit_em(seqs + seqs, 2, 1.0, init=init, max_iter=50, tol=0)
        b = fit_em(seqs, 2, 1.0, weights=np.full(12, 2.0), init=init, max_iter=50, tol=0)
        assert a.n_iter == b.n_iter
        for p, q in zip(a.model.components, b.model.components):
            np.testing.assert_allclose(p.mu, q.mu, rtol=1e-10)
            np.testing.assert_allclose(p.A, q.A, rtol=1e-10, atol=1e-14)

    def test_single_weighted_sequence_is_stationary(self):
        seqs = poisson_like_data(2, n=5)
        w = np.array([0, 0, 1.0, 0, 0])
        m = mle_fit(seqs, weights=w, K=1, tol=1e-14, max_iter=20000)
        g_mu, g_A = objective_gradient(m, [], [seqs[2]], [], 0.0)[0]
        p = m.components[0]
        # projected-gradient residual: x - max(x + g, 0)
        res = [x - np.maximum(x + g, 0.0) for x, g in ((p.mu, g_mu), (p.A, g_A))]
        assert max(np.abs(r).max() for r in res) <= 1e-5

    def test_requires_enough_weighted_sequences(self):
        seqs = poisson_like_data(3, n=3)
        with pytest.raises(FitError):
            mle_fit(seqs, weights=[1, 0, 0], K=2)
        with pytest.raises(FitError):
            mle_fit([], K=1)
        with pytest.raises(ValueError):
            mle_fit(seqs, weights=[1, -1, 1], K=1)

    def test_warm_start_with_zero_rate_is_repaired(self):
        seqs = [EventSequence([1.0, 2.0], [0, 1], 3.0, 2), EventSequence([0.5], [1], 3.0, 2)]
        init = MixtureModel((HawkesParams([0.5, 0.0], np.zeros((2, 2)), 1.0),))
        res = run_em(SequenceBatch(seqs, 1.0), init, np.ones(2), max_iter=50)
        assert np.isfinite(res.objective[-1]) and res.model.components[0].mu[1] > 0

    def test_deterministic_given_seed(self):
        seqs = poisson_like_data(4, n=20)
        a, b = mle_fit(seqs, seed=9), mle_fit(seqs, seed=9)
        for p, q in zip(a.components, b.components):
            np.testing.assert_array_equal(p.mu, q.mu)
            np.testing.assert_array_equal(p.A, q.A)


class TestUpdateModel:
    def test_alpha_zero_is_mle_on_union(self):
        seqs = poisson_like_data(5, n=16)
        cands, easy = seqs[:10], seqs[10:]
        init = initial_model(seqs, 2, 1.0, seed=1)
        a = update_model(cands, easy, np.ones(10), 0.0, 2, warm_start=init, em_iters=300, em_tol=1e-12)
        b = mle_fit(seqs, K=2, init=init, max_iter=300, tol=1e-12)
        for p, q in zip(a.components, b.components):
            np.testing.assert_allclose(p.mu, q.mu, rtol=1e-10)
            np.testing.assert_allclose(p.A, q.A, rtol=1e-10, atol=1e-14)

    def test_k1_all_selected_is_reweighted_mle(self):
        seqs = [s for s in poisson_like_data(6, n=14) if len(s)]
        cands, easy = seqs[:8], seqs[8:]
        alpha = 10.0
        init = initial_model(seqs, 1, 1.0)
        a = update_model(cands, easy, np.ones(8), alpha, 1, warm_start=init, em_iters=5000, em_tol=1e-13)
        wts = [1 + alpha / len(s) for s in cands] + [1.0] * len(easy)
        b = mle_fit(seqs, weights=wts, K=1, init=init, max_iter=5000, tol=1e-13)
        np.testing.assert_allclose(a.components[0].mu, b.components[0].mu, rtol=1e-6)
        np.testing.assert_allclose(a.components[0].A, b.components[0].A, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_ascent(self, seed):
        rng = np.random.default_rng(seed)
        seqs = poisson_like_data(10 + seed, n=20)
        cands, easy = seqs[:14], seqs[14:]
        model = initial_model(seqs, 2, 1.0, seed=seed)
        w = rng.integers(0, 2, 14)
        before = oracle_objective(model, cands, easy, w, 10.0)
        new = update_model(cands, easy, w, 10.0, 2, warm_start=model, em_iters=30)
        assert oracle_objective(new, cands, easy, w, 10.0) >= before - 1e-8

    def test_needs_beta_without_warm_start(self):
        seqs = poisson_like_data(7, n=6)
        with pytest.raises(ValueError):
            update_model(seqs, [], np.zeros(6), 1.0, 1)


@pytest.fixture(scope="module")
def small_dataset():
    return simulate_mixture(get_preset("k2c2").sim_config(n=40, seed=11))


class TestOuterLoops:
    def test_aspl_report_invariants(self, small_dataset):
        cfg = AsplConfig(K=2, seed=2, em_iters=40)
        model, rep = aspl_fit(small_dataset.sequences, cfg)
        rep.check_invariants()
        assert rep.easy_sizes[-1] >= 2 * 40
        assert all(math.isfinite(o) for o in rep.objectives)
        assert rep.model is model and model.K == 2
        assert rep.to_dict()["iterations"][0]["L"] == rep.records[0].L

    def test_aspl_deterministic(self, small_dataset):
        cfg = AsplConfig(K=2, seed=5, em_iters=20)
        a, ra = aspl_fit(small_dataset.sequences[:20], cfg)
        b, rb = aspl_fit(small_dataset.sequences[:20], cfg)
        assert ra.objectives == rb.objectives
        for p, q in zip(a.components, b.components):
            np.testing.assert_array_equal(p.mu, q.mu)

    def test_aspl_stitch(self, small_dataset):
        cfg = AsplConfig(K=2, augment_method="stitch", em_iters=20, easy_target=0.5)
        _, rep = aspl_fit(small_dataset.sequences[:20], cfg)
        rep.check_invariants()

    def test_rescale_only_for_superpose(self, small_dataset):
        seqs = small_dataset.sequences[:16]
        cfg = AsplConfig(K=2, em_iters=20, easy_target=0.5)
        raw, _ = aspl_fit(seqs, AsplConfig(**{**cfg.__dict__, "rescale_superposed": False}))
        scaled, _ = aspl_fit(seqs, cfg)
        for p, q in zip(raw.components, scaled.components):
            np.testing.assert_allclose(q.mu, p.mu / 2)

    def test_single_process_augmentation_is_harmless(self):
        from hawkesmix.evaluation import test_loglike as score

        p = HawkesParams([0.6, 0.4], [[0.3, 0.1], [0.1, 0.2]], 1.0)
        diffs = []
        for seed in range(10):
            ds = simulate_mixture(SimConfig(MixtureModel((p,)), 120, 8.0, seed=seed))
            train, test = ds.sequences[:60], ds.sequences[60:]
            aspl, _ = aspl_fit(train, AsplConfig(K=1, seed=seed))
            diffs.append(score(aspl, test) - score(mle_fit(train, K=1, seed=seed), test))
        se = np.std(diffs, ddof=1) / np.sqrt(len(diffs))
        assert np.mean(diffs) >= -2 * se

    def test_aspl_needs_two(self):
        with pytest.raises(ValueError):
            aspl_fit(poisson_like_data(8, n=1))

    def test_invariant_checker_flags_stall(self, small_dataset):
        _, rep = aspl_fit(small_dataset.sequences[:10], AsplConfig(K=1, em_iters=10, easy_target=0.5))
        rep.records[-1].easy_size = rep.records[-1].easy_size - rep.records[-1].L
        with pytest.raises(AssertionError):
            rep.check_invariants()

    def test_spl_full_budget_is_mle(self, small_dataset):
        seqs = small_dataset.sequences
        cfg = AsplConfig(K=2, select_fraction=2.0, seed=3, em_iters=500, em_tol=1e-7)
        m, rep = spl_fit(seqs, cfg)
        assert len(rep.records) == 1 and rep.records[0].L == len(seqs)
        ref = mle_fit(seqs, K=2, seed=3, max_iter=500, tol=1e-7)
        for p, q in zip(m.components, ref.components):
            np.testing.assert_allclose(p.mu, q.mu, rtol=1e-12)

    def test_spl_invariants(self, small_dataset):
        _, rep = spl_fit(small_dataset.sequences, AsplConfig(K=2, em_iters=50))
        rep.check_invariants()
        assert rep.easy_sizes[-1] == 40


def test_config_validation():
    with pytest.raises(ValueError):
        AsplConfig(alpha=-1)
    with pytest.raises(ValueError):
        AsplConfig(augment_method="shuffle")
    with pytest.raises(ValueError):
        AsplConfig(K=0)
