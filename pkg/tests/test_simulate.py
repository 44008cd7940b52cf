import numpy as np
import pytest

from hawkesmix.errors import TruncationError
from hawkesmix.model import HawkesParams, MixtureModel
from hawkesmix.presets import PRESETS, get_preset
from hawkesmix.simulate import SimConfig, make_rng, simulate_hp, simulate_mixture


def test_poisson_counts():
    p = HawkesParams([0.7, 0.3], np.zeros((2, 2)), 1.0)
    seqs = [simulate_hp(p, 10.0, make_rng(0, 1, i)) for i in range(2000)]
    counts = np.array([s.type_counts() for s in seqs])
    # mean 7 and 3, standard error about 0.06 and 0.04
    np.testing.assert_allclose(counts.mean(axis=0), [7.0, 3.0], atol=0.25)
    assert counts[:, 0].var(ddof=1) == pytest.approx(7.0, rel=0.1)


def test_branching_mean_count():
    # univariate, branching ratio a: expected count ~ mu T / (1 - a) for long windows
    mu, a, T = 0.5, 0.5, 400.0
    p = HawkesParams([mu], [[a]], 1.0)
    n = np.array([len(simulate_hp(p, T, make_rng(1, 1, i))) for i in range(60)])
    assert n.mean() == pytest.approx(mu * T / (1 - a), rel=0.05)


def test_events_are_valid():
    p = HawkesParams([0.4, 0.2, 0.1], np.full((3, 3), 0.2), 2.0)
    s = simulate_hp(p, 30.0, make_rng(3))
    assert np.all(np.diff(s.times) > 0) and s.times[0] > 0 and s.times[-1] <= 30.0
    assert set(s.types.tolist()) <= {0, 1, 2}


def test_zero_rates_give_empty():
    p = HawkesParams([0.0], [[0.5]], 1.0)
    assert len(simulate_hp(p, 10.0, make_rng(0))) == 0


def test_truncation_carries_partial():
    p = HawkesParams([5.0], [[0.0]], 1.0)
    with pytest.raises(TruncationError) as info:
        simulate_hp(p, 100.0, make_rng(0), max_events=7)
    assert len(info.value.partial) == 7


def test_supercritical_warns():
    p = HawkesParams([0.5], [[1.2]], 1.0)
    with pytest.warns(RuntimeWarning), pytest.raises(TruncationError):
        simulate_hp(p, 1000.0, make_rng(0), max_events=50)


def test_mixture_truncation_reports_index():
    hot = HawkesParams([50.0], [[0.0]], 1.0)
    cold = HawkesParams([0.1], [[0.0]], 1.0)
    cfg = SimConfig(MixtureModel((cold, hot), [0.5, 0.5]), 20, 10.0, seed=1, max_events=100)
    with pytest.raises(TruncationError) as info:
        simulate_mixture(cfg)
    assert info.value.index is not None and "sequence" in str(info.value)


def test_mixture_is_deterministic_and_prefix_stable():
    m = get_preset("k2c2").model
    a = simulate_mixture(SimConfig(m, 30, 5.0, seed=4))
    b = simulate_mixture(SimConfig(m, 30, 5.0, seed=4))
    assert a.labels == b.labels and all(x == y for x, y in zip(a.sequences, b.sequences))
    c = simulate_mixture(SimConfig(m, 31, 5.0, seed=4))
    assert c.sequences[:30] == a.sequences
    d = simulate_mixture(SimConfig(m, 30, 5.0, seed=5))
    assert d.sequences != a.sequences


def test_label_frequencies():
    m = get_preset("k3c5").model
    ds = simulate_mixture(SimConfig(m, 3000, 1.0, seed=2))
    freq = np.bincount(ds.labels, minlength=3) / 3000
    np.testing.assert_allclose(freq, m.pi, atol=0.03)


def test_sim_config_validation():
    m = get_preset("k2c2").model
    with pytest.raises(ValueError):
        SimConfig(m, 0, 1.0)
    with pytest.raises(ValueError):
        SimConfig(m, 5, 0.0)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_stationary(name):
    preset = get_preset(name)
    assert all(p.is_stationary() for p in preset.model.components)
    assert preset.sim_config().n_sequences == preset.n_sequences
