import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from rbfvmc.errors import ContractViolation, DivisionHazard
from rbfvmc.hamiltonian import HO1D, HO2D, HermitianMatrix, ParticleBox, all_configurations
from rbfvmc.oracle import dense_lowest_eig, enumerate_estimates, rayleigh_quotient
from rbfvmc.sampler import (
    SamplerConfig,
    metropolis_step,
    propose,
    run_sampling,
    sample_indices,
)
from rbfvmc.wavefunction import RbfNetwork, evaluate_many, init_random, interpolating_network


class ScriptedRng:
    """Replays fixed draws: integers() pops from ``ints``, random() from ``floats``."""

    def __init__(self, ints, floats=()):
        self.ints = list(ints)
        self.floats = list(floats)

    def integers(self, *args, **kw):
        return self.ints.pop(0)

    def random(self, *args, **kw):
        return self.floats.pop(0)


def test_reflection_at_lower_edge():
    # coordinate 0, sign draw 0 -> step -1
    out = propose([0], (5,), ScriptedRng([0, 0]))
    np.testing.assert_array_equal(out, [0])


def test_reflection_at_upper_edge():
    out = propose([4], (5,), ScriptedRng([0, 1]))
    np.testing.assert_array_equal(out, [4])


def test_interior_moves_are_balanced():
    rng = np.random.default_rng(11)
    draws = [propose([5], (20,), rng)[0] for _ in range(10_000)]
    assert set(draws) == {4, 6}
    counts = [draws.count(4), draws.count(6)]
    assert chisquare(counts).pvalue > 0.01


def proposal_kernel(shape):
    """Enumerate every (coordinate, sign) draw from every configuration."""
    configs = [tuple(c) for c in all_configurations(type("S", (), {"shape": shape})())]
    index = {c: i for i, c in enumerate(configs)}
    p = len(shape)
    T = np.zeros((len(configs), len(configs)))
    for c in configs:
        for k in range(p):
            for sign_draw in (0, 1):
                out = propose(c, shape, ScriptedRng([k, sign_draw]))
                T[index[c], index[tuple(out)]] += 1.0 / (2 * p)
    return T


@pytest.mark.parametrize("shape", [(3,), (3, 3), (2, 4)])
def test_proposal_kernel_is_symmetric(shape):
    T = proposal_kernel(shape)
    np.testing.assert_allclose(T.sum(1), 1.0)
    np.testing.assert_array_equal(T, T.T)


def test_equal_amplitudes_always_accept():
    # psi(0) == psi(1) by symmetry about the centre 0.5
    net = RbfNetwork([1.0], [0.7], [[0.5]])
    model = HO1D(0.0, 2)
    rng = np.random.default_rng(0)
    n = np.array([0])
    for _ in range(200):
        n, accepted = metropolis_step(net, model, n, rng)
        assert accepted


def test_zero_amplitude_never_accepted():
    # psi(1) = e^-1 - e^-1 = 0
    net = RbfNetwork([1.0, -1.0], [1.0, 1.0], [[0.0], [2.0]])
    model = HO1D(0.0, 4)
    rng = np.random.default_rng(0)
    n = np.array([0])
    for _ in range(500):
        n, _ = metropolis_step(net, model, n, rng)
        assert n[0] == 0


def test_metropolis_step_floor():
    net = RbfNetwork([1.0, -1.0], [1.0, 1.0], [[0.0], [2.0]])
    with pytest.raises(DivisionHazard):
        metropolis_step(net, HO1D(0.0, 4), [1], np.random.default_rng(0))


def exact_distribution(net, model):
    psi = evaluate_many(net, all_configurations(model))
    return psi**2 / np.sum(psi**2)


@pytest.mark.parametrize("model,seed", [(HO1D(0.0, 4), 3), (HO1D(0.0, 5), 8), (HO2D(0.0, 0.0, 4), 1)])
def test_stationary_distribution(model, seed):
    net = init_random(2, len(model.shape), seed=seed, scale=1.0, n_max=model.shape[0])
    pi = exact_distribution(net, model)
    cfg = SamplerConfig(n_samples=1_000_000, n_therm=1000, stride=1, seed=seed)
    psi = evaluate_many(net, all_configurations(model))
    chains, rate, _ = sample_indices(psi, model.shape, cfg)
    freq = np.bincount(chains[0], minlength=pi.size) / chains[0].size
    assert 0.5 * np.abs(freq - pi).sum() < 0.01
    assert 0.0 <= rate <= 1.0


def test_python_step_agrees_with_compiled_walk():
    model = HO1D(0.0, 4)
    net = init_random(2, 1, seed=3, n_max=4)
    pi = exact_distribution(net, model)
    rng = np.random.default_rng(1)
    n = np.array([int(np.argmax(pi))])
    counts = np.zeros(4)
    for _ in range(40_000):
        n, _ = metropolis_step(net, model, n, rng)
        counts[n[0]] += 1
    assert 0.5 * np.abs(counts / counts.sum() - pi).sum() < 0.02


def test_zero_variance_on_exact_ground_state():
    net = RbfNetwork([1.0], [50.0], [[0.0]])
    est = run_sampling(net, HO1D(0.0, 20), SamplerConfig(n_samples=5000, seed=1))
    assert est.e_mean == 0.5
    assert est.e_err < 1e-10


def test_zero_variance_on_matrix_eigenvector():
    model = HermitianMatrix.generator(5)
    ref = dense_lowest_eig(model)
    net = interpolating_network(np.arange(5), ref.eigenvector, sharpness=60.0)
    est = run_sampling(net, model, SamplerConfig(n_samples=20000, seed=2))
    assert est.e_mean == pytest.approx(ref.energy, abs=1e-12)
    assert est.e_err < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_enumeration(seed):
    model = HO1D(0.8, 4)
    net = init_random(2, 1, seed=seed, scale=1.0, n_max=4)
    e, o, eo, oo = enumerate_estimates(net, model)
    est = run_sampling(net, model, SamplerConfig(n_samples=50000, seed=seed))
    assert abs(est.e_mean - e) < 3 * est.e_err
    np.testing.assert_allclose(est.o_mean, o, rtol=0.05, atol=0.05 * np.abs(o).max())


def test_reproducible():
    model = HO2D(1.0, 0.5, 6)
    net = init_random(3, 2, seed=4, n_max=6)
    cfg = SamplerConfig(n_samples=20000, seed=9, n_chains=3)
    a = run_sampling(net, model, cfg)
    b = run_sampling(net, model, cfg)
    assert a.e_mean == b.e_mean and a.e_err == b.e_err
    np.testing.assert_array_equal(a.oo_mean, b.oo_mean)
    np.testing.assert_array_equal(a.eo_mean, b.eo_mean)


def test_estimate_invariants():
    model = HO1D(0.5, 10)
    net = init_random(4, 1, seed=2, n_max=10)
    est = run_sampling(net, model, SamplerConfig(n_samples=20000, seed=3, n_chains=2))
    np.testing.assert_array_equal(est.oo_mean, est.oo_mean.T)
    assert 0.0 <= est.acceptance_rate <= 1.0
    assert est.n_samples == 20000
    assert est.last_state.shape == (2,)
    for arr in (est.o_mean, est.eo_mean, est.oo_mean):
        assert np.all(np.isfinite(arr))


def test_error_bar_scaling():
    model = HO1D(0.5, 12)
    net = init_random(3, 1, seed=7, n_max=6)
    errs = [
        np.mean([run_sampling(net, model, SamplerConfig(n_samples=n, seed=s)).e_err for s in range(4)])
        for n in (12500, 50000, 200000)
    ]
    for small, big in zip(errs, errs[1:]):
        assert 1.0 <= small / big <= 4.0


def test_mixing_warning_for_trapped_chain():
    net = RbfNetwork([1.0], [40.0], [[5.0]])
    est = run_sampling(net, HO1D(0.0, 10), SamplerConfig(n_samples=2000, seed=0))
    assert est.acceptance_rate < 1e-3
    assert est.warning and "acceptance" in est.warning


def test_chain_continues_from_start():
    net = RbfNetwork([1.0, 1.0], [40.0, 40.0], [[1.0], [7.0]])
    model = HO1D(0.0, 10)
    est = run_sampling(net, model, SamplerConfig(n_samples=100, seed=0), start=[7])
    assert est.e_mean == 7.5
    assert est.last_state.tolist() == [7]


def test_dead_start_restarts_at_peak():
    net = RbfNetwork([1.0], [40.0], [[2.0]])
    est = run_sampling(net, HO1D(0.0, 10), SamplerConfig(n_samples=100, seed=0), start=[8])
    assert est.e_mean == 2.5


def test_dimension_mismatch():
    net = init_random(2, 2, seed=0)
    with pytest.raises(ContractViolation):
        run_sampling(net, HO1D(0.5, 5), SamplerConfig(n_samples=10))


@pytest.mark.parametrize(
    "bad",
    [dict(n_samples=0), dict(n_therm=-1), dict(stride=0), dict(n_chains=0), dict(jump_prob=1.0), dict(jump_prob=-0.1), dict(mix=-0.1), dict(mix=np.inf)],
)
def test_config_validation(bad):
    with pytest.raises(ContractViolation):
        SamplerConfig(**bad)


def test_chains_split_samples():
    model = HO1D(0.3, 6)
    net = init_random(2, 1, seed=1, n_max=6)
    psi = evaluate_many(net, all_configurations(model))
    cfg = SamplerConfig(n_samples=10, n_therm=5, stride=2, seed=0, n_chains=3).resolved(1)
    chains, _, last = sample_indices(psi, model.shape, cfg)
    assert [c.size for c in chains] == [4, 3, 3]
    assert list(itertools.chain(last)) == [c[-1] for c in chains]


def test_jumps_keep_stationary_distribution():
    model = HO2D(0.0, 0.0, 4)
    net = init_random(3, 2, seed=6, n_max=4)
    pi = exact_distribution(net, model)
    psi = evaluate_many(net, all_configurations(model))
    cfg = SamplerConfig(n_samples=1_000_000, n_therm=1000, stride=1, seed=2, jump_prob=0.2)
    chains, _, _ = sample_indices(psi, model.shape, cfg)
    freq = np.bincount(chains[0], minlength=pi.size) / chains[0].size
    assert 0.5 * np.abs(freq - pi).sum() < 0.01


def test_jumps_reach_separated_peak():
    # two sharp peaks; neighbours carry weight e^-40
    net = RbfNetwork([1.0, 1.0], [20.0, 20.0], [[0.0], [9.0]])
    model = HO1D(0.0, 10)
    local = run_sampling(net, model, SamplerConfig(n_samples=20000, seed=0))
    mixed = run_sampling(net, model, SamplerConfig(n_samples=200000, seed=0, jump_prob=0.2))
    assert local.e_mean == 0.5
    assert abs(mixed.e_mean - 5.0) < 4 * mixed.e_err


@pytest.mark.parametrize("seed", [0, 1])
def test_mix_matches_enumeration(seed):
    model = HO1D(0.8, 4)
    net = init_random(2, 1, seed=seed, scale=1.0, n_max=4)
    e, o, eo, oo = enumerate_estimates(net, model)
    est = run_sampling(net, model, SamplerConfig(n_samples=50000, seed=seed, mix=0.5))
    assert abs(est.e_mean - e) < 3 * est.e_err
    np.testing.assert_allclose(est.o_mean, o, rtol=0.05, atol=0.05 * np.abs(o).max())
    np.testing.assert_allclose(est.oo_mean, oo, rtol=0.05, atol=0.05 * np.abs(oo).max())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mix_sees_rarely_visited_tail(seed):
    # exact box ground state with the n=3 component flipped and tripled;
    # psi(3)^2 ~ 1e-6, so plain sampling almost never visits it
    model = ParticleBox(2.0, 12)
    v = dense_lowest_eig(model).eigenvector.copy()
    v[3] *= -3
    net = interpolating_network(np.arange(12), v, sharpness=60.0)
    rq = rayleigh_quotient(model, net)
    plain = run_sampling(net, model, SamplerConfig(n_samples=50000, seed=seed))
    mixed = run_sampling(net, model, SamplerConfig(n_samples=50000, seed=seed, mix=0.05))
    assert rq - plain.e_mean > 100 * plain.e_err
    assert abs(mixed.e_mean - rq) < 3 * mixed.e_err
