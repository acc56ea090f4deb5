import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbfvmc.errors import (
    ContractViolation,
    DerivativeSingularity,
    DivisionHazard,
    NumericalFailure,
)
from rbfvmc.wavefunction import (
    Activation,
    RbfNetwork,
    evaluate,
    evaluate_many,
    init_random,
    interpolating_network,
    log_derivatives,
)


def test_evaluate_at_centre():
    net = RbfNetwork([1.0], [1.0], [[0.0]])
    assert evaluate(net, [0]) == 1.0


def test_evaluate_gaussian_substitution():
    net = RbfNetwork([1.0], [1.0], [[0.0]])
    assert evaluate(net, [2]) == pytest.approx(np.exp(-4.0), rel=1e-15)
    assert evaluate(net, [2]) == pytest.approx(0.018316, abs=1e-6)


def test_evaluate_exp_abs_sum():
    net = RbfNetwork([0.5, 0.5], [1.0, 1.0], [[0.0], [0.0]], Activation.EXP_ABS)
    assert evaluate(net, [1]) == pytest.approx(0.367879, abs=1e-6)


def test_evaluation_only_kinds():
    net = RbfNetwork([1.0], [1.0], [[0.0]], Activation.MULTIQUADRIC)
    assert evaluate(net, [3]) == pytest.approx(np.sqrt(8.0))
    inv = RbfNetwork([1.0], [1.0], [[0.0]], Activation.INVERSE_MULTIQUADRIC)
    assert evaluate(inv, [3]) == pytest.approx(1 / np.sqrt(8.0))
    with pytest.raises(NumericalFailure):
        evaluate(net, [0])
    with pytest.raises(ContractViolation):
        log_derivatives(net, [3])


def test_log_derivatives_at_centre():
    net = RbfNetwork([1.0], [1.0], [[0.0]])
    np.testing.assert_allclose(log_derivatives(net, [0]), [1.0, 0.0, 0.0])


def test_log_derivatives_by_hand():
    # rho = e^-1, psi = 2 e^-1
    net = RbfNetwork([2.0], [1.0], [[0.0]])
    np.testing.assert_allclose(log_derivatives(net, [1]), [0.5, -1.0, 2.0], rtol=1e-14)


def test_log_derivative_ordering():
    net = RbfNetwork([1.0, 2.0], [0.3, 0.4], [[0.1, 0.2], [1.3, 0.7]])
    o = log_derivatives(net, [1, 1])
    assert o.shape == (2 * (2 + 2),)
    assert net.params().tolist() == [1.0, 2.0, 0.3, 0.4, 0.1, 0.2, 1.3, 0.7]


def fd_log_derivatives(net, n, h=1e-6):
    """Central differences of log|psi| in every flattened parameter."""
    theta = net.params()
    out = np.empty(theta.size)
    for k in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[k] += h
        dn[k] -= h
        lp = np.log(abs(evaluate(net.with_params(up), n)))
        lm = np.log(abs(evaluate(net.with_params(dn), n)))
        out[k] = (lp - lm) / (2 * h)
    return out


def random_case(rng, kind):
    while True:
        M, p = rng.integers(1, 5), rng.integers(1, 3)
        a = rng.uniform(-1, 1, M)
        b = rng.uniform(0.05, 0.8, M) * rng.choice([-1, 1], M)
        c = rng.uniform(0, 4, (M, p))
        net = RbfNetwork(a, b, c, kind)
        n = rng.integers(0, 5, p)
        # skip near-nodes where log|psi| is ill-conditioned
        diff = n - net.c
        r2 = (diff**2).sum(1)
        rho = np.exp(-np.abs(b) * (r2 if kind is Activation.GAUSSIAN else np.sqrt(r2)))
        if abs(evaluate(net, n)) > 0.05 * np.abs(a * rho).sum():
            return net, n


@pytest.mark.parametrize("kind", [Activation.GAUSSIAN, Activation.EXP_ABS])
def test_log_derivatives_match_finite_differences(kind):
    rng = np.random.default_rng(20240611)
    for _ in range(100):
        net, n = random_case(rng, kind)
        analytic = log_derivatives(net, n)
        numeric = fd_log_derivatives(net, n)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_zero_spread_is_singular():
    net = RbfNetwork([1.0, 1.0], [1.0, 0.0], [[0.0], [1.0]])
    with pytest.raises(DerivativeSingularity):
        log_derivatives(net, [0])


def test_floor_violation():
    net = RbfNetwork([1.0, -1.0], [1.0, 1.0], [[0.0], [2.0]])
    with pytest.raises(DivisionHazard):
        log_derivatives(net, [1])


def test_dimension_mismatch():
    net = RbfNetwork([1.0], [1.0], [[0.0, 0.0]])
    with pytest.raises(ContractViolation):
        evaluate(net, [0])


def test_rejects_non_finite_parameters():
    with pytest.raises(ContractViolation):
        RbfNetwork([np.nan], [1.0], [[0.0]])


def test_init_random_is_deterministic():
    a = init_random(3, 1, seed=42, scale=1.0)
    b = init_random(3, 1, seed=42, scale=1.0)
    np.testing.assert_array_equal(a.params(), b.params())


def test_init_random_depends_on_seed():
    a = init_random(3, 1, seed=42, scale=1.0)
    b = init_random(3, 1, seed=43, scale=1.0)
    assert not np.array_equal(a.params(), b.params())


@given(st.integers(1, 20), st.integers(1, 3), st.integers(0, 2**31), st.floats(0.02, 5.0))
def test_init_random_invariants(M, p, seed, scale):
    net = init_random(M, p, seed, scale, n_max=7)
    assert np.all(np.abs(net.b) >= 0.01)
    assert np.all(np.abs(net.a) <= scale) and np.all(np.abs(net.b) <= scale)
    assert np.all((net.c >= 0) & (net.c <= 6))
    assert np.all(np.isfinite(net.params()))


def test_init_random_center_span():
    net = init_random(50, 2, seed=1, n_max=20, center_span=1.9)
    assert np.all((net.c >= 0) & (net.c <= 1.9))
    assert np.all(init_random(4, 1, seed=1, n_max=20, center_span=0.0).c == 0.0)


@pytest.mark.parametrize("scale", [0.0, 0.005, 0.01])
def test_init_random_rejects_scale_that_cannot_reach_b_min(scale):
    with pytest.raises(ContractViolation):
        init_random(3, 1, seed=0, scale=scale)


def test_interpolating_network_reproduces_values():
    v = np.array([0.3, -0.7, 0.2, 0.1])
    net = interpolating_network(np.arange(4), v)
    np.testing.assert_allclose(evaluate_many(net, np.arange(4)[:, None]), v, atol=1e-20)


nets = st.integers(1, 6).flatmap(
    lambda M: st.tuples(
        st.lists(st.floats(-3, 3), min_size=M, max_size=M),
        st.lists(st.floats(-2, 2).filter(lambda x: abs(x) > 1e-3), min_size=M, max_size=M),
        st.lists(st.floats(0, 10), min_size=M, max_size=M),
        st.sampled_from([Activation.GAUSSIAN, Activation.EXP_ABS]),
    )
)


@settings(max_examples=60)
@given(nets, st.integers(0, 12))
def test_bounded_by_weight_sum(params, n):
    a, b, c, kind = params
    net = RbfNetwork(a, b, np.array(c)[:, None], kind)
    assert abs(evaluate(net, [n])) <= np.abs(net.a).sum() * (1 + 1e-12)


@settings(max_examples=60)
@given(nets, st.integers(0, 12), st.data())
def test_sign_of_b_does_not_matter(params, n, data):
    a, b, c, kind = params
    net = RbfNetwork(a, b, np.array(c)[:, None], kind)
    flips = data.draw(st.lists(st.sampled_from([-1.0, 1.0]), min_size=len(b), max_size=len(b)))
    flipped = RbfNetwork(a, np.array(b) * flips, np.array(c)[:, None], kind)
    assert evaluate(flipped, [n]) == evaluate(net, [n])


@settings(max_examples=60)
@given(nets, st.data())
def test_neuron_permutation_invariance(params, data):
    a, b, c, kind = params
    net = RbfNetwork(a, b, np.array(c)[:, None], kind)
    order = data.draw(st.permutations(range(net.M)))
    ns = np.arange(13)[:, None]
    np.testing.assert_allclose(
        evaluate_many(net.permuted(order), ns), evaluate_many(net, ns), rtol=1e-12, atol=1e-300
    )
