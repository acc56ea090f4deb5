"""Radial-basis-function network used as a variational amplitude.

The network has a single output neuron,

    psi(n) = sum_i a_i * rho(||n - c_i||; |b_i|),

evaluated on integer configurations ``n``.  Parameters are flattened in the
fixed order ``a`` (M), ``b`` (M), ``c`` (M*p, row-major); every optimizer
array (O, S, F) uses that ordering.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    ContractViolation,
    DerivativeSingularity,
    DivisionHazard,
    NumericalFailure,
)

PSI_FLOOR = 1e-300
B_MIN = 0.01


class Activation(str, Enum):
    GAUSSIAN = "gaussian"
    EXP_ABS = "exp-abs"
    MULTIQUADRIC = "multiquadric"
    INVERSE_MULTIQUADRIC = "inverse-multiquadric"

    @property
    def differentiable(self):
        """True for the kinds with log-derivatives (usable for optimization)."""
        return self in (Activation.GAUSSIAN, Activation.EXP_ABS)


@dataclass(frozen=True, eq=False)
class RbfNetwork:
    """Immutable parameter snapshot of an RBF network.

    Attributes
    ----------
    a : (M,) output weights
    b : (M,) spread parameters; only ``|b|`` enters the activation
    c : (M, p) centres
    activation : radial function kind
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    activation: Activation = Activation.GAUSSIAN

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        c = np.array(self.c, dtype=float)
        if c.ndim == 1:
            c = c.reshape(-1, 1)
        if a.size == 0:
            raise ContractViolation("network needs at least one hidden neuron")
        if b.shape != a.shape or c.ndim != 2 or c.shape[0] != a.size:
            raise ContractViolation(
                f"inconsistent shapes a{a.shape} b{b.shape} c{c.shape}"
            )
        if c.shape[1] < 1:
            raise ContractViolation("input dimension must be >= 1")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise ContractViolation(f"parameter {name} has non-finite entries")
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def M(self):
        return self.a.size

    @property
    def p(self):
        return self.c.shape[1]

    @property
    def n_params(self):
        return self.M * (self.p + 2)

    def params(self):
        """Flattened parameter vector ``[a, b, c.ravel()]`` (a fresh copy)."""
        return np.concatenate([self.a, self.b, self.c.ravel()])

    def with_params(self, theta):
        """Return a new network with the flattened parameters ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ContractViolation(
                f"expected {self.n_params} parameters, got shape {theta.shape}"
            )
        M = self.M
        return RbfNetwork(
            theta[:M], theta[M:2 * M], theta[2 * M:].reshape(M, self.p), self.activation
        )

    def permuted(self, order):
        """Same function with hidden neurons reordered."""
        order = np.asarray(order)
        return RbfNetwork(self.a[order], self.b[order], self.c[order], self.activation)


def _as_batch(net, ns):
    ns = np.asarray(ns, dtype=float)
    single = ns.ndim <= 1
    ns = np.atleast_2d(ns) if ns.ndim == 1 else ns.reshape(-1, net.p)
    if ns.shape[1] != net.p:
        raise ContractViolation(
            f"configuration has dimension {ns.shape[1]}, network expects {net.p}"
        )
    return ns, single


def _radial(net, ns):
    """Return (diff, r2, rho) for a batch; shapes (N,M,p), (N,M), (N,M)."""
    diff = ns[:, None, :] - net.c[None, :, :]
    r2 = np.einsum("nmj,nmj->nm", diff, diff)
    bb = np.abs(net.b)[None, :]
    kind = net.activation
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if kind is Activation.GAUSSIAN:
            rho = np.exp(-bb * r2)
        elif kind is Activation.EXP_ABS:
            rho = np.exp(-bb * np.sqrt(r2))
        elif kind is Activation.MULTIQUADRIC:
            rho = np.sqrt(r2 - bb**2)
        else:
            rho = (r2 - bb**2) ** -0.5
    return diff, r2, rho


def evaluate_many(net, ns):
    """Amplitudes for a batch of configurations, shape (N,)."""
    ns, _ = _as_batch(net, ns)
    _, _, rho = _radial(net, ns)
    psi = rho @ net.a
    if not np.all(np.isfinite(psi)):
        raise NumericalFailure(
            f"{net.activation.value} network produced a non-finite amplitude"
        )
    return psi


def evaluate(net, n):
    """Amplitude psi(n) for a single configuration."""
    n = np.asarray(n)
    if n.ndim != 1:
        raise ContractViolation("evaluate expects a single configuration vector")
    return float(evaluate_many(net, n)[0])


def log_derivatives_many(net, ns, floor=PSI_FLOOR):
    """O_k(n) = d(psi)/d(lambda_k) / psi for a batch, shape (N, n_params).

    Only gaussian and exp-abs networks are supported.  For exp-abs the centre
    derivative is taken as zero where ``n`` coincides with a centre (the
    cusp of ``exp(-|b| r)``).
    """
    if not net.activation.differentiable:
        raise ContractViolation(
            f"no log-derivatives for {net.activation.value} activation"
        )
    if np.any(net.b == 0.0):
        raise DerivativeSingularity("b_i == 0: d|b|/db is undefined")
    ns, _ = _as_batch(net, ns)
    diff, r2, rho = _radial(net, ns)
    psi = rho @ net.a
    if not np.all(np.isfinite(psi)):
        raise NumericalFailure("non-finite amplitude in log-derivative")
    if np.any(np.abs(psi) < floor):
        raise DivisionHazard(f"|psi| below floor {floor:g}")

    N, M, p = diff.shape
    sgn = np.sign(net.b)[None, :]
    bb = np.abs(net.b)[None, :]
    a = net.a[None, :]
    inv = 1.0 / psi[:, None]
    out = np.empty((N, net.n_params))
    out[:, :M] = rho * inv
    if net.activation is Activation.GAUSSIAN:
        out[:, M:2 * M] = -a * sgn * r2 * rho * inv
        dc = 2.0 * (a * bb * rho * inv)[:, :, None] * diff
    else:
        r = np.sqrt(r2)
        out[:, M:2 * M] = -a * sgn * r * rho * inv
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(r[:, :, None] > 0.0, diff / r[:, :, None], 0.0)
        dc = (a * bb * rho * inv)[:, :, None] * unit
    out[:, 2 * M:] = dc.reshape(N, M * p)
    return out


def log_derivatives(net, n, floor=PSI_FLOOR):
    """Log-derivative vector at one configuration, length ``M*(p+2)``."""
    n = np.asarray(n)
    if n.ndim != 1:
        raise ContractViolation("log_derivatives expects a single configuration")
    return log_derivatives_many(net, n, floor)[0]


def init_random(M, p, seed, scale=1.0, n_max=10, activation=Activation.GAUSSIAN, center_span=None):
    """Random network, deterministic in ``seed``.

    ``a`` and ``b`` are uniform on [-scale, scale] with ``|b| >= 0.01``
    (resampled); centres are uniform on [0, center_span] in every coordinate,
    with ``center_span`` defaulting to ``n_max - 1``.
    """
    if M < 1 or p < 1:
        raise ContractViolation("M and p must be positive")
    if not scale > B_MIN:
        raise ContractViolation(f"scale must exceed {B_MIN:g} so that |b| >= {B_MIN:g} can be drawn")
    if n_max < 1:
        raise ContractViolation("n_max must be positive")
    span = n_max - 1 if center_span is None else center_span
    if span < 0:
        raise ContractViolation("center_span must be >= 0")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-scale, scale, M)
    b = rng.uniform(-scale, scale, M)
    small = np.abs(b) < B_MIN
    while np.any(small):
        b[small] = rng.uniform(-scale, scale, small.sum())
        small = np.abs(b) < B_MIN
    c = rng.uniform(0.0, span, (M, p))
    return RbfNetwork(a, b, c, activation)


def interpolating_network(points, values, sharpness=50.0):
    """Gaussian network with one sharp neuron per point.

    ``psi(points[k]) == values[k]`` up to ``exp(-sharpness)`` cross-talk
    between integer neighbours; used to inject a known vector as a network.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    values = np.asarray(values, dtype=float)
    return RbfNetwork(values, np.full(values.size, float(sharpness)), points)
