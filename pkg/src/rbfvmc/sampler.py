"""Metropolis sampling of |psi|^2 over the truncated configuration space.

Moves change one randomly chosen quantum number by +-1.  A move that would
leave ``[0, n_max - 1]`` is reflected back onto the current value, so the
proposal kernel stays symmetric and the plain Metropolis ratio
``min(1, |psi(n')/psi(n)|^2)`` satisfies detailed balance.

An optional ``jump_prob`` mixes in proposals drawn uniformly over the whole
basis.  They are symmetric too, and they let a chain reach regions that
near-zero amplitudes separate from its current region.

An optional ``mix`` samples the defensive mixture
``q(n) = psi(n)^2 + mix * mean(psi^2)`` instead of ``psi^2`` and reweights
every sample by ``psi^2 / q``.  Expectations are unchanged, but every basis
state keeps a visit probability of order ``mix / N``, so the optimizer
cannot lower the estimate through amplitudes the chain never sees.

Within one sampling pass the network is frozen, so amplitudes are tabulated
once over the whole truncated basis and every chain walks flat indices with
a compiled kernel.  Per-configuration quantities (local energy, O_k) are
then evaluated only on visited configurations and weighted by visit counts.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .blocking import blocking_error
from .errors import ContractViolation, DivisionHazard, NumericalFailure, SizeError
from .hamiltonian import all_configurations, configuration_count, sparse_matrix
from .wavefunction import PSI_FLOOR, evaluate, evaluate_many, log_derivatives_many

log = logging.getLogger(__name__)

TABLE_CAP = 1 << 20
MIXING_FLOOR = 1e-3


@dataclass(frozen=True)
class SamplerConfig:
    """Markov-chain settings.

    ``n_therm`` and ``stride`` default to ``1000 * p`` and ``p`` when left
    as None; :meth:`resolved` fills them in for a given input dimension.
    """

    n_samples: int = 50000
    n_therm: int = None
    stride: int = None
    seed: int = 0
    n_chains: int = 1
    jump_prob: float = 0.0
    mix: float = 0.0

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ContractViolation("n_samples must be positive")
        if self.n_therm is not None and self.n_therm < 0:
            raise ContractViolation("n_therm must be >= 0")
        if self.stride is not None and self.stride < 1:
            raise ContractViolation("stride must be >= 1")
        if self.n_chains < 1:
            raise ContractViolation("n_chains must be >= 1")
        if not 0.0 <= self.jump_prob < 1.0:
            raise ContractViolation("jump_prob must lie in [0, 1)")
        if not 0.0 <= self.mix < np.inf:
            raise ContractViolation("mix must be finite and >= 0")

    def resolved(self, p):
        return replace(
            self,
            n_therm=1000 * p if self.n_therm is None else self.n_therm,
            stride=p if self.stride is None else self.stride,
        )


@dataclass(frozen=True, eq=False)
class SampleEstimates:
    e_mean: float
    e_err: float
    o_mean: np.ndarray
    eo_mean: np.ndarray
    oo_mean: np.ndarray
    acceptance_rate: float
    n_samples: int
    e_var: float = 0.0
    warning: str = None
    last_state: np.ndarray = None


def propose(n, bounds, rng):
    """Pick one coordinate uniformly and shift it by +-1, reflecting at the edges."""
    n = np.array(n, dtype=np.int64)
    k = rng.integers(n.size)
    step = 2 * rng.integers(2) - 1
    return _apply_move(n, bounds, k, step)


def _apply_move(n, bounds, k, step):
    out = n.copy()
    v = n[k] + step
    if 0 <= v < bounds[k]:
        out[k] = v
    return out


def metropolis_step(net, model, n, rng, floor=PSI_FLOOR):
    """One Metropolis update from ``n``; returns ``(n_next, accepted)``."""
    psi_n = evaluate(net, n)
    if abs(psi_n) < floor:
        raise DivisionHazard(f"|psi({tuple(n)})| below floor {floor:g}")
    trial = propose(n, model.shape, rng)
    ratio = (evaluate(net, trial) / psi_n) ** 2
    if rng.random() < ratio:
        return trial, True
    return np.array(n, dtype=np.int64), False


@njit(cache=True)
def _walk(psi, dims, strides, start, coords, steps, jumps, u, n_therm, stride, n_record, floor):
    # u is only compared against the ratio, so ratio >= 1 always accepts and
    # a zero amplitude is never entered.  jumps[t] >= 0 replaces the local
    # move by a uniform draw over the whole basis (also symmetric).
    out = np.empty(n_record, np.int64)
    idx = start
    best = start
    accepted = 0
    rec = 0
    total = n_therm + n_record * stride
    for t in range(total):
        cur = psi[idx]
        if abs(cur) < floor:
            idx = best
            cur = psi[idx]
        k = coords[t]
        v = (idx // strides[k]) % dims[k] + steps[t]
        new = idx
        if jumps[t] >= 0:
            new = jumps[t]
        elif v >= 0 and v < dims[k]:
            new = idx + steps[t] * strides[k]
        r = psi[new] / cur
        if u[t] < r * r:
            idx = new
            if t >= n_therm:
                accepted += 1
            if abs(psi[idx]) > abs(psi[best]):
                best = idx
        if t >= n_therm and (t - n_therm + 1) % stride == 0:
            out[rec] = idx
            rec += 1
    return out, accepted


def chain_seeds(seed, n_chains):
    """Independent generators keyed on (seed, chain index)."""
    return [np.random.default_rng([int(seed), c]) for c in range(n_chains)]


def sample_indices(psi, shape, cfg, floor=PSI_FLOOR, start=None):
    """Run ``cfg.n_chains`` chains over the amplitude table ``psi``.

    ``start`` holds one flat index per chain (e.g. the last state of the
    previous pass); chains without a usable start begin at the largest
    ``|psi|``.  Returns the recorded flat-index arrays (one per chain), the
    acceptance rate over the production steps and the final state of each
    chain.
    """
    dims = np.array(shape, dtype=np.int64)
    strides = np.array(
        [int(np.prod(shape[k + 1:])) for k in range(len(shape))], dtype=np.int64
    )
    peak = int(np.argmax(np.abs(psi)))
    if not abs(psi[peak]) >= floor:
        raise DivisionHazard("every amplitude is below the floor; network is dead")
    starts = np.full(cfg.n_chains, peak, dtype=np.int64)
    if start is not None:
        start = np.asarray(start, dtype=np.int64).reshape(-1)
        for c in range(min(cfg.n_chains, start.size)):
            if 0 <= start[c] < psi.size and abs(psi[start[c]]) >= floor:
                starts[c] = start[c]
    p = len(shape)
    base, extra = divmod(cfg.n_samples, cfg.n_chains)
    chains, accepted, proposed = [], 0, 0
    last = starts.copy()
    for c, rng in enumerate(chain_seeds(cfg.seed, cfg.n_chains)):
        n_record = base + (1 if c < extra else 0)
        if n_record == 0:
            continue
        total = cfg.n_therm + n_record * cfg.stride
        coords = rng.integers(0, p, size=total).astype(np.int64)
        steps = (2 * rng.integers(0, 2, size=total) - 1).astype(np.int64)
        u = rng.random(total)
        jumps = np.full(total, -1, dtype=np.int64)
        if cfg.jump_prob > 0:
            hit = rng.random(total) < cfg.jump_prob
            jumps[hit] = rng.integers(0, psi.size, size=int(hit.sum()))
        out, acc = _walk(
            psi, dims, strides, starts[c], coords, steps, jumps, u,
            cfg.n_therm, cfg.stride, n_record, floor,
        )
        chains.append(out)
        last[c] = out[-1]
        accepted += acc
        proposed += n_record * cfg.stride
    return chains, accepted / proposed, last


def run_sampling(net, model, cfg, floor=PSI_FLOOR, table_cap=TABLE_CAP, start=None):
    """Monte Carlo estimates of E, <O>, <E O>, <O O> under |psi|^2.

    ``start`` optionally continues chains from a previous pass
    (``SampleEstimates.last_state``).
    """
    if net.p != len(model.shape):
        raise ContractViolation(
            f"network input dimension {net.p} does not match model dimension {len(model.shape)}"
        )
    N = configuration_count(model)
    if N > table_cap:
        raise SizeError(f"{N} configurations exceed the amplitude table cap {table_cap}")
    cfg = cfg.resolved(net.p)
    configs = all_configurations(model)
    psi = evaluate_many(net, configs)

    amp = psi
    if cfg.mix > 0:
        amp = np.sqrt(psi**2 + cfg.mix * np.mean(psi**2))
    chains, acc_rate, last = sample_indices(amp, model.shape, cfg, floor, start)
    visited, inverse, counts = np.unique(
        np.concatenate(chains), return_inverse=True, return_counts=True
    )
    total = counts.sum()
    # importance weights psi^2 / q; states below the floor carry ~zero weight
    ratio = (psi[visited] / amp[visited]) ** 2
    keep = np.abs(psi[visited]) >= floor
    ratio[~keep] = 0.0
    w_state = counts * ratio
    w = w_state[keep] / w_state.sum()
    visited = visited[keep]

    H = sparse_matrix(model)
    eloc = (H[visited] @ psi) / psi[visited]
    e_mean = float(w @ eloc)
    e_var = float(w @ (eloc - e_mean) ** 2)

    # pooled blocking error of the linearized ratio estimator
    dev = np.zeros(keep.size)
    dev[keep] = eloc - e_mean
    scale = ratio[inverse].mean()
    var_err, offset = 0.0, 0
    for ch in chains:
        idx = inverse[offset:offset + ch.size]
        offset += ch.size
        series = ratio[idx] * dev[idx] / scale
        var_err += (ch.size / total) ** 2 * blocking_error(series) ** 2
    e_err = float(np.sqrt(var_err))

    if net.activation.differentiable:
        O = log_derivatives_many(net, configs[visited], floor)
        o_mean = w @ O
        eo_mean = (w * eloc) @ O
        oo_mean = (O.T * w) @ O
        oo_mean = 0.5 * (oo_mean + oo_mean.T)
    else:
        o_mean = eo_mean = np.zeros(0)
        oo_mean = np.zeros((0, 0))

    for name, val in (("energy", e_mean), ("O", o_mean), ("E*O", eo_mean), ("O*O", oo_mean)):
        if not np.all(np.isfinite(val)):
            raise NumericalFailure(f"non-finite {name} accumulator")

    warning = None
    if acc_rate < MIXING_FLOOR:
        warning = f"acceptance rate {acc_rate:.2e} below {MIXING_FLOOR:g}; chain may not mix"
        log.warning(warning)
    return SampleEstimates(
        e_mean=e_mean,
        e_err=e_err,
        o_mean=o_mean,
        eo_mean=eo_mean,
        oo_mean=oo_mean,
        acceptance_rate=float(acc_rate),
        n_samples=int(total),
        e_var=e_var,
        warning=warning,
        last_state=last,
    )
