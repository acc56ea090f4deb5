"""Stochastic reconfiguration (SR) for RBF network amplitudes.

Each iteration samples the current network, forms the covariance matrix
S_ij = <O_i O_j> - <O_i><O_j> and force F_i = <E O_i> - <E><O_i>, scales the
diagonal of S by ``1 + r(k)`` with r(k) = max(reg_init * reg_decay^k,
reg_floor), and moves the parameters by ``-alpha * S'^-1 F``.  F is half
the energy gradient, so subtracting it descends.
"""
import hashlib
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, NumericalFailure, OptimizerFailure
from .sampler import run_sampling

log = logging.getLogger(__name__)

MAX_RETRIES = 3
MAX_CONSECUTIVE_FAILURES = 3
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class SrConfig:
    alpha: float = 0.01
    max_iter: int = 300
    reg_floor: float = 1e-4
    reg_init: float = 100.0
    reg_decay: float = 0.9
    solver_pivot_tol: float = 1e-6
    convergence_window: int = 50
    convergence_tol: float = 0.0
    max_step: float = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ContractViolation("alpha must be positive")
        if not 0 < self.reg_decay < 1:
            raise ContractViolation("reg_decay must lie in (0, 1)")
        if not self.reg_floor > 0:
            raise ContractViolation("reg_floor must be positive")
        if self.max_iter < 1:
            raise ContractViolation("max_iter must be >= 1")
        if self.convergence_window < 1:
            raise ContractViolation("convergence_window must be >= 1")


def reg_schedule(k, cfg=None):
    """r(k) = max(reg_init * reg_decay**k, reg_floor)."""
    cfg = cfg or SrConfig()
    return max(cfg.reg_init * cfg.reg_decay**k, cfg.reg_floor)


def build_sr(est):
    """Covariance matrix S and force vector F from sample estimates."""
    S = est.oo_mean - np.outer(est.o_mean, est.o_mean)
    F = est.eo_mean - est.e_mean * est.o_mean
    return 0.5 * (S + S.T), F


def regularize(S, k, cfg=None, boost=1.0):
    """Scale the diagonal of S by ``1 + boost * r(k)``; off-diagonals untouched."""
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ContractViolation(f"S must be square, got {S.shape}")
    idx = np.diag_indices_from(S)
    S[idx] *= 1.0 + boost * reg_schedule(k, cfg)
    return S


def solve_update(S_reg, F, alpha, pivot_tol=1e-6):
    """Return ``(alpha * x, flagged)`` with ``S_reg x = F``.

    Uses an LU factorization with partial pivoting; when the smallest pivot
    is below ``pivot_tol`` relative to the largest, or the residual is poor,
    falls back to the least-squares (pseudo-inverse) solution and sets
    ``flagged``.
    """
    F = np.asarray(F, dtype=float)
    if not np.any(F):
        return np.zeros_like(F), False
    flagged = False
    x = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        try:
            lu, piv = sla.lu_factor(S_reg, check_finite=True)
            d = np.abs(np.diag(lu))
            if d.max() > 0 and d.min() >= pivot_tol * d.max():
                x = sla.lu_solve((lu, piv), F)
        except (ValueError, sla.LinAlgError):
            x = None
    scale = max(1.0, float(np.linalg.norm(F)))
    if x is None or not np.all(np.isfinite(x)) or np.linalg.norm(S_reg @ x - F) > RESIDUAL_TOL * scale:
        flagged = True
        try:
            x = sla.lstsq(S_reg, F, cond=pivot_tol)[0]
        except (ValueError, sla.LinAlgError) as exc:
            raise NumericalFailure(f"least-squares fallback failed: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("non-finite SR solution")
    return alpha * x, flagged


@dataclass
class IterationRecord:
    k: int
    energy: float
    error: float
    acceptance: float
    param_norm: float
    r_k: float
    flagged: bool
    param_hash: str


@dataclass
class RunRecord:
    iterations: list = field(default_factory=list)
    converged: bool = False
    best_energy: float = np.inf
    best_error: float = np.inf
    best_params: np.ndarray = None
    final_energy: float = np.nan
    final_error: float = np.nan
    final_params: np.ndarray = None
    aborted: bool = False

    @property
    def energies(self):
        return np.array([it.energy for it in self.iterations])

    @property
    def errors(self):
        return np.array([it.error for it in self.iterations])

    def summarize(self, window):
        """Mean energy and error over the last ``window`` iterations."""
        e = self.energies[-window:]
        err = self.errors[-window:]
        if e.size == 0:
            return
        self.final_energy = float(e.mean())
        self.final_error = float(np.sqrt(np.mean(err**2) / e.size))


def param_hash(theta):
    return hashlib.sha1(np.ascontiguousarray(theta).tobytes()).hexdigest()[:12]


def _window_converged(energies, w, tol):
    if energies.size < 2 * w:
        return False
    return abs(energies[-w:].mean() - energies[-2 * w:-w].mean()) < tol


def optimize(net, model, sampler_cfg, sr_cfg, callback=None):
    """Run SR until ``max_iter`` or the windowed energy change drops below tol.

    Returns ``(record, net)`` where ``net`` holds the last parameters.
    Raises OptimizerFailure (with the partial record attached) after
    three consecutive failed iterations.
    """
    if not net.activation.differentiable:
        raise ContractViolation(f"{net.activation.value} networks cannot be optimized")
    record = RunRecord()
    theta = net.params()
    failures = 0
    walkers = None
    for k in range(sr_cfg.max_iter):
        cfg_k = replace(sampler_cfg, seed=_iteration_seed(sampler_cfg.seed, k))
        try:
            est = run_sampling(net, model, cfg_k, start=walkers)
        except NumericalFailure as exc:
            failures += 1
            log.warning("iteration %d: sampling failed (%s)", k, exc)
            if failures >= MAX_CONSECUTIVE_FAILURES or not record.iterations:
                record.aborted = True
                raise OptimizerFailure(str(exc), record) from exc
            # back off to the best parameters seen so far
            net = net.with_params(record.best_params)
            theta = net.params()
            continue

        walkers = est.last_state
        S, F = build_sr(est)
        delta, flagged = None, False
        for attempt in range(MAX_RETRIES + 1):
            try:
                S_reg = regularize(S, k, sr_cfg, boost=10.0**attempt)
                delta, flagged = solve_update(S_reg, F, sr_cfg.alpha, sr_cfg.solver_pivot_tol)
                break
            except NumericalFailure as exc:
                log.warning("iteration %d attempt %d: %s", k, attempt, exc)
        rec = IterationRecord(
            k=k,
            energy=est.e_mean,
            error=est.e_err,
            acceptance=est.acceptance_rate,
            param_norm=float(np.linalg.norm(theta)),
            r_k=reg_schedule(k, sr_cfg),
            flagged=flagged or delta is None,
            param_hash=param_hash(theta),
        )
        record.iterations.append(rec)
        if est.e_mean + est.e_err < record.best_energy + record.best_error:
            record.best_energy, record.best_error = est.e_mean, est.e_err
            record.best_params = theta.copy()
        if callback is not None:
            callback(rec, est)

        if delta is None:
            failures += 1
            if failures >= MAX_CONSECUTIVE_FAILURES:
                record.aborted = True
                record.summarize(sr_cfg.convergence_window)
                raise OptimizerFailure(f"no usable SR update at iteration {k}", record)
            continue
        failures = 0
        if sr_cfg.max_step is not None:
            biggest = np.max(np.abs(delta))
            if biggest > sr_cfg.max_step:
                delta = delta * (sr_cfg.max_step / biggest)
                rec.flagged = True
        theta = theta - delta
        net = net.with_params(theta)

        if sr_cfg.convergence_tol > 0 and _window_converged(
            record.energies, sr_cfg.convergence_window, sr_cfg.convergence_tol
        ):
            record.converged = True
            break

    record.final_params = theta.copy()
    record.summarize(sr_cfg.convergence_window)
    return record, net


def _iteration_seed(seed, k):
    """Distinct, reproducible sampler seed for iteration ``k``."""
    return int(np.random.SeedSequence([int(seed), k]).generate_state(1)[0])
