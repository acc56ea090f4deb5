"""Reference values: closed forms, perturbation theory, dense diagonalization."""
from dataclasses import dataclass
from math import factorial, pi, sqrt

import numpy as np
import scipy.linalg as sla

from .errors import ContractViolation, OracleFailure
from .hamiltonian import (
    DENSE_CAP,
    all_configurations,
    connected_row,
    dense_matrix,
    local_energy,
)
from .wavefunction import evaluate_many, log_derivatives_many

BOX_SECOND_ORDER = -0.002194


@dataclass(frozen=True, eq=False)
class OracleResult:
    energy: float
    eigenvector: np.ndarray = None
    method: str = "closed-form"


def sign_normalize(v):
    """Unit vector with its first nonzero component made positive."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


def ho1d_overlap(field, n):
    """<n|ground state of p^2/2 + x^2/2 + field*x> in the unperturbed basis.

    The ground state is the oscillator ground state displaced to x = -field,
    giving (-field)^n exp(-field^2/4) / sqrt(2^n n!).
    """
    return (-field) ** n * np.exp(-field**2 / 4.0) / sqrt(2.0**n * factorial(n))


def ho1d_exact(field, n_max=60):
    """Energy 0.5*(1 - field^2) and overlaps for n < n_max."""
    if not np.isfinite(field):
        raise ContractViolation("field must be finite")
    psi = np.array([ho1d_overlap(field, n) for n in range(n_max)])
    return OracleResult(0.5 * (1.0 - field**2), psi, "closed-form")


def ho2d_exact(field_x, field_y, n_max=60):
    """Energy 1 - (Ex^2 + Ey^2)/2; overlaps are products of 1D overlaps."""
    if not (np.isfinite(field_x) and np.isfinite(field_y)):
        raise ContractViolation("fields must be finite")
    px = ho1d_exact(field_x, n_max).eigenvector
    py = ho1d_exact(field_y, n_max).eigenvector
    return OracleResult(1.0 - (field_x**2 + field_y**2) / 2.0, np.outer(px, py), "closed-form")


def box_perturbation(slope, order):
    """Ground level of the tilted box from perturbation theory (order 1 or 2)."""
    if order not in (1, 2):
        raise ContractViolation(f"order must be 1 or 2, got {order}")
    e = pi**2 / 2.0 + slope / 2.0
    if order == 2:
        e += BOX_SECOND_ORDER * slope**2
    return OracleResult(e, None, f"perturbation-{order}")


def dense_lowest_eig(model, cap=DENSE_CAP):
    """Lowest eigenpair of the truncated Hamiltonian."""
    H = dense_matrix(model, cap)
    try:
        w, v = sla.eigh(H, subset_by_index=[0, 0])
    except sla.LinAlgError as exc:
        raise OracleFailure(f"eigensolver failed: {exc}") from None
    vec = sign_normalize(v[:, 0])
    return OracleResult(float(w[0]), vec, "dense-diag")


def spectral_gap(model, cap=DENSE_CAP):
    """Difference between the two lowest eigenvalues."""
    w = sla.eigh(dense_matrix(model, cap), eigvals_only=True, subset_by_index=[0, 1])
    return float(w[1] - w[0])


def enumerate_estimates(net, model):
    """Exact |psi|^2-weighted averages over the whole truncated basis.

    Returns ``(e, o, eo, oo)`` matching the Monte Carlo estimators, computed
    by direct enumeration with ``local_energy`` on every configuration.
    """
    configs = all_configurations(model)
    psi = evaluate_many(net, configs)
    weight = psi**2 / np.sum(psi**2)
    keep = weight > 0
    eloc = np.array([local_energy(model, net, n) if k else 0.0 for n, k in zip(configs, keep)])
    e = float(weight @ eloc)
    if not net.activation.differentiable:
        return e, None, None, None
    O = np.zeros((configs.shape[0], net.n_params))
    O[keep] = log_derivatives_many(net, configs[keep])
    return e, weight @ O, (weight * eloc) @ O, (O.T * weight) @ O


def rayleigh_quotient(model, net):
    """<psi|H|psi>/<psi|psi> with the network tabulated over the basis."""
    configs = all_configurations(model)
    psi = evaluate_many(net, configs)
    hpsi = np.zeros_like(psi)
    index = {tuple(n): i for i, n in enumerate(configs)}
    for i, n in enumerate(configs):
        hpsi[i] = sum(v * psi[index[m]] for m, v in connected_row(model, n))
    return float(psi @ hpsi / (psi @ psi))
