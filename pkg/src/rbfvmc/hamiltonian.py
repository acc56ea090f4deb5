"""Benchmark Hamiltonians in a truncated discrete basis.

Configurations are 0-based integer vectors with every component in
``[0, n_max - 1]`` (``[0, d - 1]`` for matrices).  Each model exposes its
rows as sparse lists of ``(n', <n|H|n'>)``; matrix elements that would
connect outside the truncated range are dropped.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import pi, sqrt

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, DivisionHazard, SizeError
from .wavefunction import PSI_FLOOR, evaluate_many

DENSE_CAP = 4096


def _check_nmax(n_max):
    if int(n_max) != n_max or n_max < 2:
        raise ContractViolation(f"n_max must be an integer >= 2, got {n_max}")
    return int(n_max)


def _check_finite(**kw):
    for name, val in kw.items():
        if not np.isfinite(val):
            raise ContractViolation(f"{name} must be finite, got {val}")


def _ho_row(n, n_max, field):
    """1D oscillator row: (n + 1/2) on the diagonal, field * <n|x|n+-1>."""
    out = [(n, n + 0.5)]
    if field != 0.0:
        if n >= 1:
            out.append((n - 1, field * sqrt(n / 2.0)))
        if n + 1 < n_max:
            out.append((n + 1, field * sqrt((n + 1) / 2.0)))
    return out


@dataclass(frozen=True)
class HO1D:
    """H = p^2/2 + x^2/2 + field * x in the oscillator eigenbasis."""

    field: float
    n_max: int
    kind = "ho1d"

    def __post_init__(self):
        object.__setattr__(self, "n_max", _check_nmax(self.n_max))
        object.__setattr__(self, "field", float(self.field))
        _check_finite(field=self.field)

    @property
    def shape(self):
        return (self.n_max,)

    def row(self, n):
        return [((m,), v) for m, v in _ho_row(n[0], self.n_max, self.field)]


@dataclass(frozen=True)
class HO2D:
    """Two independent oscillators with fields along x and y."""

    field_x: float
    field_y: float
    n_max: int
    kind = "ho2d"

    def __post_init__(self):
        object.__setattr__(self, "n_max", _check_nmax(self.n_max))
        object.__setattr__(self, "field_x", float(self.field_x))
        object.__setattr__(self, "field_y", float(self.field_y))
        _check_finite(field_x=self.field_x, field_y=self.field_y)

    @property
    def shape(self):
        return (self.n_max, self.n_max)

    def row(self, n):
        nx, ny = n
        out = [((nx, ny), nx + ny + 1.0)]
        for m, v in _ho_row(nx, self.n_max, self.field_x)[1:]:
            out.append(((m, ny), v))
        for m, v in _ho_row(ny, self.n_max, self.field_y)[1:]:
            out.append(((nx, m), v))
        return out


def box_position_element(n1, n2):
    """<n1|x|n2> for unit-box sine modes, 1-based labels."""
    if n1 == n2:
        return 0.5
    parity = 1 if (n1 + n2) % 2 == 0 else -1
    return 4.0 * (parity - 1) * n1 * n2 / ((n1 - n2) ** 2 * (n1 + n2) ** 2 * pi**2)


@dataclass(frozen=True)
class ParticleBox:
    """Particle in the unit box with a linear potential ``slope * x``.

    Configuration ``n`` labels the sine mode ``n + 1``.
    """

    slope: float
    n_max: int
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "n_max", _check_nmax(self.n_max))
        object.__setattr__(self, "slope", float(self.slope))
        _check_finite(slope=self.slope)

    @property
    def shape(self):
        return (self.n_max,)

    def row(self, n):
        n1 = n[0] + 1
        out = [((n[0],), pi**2 * n1**2 / 2.0 + self.slope * 0.5)]
        if self.slope != 0.0:
            # only modes of opposite parity couple
            for m in range(n[0] % 2 ^ 1, self.n_max, 2):
                v = self.slope * box_position_element(n1, m + 1)
                out.append(((m,), v))
        return out


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """A dense real symmetric matrix treated as a Hamiltonian over its index."""

    matrix: np.ndarray
    source: str = field(default="array")
    kind = "matrix"

    def __post_init__(self):
        h = np.array(self.matrix, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ContractViolation(f"matrix must be square, got {h.shape}")
        if h.shape[0] < 2:
            raise ContractViolation("matrix dimension must be >= 2")
        if not np.all(np.isfinite(h)):
            raise ContractViolation("matrix has non-finite entries")
        asym = np.max(np.abs(h - h.T))
        if asym > 1e-10:
            raise ContractViolation(f"matrix is not symmetric (max |H - H^T| = {asym:.3g})")
        h.flags.writeable = False
        object.__setattr__(self, "matrix", h)

    @classmethod
    def generator(cls, d):
        """H(d)_pq = 1/p + 1/q with 1-based p, q."""
        if int(d) != d or d < 2:
            raise ContractViolation(f"d must be an integer >= 2, got {d}")
        inv = 1.0 / np.arange(1, int(d) + 1)
        return cls(inv[:, None] + inv[None, :], source=f"generator:{int(d)}")

    @classmethod
    def from_file(cls, path):
        return cls(load_matrix(path), source=str(path))

    @property
    def d(self):
        return self.matrix.shape[0]

    @property
    def shape(self):
        return (self.d,)

    def row(self, n):
        p = n[0]
        r = self.matrix[p]
        return [((p,), float(r[p]))] + [
            ((q,), float(r[q])) for q in range(self.d) if q != p and r[q] != 0.0
        ]


def load_matrix(path):
    """Read a matrix file: a line with ``d`` then ``d`` rows of ``d`` reals."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or len(lines[0]) != 1:
        raise ContractViolation(f"{path}: first line must hold the dimension d")
    try:
        d = int(lines[0][0])
        rows = [[float(x) for x in ln] for ln in lines[1:]]
    except ValueError as exc:
        raise ContractViolation(f"{path}: {exc}") from None
    if len(rows) != d or any(len(r) != d for r in rows):
        raise ContractViolation(f"{path}: expected {d} rows of {d} values")
    h = np.array(rows)
    asym = np.max(np.abs(h - h.T)) if d else 0.0
    if asym > 1e-10:
        raise ContractViolation(f"{path}: matrix not symmetric (max asymmetry {asym:.3g})")
    return h


def save_matrix(path, h):
    h = np.asarray(h, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{h.shape[0]}\n")
        for r in h:
            fh.write(" ".join(repr(float(x)) for x in r) + "\n")


def configuration_count(model):
    return int(np.prod(model.shape))


def _check_config(model, n):
    n = tuple(int(x) for x in np.asarray(n).reshape(-1))
    if len(n) != len(model.shape):
        raise ContractViolation(
            f"configuration {n} has dimension {len(n)}, model needs {len(model.shape)}"
        )
    for x, hi in zip(n, model.shape):
        if not 0 <= x < hi:
            raise ContractViolation(f"configuration {n} outside [0, {hi - 1}]")
    return n


def connected_row(model, n):
    """Nonzero entries ``[(n', <n|H|n'>), ...]`` of row ``n``; diagonal first."""
    return model.row(_check_config(model, n))


def local_energy(model, net, n, floor=PSI_FLOOR):
    """E_loc(n) = sum_n' <n|H|n'> psi(n') / psi(n)."""
    row = connected_row(model, n)
    psi = evaluate_many(net, [m for m, _ in row])
    if abs(psi[0]) < floor:
        raise DivisionHazard(f"|psi({tuple(row[0][0])})| below floor {floor:g}")
    h = np.array([v for _, v in row])
    return float(h @ psi / psi[0])


def all_configurations(model):
    """Every configuration in flat (row-major) order, shape (N, p)."""
    grids = np.indices(model.shape).reshape(len(model.shape), -1)
    return grids.T.copy()


@lru_cache(maxsize=64)
def sparse_matrix(model):
    """CSR matrix over flat configuration indices, built from the rows."""
    shape = model.shape
    N = configuration_count(model)
    rows, cols, vals = [], [], []
    for i, n in enumerate(all_configurations(model)):
        for m, v in model.row(tuple(int(x) for x in n)):
            rows.append(i)
            cols.append(np.ravel_multi_index(m, shape))
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def dense_matrix(model, cap=DENSE_CAP):
    """Full truncated Hamiltonian; raises SizeError above ``cap`` states."""
    N = configuration_count(model)
    if N > cap:
        raise SizeError(f"{N} basis states exceed the dense cap {cap}")
    if isinstance(model, HermitianMatrix):
        return np.array(model.matrix)
    return sparse_matrix(model).toarray()
