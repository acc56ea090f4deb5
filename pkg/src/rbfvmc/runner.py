"""Experiment execution, artifacts and preset reproduction.

``run_experiment`` optimizes ``run.restarts`` independently seeded networks
(seeds ``run.seed``, ``run.seed + 1``, ...) and keeps the one with the
lowest final energy.  With an ergodic sampler every estimate is a
variational upper bound up to noise, so the minimum is a fair pick.
"""
import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .config import from_flat, read_flat
from .errors import ConfigError, OptimizerFailure, RbfVmcError, SizeError
from .hamiltonian import all_configurations
from .optimizer import optimize
from .oracle import dense_lowest_eig, ho1d_exact, ho2d_exact, ho1d_overlap, spectral_gap
from .wavefunction import evaluate_many, init_random

log = logging.getLogger(__name__)

OUTPUT_ENV = "RBFVMC_OUTPUT_DIR"
DEFAULT_OUTPUT = "rbfvmc-output"
CSV_COLUMNS = ("iter", "energy", "error", "acceptance", "r_k", "flagged")
DEGENERACY_GAP = 1e-10
VARIATIONAL_SLACK = 1e-9


@dataclass
class RunResult:
    config: object
    model: object
    record: object
    net: object
    seed: int
    reference: object = None
    restart_energies: list = field(default_factory=list)

    @property
    def energy(self):
        return self.record.final_energy

    @property
    def error(self):
        return self.record.final_error


def reference_for(model):
    """Lowest eigenpair of the truncated model, or a closed form when too big."""
    try:
        return dense_lowest_eig(model)
    except SizeError:
        if model.kind == "ho1d":
            return ho1d_exact(model.field, model.n_max)
        if model.kind == "ho2d":
            return ho2d_exact(model.field_x, model.field_y, model.n_max)
        return None


def initial_network(cfg, model, seed):
    return init_random(
        cfg.M,
        len(model.shape),
        seed,
        cfg.scale,
        n_max=model.shape[0],
        activation=cfg.activation,
        center_span=cfg.center_span,
    )


def run_experiment(cfg, callback=None):
    """Optimize ``cfg.restarts`` seeded networks and keep the lowest energy.

    Raises OptimizerFailure (carrying the last partial record) only when
    every restart fails.
    """
    model = cfg.build_model()
    best, failure, energies = None, None, []
    for j in range(cfg.restarts):
        seed = cfg.seed + j
        net = initial_network(cfg, model, seed)
        try:
            record, final = optimize(net, model, replace(cfg.sampler, seed=seed), cfg.sr, callback)
        except OptimizerFailure as exc:
            log.warning("restart %d (seed %d) failed: %s", j, seed, exc)
            failure = exc
            energies.append(math.nan)
            continue
        energies.append(record.final_energy)
        if best is None or record.final_energy < best.record.final_energy:
            best = RunResult(cfg, model, record, final, seed)
    if best is None:
        raise failure
    best.reference = reference_for(model)
    best.restart_energies = energies
    return best


# artifacts


def output_dir(cli_out=None, cfg=None):
    """``--out`` beats the environment variable, which beats ``run.output``."""
    if cli_out:
        return Path(cli_out)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    if cfg is not None and cfg.output:
        out = Path(cfg.output)
        if not out.is_absolute() and cfg.base_dir is not None:
            out = cfg.base_dir / out
        return out
    return Path(DEFAULT_OUTPUT)


def write_record_csv(path, record):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for it in record.iterations:
            w.writerow([it.k, repr(it.energy), repr(it.error), repr(it.acceptance), repr(it.r_k), int(it.flagged)])


def read_record_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_params(path, net):
    """One row per neuron: a, b, then the centre coordinates."""
    table = np.column_stack([net.a, net.b, net.c])
    header = f"activation={net.activation.value} M={net.M} p={net.p}\na b " + " ".join(
        f"c{k}" for k in range(net.p)
    )
    np.savetxt(path, table, fmt="%.17g", header=header)


def load_params(path):
    from .wavefunction import Activation, RbfNetwork

    with open(path) as fh:
        meta = dict(tok.split("=") for tok in fh.readline().lstrip("# ").split())
    table = np.loadtxt(path, ndmin=2)
    return RbfNetwork(table[:, 0], table[:, 1], table[:, 2:], Activation(meta["activation"]))


def summary_line(name, energy, error, reference):
    parts = [f"{name}: energy = {energy:.10g} +- {error:.3g}"]
    if reference is None:
        parts.append("oracle = n/a")
    else:
        dev = (energy - reference.energy) / error if error > 0 else math.inf
        if energy == reference.energy:
            dev = 0.0
        parts.append(f"oracle = {reference.energy:.10g} ({reference.method})")
        parts.append(f"deviation = {dev:+.2f} sigma")
    return "; ".join(parts)


def write_artifacts(out, name, record, net=None, summary=None):
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{name}.csv"}
    write_record_csv(paths["csv"], record)
    if net is not None:
        paths["params"] = out / f"{name}.params.txt"
        write_params(paths["params"], net)
    if summary is not None:
        paths["summary"] = out / f"{name}.summary.txt"
        paths["summary"].write_text(summary + "\n")
    return paths


# eigenvectors


def eigvec_error(vec, ref):
    """Euclidean distance between unit-normalized, sign-aligned vectors."""
    v = np.asarray(vec, dtype=float).ravel()
    r = np.asarray(ref, dtype=float).ravel()
    v = v / np.linalg.norm(v)
    r = r / np.linalg.norm(r)
    if v @ r < 0:
        v = -v
    return float(np.linalg.norm(v - r))


def network_vector(net, model):
    """Normalized psi over the whole truncated basis, sign-aligned later."""
    psi = evaluate_many(net, all_configurations(model))
    return psi / np.linalg.norm(psi)


@dataclass
class EigvecReport:
    error: float
    gap: float
    determinate: bool
    vmc: np.ndarray
    exact: np.ndarray

    def lines(self):
        rows = [f"{'i':>3} {'vmc':>10} {'exact':>10}"]
        for i, (v, e) in enumerate(zip(self.vmc, self.exact), 1):
            rows.append(f"{i:>3} {v:>10.4f} {e:>10.4f}")
        if self.determinate:
            rows.append(f"error norm = {self.error:.3e}")
        else:
            rows.append(f"indeterminate: spectral gap {self.gap:.3e} below {DEGENERACY_GAP:g}")
        return rows


def compare_eigvec(net, model):
    if model.kind != "matrix":
        raise ConfigError("eigenvector comparison needs model.type = matrix")
    ref = dense_lowest_eig(model)
    gap = spectral_gap(model)
    vmc = network_vector(net, model)
    if vmc @ ref.eigenvector < 0:
        vmc = -vmc
    return EigvecReport(eigvec_error(vmc, ref.eigenvector), gap, gap >= DEGENERACY_GAP, vmc, ref.eigenvector)


# presets


PRESETS = ("table1", "table2", "table3", "efield", "overlaps")
ROW_CHECKS = {"label", "reference", "tol", "sigma", "interval", "monotone", "eigvec_tol"}


def preset_path(name):
    path = Path(name)
    if path.suffix == ".cfg" and path.exists():
        return path
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return Path(str(resources.files("rbfvmc") / "presets" / f"{name}.cfg"))


@dataclass
class PresetRow:
    label: str
    overrides: dict
    reference: float = None
    tol: float = None
    sigma: float = 0.0
    interval: tuple = None
    monotone: bool = False
    eigvec_tol: float = None


@dataclass
class Preset:
    name: str
    title: str
    kind: str
    base: dict
    rows: list
    options: dict
    base_dir: Path


def load_preset(name):
    path = preset_path(name)
    flat = read_flat(path)
    base, rows, options = {}, {}, {}
    for key, value in flat.items():
        if key.startswith("row."):
            try:
                _, idx, sub = key.split(".", 2)
                idx = int(idx)
            except ValueError:
                raise ConfigError(f"bad row key {key!r}; expected row.<index>.<key>") from None
            rows.setdefault(idx, {})[sub] = value
        elif key.startswith("preset."):
            options[key[len("preset."):]] = value
        else:
            base[key] = value
    parsed = []
    for idx in sorted(rows):
        entries = rows[idx]
        checks = {k: entries.pop(k) for k in list(entries) if k in ROW_CHECKS}
        parsed.append(
            PresetRow(
                label=checks.get("label", str(idx)),
                overrides=entries,
                reference=_opt_float(checks.get("reference")),
                tol=_opt_float(checks.get("tol")),
                sigma=float(checks.get("sigma", 0.0)),
                interval=tuple(float(x) for x in checks["interval"].split(",")) if "interval" in checks else None,
                monotone=checks.get("monotone", "false").lower() == "true",
                eigvec_tol=_opt_float(checks.get("eigvec_tol")),
            )
        )
    if not parsed:
        raise ConfigError(f"preset {path} defines no rows")
    return Preset(path.stem, options.pop("title", path.stem), options.pop("kind", "energies"), base, parsed, options, path.parent)


def _opt_float(value):
    return None if value is None else float(value)


@dataclass
class RowOutcome:
    label: str
    reference: float
    energy: float = math.nan
    error: float = math.nan
    exact: float = math.nan
    passed: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)


def row_config(preset, row, seed=None):
    flat = dict(preset.base)
    flat.update(row.overrides)
    if seed is not None:
        flat["run.seed"] = str(seed)
    return from_flat(flat, base_dir=preset.base_dir, name=f"{preset.name}-{row.label}")


def check_row(row, result, previous):
    """Apply the row's tolerance checks; returns (passed, note)."""
    e, err = result.energy, result.error
    notes = []
    ok = True
    if row.reference is not None and row.tol is not None:
        bound = max(row.tol, row.sigma * err)
        good = abs(e - row.reference) <= bound
        notes.append(f"|dE|={abs(e - row.reference):.2g}{'<=' if good else '>'}{bound:.2g}")
        ok &= good
    if row.interval is not None:
        lo, hi = row.interval
        slack = row.sigma * err
        good = lo - slack <= e <= hi + slack
        notes.append(f"in [{lo:g}, {hi:g}]" if good else f"outside [{lo:g}, {hi:g}]")
        ok &= good
    if row.monotone and previous is not None:
        good = e <= previous
        notes.append("non-increasing" if good else f"rises above previous {previous:.5f}")
        ok &= good
    if result.reference is not None:
        exact = result.reference.energy
        good = e >= exact - 3 * err - VARIATIONAL_SLACK * max(1.0, abs(exact))
        if not good:
            notes.append(f"below truncated exact {exact:.6f} by more than 3 sigma")
        ok &= good
    return bool(ok), "; ".join(notes)


def reproduce(name, seed=None, out=None, echo=None):
    """Run every preset row and write ``<name>.report.txt`` and ``<name>.csv``."""
    preset = load_preset(name)
    out = output_dir(out)
    out.mkdir(parents=True, exist_ok=True)
    if preset.kind == "overlaps":
        outcomes = _reproduce_overlaps(preset, seed, out)
    else:
        outcomes = _reproduce_energies(preset, seed, out, echo)
    lines = format_report(preset, outcomes)
    (out / f"{preset.name}.report.txt").write_text("\n".join(lines) + "\n")
    with open(out / f"{preset.name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "reference", "reproduced", "error", "exact", "pass"])
        for o in outcomes:
            w.writerow([o.label, _fmt(o.reference), repr(o.energy), repr(o.error), repr(o.exact), int(o.passed)])
    return outcomes, lines


def _reproduce_energies(preset, seed, out, echo):
    outcomes, previous = [], None
    for row in preset.rows:
        outcome = RowOutcome(row.label, row.reference)
        try:
            cfg = row_config(preset, row, seed)
            result = run_experiment(cfg)
        except RbfVmcError as exc:
            outcome.note = f"{type(exc).__name__}: {exc}"
            record = getattr(exc, "record", None)
            if record is not None:
                write_artifacts(out, f"{preset.name}-{row.label}", record)
            outcomes.append(outcome)
            previous = None
            if echo:
                echo(format_row(outcome))
            continue
        outcome.energy, outcome.error = result.energy, result.error
        if result.reference is not None:
            outcome.exact = result.reference.energy
        outcome.passed, outcome.note = check_row(row, result, previous)
        if row.eigvec_tol is not None:
            rep = compare_eigvec(result.net, result.model)
            outcome.extra["eigvec_error"] = rep.error
            good = rep.determinate and rep.error <= row.eigvec_tol
            outcome.note += f"; eigvec err {rep.error:.2e}{'<=' if good else '>'}{row.eigvec_tol:g}"
            outcome.passed &= good
        name = f"{preset.name}-{row.label}"
        write_artifacts(
            out, name, result.record, result.net,
            summary_line(name, result.energy, result.error, result.reference),
        )
        previous = result.energy
        outcomes.append(outcome)
        if echo:
            echo(format_row(outcome))
    return outcomes


def _reproduce_overlaps(preset, seed, out):
    if len(preset.rows) != 1:
        raise ConfigError("overlaps preset takes exactly one row (the run)")
    row = preset.rows[0]
    cfg = row_config(preset, row, seed)
    if cfg.model_type != "ho1d":
        raise ConfigError("overlaps preset needs model.type = ho1d")
    n_show = int(preset.options.get("n_show", 6))
    tol = float(preset.options.get("tol", 0.03))
    try:
        result = run_experiment(cfg)
    except RbfVmcError as exc:
        return [RowOutcome(f"n={n}", ho1d_overlap(cfg.model_args["field"], n), note=str(exc)) for n in range(n_show)]
    model = result.model
    vmc = network_vector(result.net, model)
    exact = np.array([ho1d_overlap(model.field, n) for n in range(model.n_max)])
    if vmc @ exact < 0:
        vmc = -vmc
    with open(out / f"{preset.name}-psi.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "psi_vmc", "psi_exact"])
        for n in range(model.n_max):
            w.writerow([n, repr(float(vmc[n])), repr(float(exact[n]))])
    name = f"{preset.name}-{row.label}"
    write_artifacts(out, name, result.record, result.net, summary_line(name, result.energy, result.error, result.reference))
    outcomes = []
    for n in range(n_show):
        diff = abs(vmc[n] - exact[n])
        outcomes.append(
            RowOutcome(
                f"n={n}", float(exact[n]), float(vmc[n]), 0.0, float(exact[n]),
                bool(diff <= tol), f"|d psi|={diff:.2g}{'<=' if diff <= tol else '>'}{tol:g}",
            )
        )
    return outcomes


def _fmt(x):
    return "" if x is None else repr(x)


def format_row(o):
    ref = "-" if o.reference is None else f"{o.reference:.6f}"
    return f"{o.label:<12} {ref:>12} {o.energy:>12.6f} {o.error:>10.2e}  {'PASS' if o.passed else 'FAIL'}  {o.note}"


def format_report(preset, outcomes):
    header = f"{'row':<12} {'reference':>12} {'reproduced':>12} {'error':>10}  result"
    lines = [preset.title, header]
    lines += [format_row(o) for o in outcomes]
    n_pass = sum(o.passed for o in outcomes)
    lines.append(f"{n_pass}/{len(outcomes)} rows pass")
    return lines
