"""Experiment definitions, initial conditions, the refinement harness and IO.

An experiment is described by a flat :class:`ExperimentConfig` (loadable from
JSON) and driven by :func:`run_experiment`, which writes a diagnostics CSV and
binary field snapshots.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .diagnostics import DiagnosticsRecord, convergence_order, discrete_energy, l2_error
from .grid import Grid2D
from .potential import (
    AuxiliaryKind,
    Formulation,
    HChoice,
    Identity,
    ModelKind,
    ModelSpec,
    Polynomial,
    QDefinition,
    QPolicy,
    RadicandError,
)
from .schemes import SchemeConfig, SchemeState, bootstrap_step, initial_state, step
from .solvers import SolverError

SCHEME_LABELS = (
    "AC-EQ",
    "AC-SAV",
    "AC-P-EQ",
    "AC-P-SAV",
    "AC-L1-EQ",
    "AC-L1-SAV",
    "AC-L2-EQ",
    "AC-L2-SAV",
    "CH-EQ",
    "CH-SAV",
)

_MODEL_PREFIX = {
    "AC": ModelKind.ALLEN_CAHN,
    "AC-P": ModelKind.ALLEN_CAHN_PENALTY,
    "AC-L1": ModelKind.ALLEN_CAHN_LAGRANGE,
    "AC-L2": ModelKind.ALLEN_CAHN_LAGRANGE,
    "CH": ModelKind.CAHN_HILLIARD,
}

CSV_HEADER = ("step", "t", "energy", "volume", "diss_residual", "solver_iters")

SNAPSHOT_MAGIC = b"PFLD"
# magic, Nx, Ny, t, reserved
_SNAPSHOT_HEADER = struct.Struct("<4sIId12x")
assert _SNAPSHOT_HEADER.size == 32


def parse_label(label: str, m: int = 1) -> tuple[ModelKind, Formulation, HChoice]:
    """Map a scheme label such as ``"AC-L2-SAV"`` to its model pieces."""
    if label not in SCHEME_LABELS:
        raise ValueError(f"unknown scheme {label!r}; expected one of {', '.join(SCHEME_LABELS)}")
    prefix, form = label.rsplit("-", 1)
    h: HChoice = Polynomial(m) if prefix == "AC-L2" else Identity()
    return _MODEL_PREFIX[prefix], Formulation(form), h


# -- configuration ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Flat experiment description; JSON keys mirror the field names.

    ``snapshot_every = 0`` writes only the final field.  ``v0 = None`` lets
    the penalty model take its target volume from the initial state.
    """

    scheme: str = "AC-EQ"
    name: str = "experiment"
    nx: int = 256
    ny: int = 256
    lx: float = 1.0
    ly: float = 1.0
    x0: float = 0.0
    y0: float = 0.0
    gamma1: float = 5e-2
    gamma2: float = 10.0
    mobility: float = 1.0
    eta: float = 1e5
    c0: float = 1e5
    m: int = 1
    v0: float | None = None
    dt: float = 1e-4
    t_end: float = 1.0
    initial: str = "cosine"
    init_delta: float = 0.01
    init_amplitude: float = 0.05
    record_every: int = 1
    snapshot_every: int = 0
    snapshot_format: str = "binary"
    seed: int = 0
    policy: str = "cn"
    q_definition: str = "shifted"
    hybrid_threshold: float = 1.5e-4
    hybrid_alpha: float = 1.0
    solver_tol: float = 1e-12
    solver_maxit: int | None = None
    refine_dts: list[float] = field(default_factory=lambda: [5e-3, 1e-3, 5e-4])
    reference_dt: float = 1e-4

    def __post_init__(self):
        parse_label(self.scheme, self.m)
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.initial not in INITIAL_CONDITIONS:
            raise ValueError(f"unknown initial condition {self.initial!r}")
        if self.record_every < 1 or self.snapshot_every < 0:
            raise ValueError("record_every must be >= 1 and snapshot_every >= 0")
        if self.snapshot_format not in ("binary", "csv"):
            raise ValueError("snapshot_format is 'binary' or 'csv'")
        QPolicy(self.policy)
        QDefinition(self.q_definition)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    # -- derived objects --

    @property
    def grid(self) -> Grid2D:
        return Grid2D(self.nx, self.ny, self.lx, self.ly, self.x0, self.y0)

    @property
    def steps(self) -> int:
        return _step_count(self.t_end, self.dt)

    def scheme_config(self) -> SchemeConfig:
        kind, form, h = parse_label(self.scheme, self.m)
        model = ModelSpec(
            kind=kind,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            mobility=self.mobility,
            eta=self.eta,
            C0=self.c0,
            h=h,
            V0=self.v0,
        )
        aux = AuxiliaryKind(
            formulation=form,
            q_definition=QDefinition(self.q_definition),
            policy=QPolicy(self.policy),
            threshold=self.hybrid_threshold,
            alpha=self.hybrid_alpha,
        )
        return SchemeConfig(model, aux, self.dt, self.solver_tol, self.solver_maxit)

    def initial_field(self) -> np.ndarray:
        grid = self.grid
        if self.initial == "cosine":
            return init_cosine(grid)
        if self.initial == "two_drops":
            return init_two_drops(grid, self.init_delta)
        return init_random(grid, self.init_amplitude, self.seed)


def _step_count(t_end: float, dt: float) -> int:
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * t_end:
        raise ValueError(f"dt={dt:g} does not divide t_end={t_end:g}")
    return n


# -- initial conditions -------------------------------------------------------


def init_cosine(grid: Grid2D) -> np.ndarray:
    """``1/2 + 1/2 cos(pi x) cos(pi y)`` on ``[-1, 1]^2``."""
    lo = (grid.x0, grid.y0)
    hi = (grid.x0 + grid.lx, grid.y0 + grid.ly)
    if not (np.allclose(lo, -1.0) and np.allclose(hi, 1.0)):
        raise ValueError("the cosine initial condition is defined on [-1, 1]^2")
    X, Y = grid.meshgrid()
    return 0.5 + 0.5 * np.cos(np.pi * X) * np.cos(np.pi * Y)


def _drop_profile(r: np.ndarray, delta: float, radius: float = 0.2) -> np.ndarray:
    return np.where(r <= radius - delta, 1.0, np.where(r <= radius, np.tanh((radius - r) / delta), 0.0))


def init_two_drops(grid: Grid2D, delta: float = 0.01) -> np.ndarray:
    """Two touching discs of radius 0.2 centred at (0.3, 0.5) and (0.7, 0.5).

    Inside ``r <= 0.2 - delta`` the field is 1, in the shell
    ``0.2 - delta < r <= 0.2`` it follows ``tanh((0.2 - r)/delta)`` and it is 0
    elsewhere.  Where both shells overlap the first drop takes precedence.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    X, Y = grid.meshgrid()
    r1 = np.hypot(X - 0.3, Y - 0.5)
    r2 = np.hypot(X - 0.7, Y - 0.5)
    core = (r1 <= 0.2 - delta) | (r2 <= 0.2 - delta)
    p1, p2 = _drop_profile(r1, delta), _drop_profile(r2, delta)
    return np.where(core, 1.0, np.where(r1 <= 0.2, p1, p2))


def init_random(grid: Grid2D, amplitude: float = 0.05, seed: int = 0) -> np.ndarray:
    """``0.5 + amplitude * U[-1, 1]`` drawn cell by cell from a seeded generator."""
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    return 0.5 + amplitude * rng.uniform(-1.0, 1.0, size=grid.shape)


INITIAL_CONDITIONS = ("cosine", "two_drops", "random")


# -- snapshots ----------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    step: int
    t: float
    phi: np.ndarray


def write_snapshot(path: str | Path, t: float, phi: np.ndarray) -> None:
    """32-byte little-endian header followed by ``phi`` as row-major float64."""
    ny, nx = phi.shape
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, nx, ny, float(t)))
        fh.write(np.ascontiguousarray(phi, dtype="<f8").tobytes())


def read_snapshot(path: str | Path) -> tuple[float, np.ndarray]:
    raw = Path(path).read_bytes()
    magic, nx, ny, t = _SNAPSHOT_HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    expected = _SNAPSHOT_HEADER.size + 8 * nx * ny
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    phi = np.frombuffer(raw, dtype="<f8", offset=_SNAPSHOT_HEADER.size).reshape(ny, nx)
    return t, phi.astype(float)


def write_snapshot_csv(path: str | Path, grid: Grid2D, t: float, phi: np.ndarray) -> None:
    X, Y = grid.meshgrid()
    with open(path, "w", newline="") as fh:
        fh.write(f"# t={t!r}\n")
        w = csv.writer(fh)
        w.writerow(("x", "y", "phi"))
        for x, y, v in zip(X.ravel(), Y.ravel(), phi.ravel()):
            w.writerow((f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"))


def _format_record(rec: DiagnosticsRecord) -> list[str]:
    return [
        str(rec.step),
        f"{rec.t:.17g}",
        f"{rec.energy:.17g}",
        f"{rec.volume:.17g}",
        f"{rec.diss_residual:.17g}",
        str(rec.solver_iters),
    ]


def read_diagnostics(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            DiagnosticsRecord(
                step=int(row["step"]),
                t=float(row["t"]),
                energy=float(row["energy"]),
                volume=float(row["volume"]),
                diss_residual=float(row["diss_residual"]),
                solver_iters=int(row["solver_iters"]),
            )
            for row in reader
        ]


# -- driver -------------------------------------------------------------------


@dataclass
class ExperimentResult:
    records: list[DiagnosticsRecord]
    snapshots: list[Snapshot]
    final: SchemeState
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def integrate(
    config: ExperimentConfig,
    observer: Callable[[SchemeState, Any], None] | None = None,
) -> SchemeState:
    """Bootstrap then step to ``t_end``; ``observer(state, step_result)`` sees
    every level (with ``None`` for level 0)."""
    scheme = config.scheme_config()
    grid = config.grid
    state = initial_state(config.initial_field(), grid, scheme)
    if observer is not None:
        observer(state, None)
    for n in range(config.steps):
        res = bootstrap_step(state, scheme) if n == 0 else step(state, scheme)
        state = res.state
        if observer is not None:
            observer(state, res)
    return state


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    keep_snapshots: bool = True,
) -> ExperimentResult:
    """Run one experiment, recording diagnostics and snapshots.

    When ``out_dir`` is given, ``diagnostics.csv``, the snapshots and a copy of
    the configuration are written there, rows being flushed as they are
    produced.  A solver failure or an invalid auxiliary stops the run; the
    partial output is kept and the message is stored in ``result.error``.
    """
    scheme = config.scheme_config()
    grid = config.grid
    nsteps = config.steps
    records: list[DiagnosticsRecord] = []
    snapshots: list[Snapshot] = []
    last: dict[str, Any] = {}

    out = Path(out_dir) if out_dir is not None else None
    csv_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
        csv_fh = open(out / "diagnostics.csv", "w", newline="")
        writer = csv.writer(csv_fh)
        writer.writerow(CSV_HEADER)

    def emit_snapshot(state: SchemeState):
        if out is not None:
            if config.snapshot_format == "binary":
                write_snapshot(out / f"snap_{state.n:08d}.pfld", state.t, state.phi)
            else:
                write_snapshot_csv(out / f"snap_{state.n:08d}.csv", grid, state.t, state.phi)
        if keep_snapshots:
            snapshots.append(Snapshot(state.n, state.t, state.phi.copy()))

    def observe(state: SchemeState, res):
        energy = discrete_energy(state, scheme)
        diss, iters = 0.0, 0
        if res is not None:
            diss = abs(energy - last["energy"] + res.dissipation)
            iters = res.report.iterations
        last.update(energy=energy, state=state)
        final = state.n == nsteps
        if state.n % config.record_every == 0 or final:
            rec = DiagnosticsRecord(
                step=state.n,
                t=state.t,
                energy=energy,
                volume=grid.integral(scheme.model.h(state.phi)),
                diss_residual=diss,
                solver_iters=iters,
            )
            records.append(rec)
            if csv_fh is not None:
                writer.writerow(_format_record(rec))
                csv_fh.flush()
        every = config.snapshot_every
        if final or (every and state.n % every == 0):
            emit_snapshot(state)

    error = None
    try:
        integrate(config, observe)
    except (SolverError, RadicandError, FloatingPointError) as exc:
        error = f"step {last['state'].n + 1}: {exc}" if "state" in last else str(exc)
        if "state" in last:
            emit_snapshot(last["state"])
    finally:
        if csv_fh is not None:
            csv_fh.close()
    return ExperimentResult(records, snapshots, last.get("state"), error)


# -- refinement ---------------------------------------------------------------


@dataclass(frozen=True)
class RefinementRow:
    dt: float
    error: float
    order: float | None


def refinement_harness(
    config: ExperimentConfig,
    dts: Iterable[float] | None = None,
    reference_dt: float | None = None,
) -> list[RefinementRow]:
    """Temporal errors against a fine-step reference at ``t_end``.

    Rows are ordered by decreasing ``dt``; ``order`` compares each row with
    the one above it (``None`` for the first).
    """
    dts = sorted(config.refine_dts if dts is None else dts, reverse=True)
    ref_dt = config.reference_dt if reference_dt is None else reference_dt
    dts = [dt for dt in dts if dt != ref_dt]
    if not dts or not ref_dt < min(dts):
        raise ValueError("the reference step must be smaller than every coarse step")
    grid = config.grid
    reference = integrate(config.replace(dt=ref_dt)).phi
    errors = [l2_error(grid, integrate(config.replace(dt=dt)).phi, reference) for dt in dts]
    orders: list[float | None] = [None]
    if len(dts) > 1:
        orders += convergence_order(errors, dts)
    return [RefinementRow(dt, e, o) for dt, e, o in zip(dts, errors, orders)]


def write_refinement_csv(path: str | Path, rows: list[RefinementRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("dt", "l2_error", "order"))
        for row in rows:
            w.writerow((f"{row.dt:.17g}", f"{row.error:.17g}", "" if row.order is None else f"{row.order:.17g}"))

