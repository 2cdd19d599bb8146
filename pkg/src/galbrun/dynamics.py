"""Leapfrog time integration with a reused sparse factorization.

The scheme is the centered three-level discretization

    Mh (x+ - 2 x0 + x-) / dt^2 + (Bh + Ch)(x+ - x-) / (2 dt)
        + (Ah + Dh) x0 = F(t),

so each step solves one system with the fixed operator
L = Mh / dt^2 + (Bh + Ch) / (2 dt), LU-factorized once. The centered
first-order term keeps the exact discrete energy balance: the staggered
energy decreases monotonically with absorbing boundaries and is conserved
to roundoff for the closed box at M = 0.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from galbrun.assembly import (
    SystemMatrices,
    assemble_boundary_mass,
    build_system,
    minimum_edge_length,
)
from galbrun.config import InitKind, RunConfig
from galbrun.mesh import DofMap, Mesh, build_dof_map, build_duct_mesh
from galbrun.output import EnergyRecord, write_energy_log, write_snapshot
from galbrun.physics import (
    AbcVariant,
    CausalVorticity,
    Direction,
    RhsAssembler,
    SourceKind,
    boundary_flux,
    energy,
    gaussian_profile,
    make_energy_stiffness,
    plane_wave,
)

# Blow-up declaration threshold relative to the early-time energy scale.
INSTABILITY_RATIO = 1e12


class InstabilityError(RuntimeError):
    """Non-finite values appeared in the update at the given step."""

    def __init__(self, step: int):
        super().__init__(f"non-finite update at step {step}")
        self.step = step


@dataclass(frozen=True)
class Stable:
    steps: int


@dataclass(frozen=True)
class Unstable:
    step: int


@dataclass
class SimState:
    """Two consecutive displacement vectors; step indexes xi_curr."""

    xi_prev: np.ndarray
    xi_curr: np.ndarray
    step: int
    dt: float


class StepOperator:
    """Factorized per-step solve plus the cached scheme matrices."""

    def __init__(self, mats: SystemMatrices, dt: float, lumped_mass: bool = False):
        if dt <= 0:
            raise ValueError("dt must be positive")
        Mh = mats.Mh
        if lumped_mass:
            Mh = sp.diags(np.asarray(mats.Mh.sum(axis=1)).ravel()).tocsr()
        BC = (mats.Bh + mats.Ch).tocsr()
        self.K = (mats.Ah + mats.Dh).tocsr()
        self.L = (Mh / dt**2 + BC / (2.0 * dt)).tocsr()
        self._two_mass = (2.0 / dt**2) * Mh
        self._back = (Mh / dt**2 - BC / (2.0 * dt)).tocsr()
        self._lu = splu(self.L.tocsc())
        self.dt = dt
        self.lumped_mass = lumped_mass

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)

    def scheme_rhs(self, state: SimState, F: np.ndarray) -> np.ndarray:
        return (
            self._two_mass @ state.xi_curr
            - self._back @ state.xi_prev
            - self.K @ state.xi_curr
            + F
        )


def plan_time_step(mesh: Mesh, M: float, cfl_safety: float) -> float:
    """dt = cfl_safety * h_min / (1 + |M|), h_min the shortest edge."""
    if not 0.0 < cfl_safety <= 1.0:
        raise ValueError("cfl_safety must lie in (0, 1]")
    return cfl_safety * minimum_edge_length(mesh) / (1.0 + abs(M))


def build_step_operator(
    mats: SystemMatrices, dt: float, lumped_mass: bool = False
) -> StepOperator:
    return StepOperator(mats, dt, lumped_mass=lumped_mass)


def leapfrog_step(op: StepOperator, state: SimState, F: np.ndarray) -> SimState:
    """Advance one step; raises InstabilityError on non-finite values."""
    xi_next = op.solve(op.scheme_rhs(state, F))
    if not np.all(np.isfinite(xi_next)):
        raise InstabilityError(state.step + 1)
    return SimState(
        xi_prev=state.xi_curr, xi_curr=xi_next, step=state.step + 1, dt=state.dt
    )


def taylor_first_step(
    mats: SystemMatrices,
    dt: float,
    xi0: np.ndarray,
    zeta0: np.ndarray,
    F0: np.ndarray,
) -> np.ndarray:
    """Second-order accurate start from displacement and velocity data:

    xi1 = xi0 + dt zeta0
          + dt^2/2 Mh^{-1} (F0 - (Ah+Dh) xi0 - (Bh+Ch) zeta0)
    """
    rhs = F0 - (mats.Ah + mats.Dh) @ xi0 - (mats.Bh + mats.Ch) @ zeta0
    accel = splu(mats.Mh.tocsc()).solve(rhs)
    return xi0 + dt * zeta0 + 0.5 * dt * dt * accel


@dataclass
class RunResult:
    status: Stable | Unstable
    records: list[EnergyRecord]
    dt: float
    n_steps: int
    mesh: Mesh
    dofs: DofMap
    mats: SystemMatrices
    config: RunConfig
    warnings: list[str]
    snapshots: list[tuple[float, np.ndarray]]
    snapshot_paths: list[str]
    probe_nodes: np.ndarray
    probe_norms: np.ndarray | None  # (n_records, n_probes)
    final_state: SimState

    @property
    def stable(self) -> bool:
        return isinstance(self.status, Stable)


def _initial_levels(
    cfg: RunConfig,
    mesh: Mesh,
    dofs: DofMap,
    mats: SystemMatrices,
    rhs: RhsAssembler,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    if cfg.init_kind == InitKind.NONE:
        zero = np.zeros(dofs.n_dofs)
        return zero, zero.copy()
    if cfg.init_kind == InitKind.PLANE_PULSE:
        F, dF = gaussian_profile(cfg.init_center_x, cfg.init_width, cfg.init_amplitude)
        wave = plane_wave(Direction.RIGHT, cfg.M, F, dF)
        xi0 = dofs.restrict(wave.xi(mesh.nodes, 0.0))
        xi1 = dofs.restrict(wave.xi(mesh.nodes, dt))
        return xi0, xi1
    # gradient-of-bump displacement released from rest
    dx = mesh.nodes[:, 0] - cfg.init_center_x
    dy = mesh.nodes[:, 1] - cfg.init_center_y
    w2 = cfg.init_width**2
    g = cfg.init_amplitude * np.exp(-0.5 * (dx * dx + dy * dy) / w2)
    field = np.column_stack([-dx * g / w2, -dy * g / w2])
    xi0 = dofs.restrict(field)
    zeta0 = np.zeros(dofs.n_dofs)
    xi1 = taylor_first_step(mats, dt, xi0, zeta0, rhs(0.0))
    return xi0, xi1


def run_simulation(
    cfg: RunConfig,
    out_dir: str | None = None,
    probes: tuple[tuple[float, float], ...] = (),
    keep_fields: bool = False,
) -> RunResult:
    """Execute one configured run.

    Writes snapshots, the energy log, a metadata echo and a short report
    into out_dir when given; otherwise everything stays in memory. The
    run aborts with an Unstable status when the update goes non-finite or
    the logged energy exceeds INSTABILITY_RATIO times the early-time
    scale; partial outputs are preserved either way.
    """
    warnings = cfg.validate()
    variant = cfg.abc_variant()

    mesh = build_duct_mesh(cfg.geometry(), cfg.nx, cfg.ny)
    dofs = build_dof_map(mesh, closed_box=(variant == AbcVariant.NONE))
    mats = build_system(mesh, dofs, cfg.M, cfg.s, abc=variant.value)

    dt_raw = plan_time_step(mesh, cfg.M, cfg.cfl_safety)
    n_steps = max(1, math.ceil(cfg.t_end / dt_raw - 1e-12))
    dt = cfg.t_end / n_steps

    op = build_step_operator(mats, dt)
    Ke = make_energy_stiffness(mesh, dofs, cfg.M)
    flux_mat = None
    if variant != AbcVariant.NONE:
        flux_mat = assemble_boundary_mass(mesh, dofs)

    source = cfg.source_spec()
    vorticity = None
    if (
        source is not None
        and source.kind == SourceKind.ROTATIONAL
        and cfg.s != 0.0
    ):
        vorticity = CausalVorticity(source, cfg.M)
    rhs = RhsAssembler(mesh, dofs, source, cfg.s, vorticity=vorticity)

    snapshot_steps: dict[int, float] = {}
    for ts in cfg.snapshot_times:
        snapshot_steps.setdefault(min(n_steps, max(0, round(ts / dt))), ts)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        meta = _metadata_text(cfg, mesh, dofs, dt, n_steps, warnings)
        with open(os.path.join(out_dir, "run_metadata.cfg"), "w", newline="\n") as f:
            f.write(meta)

    probe_nodes = np.array(
        [
            np.argmin(np.hypot(mesh.nodes[:, 0] - px, mesh.nodes[:, 1] - py))
            for px, py in probes
        ],
        dtype=np.int64,
    )

    xi0, xi1 = _initial_levels(cfg, mesh, dofs, mats, rhs, dt)
    state = SimState(xi_prev=xi0, xi_curr=xi1, step=1, dt=dt)

    records: list[EnergyRecord] = []
    probe_rows: list[np.ndarray] = []
    snapshots: list[tuple[float, np.ndarray]] = []
    snapshot_paths: list[str] = []

    def flux_of(prev: np.ndarray, curr: np.ndarray) -> float:
        if flux_mat is None:
            return 0.0
        return boundary_flux(prev, curr, dt, flux_mat)

    def observe(
        step: int, prev: np.ndarray, curr: np.ndarray, at: np.ndarray | None = None
    ) -> EnergyRecord:
        rec = EnergyRecord(
            step=step,
            t=step * dt,
            E=energy(prev, curr, dt, mats.Mh, Ke),
            flux=flux_of(prev, curr),
        )
        records.append(rec)
        if probe_nodes.size:
            nodal = dofs.expand(curr if at is None else at)[probe_nodes]
            probe_rows.append(np.hypot(nodal[:, 0], nodal[:, 1]))
        return rec

    def emit_snapshot(step: int, x: np.ndarray) -> None:
        if step not in snapshot_steps:
            return
        t = step * dt
        field = dofs.expand(x)
        if keep_fields or out_dir is None:
            snapshots.append((t, field))
        if out_dir is not None:
            name = f"snap_{len(snapshot_paths):03d}_t{t:.6f}.vtk"
            path = os.path.join(out_dir, name)
            write_snapshot(mesh, field, t, path)
            snapshot_paths.append(path)

    early_span = max(10, math.ceil(0.05 * (n_steps + 1)))
    e_early = 0.0
    status: Stable | Unstable | None = None

    # Rows n >= 1 log the backward pair at step n; row 0 reuses the starter
    # pair, the only difference quotient available at t = 0.
    for rec in (observe(0, xi0, xi1, at=xi0), observe(1, xi0, xi1)):
        if np.isfinite(rec.E):
            e_early = max(e_early, rec.E)
    emit_snapshot(0, xi0)
    emit_snapshot(1, xi1)

    while state.step < n_steps and status is None:
        try:
            state = leapfrog_step(op, state, rhs(state.step * dt))
        except InstabilityError as exc:
            records.append(
                EnergyRecord(
                    step=exc.step,
                    t=exc.step * dt,
                    E=float("inf"),
                    flux=float("inf"),
                    status="warned",
                )
            )
            if probe_nodes.size:
                probe_rows.append(np.full(probe_nodes.size, np.inf))
            status = Unstable(exc.step)
            break
        rec = observe(state.step, state.xi_prev, state.xi_curr)
        emit_snapshot(state.step, state.xi_curr)
        if state.step <= early_span and np.isfinite(rec.E):
            e_early = max(e_early, rec.E)
        elif not np.isfinite(rec.E) or rec.E > INSTABILITY_RATIO * max(1.0, e_early):
            records[-1] = EnergyRecord(
                step=rec.step, t=rec.t, E=rec.E, flux=rec.flux, status="warned"
            )
            status = Unstable(state.step)

    if status is None:
        status = Stable(steps=n_steps)

    probe_norms = np.array(probe_rows) if probe_nodes.size else None

    if out_dir is not None:
        write_energy_log(records, os.path.join(out_dir, cfg.energy_log))
        with open(os.path.join(out_dir, "report.txt"), "w", newline="\n") as f:
            f.write(_report_text(status, records, dt, n_steps, warnings))

    return RunResult(
        status=status,
        records=records,
        dt=dt,
        n_steps=n_steps,
        mesh=mesh,
        dofs=dofs,
        mats=mats,
        config=cfg,
        warnings=warnings,
        snapshots=snapshots,
        snapshot_paths=snapshot_paths,
        probe_nodes=probe_nodes,
        probe_norms=probe_norms,
        final_state=state,
    )


def _metadata_text(
    cfg: RunConfig,
    mesh: Mesh,
    dofs: DofMap,
    dt: float,
    n_steps: int,
    warnings: list[str],
) -> str:
    from galbrun.config import config_to_text

    comments = [
        "run metadata echo; loadable as a config file",
        f"derived: dt = {dt!r}, n_steps = {n_steps}, n_dofs = {dofs.n_dofs}, "
        f"n_nodes = {mesh.n_nodes}, n_triangles = {mesh.n_triangles}",
    ]
    comments += [f"warning: {w}" for w in warnings]
    return config_to_text(cfg, header_comments=tuple(comments))


def _report_text(
    status: Stable | Unstable,
    records: list[EnergyRecord],
    dt: float,
    n_steps: int,
    warnings: list[str],
) -> str:
    finite = [r.E for r in records if np.isfinite(r.E)]
    lines = []
    if isinstance(status, Stable):
        lines.append(f"status: Stable after {status.steps} steps (dt = {dt!r})")
    else:
        lines.append(f"status: Unstable at step {status.step} of {n_steps} (dt = {dt!r})")
    if finite:
        lines.append(f"peak energy: {max(finite)!r}")
        lines.append(f"final logged energy: {finite[-1]!r}")
    for w in warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
