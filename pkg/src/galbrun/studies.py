"""Verification studies behind the CLI subcommands.

Three studies, each returning a small report object with a text() method:

  * cmd_convergence: manufactured-solution L2 orders, spatial and temporal;
  * cmd_abc_reflection: reflection coefficient of the absorbing boundary
    under simultaneous mesh and time-step refinement;
  * cmd_stability_contrast: the regularized vs unregularized run pair.

The manufactured field is grad[(1-x^2)^2 (1-y^2)^2] cos(omega t) on the
closed box [-1,1]^2. Being a gradient it is curl free, its normal
component vanishes on all four sides, and its x derivative of the
tangential component vanishes on the vertical sides, so it satisfies
every essential and natural condition of the closed-box weak form; the
forcing is the full operator applied symbolically.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from galbrun.assembly import build_system
from galbrun.config import ConfigError, RunConfig
from galbrun.dynamics import (
    RunResult,
    SimState,
    Stable,
    Unstable,
    build_step_operator,
    leapfrog_step,
    run_simulation,
    taylor_first_step,
)
from galbrun.mesh import DuctGeometry, build_dof_map, build_duct_mesh
from galbrun.physics import RhsAssembler


# ---------------------------------------------------------------------------
# manufactured-solution convergence


@dataclass(frozen=True)
class MmsCase:
    """Vectorized exact solution, its velocity and the matching forcing."""

    xi: Callable[[np.ndarray, float], np.ndarray]
    xi_t: Callable[[np.ndarray, float], np.ndarray]
    forcing: Callable[[np.ndarray, float], np.ndarray]
    M: float
    s: float
    omega: float


def manufactured_case(M: float, s: float, omega: float = 2.0) -> MmsCase:
    import sympy

    x, y, t = sympy.symbols("x y t")
    bump = (1 - x**2) ** 2 * (1 - y**2) ** 2
    q = sympy.cos(omega * t)
    xi_sym = [sympy.diff(bump, x) * q, sympy.diff(bump, y) * q]
    div = sympy.diff(xi_sym[0], x) + sympy.diff(xi_sym[1], y)
    curl = sympy.diff(xi_sym[1], x) - sympy.diff(xi_sym[0], y)  # 0 for a gradient

    def transport_squared(u):
        return (
            sympy.diff(u, t, 2)
            + 2 * M * sympy.diff(u, x, t)
            + M * M * sympy.diff(u, x, 2)
        )

    g_sym = [
        transport_squared(xi_sym[0]) - sympy.diff(div, x) + s * sympy.diff(curl, y),
        transport_squared(xi_sym[1]) - sympy.diff(div, y) - s * sympy.diff(curl, x),
    ]
    lam = [
        sympy.lambdify((x, y, t), sympy.expand(e), "numpy")
        for e in (*xi_sym, *(sympy.diff(c, t) for c in xi_sym), *g_sym)
    ]

    def pack(fx, fy):
        def f(pts: np.ndarray, tt: float) -> np.ndarray:
            out = np.zeros(pts.shape)
            px, py = pts[..., 0], pts[..., 1]
            out[..., 0] = np.broadcast_to(fx(px, py, tt), px.shape)
            out[..., 1] = np.broadcast_to(fy(px, py, tt), px.shape)
            return out

        return f

    return MmsCase(
        xi=pack(lam[0], lam[1]),
        xi_t=pack(lam[2], lam[3]),
        forcing=pack(lam[4], lam[5]),
        M=M,
        s=s,
        omega=omega,
    )


def _mms_solve(case: MmsCase, n: int, dt: float, t_end: float) -> np.ndarray:
    """Dof vector at t_end on the n-by-n closed box, production stepping."""
    mesh = build_duct_mesh(DuctGeometry(1.0, 1.0), n, n)
    dofs = build_dof_map(mesh, closed_box=True)
    mats = build_system(mesh, dofs, case.M, case.s, abc="none")
    rhs = RhsAssembler(mesh, dofs, source=None, s=case.s, forcing=case.forcing)
    n_steps = round(t_end / dt)
    if abs(n_steps * dt - t_end) > 1e-12 * t_end:
        raise ValueError("dt must divide t_end")
    xi0 = dofs.restrict(case.xi(mesh.nodes, 0.0))
    zeta0 = dofs.restrict(case.xi_t(mesh.nodes, 0.0))
    xi1 = taylor_first_step(mats, dt, xi0, zeta0, rhs(0.0))
    op = build_step_operator(mats, dt)
    state = SimState(xi0, xi1, step=1, dt=dt)
    while state.step < n_steps:
        state = leapfrog_step(op, state, rhs(state.step * dt))
    return state.xi_curr


def _mms_error(case: MmsCase, n: int, dt: float, t_end: float) -> float:
    mesh = build_duct_mesh(DuctGeometry(1.0, 1.0), n, n)
    dofs = build_dof_map(mesh, closed_box=True)
    mats = build_system(mesh, dofs, case.M, case.s, abc="none")
    exact = dofs.restrict(case.xi(mesh.nodes, t_end))
    err = _mms_solve(case, n, dt, t_end) - exact
    return math.sqrt((err @ (mats.Mh @ err)) / (exact @ (mats.Mh @ exact)))


@dataclass(frozen=True)
class ConvergenceReport:
    kind: str  # "spatial" or "temporal"
    labels: tuple[str, ...]
    steps: tuple[float, ...]  # h or dt per level
    errors: tuple[float, ...]
    order: float

    def text(self) -> str:
        name = "h" if self.kind == "spatial" else "dt"
        lines = [f"{self.kind} convergence (relative L2 at t_end):"]
        for label, s, e in zip(self.labels, self.steps, self.errors):
            lines.append(f"  {label}: {name} = {s:.6g}, error = {e:.6e}")
        lines.append(f"  observed order: {self.order:.3f}")
        return "\n".join(lines)


def spatial_convergence(
    levels: tuple[int, ...] = (8, 16, 32),
    M: float = 0.4,
    s: float = 1.0,
    cfl: float = 0.3,
    t_end: float = 0.5,
) -> ConvergenceReport:
    """Refine the mesh with dt tied to h, so both error terms scale as h^2."""
    if len(levels) < 3:
        raise ConfigError("convergence study needs at least 3 levels")
    case = manufactured_case(M, s)
    hs, errors, labels = [], [], []
    for n in levels:
        h = 2.0 / n
        dt_raw = cfl * h / (1.0 + abs(M))
        n_steps = math.ceil(t_end / dt_raw - 1e-12)
        dt = t_end / n_steps
        errors.append(_mms_error(case, n, dt, t_end))
        hs.append(h)
        labels.append(f"n = {n:3d} (dt = {dt:.6g})")
    order = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    return ConvergenceReport(
        "spatial", tuple(labels), tuple(hs), tuple(errors), order
    )


def temporal_convergence(
    n: int = 16,
    halvings: int = 3,
    ref_factor: int = 32,
    M: float = 0.4,
    s: float = 1.0,
    cfl: float = 0.3,
    t_end: float = 0.5,
) -> ConvergenceReport:
    """Halve dt on a fixed mesh against a much finer-dt reference, which
    cancels the spatial error and exposes the time discretization alone."""
    if halvings < 3:
        raise ConfigError("convergence study needs at least 3 levels")
    case = manufactured_case(M, s)
    h = 2.0 / n
    dt0 = t_end / math.ceil(t_end / (cfl * h / (1.0 + abs(M))) - 1e-12)
    ref = _mms_solve(case, n, dt0 / ref_factor, t_end)

    mesh = build_duct_mesh(DuctGeometry(1.0, 1.0), n, n)
    dofs = build_dof_map(mesh, closed_box=True)
    mats = build_system(mesh, dofs, case.M, case.s, abc="none")
    scale = math.sqrt(ref @ (mats.Mh @ ref))

    dts, errors, labels = [], [], []
    for k in range(halvings):
        dt = dt0 / 2**k
        diff = _mms_solve(case, n, dt, t_end) - ref
        errors.append(math.sqrt(diff @ (mats.Mh @ diff)) / scale)
        dts.append(dt)
        labels.append(f"n = {n:3d} (dt = {dt:.6g})")
    order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return ConvergenceReport(
        "temporal", tuple(labels), tuple(dts), tuple(errors), order
    )


@dataclass(frozen=True)
class ConvergenceStudy:
    spatial: ConvergenceReport
    temporal: ConvergenceReport

    def text(self) -> str:
        return self.spatial.text() + "\n" + self.temporal.text() + "\n"


def cmd_convergence(
    config: RunConfig | None = None, levels: tuple[int, ...] = (8, 16, 32)
) -> ConvergenceStudy:
    """Manufactured-solution study; M, s and cfl_safety come from config.

    The study always runs on its own closed unit box, whatever geometry the
    config carries, because the manufactured field is tied to that domain.
    """
    cfg = config if config is not None else RunConfig(M=0.4)
    return ConvergenceStudy(
        spatial=spatial_convergence(levels, M=cfg.M, s=cfg.s, cfl=cfg.cfl_safety),
        temporal=temporal_convergence(
            M=cfg.M, s=cfg.s, cfl=cfg.cfl_safety
        ),
    )


# ---------------------------------------------------------------------------
# absorbing-boundary reflection


DEFAULT_REFLECTION_LEVELS = ((80, 10), (160, 20), (320, 40))


def reflection_base_config() -> RunConfig:
    """Right-moving plane pulse launched upstream of the domain center."""
    return RunConfig(
        R=4.0,
        h=1.0,
        t_end=8.0,
        M=0.5,
        s=1.0,
        abc="stable",
        source_kind="none",
        init_kind="plane_pulse",
        init_center_x=-2.0,
        init_width=0.35,
        snapshot_times=(),
    )


@dataclass(frozen=True)
class ReflectionLevel:
    nx: int
    ny: int
    dt: float
    rho: float
    passage_peak: float
    reflected_peak: float
    status: str  # "Stable" or "Unstable at step k"


@dataclass(frozen=True)
class ReflectionReport:
    levels: tuple[ReflectionLevel, ...]
    probe: tuple[float, float]
    passage_window: tuple[float, float]
    post_window: tuple[float, float]

    @property
    def rhos(self) -> tuple[float, ...]:
        return tuple(lv.rho for lv in self.levels)

    def text(self) -> str:
        lines = [
            "absorbing-boundary reflection study "
            f"(probe at {self.probe}, passage window "
            f"[{self.passage_window[0]:.2f}, {self.passage_window[1]:.2f}], "
            f"post-exit window [{self.post_window[0]:.2f}, {self.post_window[1]:.2f}]):"
        ]
        for lv in self.levels:
            note = "" if lv.status == "Stable" else f"  [warning: {lv.status}]"
            lines.append(
                f"  nx = {lv.nx:3d}, ny = {lv.ny:3d}, dt = {lv.dt:.6g}: "
                f"rho = {lv.rho:.6e}{note}"
            )
        return "\n".join(lines) + "\n"


def cmd_abc_reflection(
    config: RunConfig | None = None,
    levels: tuple[tuple[int, int], ...] = DEFAULT_REFLECTION_LEVELS,
) -> ReflectionReport:
    """Measure the reflection coefficient per refinement level.

    rho = (peak probe |xi| after the pulse has left through the downstream
    boundary) / (peak during passage). The probe sits one unit inside the
    downstream boundary on the axis; the observation windows derive from
    the two characteristic speeds.
    """
    base = config if config is not None else reflection_base_config()
    if base.init_kind != "plane_pulse":
        base = dataclasses.replace(
            base,
            init_kind="plane_pulse",
            init_center_x=-base.R / 2,
            init_width=0.35,
        )
    c_out = 1.0 + base.M  # downstream speed of the launched pulse
    c_back = 1.0 - base.M  # speed of anything reflected back upstream
    probe = (base.R - 1.0, 0.0)
    spread = 4.0 * base.init_width / c_out
    t_peak = (probe[0] - base.init_center_x) / c_out
    t_exit = (base.R - base.init_center_x) / c_out
    t_reflect = t_exit + (base.R - probe[0]) / c_back
    if t_reflect + spread > base.t_end:
        raise ConfigError(
            f"pulse cannot exit and reflect back to the probe by t_end = "
            f"{base.t_end}; increase t_end to at least {t_reflect + spread:.2f}"
        )
    passage = (max(0.0, t_peak - spread - 0.5), t_peak + spread + 0.5)
    post = (max(passage[1], t_reflect - spread), base.t_end)

    out_levels = []
    for nx, ny in levels:
        cfg = dataclasses.replace(base, nx=nx, ny=ny, snapshot_times=())
        res = run_simulation(cfg, probes=(probe,))
        tvals = np.array([r.t for r in res.records])
        norms = res.probe_norms[:, 0]
        in_passage = (tvals >= passage[0]) & (tvals <= passage[1])
        in_post = (tvals >= post[0]) & (tvals <= post[1])
        peak = float(norms[in_passage].max())
        reflected = float(norms[in_post].max()) if in_post.any() else float("nan")
        status = (
            "Stable"
            if isinstance(res.status, Stable)
            else f"Unstable at step {res.status.step}"
        )
        out_levels.append(
            ReflectionLevel(
                nx=nx,
                ny=ny,
                dt=res.dt,
                rho=reflected / peak,
                passage_peak=peak,
                reflected_peak=reflected,
                status=status,
            )
        )
    return ReflectionReport(
        levels=tuple(out_levels),
        probe=probe,
        passage_window=passage,
        post_window=post,
    )


# ---------------------------------------------------------------------------
# stability contrast


def growth_over_final_decade(records) -> float:
    """Ratio of the last logged energy to the one a tenth of the log ago."""
    E = [r.E for r in records]
    n = len(E)
    k = max(1, n // 10)
    start = E[n - 1 - k]
    end = E[n - 1]
    if not np.isfinite(end):
        return float("inf")
    return end / max(start, 1e-300)


@dataclass(frozen=True)
class ContrastReport:
    regularized: RunResult  # s = 1
    unregularized: RunResult  # s = 0
    growth_regularized: float
    growth_unregularized: float

    @property
    def passed(self) -> bool:
        return (
            self.regularized.stable
            and self.growth_regularized < 10.0
            and (
                isinstance(self.unregularized.status, Unstable)
                or self.growth_unregularized >= 10.0
            )
        )

    def text(self) -> str:
        cfg = self.regularized.config
        lines = [
            f"stability contrast: M = {cfg.M}, nx = {cfg.nx}, ny = {cfg.ny}, "
            f"dt = {self.regularized.dt:.6g}, t_end = {cfg.t_end}"
        ]
        for name, res, growth in (
            ("s = 1", self.regularized, self.growth_regularized),
            ("s = 0", self.unregularized, self.growth_unregularized),
        ):
            finite = [r.E for r in res.records if np.isfinite(r.E)]
            peak = max(finite) if finite else float("nan")
            if isinstance(res.status, Stable):
                status = f"Stable after {res.status.steps} steps"
            else:
                status = f"Unstable at step {res.status.step} of {res.n_steps}"
            lines.append(
                f"  {name}: {status}; peak E = {peak:.4e}, "
                f"growth over final decade = {growth:.3e}"
            )
        lines.append(
            "verdict: "
            + (
                "regularized run stable, unregularized run unstable"
                if self.passed
                else "CONTRAST NOT REPRODUCED"
            )
        )
        return "\n".join(lines) + "\n"


def contrast_base_config() -> RunConfig:
    """Rotational pulse source in the reference duct with snapshots near
    the end of the run."""
    return RunConfig(
        R=4.0,
        h=1.0,
        nx=160,
        ny=40,
        t_end=2.0,
        snapshot_times=(1.5, 1.75, 2.0),
        M=0.5,
        s=1.0,
        abc="stable",
        source_kind="rotational",
        source_center_x=0.0,
        source_center_y=0.0,
        source_width=0.25,
        source_amplitude=1.0,
        time_profile="gaussian_pulse",
        time_t0=0.5,
        time_sigma=0.1,
    )


def cmd_stability_contrast(
    config_base: RunConfig | None = None, out_dir: str | None = None
) -> ContrastReport:
    """Run the same configuration with s = 1 and s = 0.

    With out_dir given, artifacts land in out_dir/s1 and out_dir/s0 and the
    report text is written alongside them.
    """
    base = config_base if config_base is not None else contrast_base_config()
    results = {}
    for s in (1.0, 0.0):
        cfg = dataclasses.replace(base, s=s)
        sub = os.path.join(out_dir, f"s{int(s)}") if out_dir is not None else None
        results[s] = run_simulation(cfg, out_dir=sub)
    report = ContrastReport(
        regularized=results[1.0],
        unregularized=results[0.0],
        growth_regularized=growth_over_final_decade(results[1.0].records),
        growth_unregularized=growth_over_final_decade(results[0.0].records),
    )
    if out_dir is not None:
        with open(os.path.join(out_dir, "contrast_report.txt"), "w", newline="\n") as f:
            f.write(report.text())
    return report
