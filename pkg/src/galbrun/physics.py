"""Sources, Lagrangian vorticity, energy audit, and reference waves.

The displacement equation is driven by f_s = f + s curl psi, where psi is
the Lagrangian vorticity transported by the mean flow. For uniform flow
psi is known in closed form from curl f, so the regularization term never
requires solving an auxiliary PDE.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss

from galbrun.assembly import (
    TRI_QP_BARY,
    assemble_boundary_mass,
    assemble_c,
    assemble_dx_stiffness,
    assemble_gradient_stiffness,
    triangle_quadrature,
)
from galbrun.mesh import DofMap, Mesh


class AbcVariant(str, Enum):
    """Treatment of the artificial boundaries x = +-R."""

    STABLE = "stable"  # damping form plus tangential coupling form
    NAIVE = "naive"    # damping form only; exact for plane waves, unstable for M != 0
    NONE = "none"      # closed box, rigid walls everywhere


class ProfileKind(str, Enum):
    GAUSSIAN_PULSE = "gaussian_pulse"
    RICKER = "ricker"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class TimeProfile:
    """Excitation envelope p(t).

    gaussian_pulse: exp(-(t-t0)^2 / (2 sigma^2))
    ricker:         (1 - ((t-t0)/sigma)^2) * exp(-(t-t0)^2 / (2 sigma^2))
    continuous:     sin(2 pi t / sigma), ramped smoothly over [0, t0]
    """

    kind: ProfileKind = ProfileKind.GAUSSIAN_PULSE
    t0: float = 0.5
    sigma: float = 0.1

    def __call__(self, t: np.ndarray | float) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        if self.kind == ProfileKind.GAUSSIAN_PULSE:
            u = (t - self.t0) / self.sigma
            return np.exp(-0.5 * u * u)
        if self.kind == ProfileKind.RICKER:
            u = (t - self.t0) / self.sigma
            return (1.0 - u * u) * np.exp(-0.5 * u * u)
        ramp = np.clip(t / max(self.t0, 1e-300), 0.0, 1.0)
        ramp = ramp * ramp * (3.0 - 2.0 * ramp)
        return ramp * np.sin(2.0 * np.pi * t / self.sigma)

    def support_window(self) -> tuple[float, float] | None:
        """Interval outside which p is numerically negligible, or None."""
        if self.kind == ProfileKind.CONTINUOUS:
            return None
        return (self.t0 - 9.0 * self.sigma, self.t0 + 9.0 * self.sigma)


class SourceKind(str, Enum):
    ROTATIONAL = "rotational"
    IRROTATIONAL = "irrotational"
    NONE = "none"


@dataclass(frozen=True)
class SourceSpec:
    """Separable volume force f(x, t) = amplitude * g_vec(x) * p(t).

    The spatial part derives from a Gaussian bump
    G = exp(-|x - center|^2 / (2 width^2)):

    rotational:   g_vec = (dG/dy, -dG/dx)   (divergence free)
    irrotational: g_vec = grad G            (curl free)
    """

    kind: SourceKind = SourceKind.ROTATIONAL
    center: tuple[float, float] = (0.0, 0.0)
    width: float = 0.25
    amplitude: float = 1.0
    time_profile: TimeProfile = TimeProfile()


def _bump(spec: SourceSpec, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian bump value and centered offsets at the given points."""
    dx = pts[..., 0] - spec.center[0]
    dy = pts[..., 1] - spec.center[1]
    w2 = spec.width * spec.width
    g = np.exp(-0.5 * (dx * dx + dy * dy) / w2)
    return g, dx, dy


def eval_source(spec: SourceSpec, pts: np.ndarray, t: float) -> np.ndarray:
    """Force vectors at points of shape (..., 2); same leading shape out."""
    out = np.zeros(pts.shape)
    if spec.kind == SourceKind.NONE:
        return out
    g, dx, dy = _bump(spec, pts)
    w2 = spec.width * spec.width
    amp = spec.amplitude * float(spec.time_profile(t)) / w2
    if spec.kind == SourceKind.ROTATIONAL:
        out[..., 0] = -amp * dy * g
        out[..., 1] = amp * dx * g
    else:
        out[..., 0] = -amp * dx * g
        out[..., 1] = -amp * dy * g
    return out


def source_curl_spatial(spec: SourceSpec, pts: np.ndarray) -> np.ndarray:
    """Spatial factor W of curl f = W(x, y) * p(t).

    For the rotational source W = -amplitude * laplacian(G); identically
    zero for irrotational or absent sources.
    """
    if spec.kind != SourceKind.ROTATIONAL:
        return np.zeros(pts.shape[:-1])
    g, dx, dy = _bump(spec, pts)
    w2 = spec.width * spec.width
    r2 = dx * dx + dy * dy
    return spec.amplitude * g * (2.0 / w2 - r2 / (w2 * w2))


def source_curl_spatial_gradient(spec: SourceSpec, pts: np.ndarray) -> np.ndarray:
    """Gradient of W, needed for grad psi under the Duhamel integral."""
    out = np.zeros(pts.shape)
    if spec.kind != SourceKind.ROTATIONAL:
        return out
    g, dx, dy = _bump(spec, pts)
    w2 = spec.width * spec.width
    w4 = w2 * w2
    r2 = dx * dx + dy * dy
    radial = spec.amplitude * g * (r2 / (w4 * w2) - 4.0 / w4)
    out[..., 0] = radial * dx
    out[..., 1] = radial * dy
    return out


def source_curl(spec: SourceSpec, pts: np.ndarray, t: float) -> np.ndarray:
    return source_curl_spatial(spec, pts) * float(spec.time_profile(t))


class CausalVorticity:
    """Vorticity of the solution started from rest, for uniform flow.

    The transported vorticity obeys (d/dt + M d/dx)^2 psi = curl f with
    zero initial data, whose characteristic (Duhamel) solution is

        psi(x, y, t) = int_0^t tau W(x - M tau, y) p(t - tau) dtau

    for a separable curl f = W(x, y) p(t). This equals the general closed
    form alpha + x beta + convected double integral with alpha, beta chosen
    to cancel the state at t = 0 (see analytic_vorticity for that form).
    Evaluation is Gauss-Legendre over the overlap of [0, t] with the
    support window of p, vectorized over points.
    """

    def __init__(self, source: SourceSpec, M: float, n_nodes: int = 48):
        self.source = source
        self.M = float(M)
        self.n_nodes = n_nodes

    def _tau_nodes(self, t: float) -> tuple[np.ndarray, np.ndarray] | None:
        lo, hi = 0.0, t
        win = self.source.time_profile.support_window()
        if win is not None:
            lo = max(lo, t - win[1])
            hi = min(hi, t - win[0])
        if hi <= lo:
            return None
        z, w = leggauss(self.n_nodes)
        tau = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
        return tau, 0.5 * (hi - lo) * w

    def _accumulate(self, pts: np.ndarray, t: float, spatial) -> np.ndarray:
        nodes = self._tau_nodes(t)
        shape = spatial(pts).shape
        acc = np.zeros(shape)
        if nodes is None:
            return acc
        tau, w = nodes
        p = self.source.time_profile(t - tau)
        shifted = np.array(pts, copy=True)
        for tq, wq, pq in zip(tau, w, p):
            shifted[..., 0] = pts[..., 0] - self.M * tq
            acc += (wq * tq * pq) * spatial(shifted)
        return acc

    def __call__(self, pts: np.ndarray, t: float) -> np.ndarray:
        return self._accumulate(pts, t, lambda q: source_curl_spatial(self.source, q))

    def gradient(self, pts: np.ndarray, t: float) -> np.ndarray:
        return self._accumulate(
            pts, t, lambda q: source_curl_spatial_gradient(self.source, q)
        )


class AnalyticVorticity:
    """General closed-form vorticity for uniform flow.

    For M != 0:

        psi(x, y, t) = alpha(x - M t, y) + x beta(x - M t, y)
                       + (1/M^2) int_0^x (x - a) curl_f(a, y, t - (x - a)/M) da

    and in the degenerate M = 0 limit the convected integral becomes the
    repeated time integral int_0^t int_0^t' curl_f(x, y, t'') dt'' dt',
    evaluated here in its equivalent single-integral form
    int_0^t (t - t') curl_f(x, y, t') dt'.

    alpha and beta are caller-supplied functions of (x0, y); both default
    to zero. curl_f is any callable (x, y, t) -> scalar. Quadrature is
    adaptive to rel_tol (scipy.integrate.quad), scalar evaluation.
    """

    def __init__(
        self,
        curl_f: Callable[[float, float, float], float],
        M: float,
        alpha: Callable[[float, float], float] | None = None,
        beta: Callable[[float, float], float] | None = None,
        rel_tol: float = 1e-10,
    ):
        self.curl_f = curl_f
        self.M = float(M)
        self.alpha = alpha
        self.beta = beta
        self.rel_tol = rel_tol

    def _homogeneous(self, x: float, y: float, t: float) -> float:
        x0 = x - self.M * t
        val = 0.0
        if self.alpha is not None:
            val += self.alpha(x0, y)
        if self.beta is not None:
            val += x * self.beta(x0, y)
        return val

    def value(self, x: float, y: float, t: float) -> float:
        from scipy.integrate import quad

        if self.M == 0.0:
            part, _ = quad(
                lambda tp: (t - tp) * self.curl_f(x, y, tp),
                0.0,
                t,
                epsabs=self.rel_tol,
                epsrel=self.rel_tol,
                limit=200,
            )
        else:
            m2 = self.M * self.M

            def integrand(a: float) -> float:
                return (x - a) * self.curl_f(a, y, t - (x - a) / self.M)

            part, _ = quad(
                integrand, 0.0, x, epsabs=self.rel_tol, epsrel=self.rel_tol, limit=200
            )
            part /= m2
        return self._homogeneous(x, y, t) + part

    def __call__(self, pts: np.ndarray, t: float) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        vals = np.array([self.value(p[0], p[1], t) for p in flat])
        return vals.reshape(pts.shape[:-1])


def analytic_vorticity(
    curl_f: Callable[[float, float, float], float],
    M: float,
    alpha: Callable[[float, float], float] | None = None,
    beta: Callable[[float, float], float] | None = None,
    rel_tol: float = 1e-10,
) -> AnalyticVorticity:
    """Closed-form transported vorticity; see AnalyticVorticity."""
    return AnalyticVorticity(curl_f, M, alpha=alpha, beta=beta, rel_tol=rel_tol)


class RhsAssembler:
    """Per-step load vector F(t) of the regularized right-hand side.

    F_i(t) = int (f + s curl psi) . phi_i, with curl of the scalar psi
    taken as (dpsi/dy, -dpsi/dx). Quadrature tables and scatter indices are
    precomputed once; each call costs one source sweep over the quadrature
    points (plus one vorticity sweep when s curl psi is active).
    """

    def __init__(
        self,
        mesh: Mesh,
        dofs: DofMap,
        source: SourceSpec | None,
        s: float,
        vorticity=None,
        forcing: Callable[[np.ndarray, float], np.ndarray] | None = None,
    ):
        self.source = source
        self.s = float(s)
        self.vorticity = vorticity
        self.forcing = forcing
        self.qp, self.qw = triangle_quadrature(mesh)
        self.node_dofs = dofs.node_dofs[mesh.triangles]  # (m, 3, 2)
        self.n_dofs = dofs.n_dofs

    @property
    def is_zero(self) -> bool:
        return self.source is None and self.forcing is None and self.vorticity is None

    def _force_at_quadrature(self, t: float) -> np.ndarray:
        f = np.zeros(self.qp.shape)
        if self.source is not None:
            f += eval_source(self.source, self.qp, t)
        if self.forcing is not None:
            f += self.forcing(self.qp, t)
        if self.vorticity is not None and self.s != 0.0:
            gpsi = self.vorticity.gradient(self.qp, t)
            f[..., 0] += self.s * gpsi[..., 1]
            f[..., 1] -= self.s * gpsi[..., 0]
        return f

    def __call__(self, t: float) -> np.ndarray:
        F = np.zeros(self.n_dofs)
        if self.is_zero:
            return F
        f = self._force_at_quadrature(t)
        for comp in range(2):
            vals = np.einsum("mq,qk->mk", self.qw * f[..., comp], TRI_QP_BARY)
            idx = self.node_dofs[..., comp]
            keep = idx >= 0
            np.add.at(F, idx[keep], vals[keep])
        return F


def regularized_rhs(
    mesh: Mesh,
    dofs: DofMap,
    source: SourceSpec | None,
    s: float,
    t: float,
    vorticity=None,
) -> np.ndarray:
    """One-shot load vector; see RhsAssembler for the cached variant."""
    return RhsAssembler(mesh, dofs, source, s, vorticity=vorticity)(t)


def make_energy_stiffness(mesh: Mesh, dofs: DofMap, M: float) -> sp.csr_matrix:
    """Matrix of the energy gradient term int |grad xi|^2 - M^2 |dxi/dx|^2.

    Assembled independently of the system stiffness; on the constrained
    space it coincides with Ah + Dh at s = 1 (a discrete integration by
    parts identity), which the test suite checks rather than assumes.
    """
    return (
        assemble_gradient_stiffness(mesh, dofs)
        - M * M * assemble_dx_stiffness(mesh, dofs)
    ).tocsr()


def energy(
    xi_prev: np.ndarray,
    xi_curr: np.ndarray,
    dt: float,
    Mh: sp.spmatrix,
    Ke: sp.spmatrix,
) -> float:
    """Discrete energy of a consecutive state pair.

    E = 1/2 [ d^T Mh d + xi_curr^T Ke xi_prev ], d = (xi_curr - xi_prev)/dt.

    The staggered gradient product makes the sequence exactly
    non-increasing under the leapfrog scheme with absorbing boundaries and
    exactly conserved for the closed box at M = 0 (up to roundoff). Can dip
    below zero only by a CFL-margin epsilon. Overflows to inf (silently,
    callers check finiteness) while a blown-up run is being detected.
    """
    d = (xi_curr - xi_prev) / dt
    with np.errstate(over="ignore", invalid="ignore"):
        return 0.5 * float(d @ (Mh @ d) + xi_curr @ (Ke @ xi_prev))


def boundary_flux(
    xi_prev: np.ndarray, xi_curr: np.ndarray, dt: float, flux_mass: sp.spmatrix
) -> float:
    """Outflow rate int_Gamma |dxi/dt|^2 with the same backward difference
    as energy()."""
    d = (xi_curr - xi_prev) / dt
    with np.errstate(over="ignore", invalid="ignore"):
        return float(d @ (flux_mass @ d))


def naive_abc_forms(
    mesh: Mesh, dofs: DofMap, M: float
) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Boundary operators of the classical characteristic-style condition.

    Substituting that condition into the natural boundary terms eliminates
    every tangential derivative, leaving the same damping form as the
    stable variant and no tangential coupling at all: (Ch, 0). The missing
    coupling is exactly what makes the discrete operator indefinite for
    M != 0, hence the instability this variant is used to demonstrate.
    """
    n = dofs.n_dofs
    return assemble_c(mesh, dofs, M), sp.csr_matrix((n, n))


def well_posedness_margin(M: float, s: float) -> float:
    """min(1, s) - M^2; positive is the sufficient well-posedness regime."""
    return min(1.0, s) - M * M


class Direction(str, Enum):
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class PlaneWave:
    """Exact y-independent solution xi = F(x - c t) (v_x, 0).

    Downstream propagation travels at c = 1 + M, upstream at c = -(1 - M).
    Both satisfy the volume equation for any s (curl-free, y-independent)
    and pass through the matching absorbing boundary without reflection.
    """

    speed: float
    profile: Callable[[np.ndarray], np.ndarray]
    dprofile: Callable[[np.ndarray], np.ndarray]
    polarization: float = 1.0

    def xi(self, pts: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros(pts.shape)
        out[..., 0] = self.polarization * self.profile(pts[..., 0] - self.speed * t)
        return out

    def xi_t(self, pts: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros(pts.shape)
        out[..., 0] = (
            -self.speed
            * self.polarization
            * self.dprofile(pts[..., 0] - self.speed * t)
        )
        return out

    def xi_x(self, pts: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros(pts.shape)
        out[..., 0] = self.polarization * self.dprofile(pts[..., 0] - self.speed * t)
        return out


def gaussian_profile(
    center: float, width: float, amplitude: float = 1.0
) -> tuple[Callable, Callable]:
    """Pulse shape F and its derivative for plane-wave initial data."""

    def F(z: np.ndarray) -> np.ndarray:
        return amplitude * np.exp(-0.5 * ((z - center) / width) ** 2)

    def dF(z: np.ndarray) -> np.ndarray:
        return -((z - center) / width**2) * F(z)

    return F, dF


def plane_wave(
    direction: Direction | str,
    M: float,
    profile: Callable[[np.ndarray], np.ndarray],
    dprofile: Callable[[np.ndarray], np.ndarray],
    polarization: float = 1.0,
) -> PlaneWave:
    """Reference wave for absorbing-boundary calibration."""
    if Direction(direction) == Direction.RIGHT:
        speed = 1.0 + M
    else:
        speed = -(1.0 - M)
    return PlaneWave(
        speed=speed, profile=profile, dprofile=dprofile, polarization=polarization
    )
