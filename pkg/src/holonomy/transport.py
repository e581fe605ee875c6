"""Line and surface integrals, Wilson loops, transport holonomies and phase bookkeeping.

Ordered products compose later path segments on the LEFT, so the result acts
on coefficient vectors expressed in the frame at the loop's base point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid, simpson, trapezoid

from .connection import FIELD_STEP, curvature_abelian, gauge_transform_abelian
from .errors import ClosureError, NormDriftError, NumericalError, SchemaError
from .model import HamiltonianFamily, ParameterPoint, is_unitary
from .paths import ParamPath, SurfacePatch
from .spectral import TAU_DEG, TAU_OVERLAP, closure_from_subsample, frame_path

SIGNS = {"+i": 1.0, "-i": -1.0}


class SingularityError(NumericalError):
    """A path comes too close to a declared singular locus of a field."""


@dataclass(frozen=True)
class AbelianField:
    """Real covector field with an optional singular locus.

    ``distance(point)`` returns the distance to the singular set; paths must
    keep at least ``margin`` away from it.
    """

    func: Callable[[ParameterPoint], np.ndarray]
    name: str = ""
    distance: Callable[[ParameterPoint], float] | None = None
    margin: float = 1e-6

    def __call__(self, point: ParameterPoint) -> np.ndarray:
        return np.asarray(self.func(point), dtype=float)


@dataclass
class HolonomyResult:
    unitary: np.ndarray
    steps: int
    error_estimate: float | None = None
    method: str = ""
    winding: int | None = None

    @property
    def phase(self) -> float | None:
        """Phase in (-pi, pi] for one-dimensional holonomies, else ``None``."""
        if self.unitary.shape != (1, 1):
            return None
        return float(np.angle(self.unitary[0, 0]))

    @property
    def eigenphases(self) -> np.ndarray:
        return np.sort(np.angle(np.linalg.eigvals(self.unitary)))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norm_drift: float


@dataclass
class PhaseDecomposition:
    """``total = dynamical - geometric`` (all radians).

    ``removed`` is the trajectory with the dynamical phase divided out and
    ``removed_dynamical`` its (ideally vanishing) dynamical phase.
    ``adiabatic_geometric`` is ``-int E_ref dt - total`` with ``E_ref`` the
    energy of the reference state: the Berry-phase estimate whose leading
    non-adiabatic error is half that of ``geometric`` for a uniform loop.
    ``leakage`` is the largest population found outside the reference state.
    """

    total: float
    dynamical: float
    geometric: float
    removed: np.ndarray
    removed_dynamical: float
    leakage: float
    adiabatic_geometric: float

    @property
    def residual(self) -> float:
        return self.total - (self.dynamical - self.geometric)


# -- Abelian integrals ------------------------------------------------------


def _check_margin(field: AbelianField, points: np.ndarray, names) -> None:
    if field.distance is None:
        return
    for k, row in enumerate(points):
        d = field.distance(ParameterPoint.from_array(names, row))
        if d < field.margin:
            raise SingularityError(
                f"path point {k} at distance {d:.3g} from the singular locus of {field.name or 'field'}"
            )


def line_integral_abelian(field: AbelianField, path: ParamPath, charge: float = 1.0) -> float:
    """``charge * sum_k a(mid_k) . dx_k`` along the path (midpoint rule)."""
    mids, dx = path.segments()
    _check_margin(field, path.points, path.names)
    _check_margin(field, mids, path.names)
    total = 0.0
    for m, d in zip(mids, dx):
        total += float(np.dot(field(ParameterPoint.from_array(path.names, m)), d))
    return charge * total


def surface_integral_abelian(curvature: Callable[[ParameterPoint], float], patch: SurfacePatch) -> float:
    """Two-dimensional midpoint rule for ``int int f dp1 dp2`` over the patch."""
    points, area = patch.midpoints()
    return float(sum(curvature(p) for p in points) * area)


def stokes_density(field, mu: str, nu: str, h: float = FIELD_STEP):
    """Scalar ``f_{nu mu}``, whose integral over a patch in the ``(mu, nu)`` plane
    equals the line integral around its counterclockwise boundary."""
    return lambda point: curvature_abelian(field, point, nu, mu, h)


def ab_solenoid_field(
    flux: float,
    alpha: Callable[[ParameterPoint], float] | None = None,
    names: tuple[str, str] = ("x", "y"),
    h: float = FIELD_STEP,
    margin: float = 1e-6,
) -> AbelianField:
    """Vector potential of an infinitely thin solenoid carrying ``flux`` at the origin.

    ``a = flux / (2 pi r) phi_hat``, curl-free for ``r > 0``. With ``alpha``
    the field is gauge-shifted by its (finite-difference) gradient.
    """
    if not math.isfinite(flux):
        raise ValueError("flux must be finite")
    x_name, y_name = names

    def azimuthal(point: ParameterPoint) -> np.ndarray:
        x, y = point[x_name], point[y_name]
        r2 = x * x + y * y
        out = np.zeros(len(point.names))
        if flux != 0.0:
            out[point.index(x_name)] = -flux * y / (2 * math.pi * r2)
            out[point.index(y_name)] = flux * x / (2 * math.pi * r2)
        return out

    func = azimuthal if alpha is None else gauge_transform_abelian(azimuthal, alpha, h)
    return AbelianField(
        func,
        name=f"solenoid(flux={flux})",
        distance=lambda p: math.hypot(p[x_name], p[y_name]),
        margin=margin,
    )


# -- non-Abelian holonomies ---------------------------------------------------


def _ordered_product(generators: np.ndarray, coeff: float) -> np.ndarray:
    """``prod_k exp(i * coeff * G_k)`` for Hermitian ``G_k``, later factors on the left."""
    w, V = np.linalg.eigh(generators)
    factors = (V * np.exp(1j * coeff * w)[:, None, :]) @ V.conj().transpose(0, 2, 1)
    U = np.eye(generators.shape[-1], dtype=complex)
    for F in factors:
        U = F @ U
    return U


def _generators(field, path: ParamPath) -> np.ndarray:
    mids, dx = path.segments()
    gens = []
    shape = None
    for k, (m, d) in enumerate(zip(mids, dx)):
        A = np.asarray(field(ParameterPoint.from_array(path.names, m)), dtype=complex)
        if A.ndim == 1:  # Abelian field: one scalar per direction
            A = A[:, None, None]
        if shape is None:
            shape = A.shape
        elif A.shape != shape:
            raise NumericalError(f"field dimension changed at segment {k}: {A.shape} vs {shape}")
        G = np.tensordot(d, A, axes=(0, 0))
        gens.append(0.5 * (G + G.conj().T))
    return np.array(gens)


def path_ordered_exp(
    field,
    loop: ParamPath,
    g: float = 1.0,
    sign: str = "-i",
    steps: int | None = None,
    estimate_error: bool = True,
) -> HolonomyResult:
    """Wilson loop ``P exp(sign * i * g * oint A_mu dx^mu)`` by the midpoint ordered product.

    ``field`` returns Hermitian connection matrices ``(d, k, k)`` (or a real
    covector for an Abelian field). ``steps`` resamples the loop. The error
    estimate compares against the same product at half the step count.
    """
    if not loop.closed:
        raise ClosureError("path_ordered_exp needs a closed loop")
    if sign not in SIGNS:
        raise ValueError(f"sign must be one of {sorted(SIGNS)}")
    if steps is not None and steps != loop.steps:
        loop = loop.resampled(steps)
    coeff = SIGNS[sign] * g
    U = _ordered_product(_generators(field, loop), coeff)
    err = None
    if estimate_error and loop.steps >= 4:
        try:
            half = loop.resampled(loop.steps // 2)
        except SchemaError:  # too few steps to keep every polyline corner
            half = None
        if half is not None:
            U_half = _ordered_product(_generators(field, half), coeff)
            err = float(np.max(np.abs(U - U_half))) / 3.0
    if not is_unitary(U, 1e-8):
        raise NumericalError("ordered product lost unitarity")
    return HolonomyResult(U, loop.steps, err, method=f"path-ordered exp ({sign})", winding=loop.winding())


def holonomy_by_transport(
    family: HamiltonianFamily,
    loop: ParamPath,
    *,
    indices=None,
    window=None,
    steps: int | None = None,
    tau_deg: float = TAU_DEG,
    tau_overlap: float = TAU_OVERLAP,
    initial_basis=None,
    estimate_error: bool = True,
) -> HolonomyResult:
    """Closure unitary of the parallel-transported eigenframe around ``loop``.

    Entry ``[a, b]`` is ``<start_a | transported_b(end)>``; the basis at the
    base point is ``initial_basis`` if given, else the eigensolver's.
    """
    if not loop.closed:
        raise ClosureError("holonomy_by_transport needs a closed loop")
    if steps is not None and steps != loop.steps:
        loop = loop.resampled(steps)
    fp = frame_path(
        family,
        loop,
        indices=indices,
        window=window,
        tau_deg=tau_deg,
        tau_overlap=tau_overlap,
        initial_basis=initial_basis,
    )
    err = None
    if estimate_error and loop.steps % 2 == 0 and loop.steps >= 4:
        err = float(np.max(np.abs(fp.closure - closure_from_subsample(fp, 2, tau_overlap)))) / 3.0
    return HolonomyResult(fp.closure, loop.steps, err, method="transport", winding=loop.winding())


# -- dynamics -------------------------------------------------------------------


def schrodinger_evolve(
    hamiltonian: Callable[[float], np.ndarray],
    psi0,
    T: float,
    steps: int,
    max_drift: float = 1e-6,
) -> Trajectory:
    """Integrate ``d psi/dt = -i H(t) psi`` with classical fixed-step RK4."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    psi = np.asarray(psi0, dtype=complex).copy()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")
    dt = T / steps
    times = np.linspace(0.0, T, steps + 1)
    states = np.empty((steps + 1, psi.size), dtype=complex)
    states[0] = psi

    def rhs(t, v):
        return -1j * (np.asarray(hamiltonian(t)) @ v)

    for k in range(steps):
        t = times[k]
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        states[k + 1] = psi
    drift = float(np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)))
    if drift > max_drift:
        raise NormDriftError(f"norm drift {drift:.2e} exceeds {max_drift:.0e}; increase steps")
    return Trajectory(times, states, drift)


def _energy(hamiltonian, times, states) -> np.ndarray:
    return np.array(
        [np.vdot(s, np.asarray(hamiltonian(t)) @ s).real for t, s in zip(times, states)]
    )


def _pancharatnam_sum(states: np.ndarray) -> float:
    """``sum_k arg <s_k | s_k+1>``: the discretized ``(1/i) oint <s|ds>``."""
    overlaps = np.einsum("ki,ki->k", states[:-1].conj(), states[1:])
    return float(np.sum(np.angle(overlaps)))


def phase_decomposition(
    trajectory: Trajectory,
    hamiltonian: Callable[[float], np.ndarray],
    reference: Callable[[float], np.ndarray],
    closure_tol: float = 1e-8,
) -> PhaseDecomposition:
    """Split the phase acquired along a trajectory into dynamical and geometric parts.

    ``reference(t)`` is a single-valued state that fixes the phase convention:
    ``psi(t) = chi(t) exp(i lambda(t))`` with ``<reference|chi>`` real and
    positive. Then ``total = lambda(T) - lambda(0)``, ``dynamical =
    -int <psi|H|psi> dt`` and ``geometric = (1/i) oint <chi|d chi>``.
    """
    times, states = trajectory.times, trajectory.states
    refs = np.array([np.asarray(reference(t), dtype=complex) for t in times])
    gap = float(np.max(np.abs(refs[-1] - refs[0])))
    if gap > closure_tol:
        raise ClosureError(f"reference frame is not single-valued (closure mismatch {gap:.2e})")
    overlaps = np.einsum("ki,ki->k", refs.conj(), states)
    lam = np.unwrap(np.angle(overlaps))
    chi = states * np.exp(-1j * lam)[:, None]
    energy = _energy(hamiltonian, times, states)
    ref_energy = _energy(hamiltonian, times, refs)
    if len(times) >= 3:
        dynamical = -float(simpson(energy, x=times))
        ref_dynamical = -float(simpson(ref_energy, x=times))
        accumulated = cumulative_simpson(energy, x=times, initial=0.0)
    else:
        dynamical = -float(trapezoid(energy, x=times))
        ref_dynamical = -float(trapezoid(ref_energy, x=times))
        accumulated = cumulative_trapezoid(energy, x=times, initial=0.0)
    removed = states * np.exp(1j * accumulated)[:, None]
    total = float(lam[-1] - lam[0])
    return PhaseDecomposition(
        total=total,
        dynamical=dynamical,
        geometric=_pancharatnam_sum(chi),
        removed=removed,
        removed_dynamical=_pancharatnam_sum(removed),
        leakage=float(np.max(1.0 - np.abs(overlaps) ** 2)),
        adiabatic_geometric=ref_dynamical - total,
    )
