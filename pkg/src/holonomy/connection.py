"""Berry and Wilczek-Zee connections, curvatures and gauge transformations.

Two conventions for connections coexist and both are exposed:

* ``raw``:        ``A[a, b] = <psi_a | d psi_b>``, anti-Hermitian;
* ``hermitian``:  ``(1/i) <psi_a | d psi_b>``, Hermitian (real for one state).

Path-ordered exponentials (see :mod:`holonomy.transport`) take the Hermitian
form. Curvatures follow ``f_{mu nu} = d_nu a_mu - d_mu a_nu`` (plus
``+ i g [A_mu, A_nu]`` in the non-Abelian case), which is the negative of the
usual electromagnetic sign.

Fields are callables ``point -> array``: shape ``(d,)`` for Abelian fields,
``(d, k, k)`` for matrix fields, with ``d`` running over ``point.names``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DegenerateStateError
from .model import FrameField, HamiltonianFamily, ParameterPoint, eval_hamiltonian, is_unitary
from .spectral import TAU_DEG, decompose, subspace_rotation

FIELD_STEP = 1e-4
FRAME_STEP = 1e-6

AbelianField = Callable[[ParameterPoint], np.ndarray]
MatrixField = Callable[[ParameterPoint], np.ndarray]


def _check_orthonormal(frame: np.ndarray, tol: float = 1e-10) -> None:
    gram = frame.conj().T @ frame
    if np.max(np.abs(gram - np.eye(frame.shape[1]))) > tol:
        raise ValueError("frame columns are not orthonormal")


def _check_eigenspace(family: HamiltonianFamily, point, frame, tau_deg: float) -> tuple[int, ...]:
    H = eval_hamiltonian(family, point)
    decomp = decompose(H, tau_deg)
    E = np.real(np.diag(frame.conj().T @ H @ frame))
    resid = H @ frame - frame * E
    scale = max(1.0, np.linalg.norm(H, 2))
    if np.max(np.abs(resid)) > 1e-8 * scale:
        raise ValueError("frame does not span an eigenspace of the Hamiltonian")
    members = {int(np.argmin(np.abs(decomp.eigenvalues - e))) for e in E}
    return decomp.group_of(min(members))


def wz_connection(
    frame: FrameField,
    point: ParameterPoint,
    direction: str,
    *,
    family: HamiltonianFamily | None = None,
    method: str = "auto",
    h: float = FRAME_STEP,
    form: str = "raw",
    tau_deg: float = TAU_DEG,
) -> np.ndarray:
    """Matrix connection ``<psi_a | d/d(direction) psi_b>`` in the frame's own gauge.

    With ``family`` given the frame is also checked to span an eigenspace.
    """
    basis = frame(point)
    _check_orthonormal(basis)
    if family is not None:
        _check_eigenspace(family, point, basis, tau_deg)
    A = basis.conj().T @ frame.diff(point, direction, h=h, method=method)
    if form == "raw":
        return A
    if form == "hermitian":
        return -1j * A
    raise ValueError(f"unknown form {form!r}")


def berry_connection(
    frame: FrameField,
    point: ParameterPoint,
    direction: str,
    *,
    family: HamiltonianFamily | None = None,
    method: str = "finite-diff",
    h: float = FRAME_STEP,
    tau_deg: float = TAU_DEG,
) -> float:
    """Abelian connection ``(1/i) <psi | d psi>`` of a single state.

    ``method="analytic"`` uses the frame's closed-form derivative. When
    ``family`` is supplied, a state from a degenerate cluster is rejected.
    """
    basis = frame(point)
    if basis.shape[1] != 1:
        raise DegenerateStateError("berry_connection takes one state; use wz_connection")
    if family is not None:
        group = _check_eigenspace(family, point, basis, tau_deg)
        if len(group) > 1:
            raise DegenerateStateError(
                f"state lies in a degenerate cluster of size {len(group)}; use wz_connection"
            )
    value = wz_connection(frame, point, direction, method=method, h=h, form="hermitian")[0, 0]
    return float(value.real)


def connection_field(frame: FrameField, *, form: str = "hermitian", h: float = FRAME_STEP, method="auto"):
    """Matrix field ``point -> (d, k, k)`` built from a frame field."""

    def field(point: ParameterPoint) -> np.ndarray:
        return np.array(
            [wz_connection(frame, point, name, form=form, h=h, method=method) for name in point.names]
        )

    return field


def _partial(field, point: ParameterPoint, name: str, h: float) -> np.ndarray:
    plus = np.asarray(field(point.shifted(name, h)))
    minus = np.asarray(field(point.shifted(name, -h)))
    if plus.shape != minus.shape:
        raise ValueError(f"field dimension changes between neighbouring points along {name!r}")
    return (plus - minus) / (2 * h)


def curvature_abelian(field: AbelianField, point: ParameterPoint, mu: str, nu: str, h: float = FIELD_STEP) -> float:
    """``f_{mu nu} = d_nu a_mu - d_mu a_nu`` by central differences."""
    i, j = point.index(mu), point.index(nu)
    if i == j:
        return 0.0
    d_nu = _partial(field, point, nu, h)
    d_mu = _partial(field, point, mu, h)
    return float(d_nu[i] - d_mu[j])


def curvature_nonabelian(
    field: MatrixField, point: ParameterPoint, mu: str, nu: str, g: float = 1.0, h: float = FIELD_STEP
) -> np.ndarray:
    """``F_{mu nu} = d_nu A_mu - d_mu A_nu + i g [A_mu, A_nu]``."""
    A = np.asarray(field(point))
    i, j = point.index(mu), point.index(nu)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ValueError(f"matrix field must return shape (d, k, k), got {A.shape}")
    d_nu = _partial(field, point, nu, h)
    d_mu = _partial(field, point, mu, h)
    if d_nu.shape != A.shape or d_mu.shape != A.shape:
        raise ValueError("field dimension changes between neighbouring points")
    Am, An = A[i], A[j]
    return d_nu[i] - d_mu[j] + 1j * g * (Am @ An - An @ Am)


def gauge_transform_abelian(field: AbelianField, alpha: Callable[[ParameterPoint], float], h: float = FIELD_STEP):
    """``a'_mu = a_mu + d_mu alpha`` with a central-difference gradient of ``alpha``."""

    def transformed(point: ParameterPoint) -> np.ndarray:
        grad = np.array([(alpha(point.shifted(n, h)) - alpha(point.shifted(n, -h))) / (2 * h) for n in point.names])
        return np.asarray(field(point), dtype=float) + grad

    return transformed


def gauge_transform_nonabelian(
    field: MatrixField,
    S: Callable[[ParameterPoint], np.ndarray],
    g: float = 1.0,
    h: float = FIELD_STEP,
    unitary_tol: float = 1e-10,
):
    """``A'_mu = S A_mu S^-1 - (i/g) (d_mu S) S^-1``.

    Every sample of ``S`` (including the finite-difference neighbours) must
    be unitary; ``S^-1`` is taken as ``S^H``.
    """

    def sample(point):
        s = np.asarray(S(point), dtype=complex)
        if not is_unitary(s, unitary_tol):
            raise ValueError(f"gauge matrix is not unitary at {point.as_dict()}")
        return s

    def transformed(point: ParameterPoint) -> np.ndarray:
        s = sample(point)
        s_inv = s.conj().T
        A = np.asarray(field(point), dtype=complex)
        out = np.empty_like(A)
        for k, name in enumerate(point.names):
            dS = (sample(point.shifted(name, h)) - sample(point.shifted(name, -h))) / (2 * h)
            out[k] = s @ A[k] @ s_inv - (1j / g) * dS @ s_inv
        return out

    return transformed


def curvature_covariance_check(
    field: MatrixField,
    S: Callable[[ParameterPoint], np.ndarray],
    point: ParameterPoint,
    mu: str,
    nu: str,
    g: float = 1.0,
    h: float = FIELD_STEP,
) -> float:
    """``|| F'_{mu nu} - S F_{mu nu} S^-1 ||`` (spectral norm) after a gauge transform."""
    F = curvature_nonabelian(field, point, mu, nu, g, h)
    F_prime = curvature_nonabelian(gauge_transform_nonabelian(field, S, g, h), point, mu, nu, g, h)
    s = np.asarray(S(point), dtype=complex)
    return float(np.linalg.norm(F_prime - s @ F @ s.conj().T, 2))


def eigen_frame_field(
    family: HamiltonianFamily,
    anchor: ParameterPoint,
    *,
    indices=None,
    window=None,
    gauge_reference=None,
    tau_deg: float = TAU_DEG,
) -> FrameField:
    """Smooth local frame field from numerical eigenvectors.

    The selected eigenvectors are rotated so that their overlap with the
    fixed ``(n, k)`` matrix ``gauge_reference`` is Hermitian positive
    definite, removing the eigensolver's arbitrary phase and mixing choices.
    The default reference is the eigenframe at ``anchor`` itself, which is
    the parallel-transport gauge there: the connection vanishes at
    ``anchor`` but not at neighbouring points, so curvatures still come out
    right. Valid where the selected group stays isolated.
    """
    if (indices is None) == (window is None):
        raise ValueError("give exactly one of indices or window")

    def select(point):
        frame = decompose(eval_hamiltonian(family, point), tau_deg)
        if indices is not None:
            idx = list(indices)
        else:
            lo, hi = window
            idx = np.flatnonzero((frame.eigenvalues > lo) & (frame.eigenvalues < hi))
        return frame.eigenvectors[:, idx]

    ref = select(anchor)
    if ref.shape[1] == 0:
        raise ValueError("selection is empty at the anchor point")
    if gauge_reference is not None:
        gauge_reference = np.asarray(gauge_reference, dtype=complex)
        gauge_reference = gauge_reference[:, None] if gauge_reference.ndim == 1 else gauge_reference
        if gauge_reference.shape != ref.shape:
            raise ValueError(f"gauge reference has shape {gauge_reference.shape}, expected {ref.shape}")
        ref = gauge_reference

    def basis(point):
        raw = select(point)
        if raw.shape != ref.shape:
            raise ValueError("selected eigenspace changes dimension near the anchor")
        return raw @ subspace_rotation(ref, raw)

    return FrameField(basis, name=f"{family.name} eigenframe")


def infinitesimal_gauge_transform(
    field: MatrixField, Lambda: Callable[[ParameterPoint], np.ndarray], g: float = 1.0, h: float = FIELD_STEP
):
    """First-order gauge change ``A_mu + d_mu Lambda + i g [Lambda, A_mu]``.

    This is the linearization of :func:`gauge_transform_nonabelian` for
    ``S = exp(i g Lambda)`` with Hermitian ``Lambda``.
    """

    def transformed(point: ParameterPoint) -> np.ndarray:
        A = np.asarray(field(point), dtype=complex)
        L = np.asarray(Lambda(point), dtype=complex)
        out = np.empty_like(A)
        for k, name in enumerate(point.names):
            dL = (np.asarray(Lambda(point.shifted(name, h))) - np.asarray(Lambda(point.shifted(name, -h)))) / (2 * h)
            out[k] = A[k] + dL + 1j * g * (L @ A[k] - A[k] @ L)
        return out

    return transformed
