"""Eigendecomposition with degeneracy grouping, and gauge alignment of frames.

Frames are ``(n, k)`` arrays whose columns are orthonormal states. Along a
path, consecutive frames are aligned by discrete parallel transport: the new
frame is rotated so its overlap with the previous one is Hermitian positive
definite. For ``k = 1`` this is the rule that the overlap of neighbouring
states be real and positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import polar, schur

from .errors import ClosureError, DegeneracyChangeError, OverlapError
from .model import HamiltonianFamily, ParameterPoint, check_hermitian, eval_hamiltonian
from .paths import ParamPath

TAU_DEG = 1e-8
TAU_OVERLAP = 1e-8


@dataclass(frozen=True)
class EigenFrame:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    point: ParameterPoint | None = None

    def group_of(self, index: int) -> tuple[int, ...]:
        return next(g for g in self.groups if index in g)


def _clusters(evals: np.ndarray, tau_deg: float) -> tuple[tuple[int, ...], ...]:
    scale = tau_deg * max(1.0, float(np.max(np.abs(evals), initial=0.0)))
    groups, current = [], [0]
    for i in range(1, len(evals)):
        if evals[i] - evals[i - 1] < scale:
            current.append(i)
        else:
            groups.append(tuple(current))
            current = [i]
    groups.append(tuple(current))
    return tuple(groups)


def decompose(H, tau_deg: float = TAU_DEG, point: ParameterPoint | None = None) -> EigenFrame:
    """Ascending eigenpairs of a Hermitian matrix, grouped into degenerate clusters.

    Two adjacent eigenvalues share a cluster when they differ by less than
    ``tau_deg * max(1, max|E|)``; clusters are chained, hence maximal.
    """
    H = check_hermitian(H)
    evals, evecs = np.linalg.eigh(H)
    return EigenFrame(evals, evecs, _clusters(evals, tau_deg), point)


def kernel_basis(H, tau_deg: float = TAU_DEG) -> np.ndarray:
    """Orthonormal basis (columns) of the zero-energy eigenspace; may have no columns."""
    frame = decompose(H, tau_deg)
    scale = tau_deg * max(1.0, float(np.max(np.abs(frame.eigenvalues), initial=0.0)))
    mask = np.abs(frame.eigenvalues) < scale
    return frame.eigenvectors[:, mask]


def align_phase(reference, v, tau_overlap: float = TAU_OVERLAP) -> np.ndarray:
    """Multiply ``v`` by the phase that makes ``<reference|v>`` real and positive."""
    reference = np.asarray(reference, dtype=complex)
    v = np.asarray(v, dtype=complex)
    overlap = np.vdot(reference, v)
    if abs(overlap) <= tau_overlap:
        raise OverlapError(
            f"overlap {abs(overlap):.2e} below {tau_overlap:.0e}; path discretization too coarse"
        )
    phase = overlap / abs(overlap)
    # a rounding-level correction is skipped, which makes re-alignment exact
    if abs(phase - 1) <= 8 * np.finfo(float).eps:
        return v
    return v * np.conj(phase)


def subspace_rotation(ref_basis, basis, tau_overlap: float = TAU_OVERLAP) -> np.ndarray:
    """Unitary ``W`` such that ``ref_basis^H (basis @ W)`` is Hermitian positive definite."""
    ref_basis = np.asarray(ref_basis, dtype=complex)
    basis = np.asarray(basis, dtype=complex)
    if ref_basis.shape != basis.shape:
        raise ValueError(f"basis shapes differ: {ref_basis.shape} vs {basis.shape}")
    M = ref_basis.conj().T @ basis
    smin = np.linalg.svd(M, compute_uv=False).min(initial=np.inf)
    if smin <= tau_overlap:
        raise OverlapError(
            f"overlap matrix nearly singular (smallest singular value {smin:.2e}); "
            "subspaces have drifted apart"
        )
    W, _ = polar(M.conj().T)
    return W


def align_subspace(ref_basis, basis, tau_overlap: float = TAU_OVERLAP) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    return basis @ subspace_rotation(ref_basis, basis, tau_overlap)


@dataclass
class FramePath:
    """Gauge-aligned frames along a path.

    ``frames[j]`` is the transported ``(n, k)`` frame at waypoint ``j``.
    ``gauge_log[j]`` is the rotation applied to the raw eigenvectors there.
    For closed paths ``closure = frames[0]^H frames[-1]``.
    """

    frames: np.ndarray
    raw: np.ndarray
    gauge_log: np.ndarray
    eigenvalues: np.ndarray
    closure: np.ndarray | None
    path: ParamPath


def _select(frame: EigenFrame, indices, window, step: int) -> np.ndarray:
    if indices is not None:
        chosen = set(indices)
        for g in frame.groups:
            if chosen & set(g) and not set(g) <= chosen:
                raise DegeneracyChangeError(
                    f"step {step}: selection {sorted(chosen)} splits degenerate cluster {g}", step
                )
        return np.array(sorted(chosen))
    lo, hi = window
    return np.flatnonzero((frame.eigenvalues > lo) & (frame.eigenvalues < hi))


def _transport(raw: np.ndarray, start: np.ndarray, tau_overlap: float):
    frames = np.empty_like(raw)
    log = np.empty((raw.shape[0], raw.shape[2], raw.shape[2]), dtype=complex)
    prev = start
    for j in range(raw.shape[0]):
        W = subspace_rotation(prev, raw[j], tau_overlap)
        frames[j] = raw[j] @ W
        log[j] = W
        prev = frames[j]
    return frames, log


def frame_path(
    family: HamiltonianFamily,
    path: ParamPath,
    *,
    indices=None,
    window=None,
    tau_deg: float = TAU_DEG,
    tau_overlap: float = TAU_OVERLAP,
    initial_basis=None,
) -> FramePath:
    """Eigenframes of one spectral group along ``path``, parallel-transported.

    Select the group either by ascending ``indices`` (e.g. ``(0,)`` for the
    ground state) or by an eigenvalue ``window=(lo, hi)``. ``initial_basis``
    fixes the gauge at the first waypoint; it must span the selected space.
    A change in the group's dimension raises :class:`DegeneracyChangeError`.
    """
    if (indices is None) == (window is None):
        raise ValueError("give exactly one of indices or window")
    raw, evals, k0 = [], [], None
    for j, point in enumerate(path):
        frame = decompose(eval_hamiltonian(family, point), tau_deg, point)
        idx = _select(frame, indices, window, j)
        if k0 is None:
            k0 = len(idx)
            if k0 == 0:
                raise DegeneracyChangeError("selection is empty at the first waypoint", 0)
        elif len(idx) != k0:
            raise DegeneracyChangeError(
                f"step {j}: selected eigenspace dimension changed from {k0} to {len(idx)}", j
            )
        raw.append(frame.eigenvectors[:, idx])
        evals.append(frame.eigenvalues[idx])
    raw = np.array(raw)
    if initial_basis is None:
        start = raw[0]
    else:
        start = np.asarray(initial_basis, dtype=complex)
        start = start[:, None] if start.ndim == 1 else start
        if start.shape != raw[0].shape:
            raise ValueError(f"initial basis has shape {start.shape}, expected {raw[0].shape}")
        if not np.allclose(start.conj().T @ start, np.eye(k0), atol=1e-10):
            raise ValueError("initial basis is not orthonormal")
        P = raw[0] @ raw[0].conj().T
        if np.max(np.abs(P @ start - start)) > 1e-8:
            raise ValueError("initial basis does not span the selected eigenspace")
    frames, log = _transport(raw, start, tau_overlap)
    frames[0] = start
    closure = None
    if path.closed:
        closure = start.conj().T @ frames[-1]
    return FramePath(frames, raw, log, np.array(evals), closure, path)


def closure_from_subsample(fp: FramePath, stride: int = 2, tau_overlap: float = TAU_OVERLAP):
    """Closure unitary recomputed on every ``stride``-th waypoint (for error estimates)."""
    if fp.closure is None:
        raise ClosureError("path is not closed")
    n = fp.raw.shape[0] - 1
    if n % stride:
        raise ValueError(f"{n} steps not divisible by stride {stride}")
    frames, _ = _transport(fp.raw[::stride], fp.frames[0], tau_overlap)
    return fp.frames[0].conj().T @ frames[-1]


def unitary_log(U: np.ndarray, branch_tol: float = 1e-9) -> np.ndarray:
    """Anti-Hermitian logarithm of a unitary with eigenphases in [-pi, pi)."""
    T, V = schur(np.asarray(U, dtype=complex), output="complex")
    theta = np.angle(np.diag(T))
    theta[theta > math.pi - branch_tol] -= 2 * math.pi
    return V @ np.diag(1j * theta) @ V.conj().T


def single_valued_correction(fp: FramePath, param: str):
    """Re-gauge transported frames so they return exactly to the start.

    Frames are multiplied by ``U^(-s)``, with ``U`` the closure unitary and
    ``s`` the fraction of the cyclic ``param`` swept so far. Returns the
    corrected frames and the induced (Hermitian) connection along ``param``,
    ``A = (1/i) X^H dX/dparam``, which is constant on the loop.
    """
    if fp.closure is None:
        raise ClosureError("single-valued correction needs a closed path")
    i = fp.path.names.index(param)
    values = fp.path.points[:, i]
    span = values[-1] - values[0]
    if span == 0:
        raise ClosureError(f"parameter {param!r} does not advance around the loop")
    L = unitary_log(fp.closure)
    s = (values - values[0]) / span
    ew, ev = np.linalg.eigh(1j * L)  # 1j*L is Hermitian
    corrected = np.empty_like(fp.frames)
    for j, sj in enumerate(s):
        Us = ev @ np.diag(np.exp(1j * sj * ew)) @ ev.conj().T  # exp(-s L)
        corrected[j] = fp.frames[j] @ Us
    connection = 1j * L / span
    return corrected, connection
