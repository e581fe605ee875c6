"""Parametrized Hamiltonian families, dark states and the gate library.

Natural units (hbar = c = 1) throughout. Angles are in radians.

Built-in families
-----------------
``two_level``
    ``H(r, phi) = r [[cos phi, sin phi], [sin phi, -cos phi]]``.
``dark_5p1_full``
    Six-level system: one excited level ``|e>`` (energy ``epsilon``, index 0)
    coupled to five ground levels ``|g_k>`` (indices 1..5) through couplings
    ``Omega_k`` written in spherical coordinates of modulus ``omega``.
``dark_5p1_restricted``
    The same with ``theta1 = theta2 = phi2..phi5 = 0``; only ``theta3`` and
    ``theta4`` vary. Its four zero-energy (dark) states are known in closed
    form, see :func:`dark_states`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NonHermitianError, SchemaError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ParameterPoint:
    """Named coordinates of a point in parameter space."""

    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.names) != len(self.values):
            raise SchemaError("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"duplicate parameter names in {self.names}")
        bad = [n for n, v in zip(self.names, self.values) if not math.isfinite(v)]
        if bad:
            raise SchemaError(f"non-finite coordinates: {', '.join(bad)}")

    @classmethod
    def of(cls, **coords: float) -> "ParameterPoint":
        return cls(tuple(coords), tuple(coords.values()))

    @classmethod
    def from_array(cls, names: Sequence[str], values) -> "ParameterPoint":
        return cls(tuple(names), tuple(np.asarray(values, dtype=float).tolist()))

    def __getitem__(self, name: str) -> float:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown parameter {name!r}; have {list(self.names)}") from None

    def replace(self, **coords: float) -> "ParameterPoint":
        values = list(self.values)
        for name, value in coords.items():
            values[self.index(name)] = value
        return ParameterPoint(self.names, tuple(values))

    def shifted(self, name: str, delta: float) -> "ParameterPoint":
        return self.replace(**{name: self[name] + delta})

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


def is_hermitian(matrix, rtol: float = 1e-12) -> bool:
    matrix = np.asarray(matrix)
    scale = np.max(np.abs(matrix), initial=0.0)
    return bool(np.max(np.abs(matrix - matrix.conj().T), initial=0.0) <= rtol * scale)


def is_unitary(matrix, tol: float = 1e-10) -> bool:
    matrix = np.asarray(matrix)
    eye = np.eye(matrix.shape[0])
    return bool(np.max(np.abs(matrix.conj().T @ matrix - eye)) <= tol)


@dataclass(frozen=True)
class HamiltonianFamily:
    """A named map from parameter points to Hermitian matrices.

    ``evaluator`` receives a dict of coordinates keyed by parameter name.
    ``derivatives`` optionally maps a parameter name to an analytic
    ``dH/dparam`` evaluator with the same signature. ``periods`` marks
    parameters on which ``H`` is periodic (used for loop closure).
    """

    name: str
    dim: int
    params: tuple[str, ...]
    evaluator: Callable[[Mapping[str, float]], np.ndarray]
    derivatives: Mapping[str, Callable[[Mapping[str, float]], np.ndarray]] = field(
        default_factory=dict
    )
    constants: Mapping[str, float] = field(default_factory=dict)
    periods: Mapping[str, float] = field(default_factory=dict)
    description: str = ""

    def point(self, **coords: float) -> ParameterPoint:
        """Build a point in schema order; missing coordinates are an error."""
        self._check_names(coords)
        return ParameterPoint(self.params, tuple(coords[p] for p in self.params))

    def coords(self, point: ParameterPoint) -> dict[str, float]:
        coords = point.as_dict()
        self._check_names(coords)
        return coords

    def _check_names(self, coords: Mapping[str, float]) -> None:
        if set(coords) != set(self.params):
            missing = sorted(set(self.params) - set(coords))
            extra = sorted(set(coords) - set(self.params))
            raise SchemaError(
                f"point does not match schema of {self.name!r} {list(self.params)}"
                f" (missing: {missing}, unexpected: {extra})"
            )

    def __call__(self, point: ParameterPoint) -> np.ndarray:
        return eval_hamiltonian(self, point)


def eval_hamiltonian(family: HamiltonianFamily, point: ParameterPoint) -> np.ndarray:
    H = np.asarray(family.evaluator(family.coords(point)), dtype=complex)
    if H.shape != (family.dim, family.dim):
        raise SchemaError(f"{family.name} produced shape {H.shape}, expected {family.dim}")
    return H


def eval_gradient(
    family: HamiltonianFamily,
    point: ParameterPoint,
    param: str,
    h: float = 1e-6,
    method: str = "auto",
) -> np.ndarray:
    """Derivative of ``H`` with respect to one parameter.

    ``method`` is ``"analytic"``, ``"finite-diff"`` or ``"auto"`` (analytic
    when the family provides it). Finite differences are central with step
    ``h``; the result is symmetrized to stay exactly Hermitian.
    """
    if param not in family.params:
        raise SchemaError(f"unknown parameter {param!r} for {family.name!r}")
    if method not in ("auto", "analytic", "finite-diff"):
        raise ValueError(f"unknown method {method!r}")
    analytic = family.derivatives.get(param)
    if method == "analytic" and analytic is None:
        raise ValueError(f"{family.name!r} has no analytic derivative for {param!r}")
    if analytic is not None and method != "finite-diff":
        return np.asarray(analytic(family.coords(point)), dtype=complex)
    plus = eval_hamiltonian(family, point.shifted(param, h))
    minus = eval_hamiltonian(family, point.shifted(param, -h))
    dH = (plus - minus) / (2.0 * h)
    return 0.5 * (dH + dH.conj().T)


# -- two-level system ------------------------------------------------------


def _two_level_H(c: Mapping[str, float]) -> np.ndarray:
    r, phi = c["r"], c["phi"]
    return r * np.array([[math.cos(phi), math.sin(phi)], [math.sin(phi), -math.cos(phi)]])


def two_level() -> HamiltonianFamily:
    return HamiltonianFamily(
        name="two_level",
        dim=2,
        params=("r", "phi"),
        evaluator=_two_level_H,
        derivatives={
            "r": lambda c: _two_level_H({"r": 1.0, "phi": c["phi"]}),
            "phi": lambda c: c["r"]
            * np.array(
                [[-math.sin(c["phi"]), math.cos(c["phi"])], [math.cos(c["phi"]), math.sin(c["phi"])]]
            ),
        },
        periods={"phi": TWO_PI},
        description="real 2x2 Hamiltonian r(cos phi sigma3 + sin phi sigma1)",
    )


def two_level_states(phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors ``(chi_plus, chi_minus)`` for energies ``+r`` and ``-r``.

    These are double-valued: both change sign when ``phi`` advances by 2 pi.
    """
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([c, s], dtype=complex), np.array([-s, c], dtype=complex)


# -- (5+1) dark-state system -----------------------------------------------

FULL_ANGLES = ("theta1", "theta2", "theta3", "theta4", "phi2", "phi3", "phi4", "phi5")
RESTRICTED_ANGLES = ("theta3", "theta4")

# Omega_k = |Omega| * product of factors; "phase" stands for exp(-i phi).
_COUPLING_FACTORS = (
    (("sin", "theta1"),),
    (("cos", "theta1"), ("sin", "theta2"), ("phase", "phi2")),
    (("cos", "theta1"), ("cos", "theta2"), ("sin", "theta3"), ("phase", "phi3")),
    (("cos", "theta1"), ("cos", "theta2"), ("cos", "theta3"), ("sin", "theta4"), ("phase", "phi4")),
    (("cos", "theta1"), ("cos", "theta2"), ("cos", "theta3"), ("cos", "theta4"), ("phase", "phi5")),
)


def _factor(kind: str, x: float, derivative: bool) -> complex:
    if kind == "sin":
        return math.cos(x) if derivative else math.sin(x)
    if kind == "cos":
        return -math.sin(x) if derivative else math.cos(x)
    value = complex(math.cos(x), -math.sin(x))
    return -1j * value if derivative else value


def couplings(angles: Mapping[str, float], omega: float = 1.0, wrt: str | None = None) -> np.ndarray:
    """The five couplings ``Omega_k``, or their derivative with respect to ``wrt``.

    Angles absent from ``angles`` are taken as zero.
    """
    out = np.empty(5, dtype=complex)
    for k, factors in enumerate(_COUPLING_FACTORS):
        value = complex(omega)
        hit = wrt is None
        for kind, name in factors:
            d = name == wrt
            hit = hit or d
            value *= _factor(kind, angles.get(name, 0.0), d)
        out[k] = value if hit else 0.0
    return out


def _dark_H(omegas: np.ndarray, epsilon: float) -> np.ndarray:
    H = np.zeros((6, 6), dtype=complex)
    H[0, 0] = epsilon
    H[0, 1:] = omegas.conj()
    H[1:, 0] = omegas
    return H


def bare_hamiltonian(epsilon: float = 1.0) -> np.ndarray:
    """``H0`` of the (5+1) system: five zero-energy ground levels, no coupling."""
    return _dark_H(np.zeros(5), epsilon)


def dark_5p1_full(epsilon: float = 1.0, omega: float = 1.0) -> HamiltonianFamily:
    if not omega > 0:
        raise ValueError("omega must be positive")
    return HamiltonianFamily(
        name="dark_5p1_full",
        dim=6,
        params=FULL_ANGLES,
        evaluator=lambda c: _dark_H(couplings(c, omega), epsilon),
        derivatives={
            p: (lambda c, p=p: _dark_H(couplings(c, omega, wrt=p), 0.0)) for p in FULL_ANGLES
        },
        constants={"epsilon": epsilon, "omega": omega},
        periods={p: TWO_PI for p in FULL_ANGLES},
        description="(5+1) level system, full spherical parametrization of the couplings",
    )


def dark_5p1_restricted(epsilon: float = 1.0, omega: float = 1.0) -> HamiltonianFamily:
    if not omega > 0:
        raise ValueError("omega must be positive")
    return HamiltonianFamily(
        name="dark_5p1_restricted",
        dim=6,
        params=RESTRICTED_ANGLES,
        evaluator=lambda c: _dark_H(couplings(c, omega), epsilon),
        derivatives={
            p: (lambda c, p=p: _dark_H(couplings(c, omega, wrt=p), 0.0)) for p in RESTRICTED_ANGLES
        },
        constants={"epsilon": epsilon, "omega": omega},
        periods={p: TWO_PI for p in RESTRICTED_ANGLES},
        description="(5+1) level system with theta1 = theta2 = phi_k = 0",
    )


def dark_states(theta3: float, theta4: float) -> np.ndarray:
    """Closed-form dark states of the restricted family, as columns of a 6x4 array."""
    c3, s3 = math.cos(theta3), math.sin(theta3)
    c4, s4 = math.cos(theta4), math.sin(theta4)
    psi = np.zeros((6, 4), dtype=complex)
    psi[1, 0] = 1.0
    psi[2, 1] = 1.0
    psi[3:, 2] = (c3, -s3 * s4, -s3 * c4)
    psi[4:, 3] = (-c4, s4)
    return psi


def dark_state_derivatives(theta3: float, theta4: float, param: str) -> np.ndarray:
    """Closed-form derivatives of :func:`dark_states` columns."""
    c3, s3 = math.cos(theta3), math.sin(theta3)
    c4, s4 = math.cos(theta4), math.sin(theta4)
    d = np.zeros((6, 4), dtype=complex)
    if param == "theta3":
        d[3:, 2] = (-s3, -c3 * s4, -c3 * c4)
    elif param == "theta4":
        d[4:, 2] = (-s3 * c4, s3 * s4)
        d[4:, 3] = (s4, c4)
    else:
        raise SchemaError(f"dark states depend only on theta3, theta4; got {param!r}")
    return d


# -- frame fields ------------------------------------------------------------


@dataclass(frozen=True)
class FrameField:
    """A smooth choice of orthonormal frame ``point -> (n, k)`` array.

    The gauge is whatever ``basis`` returns; nothing here re-phases it.
    ``derivative(point, param)`` gives the analytic derivative when known.
    """

    basis: Callable[[ParameterPoint], np.ndarray]
    derivative: Callable[[ParameterPoint, str], np.ndarray] | None = None
    name: str = ""

    def __call__(self, point: ParameterPoint) -> np.ndarray:
        frame = np.asarray(self.basis(point), dtype=complex)
        return frame[:, None] if frame.ndim == 1 else frame

    def diff(self, point: ParameterPoint, param: str, h: float = 1e-6, method: str = "auto"):
        if method not in ("auto", "analytic", "finite-diff"):
            raise ValueError(f"unknown method {method!r}")
        if method == "analytic" and self.derivative is None:
            raise ValueError(f"frame {self.name!r} has no analytic derivative")
        if self.derivative is not None and method != "finite-diff":
            d = np.asarray(self.derivative(point, param), dtype=complex)
            return d[:, None] if d.ndim == 1 else d
        return (self(point.shifted(param, h)) - self(point.shifted(param, -h))) / (2.0 * h)


# Column phases that turn the real dark-state gauge into the one in which the
# rectangle holonomy reads diag(1, 1, i sigma1).
CNOT_GAUGE = (1.0, 1.0, 1.0, 1j)


def dark_frame(phases: Sequence[complex] | None = None) -> FrameField:
    """Dark-state frame field, optionally with constant per-column phases."""
    ph = np.ones(4, dtype=complex) if phases is None else np.asarray(phases, dtype=complex)
    if ph.shape != (4,) or not np.allclose(np.abs(ph), 1.0, atol=1e-14):
        raise ValueError("phases must be four unit-modulus numbers")
    return FrameField(
        basis=lambda p: dark_states(p["theta3"], p["theta4"]) * ph,
        derivative=lambda p, name: dark_state_derivatives(p["theta3"], p["theta4"], name) * ph,
        name="dark" if phases is None else "dark(phased)",
    )


def two_level_frame(branch: str = "-", single_valued: bool = False) -> FrameField:
    """Frame of one two-level eigenstate.

    With ``single_valued`` the double-valued eigenvector is multiplied by
    ``exp(+i phi/2)`` so that it returns to itself after a full circuit.
    """
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    idx = 0 if branch == "+" else 1

    def basis(p):
        v = two_level_states(p["phi"])[idx]
        return v * np.exp(0.5j * p["phi"]) if single_valued else v

    def derivative(p, name):
        if name != "phi":
            return np.zeros(2, dtype=complex)
        phi = p["phi"]
        chi = two_level_states(phi)
        # d chi_+/d phi = chi_-/2, d chi_-/d phi = -chi_+/2
        d = 0.5 * chi[1] if branch == "+" else -0.5 * chi[0]
        if single_valued:
            return (d + 0.5j * chi[idx]) * np.exp(0.5j * phi)
        return d

    return FrameField(basis, derivative, name=f"two_level{branch}{'(sv)' if single_valued else ''}")


# -- gates --------------------------------------------------------------------

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)

I2 = np.eye(2, dtype=complex)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * phi)]).astype(complex)


def holonomic_cnot() -> np.ndarray:
    """CNOT up to the phase ``i`` on the flipped pair, as realized by the dark-state loop."""
    U = np.eye(4, dtype=complex)
    U[2:, 2:] = 1j * SIGMA1
    return U


def standard_gates(phi: float = 0.0) -> dict[str, np.ndarray]:
    return {
        "I": I2.copy(),
        "sigma1": SIGMA1.copy(),
        "sigma2": SIGMA2.copy(),
        "sigma3": SIGMA3.copy(),
        "CNOT": CNOT.copy(),
        "SWAP": SWAP.copy(),
        "PHASE": phase_gate(phi),
    }


def ket(bits: str) -> np.ndarray:
    """Computational basis state, e.g. ``ket("01")``."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"bad bit string {bits!r}")
    return tensor_product(*(KET0 if b == "0" else KET1 for b in bits))


def tensor_product(*operands) -> np.ndarray:
    """Kronecker product of state vectors or matrices, first operand leftmost."""
    if not operands:
        raise ValueError("need at least one operand")
    return reduce(np.kron, (np.asarray(op, dtype=complex) for op in operands))


# -- registry -------------------------------------------------------------------

FAMILIES: dict[str, Callable[..., HamiltonianFamily]] = {
    "two_level": two_level,
    "dark_5p1_restricted": dark_5p1_restricted,
    "dark_5p1_full": dark_5p1_full,
}

FAMILY_CONSTANTS: dict[str, tuple[str, ...]] = {
    "two_level": (),
    "dark_5p1_restricted": ("epsilon", "omega"),
    "dark_5p1_full": ("epsilon", "omega"),
}


def make_family(name: str, **constants: float) -> HamiltonianFamily:
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise SchemaError(f"unknown system {name!r}; registered: {sorted(FAMILIES)}") from None
    unknown = set(constants) - set(FAMILY_CONSTANTS[name])
    if unknown:
        raise SchemaError(f"{name!r} takes constants {FAMILY_CONSTANTS[name]}, got {sorted(unknown)}")
    return factory(**constants)


def check_hermitian(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {H.shape}")
    if not is_hermitian(H):
        raise NonHermitianError("matrix is not Hermitian")
    return H
