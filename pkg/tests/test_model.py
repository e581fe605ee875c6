import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonomy.errors import NonHermitianError, SchemaError
from holonomy.model import (
    CNOT,
    CNOT_GAUGE,
    SIGMA1,
    SIGMA2,
    SIGMA3,
    SWAP,
    ParameterPoint,
    bare_hamiltonian,
    check_hermitian,
    couplings,
    dark_5p1_full,
    dark_5p1_restricted,
    dark_frame,
    dark_state_derivatives,
    dark_states,
    eval_gradient,
    eval_hamiltonian,
    holonomic_cnot,
    ket,
    make_family,
    phase_gate,
    standard_gates,
    tensor_product,
    two_level,
    two_level_frame,
    two_level_states,
)

angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


# -- parameter points ---------------------------------------------------------


def test_point_access_and_replace():
    p = ParameterPoint.of(r=1.0, phi=0.5)
    assert p["phi"] == 0.5
    assert p.replace(phi=2.0).as_dict() == {"r": 1.0, "phi": 2.0}
    assert p.shifted("r", 0.25)["r"] == 1.25
    with pytest.raises(KeyError):
        p["theta"]


@pytest.mark.parametrize(
    "names, values",
    [(("a", "a"), (1.0, 2.0)), (("a",), (1.0, 2.0)), (("a",), (math.nan,)), (("a",), (math.inf,))],
)
def test_point_rejects_bad_input(names, values):
    with pytest.raises(SchemaError):
        ParameterPoint(names, values)


def test_schema_mismatch_is_reported():
    fam = two_level()
    with pytest.raises(SchemaError, match="missing"):
        eval_hamiltonian(fam, ParameterPoint.of(r=1.0))
    with pytest.raises(SchemaError, match="unexpected"):
        eval_hamiltonian(fam, ParameterPoint.of(r=1.0, phi=0.0, theta=1.0))


# -- two-level family -------------------------------------------------------------


def test_two_level_at_phi_zero_is_sigma3():
    fam = two_level()
    H = eval_hamiltonian(fam, fam.point(r=1.0, phi=0.0))
    assert np.array_equal(H, np.diag([1.0, -1.0]))


@given(r=st.floats(0.1, 10), phi=angles)
def test_two_level_states_are_eigenvectors(r, phi):
    fam = two_level()
    H = eval_hamiltonian(fam, fam.point(r=r, phi=phi))
    plus, minus = two_level_states(phi)
    assert np.allclose(H @ plus, r * plus, atol=1e-12)
    assert np.allclose(H @ minus, -r * minus, atol=1e-12)
    assert abs(np.vdot(plus, minus)) < 1e-15


def test_two_level_states_double_valued():
    for a, b in zip(two_level_states(0.3), two_level_states(0.3 + 2 * math.pi)):
        assert np.allclose(a, -b, atol=1e-14)


@given(phi=angles)
def test_single_valued_frame_returns_to_itself(phi):
    frame = two_level_frame("-", single_valued=True)
    a = frame(ParameterPoint.of(r=1.0, phi=phi))
    b = frame(ParameterPoint.of(r=1.0, phi=phi + 2 * math.pi))
    assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("branch", ["+", "-"])
@pytest.mark.parametrize("single_valued", [False, True])
def test_two_level_frame_analytic_derivative(branch, single_valued):
    frame = two_level_frame(branch, single_valued)
    p = ParameterPoint.of(r=1.0, phi=0.8)
    analytic = frame.diff(p, "phi", method="analytic")
    fd = frame.diff(p, "phi", h=1e-6, method="finite-diff")
    assert np.max(np.abs(analytic - fd)) < 1e-9


# -- dark-state family ---------------------------------------------------------------


def test_dark_at_origin_without_detuning():
    fam = dark_5p1_full(epsilon=0.0)
    H = eval_hamiltonian(fam, fam.point(**{n: 0.0 for n in fam.params}))
    expected = np.zeros((6, 6))
    expected[0, 5] = expected[5, 0] = 1.0
    assert np.array_equal(H, expected)


def test_dark_gradient_matches_finite_difference():
    fam = dark_5p1_restricted()
    p = fam.point(theta3=0.7, theta4=1.1)
    analytic = eval_gradient(fam, p, "theta3", method="analytic")
    fd = eval_gradient(fam, p, "theta3", h=1e-5, method="finite-diff")
    assert np.max(np.abs(analytic - fd)) <= 1e-8


@settings(max_examples=30)
@given(values=st.lists(st.floats(-3, 3), min_size=8, max_size=8), which=st.sampled_from(range(8)))
def test_full_gradient_matches_finite_difference(values, which):
    fam = dark_5p1_full(epsilon=0.4, omega=1.7)
    p = ParameterPoint(fam.params, values)
    name = fam.params[which]
    analytic = eval_gradient(fam, p, name, method="analytic")
    fd = eval_gradient(fam, p, name, h=1e-5, method="finite-diff")
    assert np.max(np.abs(analytic - fd)) <= 1e-8


def test_gradient_errors():
    fam = two_level()
    p = fam.point(r=1.0, phi=0.0)
    with pytest.raises(SchemaError):
        eval_gradient(fam, p, "theta")
    with pytest.raises(ValueError):
        eval_gradient(fam, p, "phi", method="spline")


@given(values=st.lists(st.floats(-3, 3), min_size=8, max_size=8), omega=st.floats(0.1, 5))
def test_coupling_modulus(values, omega):
    c = couplings(dict(zip(dark_5p1_full().params, values)), omega)
    assert math.isclose(np.sum(np.abs(c) ** 2), omega**2, rel_tol=1e-12)


@given(t3=angles, t4=angles, eps=st.floats(-2, 2))
def test_dark_states_orthonormal_and_dark(t3, t4, eps):
    fam = dark_5p1_restricted(epsilon=eps)
    psi = dark_states(t3, t4)
    H = eval_hamiltonian(fam, fam.point(theta3=t3, theta4=t4))
    assert np.allclose(psi.conj().T @ psi, np.eye(4), atol=1e-12)
    assert np.max(np.abs(H @ psi)) <= 1e-12


@pytest.mark.parametrize("param", ["theta3", "theta4"])
def test_dark_state_derivatives(param):
    t3, t4, h = 0.4, 1.3, 1e-6
    d = dark_state_derivatives(t3, t4, param)
    shift = {"theta3": (h, 0), "theta4": (0, h)}[param]
    fd = (dark_states(t3 + shift[0], t4 + shift[1]) - dark_states(t3 - shift[0], t4 - shift[1])) / (2 * h)
    assert np.max(np.abs(d - fd)) < 1e-9
    with pytest.raises(SchemaError):
        dark_state_derivatives(t3, t4, "phi2")


def test_dark_frame_phases():
    p = ParameterPoint.of(theta3=0.3, theta4=0.2)
    assert np.allclose(dark_frame(CNOT_GAUGE)(p)[:, 3], 1j * dark_frame()(p)[:, 3])
    with pytest.raises(ValueError):
        dark_frame((1, 1, 1, 2))


def test_bare_hamiltonian():
    H = bare_hamiltonian(2.0)
    assert H[0, 0] == 2.0 and np.count_nonzero(H) == 1


def test_family_constructors_validate():
    with pytest.raises(ValueError):
        dark_5p1_full(omega=0.0)
    with pytest.raises(SchemaError, match="registered"):
        make_family("three_level")
    with pytest.raises(SchemaError):
        make_family("two_level", epsilon=1.0)
    assert make_family("dark_5p1_restricted", epsilon=0.5).constants["epsilon"] == 0.5


def test_check_hermitian():
    with pytest.raises(NonHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(NonHermitianError):
        check_hermitian(np.ones(3))


# -- gates ---------------------------------------------------------------------------


def test_gate_literals():
    g = standard_gates()
    assert np.array_equal(g["CNOT"], [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    assert np.array_equal(g["SWAP"], [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
    assert np.array_equal(CNOT @ CNOT, np.eye(4))
    assert np.array_equal(SWAP @ SWAP, np.eye(4))
    assert np.array_equal(SIGMA1 @ SIGMA2, 1j * SIGMA3)


@given(phi=st.floats(-10, 10))
def test_phase_gate_inverse(phi):
    assert np.max(np.abs(phase_gate(phi) @ phase_gate(-phi) - np.eye(4))) <= 2 * np.finfo(float).eps


def test_basis_ordering():
    for k, bits in enumerate(("00", "01", "10", "11")):
        assert np.array_equal(ket(bits), np.eye(4)[k])
    assert np.array_equal(CNOT @ ket("10"), ket("11"))
    with pytest.raises(ValueError):
        ket("2")


def test_holonomic_cnot_matches_cnot_up_to_phase():
    U = holonomic_cnot()
    assert np.array_equal(np.abs(U), np.abs(CNOT))
    assert np.array_equal(U[2:, 2:], 1j * SIGMA1)


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_kron_mixed_product(seed):
    rng = np.random.default_rng(seed)
    A, B, C, D = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
    lhs = tensor_product(A, B) @ tensor_product(C, D)
    assert np.allclose(lhs, tensor_product(A @ C, B @ D), atol=1e-12)


def test_tensor_product_needs_operands():
    with pytest.raises(ValueError):
        tensor_product()
