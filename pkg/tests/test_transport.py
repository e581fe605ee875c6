import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from holonomy.connection import connection_field, gauge_transform_nonabelian
from holonomy.errors import ClosureError, NormDriftError, NumericalError
from holonomy.model import (
    CNOT_GAUGE,
    SIGMA1,
    SIGMA2,
    SIGMA3,
    HamiltonianFamily,
    ParameterPoint,
    dark_5p1_restricted,
    dark_frame,
    eval_hamiltonian,
    holonomic_cnot,
    two_level,
    two_level_frame,
)
from holonomy.paths import ParamPath, SurfacePatch, circle, polyline, rectangle, sweep
from holonomy.spectral import frame_path, single_valued_correction
from holonomy.transport import (
    AbelianField,
    SingularityError,
    ab_solenoid_field,
    holonomy_by_transport,
    line_integral_abelian,
    path_ordered_exp,
    phase_decomposition,
    schrodinger_evolve,
    stokes_density,
    surface_integral_abelian,
)

QUARTER = ((0.0, math.pi / 2), (0.0, math.pi / 2))


def sin_theta3(point):
    out = np.zeros(len(point.names))
    out[point.index("theta4")] = math.sin(point["theta3"])
    return out


# -- Abelian line integrals ------------------------------------------------------------------


def test_solenoid_enclosed_flux():
    loop = circle(("x", "y"), (0.0, 0.0), 1.0, 2000)
    assert abs(line_integral_abelian(ab_solenoid_field(2.5), loop) - 2.5) <= 1e-9


@given(flux=st.floats(-10, 10), r=st.floats(0.01, 100), cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5))
def test_solenoid_any_enclosing_circle(flux, r, cx, cy):
    # any circle around the flux line picks up the flux, however off-centre
    radius = r + math.hypot(cx, cy)
    loop = circle(("x", "y"), (cx, cy), radius, 2000)
    assert abs(line_integral_abelian(ab_solenoid_field(flux), loop) - flux) <= 1e-9 * max(1, abs(flux))


def test_solenoid_not_enclosing():
    loop = circle(("x", "y"), (3.0, 0.5), 1.0, 2000)
    assert abs(line_integral_abelian(ab_solenoid_field(2.5), loop)) <= 1e-9


def test_solenoid_gauge_shift():
    alpha = lambda p: 0.3 * math.exp(-((p["x"] - 0.5) ** 2) - p["y"] ** 2)  # noqa: E731
    loop = circle(("x", "y"), (0.0, 0.0), 1.0, 2000)
    a = line_integral_abelian(ab_solenoid_field(2.5), loop)
    b = line_integral_abelian(ab_solenoid_field(2.5, alpha=alpha), loop)
    assert abs(a - b) <= 1e-9


def test_zero_flux_field():
    assert np.array_equal(ab_solenoid_field(0.0)(ParameterPoint.of(x=0.3, y=0.2)), [0.0, 0.0])


def test_charge_scales_phase():
    loop = circle(("x", "y"), (0.0, 0.0), 1.0, 500)
    assert math.isclose(line_integral_abelian(ab_solenoid_field(1.0), loop, charge=-0.5), -0.5, rel_tol=1e-12)


def test_singular_margin():
    loop = circle(("x", "y"), (0.5, 0.0), 0.5, 100)  # passes through the origin
    with pytest.raises(SingularityError, match="point 50"):
        line_integral_abelian(ab_solenoid_field(1.0), loop)
    with pytest.raises(ValueError):
        ab_solenoid_field(math.inf)


# -- surface integrals and Stokes ---------------------------------------------------------------


def test_surface_integral_of_cos_theta3():
    patch = SurfacePatch(("theta3", "theta4"), QUARTER, (8000, 1))
    value = surface_integral_abelian(lambda p: math.cos(p["theta3"]), patch)
    assert abs(value - math.pi / 2) <= 1e-8


def test_surface_integral_of_zero():
    assert surface_integral_abelian(lambda p: 0.0, SurfacePatch(("a", "b"), ((0, 1), (0, 1)), (3, 3))) == 0.0


@settings(max_examples=20)
@given(a1=st.floats(-1.5, 1.0), w1=st.floats(0.1, 1.5), a2=st.floats(-3, 3), w2=st.floats(0.1, 2))
def test_stokes_for_dark_integrand(a1, w1, a2, w2):
    bounds = ((a1, a1 + w1), (a2, a2 + w2))
    line = line_integral_abelian(AbelianField(sin_theta3), rectangle(("theta3", "theta4"), bounds, 4000))
    patch = SurfacePatch(("theta3", "theta4"), bounds, (2000, 2))
    surface = surface_integral_abelian(lambda p: math.cos(p["theta3"]), patch)
    numeric = surface_integral_abelian(stokes_density(AbelianField(sin_theta3), "theta3", "theta4"), patch)
    assert abs(line - surface) <= 1e-6
    assert abs(line - numeric) <= 1e-6


def test_stokes_for_solenoid_loops_avoiding_the_line():
    field = ab_solenoid_field(1.3)
    bounds = ((0.5, 1.5), (-0.4, 0.7))
    line = line_integral_abelian(field, rectangle(("x", "y"), bounds, 4000))
    surface = surface_integral_abelian(stokes_density(field, "x", "y"), SurfacePatch(("x", "y"), bounds, (60, 60)))
    # straight legs use chord midpoints, so the zero comes with O(h^2) error
    assert abs(line) <= 1e-6 and abs(line - surface) <= 1e-6


# -- path-ordered exponentials ----------------------------------------------------------------------


def cnot_loop(steps):
    return rectangle(("theta3", "theta4"), QUARTER, steps)


@pytest.mark.parametrize("sign", ["-i", "+i"])
def test_scalar_wilson_loop_is_exponential(sign):
    loop = rectangle(("theta3", "theta4"), ((0.2, 1.1), (0.0, 0.8)), 1000)
    res = path_ordered_exp(AbelianField(sin_theta3), loop, sign=sign)
    s = 1 if sign == "+i" else -1
    expected = np.exp(s * 1j * line_integral_abelian(AbelianField(sin_theta3), loop))
    assert abs(res.unitary[0, 0] - expected) <= 1e-12
    assert res.phase == pytest.approx(np.angle(expected), abs=1e-12)


def test_wilson_loop_gives_holonomic_cnot():
    res = path_ordered_exp(connection_field(dark_frame(CNOT_GAUGE)), cnot_loop(10_000), sign="-i")
    assert np.max(np.abs(res.unitary - holonomic_cnot())) <= 1e-4
    # real gauge: the lower block is a real rotation by pi/2
    real = path_ordered_exp(connection_field(dark_frame()), cnot_loop(2000), sign="-i")
    assert np.allclose(real.unitary[2:, 2:], [[0, 1], [-1, 0]], atol=1e-10)


def test_wilson_zero_field_is_identity():
    res = path_ordered_exp(lambda p: np.zeros((2, 3, 3)), cnot_loop(100))
    assert np.array_equal(res.unitary, np.eye(3))


def test_wilson_errors():
    open_path = polyline(("x", "y"), [[0, 0], [1, 0]], 10)
    with pytest.raises(ClosureError):
        path_ordered_exp(lambda p: np.zeros((2, 1, 1)), open_path)
    with pytest.raises(ValueError):
        path_ordered_exp(lambda p: np.zeros((2, 1, 1)), cnot_loop(8), sign="i")

    def drifting(p):
        k = 2 if p["theta3"] < 0.5 else 3
        return np.zeros((2, k, k))

    with pytest.raises(NumericalError, match="dimension changed"):
        path_ordered_exp(drifting, cnot_loop(100))


@settings(max_examples=25, deadline=None)
@given(steps=st.integers(4, 3000))
def test_wilson_unitary_at_any_step_count(steps):
    res = path_ordered_exp(connection_field(dark_frame()), cnot_loop(steps))
    assert np.max(np.abs(res.unitary.conj().T @ res.unitary - np.eye(4))) <= 1e-8
    assert res.steps == steps


def su2_field(p):
    x, y = p["x"], p["y"]
    return np.array([math.sin(y) * SIGMA1 + 0.3 * x * SIGMA3, x * y * SIGMA2 + 0.5 * math.cos(x) * SIGMA1])


def test_wilson_convergence_on_dark_loop():
    # the dark connection commutes with itself along every leg, so the
    # product is exact up to rounding at any resolution
    field = connection_field(dark_frame(CNOT_GAUGE))
    ref = path_ordered_exp(field, cnot_loop(100_000), estimate_error=False).unitary
    errs = [np.max(np.abs(path_ordered_exp(field, cnot_loop(n)).unitary - ref)) for n in (250, 500, 1000, 2000)]
    for coarse, fine in zip(errs, errs[1:]):
        assert fine <= max(coarse / 2, 1e-11)


def test_wilson_convergence_non_commuting_field():
    loop = circle(("x", "y"), (0.1, -0.2), 0.8, 100)
    ref = path_ordered_exp(su2_field, loop, steps=100_000, estimate_error=False).unitary
    errs = [np.max(np.abs(path_ordered_exp(su2_field, loop, steps=n).unitary - ref)) for n in (100, 200, 400, 800)]
    for coarse, fine in zip(errs, errs[1:]):
        assert fine <= coarse / 2
        assert 3.5 < coarse / fine < 4.5  # midpoint product is second order


def test_wilson_error_estimate_tracks_true_error():
    loop = circle(("x", "y"), (0.1, -0.2), 0.8, 400)
    res = path_ordered_exp(su2_field, loop)
    ref = path_ordered_exp(su2_field, loop, steps=50_000, estimate_error=False).unitary
    true = np.max(np.abs(res.unitary - ref))
    assert 0.3 * true <= res.error_estimate <= 3 * true


def test_commuting_segments_integrate_abelian():
    def diag_field(p):
        x, y = p["x"], p["y"]
        return np.array([np.diag([math.sin(y), x]), np.diag([x * y, 1.0])]).astype(complex)

    loop = circle(("x", "y"), (0.3, 0.2), 0.7, 2000)
    U = path_ordered_exp(diag_field, loop, sign="+i").unitary
    phases = [
        line_integral_abelian(AbelianField(lambda p, i=i: np.real(np.diagonal(diag_field(p), axis1=1, axis2=2)[:, i])), loop)
        for i in range(2)
    ]
    assert np.allclose(U, np.diag(np.exp(1j * np.array(phases))), atol=1e-12)


@pytest.mark.parametrize("sign, g", [("+i", 1.0), ("-i", 1.0), ("+i", 0.6)])
def test_holonomy_gauge_covariance(sign, g):
    field = su2_field

    def S(p):
        return expm(1j * (0.7 * p["x"] * SIGMA1 + 0.4 * math.sin(p["y"]) * SIGMA2))

    loop = circle(("x", "y"), (0.1, -0.2), 0.8, 4000)
    # the transform consistent with exp(s i g A dx) uses coupling s*g
    s = 1.0 if sign == "+i" else -1.0
    U = path_ordered_exp(field, loop, g=g, sign=sign).unitary
    U2 = path_ordered_exp(gauge_transform_nonabelian(field, S, s * g), loop, g=g, sign=sign).unitary
    S0 = S(loop.point(0))
    assert np.max(np.abs(U2 - S0 @ U @ S0.conj().T)) <= 1e-5


# -- transport holonomy ------------------------------------------------------------------------------


def two_level_loop(steps=2000):
    fam = two_level()
    return fam, sweep(fam.point(r=1.0, phi=0.0), "phi", 2 * math.pi, steps, fam.periods)


def test_transport_two_level_sign_change():
    fam, loop = two_level_loop()
    res = holonomy_by_transport(fam, loop, indices=(0,))
    assert abs(res.unitary[0, 0] + 1) <= 1e-6
    assert res.winding == 1 and abs(abs(res.phase) - math.pi) <= 1e-6


def test_transport_matches_wilson_on_dark_loop():
    fam = dark_5p1_restricted()
    loop = cnot_loop(10_000)
    frame = dark_frame(CNOT_GAUGE)
    tr = holonomy_by_transport(fam, loop, window=(-1e-6, 1e-6), initial_basis=frame(loop.point(0)))
    wl = path_ordered_exp(connection_field(frame), loop, sign="-i")
    assert np.max(np.abs(tr.unitary - wl.unitary)) <= 1e-4
    assert np.max(np.abs(tr.unitary - holonomic_cnot())) <= 1e-4


def test_transport_matches_wilson_on_curved_loop():
    fam = dark_5p1_restricted()
    loop = circle(("theta3", "theta4"), (0.8, 0.8), 0.5, 4000)
    frame = dark_frame()
    tr = holonomy_by_transport(fam, loop, window=(-1e-6, 1e-6), initial_basis=frame(loop.point(0)))
    wl = path_ordered_exp(connection_field(frame), loop, sign="-i")
    assert np.max(np.abs(tr.unitary - wl.unitary)) <= 1e-5


def test_transport_constant_loop_is_identity():
    fam = two_level()
    loop = ParamPath(fam.params, np.tile([1.0, 0.3], (5, 1)), closed=True)
    assert np.allclose(holonomy_by_transport(fam, loop, indices=(1,)).unitary, [[1.0]], atol=1e-14)


def test_transport_errors():
    fam = two_level()
    with pytest.raises(ClosureError):
        holonomy_by_transport(fam, sweep(fam.point(r=1.0, phi=0.0), "phi", 1.0, 10), indices=(0,))


def test_transport_equals_single_valued_gauge_integral():
    fam, loop = two_level_loop()
    res = holonomy_by_transport(fam, loop, indices=(0,))
    _, A = single_valued_correction(frame_path(fam, loop, indices=(0,)), "phi")
    assert abs(np.exp(1j * 2 * math.pi * A[0, 0]) - res.unitary[0, 0]) <= 1e-6
    # and the analytic single-valued frame gives the same loop phase
    sv = two_level_frame("-", single_valued=True)
    wl = path_ordered_exp(connection_field(sv), loop, sign="+i")
    assert abs(wl.unitary[0, 0] - res.unitary[0, 0]) <= 1e-6


# -- Schrodinger evolution ----------------------------------------------------------------------------


def test_zero_hamiltonian_keeps_state():
    psi0 = np.array([0.6, 0.8j])
    traj = schrodinger_evolve(lambda t: np.zeros((2, 2)), psi0, 3.0, 10)
    assert np.array_equal(traj.states[-1], psi0)


@given(E=st.floats(-3, 3), T=st.floats(0.1, 10))
def test_eigenstate_picks_up_dynamical_phase(E, T):
    H = np.diag([E, -E + 0.5])
    traj = schrodinger_evolve(lambda t: H, np.array([1.0, 0.0]), T, 2000)
    assert abs(traj.states[-1][0] - np.exp(-1j * E * T)) <= 1e-8


def test_sigma3_closed_form():
    psi0 = np.array([1.0, 1.0]) / math.sqrt(2)
    traj = schrodinger_evolve(lambda t: SIGMA3, psi0, math.pi / 2, 1000)
    expected = np.array([np.exp(-0.5j * math.pi), np.exp(0.5j * math.pi)]) / math.sqrt(2)
    assert np.max(np.abs(traj.states[-1] - expected)) <= 1e-8


@pytest.mark.parametrize("r, T", [(1.0, 20.0), (0.7, 5.0), (2.0, 50.0)])
def test_rotating_frame_oracle(r, T):
    # H(t) = r(cos wt s3 + sin wt s1) = R s3 R^H with R = exp(-i s2 wt/2), so
    # psi(t) = R(t) exp(-i H_eff t) psi0 with H_eff = r s3 - (w/2) s2
    w = 2 * math.pi / T
    fam = two_level()
    H = lambda t: eval_hamiltonian(fam, fam.point(r=r, phi=w * t))  # noqa: E731
    psi0 = np.array([math.cos(0.4), 1j * math.sin(0.4)])
    traj = schrodinger_evolve(H, psi0, T, 20_000)
    H_eff = r * SIGMA3 - 0.5 * w * SIGMA2
    for k in (5000, 12_345, 20_000):
        t = traj.times[k]
        exact = expm(-0.5j * SIGMA2 * w * t) @ expm(-1j * H_eff * t) @ psi0
        assert np.max(np.abs(traj.states[k] - exact)) <= 1e-8
    assert traj.norm_drift <= 1e-8


def test_evolve_errors():
    with pytest.raises(ValueError):
        schrodinger_evolve(lambda t: SIGMA3, np.array([1.0, 0.0]), 1.0, 0)
    with pytest.raises(ValueError, match="normalized"):
        schrodinger_evolve(lambda t: SIGMA3, np.array([1.0, 1.0]), 1.0, 10)
    with pytest.raises(NormDriftError, match="increase steps"):
        schrodinger_evolve(lambda t: 5 * SIGMA1, np.array([1.0, 0.0]), 10.0, 20)


# -- phase decomposition ------------------------------------------------------------------------------


def test_static_eigenstate_decomposition():
    E, T = 0.7, 3.0
    H = lambda t: np.diag([E, -1.0])  # noqa: E731
    ref = lambda t: np.array([1.0, 0.0])  # noqa: E731
    pd = phase_decomposition(schrodinger_evolve(H, ref(0), T, 3000), H, ref)
    assert pd.dynamical == pytest.approx(-E * T, abs=1e-9)
    assert abs(pd.geometric) <= 1e-9
    assert pd.total == pytest.approx(-E * T, abs=1e-9)
    assert abs(pd.residual) <= 1e-9 and pd.leakage <= 1e-12


def _two_level_run(T, steps, psi0=None):
    fam = two_level()
    frame = two_level_frame("-", single_valued=True)
    w = 2 * math.pi / T
    H = lambda t: eval_hamiltonian(fam, fam.point(r=1.0, phi=w * t))  # noqa: E731
    ref = lambda t: frame(fam.point(r=1.0, phi=w * t))[:, 0]  # noqa: E731
    psi = ref(0.0) if psi0 is None else psi0
    return phase_decomposition(schrodinger_evolve(H, psi, T, steps), H, ref)


def test_adiabatic_geometric_phase_is_pi():
    # omega T = 2 r T = 200
    pd = _two_level_run(100.0, 10_000)
    assert abs(abs(pd.adiabatic_geometric) - math.pi) <= 0.05
    assert pd.leakage <= 1e-3
    # the same sign change as the transport oracle
    fam, loop = two_level_loop()
    oracle = holonomy_by_transport(fam, loop, indices=(0,)).unitary[0, 0]
    assert abs(np.exp(1j * pd.adiabatic_geometric) - oracle) <= 0.05


@pytest.mark.parametrize(
    "T, steps, psi0",
    [(10.0, 20_000, np.array([math.cos(0.2), 1j * math.sin(0.2)])), (30.0, 20_000, None), (5.0, 10_000, None)],
)
def test_decomposition_identity_and_removed_phase(T, steps, psi0):
    pd = _two_level_run(T, steps, psi0)
    assert abs(pd.residual) <= 1e-6
    assert abs(pd.removed_dynamical) <= 1e-6


def test_residual_converges_with_step_size():
    coarse = abs(_two_level_run(10.0, 2500).residual)
    fine = abs(_two_level_run(10.0, 5000).residual)
    assert 3.0 < coarse / fine < 5.0


def test_reference_must_be_single_valued():
    fam = two_level()
    frame = two_level_frame("-")  # double-valued
    T = 10.0
    H = lambda t: eval_hamiltonian(fam, fam.point(r=1.0, phi=2 * math.pi * t / T))  # noqa: E731
    ref = lambda t: frame(fam.point(r=1.0, phi=2 * math.pi * t / T))[:, 0]  # noqa: E731
    traj = schrodinger_evolve(H, ref(0.0), T, 200)
    with pytest.raises(ClosureError, match="single-valued"):
        phase_decomposition(traj, H, ref)


def test_family_with_custom_hamiltonian_runs_through_transport():
    fam = HamiltonianFamily(
        "spin", 2, ("phi",), lambda c: math.cos(c["phi"]) * SIGMA1 + math.sin(c["phi"]) * SIGMA2, periods={"phi": 2 * math.pi}
    )
    loop = sweep(ParameterPoint.of(phi=0.0), "phi", 2 * math.pi, 2000, fam.periods)
    # equatorial loop: solid angle 2 pi, Berry phase pi
    res = holonomy_by_transport(fam, loop, indices=(0,))
    assert abs(res.unitary[0, 0] + 1) <= 1e-5
