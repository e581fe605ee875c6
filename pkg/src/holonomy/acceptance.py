"""Built-in acceptance suite: ten end-to-end checks with fixed tolerances.

Each ``criterion_N`` returns a :class:`CriterionResult`; :func:`run_all`
runs them in order. Used by ``holonomy verify`` and the test suite.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import anyons
from .connection import (
    berry_connection,
    connection_field,
    curvature_abelian,
    curvature_covariance_check,
    curvature_nonabelian,
    gauge_transform_nonabelian,
    infinitesimal_gauge_transform,
    wz_connection,
)
from .model import (
    CNOT,
    CNOT_GAUGE,
    SIGMA1,
    SIGMA2,
    SIGMA3,
    SWAP,
    ParameterPoint,
    dark_5p1_restricted,
    dark_frame,
    eval_hamiltonian,
    holonomic_cnot,
    ket,
    phase_gate,
    standard_gates,
    tensor_product,
    two_level,
    two_level_frame,
)
from .paths import SurfacePatch, circle, rectangle, sweep
from .spectral import frame_path, single_valued_correction
from .transport import (
    AbelianField,
    ab_solenoid_field,
    holonomy_by_transport,
    line_integral_abelian,
    path_ordered_exp,
    phase_decomposition,
    schrodinger_evolve,
    stokes_density,
    surface_integral_abelian,
)

# Seed of the Monte Carlo criterion; fixed once and never tuned.
MC_SEED = 1


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    metrics: dict = field(default_factory=dict)


def _timed(number: int, title: str, body: Callable[[], tuple[bool, str, dict]]) -> CriterionResult:
    start = time.perf_counter()
    passed, detail, metrics = body()
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - start, metrics)


# -- 1. two-level sign change ---------------------------------------------------


def _two_level_loop(steps: int):
    fam = two_level()
    return fam, sweep(fam.point(r=1.0, phi=0.0), "phi", 2 * math.pi, steps, fam.periods)


def criterion_1() -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        fam, loop = _two_level_loop(2000)
        res = holonomy_by_transport(fam, loop, indices=(0,))
        elapsed = time.perf_counter() - t0
        err = abs(res.unitary[0, 0] - (-1))
        ok = err <= 1e-6 and elapsed < 1.0
        return ok, f"|U + 1| = {err:.2e}, {elapsed:.2f}s", {"deviation": err, "runtime": elapsed}

    return _timed(1, "two-level sign change", body)


# -- 2. single-valued gauge connection ------------------------------------------


def criterion_2() -> CriterionResult:
    def body():
        rng = np.random.default_rng(2)
        frame = two_level_frame("-", single_valued=True)
        fam = two_level()
        phis = rng.uniform(0, 2 * math.pi, 10)
        analytic = [berry_connection(frame, fam.point(r=1.0, phi=p), "phi", family=fam, method="analytic") for p in phis]
        fd = [berry_connection(frame, fam.point(r=1.0, phi=p), "phi", family=fam, method="finite-diff") for p in phis]
        e_an = float(np.max(np.abs(np.array(analytic) - 0.5)))
        e_fd = float(np.max(np.abs(np.array(fd) - 0.5)))
        # the same value from the numerically transported frame
        _, loop = _two_level_loop(2000)
        _, A = single_valued_correction(frame_path(fam, loop, indices=(0,)), "phi")
        e_tr = abs(A[0, 0] - 0.5)
        ok = e_an <= 1e-8 and e_fd <= 1e-5 and e_tr <= 1e-6
        detail = f"analytic {e_an:.1e}, finite-diff {e_fd:.1e}, transport {e_tr:.1e}"
        return ok, detail, {"analytic": e_an, "finite_diff": e_fd, "transport": e_tr}

    return _timed(2, "single-valued gauge A_phi = 1/2", body)


# -- 3. Wilczek-Zee connections of the dark states ----------------------------------


def criterion_3() -> CriterionResult:
    def body():
        frame = dark_frame()
        fam = dark_5p1_restricted()
        grid = np.linspace(0.05, math.pi - 0.05, 20)
        worst_zero, worst_off = 0.0, 0.0
        for t3 in grid:
            for t4 in grid:
                p = ParameterPoint.of(theta3=t3, theta4=t4)
                A3 = wz_connection(frame, p, "theta3", family=fam, method="analytic")
                A4 = wz_connection(frame, p, "theta4", family=fam, method="analytic")
                zeros = [A3[2, 2], A4[2, 2], A4[3, 3], A3[3, 2]]
                worst_zero = max(worst_zero, max(abs(z) for z in zeros))
                s = math.sin(t3)
                worst_off = max(worst_off, abs(A4[2, 3] + s), abs(A4[3, 2] - s))
        ok = worst_zero <= 1e-10 and worst_off <= 1e-8
        return ok, f"vanishing {worst_zero:.1e}, off-diagonal {worst_off:.1e}", {
            "vanishing": worst_zero,
            "off_diagonal": worst_off,
        }

    return _timed(3, "Wilczek-Zee connection entries", body)


# -- 4. holonomic CNOT ---------------------------------------------------------------


def cnot_loop(steps: int = 10_000):
    return rectangle(("theta3", "theta4"), ((0.0, math.pi / 2), (0.0, math.pi / 2)), steps)


def criterion_4() -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        fam = dark_5p1_restricted()
        loop = cnot_loop()
        frame = dark_frame(CNOT_GAUGE)
        tr = holonomy_by_transport(fam, loop, window=(-1e-6, 1e-6), initial_basis=frame(loop.point(0)))
        wl = path_ordered_exp(connection_field(frame), loop, sign="-i")
        elapsed = time.perf_counter() - t0
        target = holonomic_cnot()
        d_tr = float(np.max(np.abs(tr.unitary - target)))
        d_wl = float(np.max(np.abs(wl.unitary - target)))
        agree = float(np.max(np.abs(tr.unitary - wl.unitary)))
        pattern = bool(
            np.array_equal(np.round(np.abs(tr.unitary)), np.abs(CNOT))
            and np.array_equal(np.round(np.abs(wl.unitary)), np.abs(CNOT))
        )
        ok = max(d_tr, d_wl, agree) <= 1e-4 and pattern and elapsed < 10.0
        detail = f"transport {d_tr:.1e}, wilson {d_wl:.1e}, agree {agree:.1e}, {elapsed:.1f}s"
        return ok, detail, {"transport": d_tr, "wilson": d_wl, "agreement": agree, "runtime": elapsed}

    return _timed(4, "holonomic CNOT", body)


# -- 5. Stokes equivalence and the AB phase ------------------------------------------


def _sin_theta3(point):
    out = np.zeros(len(point.names))
    out[point.index("theta4")] = math.sin(point["theta3"])
    return out


def criterion_5() -> CriterionResult:
    def body():
        field_ = AbelianField(_sin_theta3, name="sin theta3 dtheta4")
        errs = []
        for bounds in (((0.0, math.pi / 2), (0.0, math.pi / 2)), ((0.2, 1.3), (0.1, 0.9))):
            loop = rectangle(("theta3", "theta4"), bounds, 4000)
            patch = SurfacePatch(("theta3", "theta4"), bounds, (2000, 4))
            line = line_integral_abelian(field_, loop)
            surf = surface_integral_abelian(lambda p: math.cos(p["theta3"]), patch)
            numeric = surface_integral_abelian(stokes_density(field_, "theta3", "theta4"), patch)
            errs += [abs(line - surf), abs(line - numeric)]
        stokes = max(errs)

        flux = 2.5
        loop = circle(("x", "y"), (0.0, 0.0), 1.0, 2000)
        ab = abs(line_integral_abelian(ab_solenoid_field(flux), loop) - flux)
        shifted = ab_solenoid_field(flux, alpha=lambda p: 0.4 * math.sin(p["x"]) * math.cos(2 * p["y"]) + 0.1 * p["x"])
        gauge = abs(line_integral_abelian(shifted, loop) - line_integral_abelian(ab_solenoid_field(flux), loop))
        outside = abs(line_integral_abelian(ab_solenoid_field(flux), circle(("x", "y"), (3.0, 0.0), 1.0, 2000)))
        ok = stokes <= 1e-6 and ab <= 1e-9 and gauge <= 1e-9 and outside <= 1e-9
        detail = f"stokes {stokes:.1e}, flux {ab:.1e}, gauge shift {gauge:.1e}"
        return ok, detail, {"stokes": stokes, "flux": ab, "gauge": gauge, "outside": outside}

    return _timed(5, "Stokes and Aharonov-Bohm", body)


# -- 6. non-Abelian structure --------------------------------------------------------


def _su2_field(point):
    x, y = point["x"], point["y"]
    Ax = math.sin(y) * SIGMA1 + 0.3 * x * SIGMA3
    Ay = x * y * SIGMA2 + 0.5 * math.cos(x) * SIGMA1
    return np.array([Ax, Ay])


def _lambda(point):
    x, y = point["x"], point["y"]
    return 0.7 * math.cos(x + y) * SIGMA1 + 0.4 * x * SIGMA2 - 0.2 * y * y * SIGMA3


def criterion_6() -> CriterionResult:
    def body():
        g = 1.3
        pts = [ParameterPoint.of(x=a, y=b) for a, b in ((0.3, -0.4), (1.1, 0.7), (-0.8, 0.2))]
        S = lambda p: expm(1j * g * _lambda(p))  # noqa: E731
        cov = max(curvature_covariance_check(_su2_field, S, p, "x", "y", g) for p in pts)

        # first-order formula: residual must shrink like eps^2
        ratios, residuals = [], []
        for p in pts:
            res = []
            for eps in (1e-2, 5e-3):
                lam = lambda q, e=eps: e * _lambda(q)  # noqa: E731
                exact = gauge_transform_nonabelian(_su2_field, lambda q, f=lam: expm(1j * g * f(q)), g)(p)
                first = infinitesimal_gauge_transform(_su2_field, lam, g)(p)
                res.append(float(np.max(np.abs(exact - first))))
            residuals.append(res)
            ratios.append(res[0] / res[1])
        quadratic = all(3.5 < r < 4.5 for r in ratios)

        def diag_field(point):
            x, y = point["x"], point["y"]
            return np.array([np.diag([math.sin(x * y), x + y * y]), np.diag([x * x * y, math.cos(x)])]).astype(complex)

        def component(i):
            return lambda point: np.real(np.diagonal(diag_field(point), axis1=1, axis2=2)[:, i])

        commuting = 0.0
        for p in pts:
            F = curvature_nonabelian(diag_field, p, "x", "y", g)
            abel = [curvature_abelian(component(i), p, "x", "y") for i in range(2)]
            commuting = max(commuting, float(np.max(np.abs(F - np.diag(abel)))))
        ok = cov <= 1e-5 and quadratic and commuting <= 1e-8
        detail = f"covariance {cov:.1e}, first-order ratio {min(ratios):.2f}-{max(ratios):.2f}, commuting {commuting:.1e}"
        return ok, detail, {"covariance": cov, "ratios": ratios, "commuting": commuting}

    return _timed(6, "non-Abelian gauge structure", body)


# -- 7. phase decomposition ------------------------------------------------------------


def two_level_evolution(T: float, steps: int, psi0=None, r: float = 1.0):
    """Drive the two-level system once around ``phi: 0 -> 2 pi`` in time ``T``.

    Returns the trajectory and its decomposition against the single-valued
    lower eigenstate.
    """
    fam = two_level()
    frame = two_level_frame("-", single_valued=True)
    omega = 2 * math.pi / T

    def hamiltonian(t):
        return eval_hamiltonian(fam, fam.point(r=r, phi=omega * t))

    def reference(t):
        return frame(fam.point(r=r, phi=omega * t))[:, 0]

    psi = reference(0.0) if psi0 is None else psi0
    traj = schrodinger_evolve(hamiltonian, psi, T, steps)
    return traj, phase_decomposition(traj, hamiltonian, reference)


def criterion_7() -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        runs = {
            "adiabatic T=100": (100.0, 40_000, None),
            "fast T=20": (20.0, 20_000, None),
            "superposition T=10": (10.0, 20_000, np.array([math.cos(0.3), 1j * math.sin(0.3)])),
        }
        residual, removed = 0.0, 0.0
        geometric = None
        for name, (T, steps, psi0) in runs.items():
            _, pd = two_level_evolution(T, steps, psi0)
            residual = max(residual, abs(pd.residual))
            removed = max(removed, abs(pd.removed_dynamical))
            if name.startswith("adiabatic"):
                geometric = pd.adiabatic_geometric
        elapsed = time.perf_counter() - t0
        berry = abs(abs(geometric) - math.pi)
        ok = residual <= 1e-6 and removed <= 1e-6 and berry <= 0.05 and elapsed < 30.0
        detail = f"residual {residual:.1e}, removed f {removed:.1e}, |gamma - pi| {berry:.4f}, {elapsed:.1f}s"
        return ok, detail, {"residual": residual, "removed": removed, "berry": berry, "runtime": elapsed}

    return _timed(7, "phase decomposition", body)


# -- 8. anyon closed forms -----------------------------------------------------------------


def criterion_8() -> CriterionResult:
    def body():
        rng = np.random.default_rng(8)
        worst_gamma, worst_charge = 0.0, 0.0
        for _ in range(50):
            nu = float(rng.uniform(1e-3, 1.0))
            R = float(rng.uniform(0.1, 10.0))
            flux = R * R / 2
            gamma = anyons.quasihole_berry_phase(R, nu=nu)
            worst_gamma = max(worst_gamma, abs(gamma - (-2 * math.pi * nu * flux)) / abs(gamma))
            worst_charge = max(worst_charge, abs(anyons.effective_charge(gamma, flux) + nu) / nu)
        ok = worst_gamma <= 4 * np.finfo(float).eps and worst_charge <= 4 * np.finfo(float).eps
        return ok, f"relative errors gamma {worst_gamma:.1e}, e*/e {worst_charge:.1e}", {
            "gamma": worst_gamma,
            "charge": worst_charge,
        }

    return _timed(8, "anyon closed forms", body)


# -- 9. anyon Monte Carlo ---------------------------------------------------------------------

BULK = (0.0, 1.0)  # central disk, farthest from the droplet edge
MC_EDGES = np.linspace(0.0, 8.0, 33)


def laughlin_density(seed: int = MC_SEED, samples: int = 100_000) -> tuple[anyons.MetropolisResult, anyons.DensityEstimate]:
    cfg = anyons.LaughlinConfig(6, 3, seed=seed)
    mc = anyons.metropolis_sample(cfg, samples, burn_in=2000)
    return mc, anyons.density_profile(mc, MC_EDGES, reference=BULK)


def criterion_9() -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        mc, est = laughlin_density()
        target = 1 / (6 * math.pi)
        bulk, err = est.average(*BULK)
        z = (bulk - target) / err
        R = 3.0
        charge = anyons.effective_charge(anyons.quasihole_berry_phase(R, density=est), anyons.flux_ratio(R))
        rel = abs(abs(charge) - 1 / 3) / (1 / 3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = anyons.metropolis_sample(anyons.LaughlinConfig(6, 3, seed=MC_SEED), 500, burn_in=10)
            b = anyons.metropolis_sample(anyons.LaughlinConfig(6, 3, seed=MC_SEED), 500, burn_in=10)
        deterministic = bool(np.array_equal(a.samples, b.samples))
        elapsed = time.perf_counter() - t0
        ok = abs(z) <= 3 and rel <= 0.2 and deterministic and elapsed < 300
        detail = (
            f"bulk {bulk * 6 * math.pi:.3f}/(6 pi) ({z:+.2f} sigma), e*/e {charge:.4f}, "
            f"acceptance {mc.acceptance_rate:.2f}, {elapsed:.0f}s"
        )
        return ok, detail, {"sigma": z, "charge": charge, "relative": rel, "deterministic": deterministic, "runtime": elapsed}

    return _timed(9, "anyon Monte Carlo", body)


# -- 10. gate library ---------------------------------------------------------------------------


def criterion_10() -> CriterionResult:
    def body():
        I4 = np.eye(4)
        g = standard_gates()
        literal_cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        literal_swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
        checks = {
            "CNOT literal": np.array_equal(g["CNOT"], literal_cnot),
            "SWAP literal": np.array_equal(g["SWAP"], literal_swap),
            "CNOT^2 = I": np.array_equal(CNOT @ CNOT, I4),
            "SWAP^2 = I": np.array_equal(SWAP @ SWAP, I4),
            "Pauli": np.array_equal(SIGMA1 @ SIGMA1, np.eye(2)) and np.array_equal(SIGMA1 @ SIGMA2, 1j * SIGMA3),
        }
        phis = np.random.default_rng(10).uniform(-math.pi, math.pi, 20)
        checks["PHASE(phi) PHASE(-phi) = I"] = all(
            np.max(np.abs(phase_gate(p) @ phase_gate(-p) - I4)) <= 2 * np.finfo(float).eps for p in phis
        )
        basis = [ket(b) for b in ("00", "01", "10", "11")]
        checks["basis |ab> = e_(2a+b)"] = all(np.array_equal(v, I4[k]) for k, v in enumerate(basis))
        checks["kron ordering"] = np.array_equal(
            tensor_product(SIGMA1, np.eye(2)) @ ket("01"), ket("11")
        ) and np.array_equal(CNOT @ ket("10"), ket("11"))
        failed = [k for k, v in checks.items() if not v]
        return not failed, "all exact" if not failed else f"failed: {', '.join(failed)}", {"checks": checks}

    return _timed(10, "gate library", body)


CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)


def run_all(quick: bool = False) -> list[CriterionResult]:
    """Run every criterion; ``quick`` skips the Monte Carlo one (number 9)."""
    return [c() for c in CRITERIA if not (quick and c is criterion_9)]
