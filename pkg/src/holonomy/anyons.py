"""Laughlin states, Monte Carlo densities and the quasihole Berry phase.

Lengths are in units of the magnetic length ``l0`` unless stated otherwise,
and ``hbar = c = e = 1`` so that the flux quantum is ``2 pi`` and
``l0**2 = 1 / B``. Electron positions use the lowest-Landau-level convention
``z = x - i y``. Amplitudes are never normalized; only ratios and Monte Carlo
expectations are formed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class LaughlinConfig:
    n_electrons: int
    m: int
    l0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_electrons < 2:
            raise ValueError("need at least two electrons")
        if self.m < 1 or int(self.m) != self.m:
            raise ValueError("m must be a positive integer")
        if not self.l0 > 0:
            raise ValueError("l0 must be positive")

    @property
    def filling(self) -> float:
        return 1.0 / self.m

    @property
    def droplet_radius(self) -> float:
        """Radius of a uniform disk at filling ``1/m`` holding all electrons."""
        return math.sqrt(2.0 * self.m * self.n_electrons) * self.l0


def positions_from_xy(xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=float)
    return xy[..., 0] - 1j * xy[..., 1]


def xy_from_positions(z) -> np.ndarray:
    z = np.asarray(z)
    return np.stack([z.real, -z.imag], axis=-1)


def log_amplitude(config: LaughlinConfig, z) -> complex:
    """``log psi_m``; ``-inf`` when two electrons coincide."""
    z = np.asarray(z, dtype=complex)
    j, k = np.triu_indices(len(z), 1)
    diff = z[j] - z[k]
    if np.any(diff == 0):
        return complex(-math.inf, 0.0)
    gauss = np.sum(np.abs(z) ** 2) / (4.0 * config.l0**2)
    return complex(config.m * np.sum(np.log(diff)) - gauss)


def log_amplitude_quasihole(config: LaughlinConfig, z, z0: complex) -> complex:
    """``log(prod_i (z_i - z0) psi_m)``, normalization omitted."""
    z = np.asarray(z, dtype=complex)
    base = log_amplitude(config, z)
    d = z - z0
    if math.isinf(base.real) or np.any(d == 0):
        return complex(-math.inf, 0.0)
    return base + complex(np.sum(np.log(d)))


@dataclass
class MetropolisResult:
    samples: np.ndarray
    acceptance_rate: float
    config: LaughlinConfig
    z0: complex | None


def metropolis_sample(
    config: LaughlinConfig,
    n_samples: int,
    z0: complex | None = None,
    burn_in: int = 1000,
    step: float | None = None,
    seed: int | None = None,
) -> MetropolisResult:
    """Sample ``|psi|^2`` with single-electron Gaussian moves.

    One sample is recorded after every sweep (one proposed move per
    electron). ``step`` is the standard deviation of each Cartesian
    component of a move; it defaults to ``1.5 * l0``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    step = 1.5 * config.l0 if step is None else step
    if not step > 0:
        raise ValueError("proposal step must be positive")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n, m = config.n_electrons, config.m
    inv4l2 = 1.0 / (4.0 * config.l0**2)
    has_hole = z0 is not None
    hole = complex(z0) if has_hole else 0j

    # start from a uniform disk of the droplet's size
    radius = config.droplet_radius * np.sqrt(rng.random(n))
    angle = 2 * math.pi * rng.random(n)
    z = [complex(r * math.cos(a), -r * math.sin(a)) for r, a in zip(radius, angle)]

    def log_weight(i: int, zi: complex) -> float:
        # part of log|psi| that depends on electron i
        w = -abs(zi) ** 2 * inv4l2
        for k in range(n):
            if k != i:
                d = abs(zi - z[k])
                if d == 0.0:
                    return -math.inf
                w += m * math.log(d)
        if has_hole:
            d = abs(zi - hole)
            if d == 0.0:
                return -math.inf
            w += math.log(d)
        return w

    samples = np.empty((n_samples, n), dtype=complex)
    accepted = 0
    proposed = 0
    total = burn_in + n_samples
    for sweep in range(total):
        moves = rng.normal(0.0, step, size=(n, 2))
        logu = np.log(rng.random(n))
        for i in range(n):
            new = z[i] + complex(moves[i, 0], -moves[i, 1])
            delta = 2.0 * (log_weight(i, new) - log_weight(i, z[i]))
            if sweep >= burn_in:
                proposed += 1
            if logu[i] < delta:
                z[i] = new
                if sweep >= burn_in:
                    accepted += 1
        if sweep >= burn_in:
            samples[sweep - burn_in] = z
    rate = accepted / proposed
    if not 0.05 <= rate <= 0.95:
        hint = "decrease" if rate < 0.05 else "increase"
        warnings.warn(f"Metropolis acceptance rate {rate:.3f} outside [0.05, 0.95]; {hint} the proposal step")
    return MetropolisResult(samples, rate, config, z0)


@dataclass
class DensityEstimate:
    """Radial one-particle density with batch-means standard errors.

    ``edges`` are bin edges in units of ``l0``; ``density`` is per unit area
    (in ``l0**-2``). ``batch_density`` holds the per-batch estimates used for
    the errors. ``rho0`` is the average over the ``reference`` annulus.
    """

    edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    batch_density: np.ndarray
    n_samples: int
    l0: float = 1.0
    reference: tuple[float, float] | None = None
    n_electrons: int | None = None

    def __post_init__(self):
        if self.reference is None:
            r_max = float(self.edges[-1])
            self.reference = (float(self.edges[np.searchsorted(self.edges, 0.5 * r_max)]), r_max)
        if self.n_electrons is None:
            self.n_electrons = int(round(self.density @ self.areas))

    @property
    def rho0(self) -> float:
        return self.average(*self.reference)[0]

    @property
    def rho0_stderr(self) -> float:
        return self.average(*self.reference)[1]

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def areas(self) -> np.ndarray:
        return math.pi * (self.edges[1:] ** 2 - self.edges[:-1] ** 2)

    @property
    def empty_bins(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.density == 0)]

    def average(self, r_lo: float, r_hi: float) -> tuple[float, float]:
        """Area-weighted mean density over whole bins in ``[r_lo, r_hi]`` and its error."""
        mask = (self.edges[:-1] >= r_lo - 1e-12) & (self.edges[1:] <= r_hi + 1e-12)
        if not mask.any():
            raise ValueError(f"no whole bins inside [{r_lo}, {r_hi}]")
        w = self.areas[mask] / self.areas[mask].sum()
        per_batch = self.batch_density[:, mask] @ w
        return float(self.density[mask] @ w), _batch_error(per_batch)

    def enclosed(self, R: float) -> tuple[float, float]:
        """Expected number of electrons within radius ``R`` (in ``l0``), and its error."""
        if R > self.edges[-1] + 1e-12:
            raise ValueError(f"R = {R} lies beyond the density grid (max {self.edges[-1]})")
        lo = self.edges[:-1]
        hi = np.minimum(self.edges[1:], R)
        covered = np.where(hi > lo, math.pi * (hi**2 - lo**2), 0.0)
        per_batch = self.batch_density @ covered
        return float(self.density @ covered), _batch_error(per_batch)

    def total(self) -> tuple[float, float]:
        """Integrated count over the whole grid, and its error."""
        return self.enclosed(float(self.edges[-1]))

    def empty_in(self, r_lo: float, r_hi: float) -> list[int]:
        """Indices of empty bins lying inside ``[r_lo, r_hi]``."""
        return [i for i in self.empty_bins if self.edges[i] >= r_lo - 1e-12 and self.edges[i + 1] <= r_hi + 1e-12]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_center_in_l0", "density", "stderr"])
            for c, d, e in zip(self.centers, self.density, self.stderr):
                writer.writerow([f"{c:.6g}", f"{d:.10g}", f"{e:.10g}"])


def _batch_error(values: np.ndarray) -> float:
    if len(values) < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def density_profile(
    samples,
    edges,
    center: complex = 0j,
    l0: float = 1.0,
    batches: int = 20,
    reference: tuple[float, float] | None = None,
) -> DensityEstimate:
    """Histogram estimate of the radial density around ``center``.

    ``samples`` is ``(n_samples, n_electrons)`` complex positions (or a
    :class:`MetropolisResult`). Errors come from ``batches`` batch means,
    which absorbs the chain's autocorrelation when batches are long.
    ``reference`` is the annulus (in ``l0``) defining ``rho0``; it defaults
    to the outer half of the grid. Empty bins inside it trigger a warning.
    """
    if isinstance(samples, MetropolisResult):
        l0 = samples.config.l0
        samples = samples.samples
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 1000:
        raise ValueError("density_profile needs at least 1000 samples")
    edges = np.asarray(edges, dtype=float)
    r = np.abs(samples - center) / l0
    areas = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    batch_density = np.empty((batches, len(edges) - 1))
    for b, chunk in enumerate(np.array_split(r, batches)):
        counts, _ = np.histogram(chunk.ravel(), bins=edges)
        batch_density[b] = counts / (len(chunk) * areas)
    counts, _ = np.histogram(r.ravel(), bins=edges)
    density = counts / (n * areas)
    est = DensityEstimate(
        edges, density, _column_errors(batch_density), batch_density, n, l0, reference, samples.shape[1]
    )
    empty = est.empty_in(*est.reference)
    if empty:
        warnings.warn(f"empty density bins {empty} inside the reference annulus {est.reference}")
    return est


def merge_estimates(estimates) -> DensityEstimate:
    """Combine independent chains on the same grid, weighting by sample count."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("nothing to merge")
    first = estimates[0]
    for e in estimates[1:]:
        if not np.array_equal(e.edges, first.edges):
            raise ValueError("density estimates use different radial grids")
    weights = np.array([e.n_samples for e in estimates], float)
    density = sum(w * e.density for w, e in zip(weights, estimates)) / weights.sum()
    # batches of every chain, each weighted by its chain's share
    batch = np.vstack([e.batch_density for e in estimates])
    bw = np.concatenate([np.full(len(e.batch_density), w / len(e.batch_density)) for w, e in zip(weights, estimates)])
    bw = bw / bw.sum()
    var = np.sum(bw[:, None] ** 2 * (batch - density) ** 2, axis=0) * len(bw) / max(len(bw) - 1, 1)
    return DensityEstimate(
        first.edges,
        density,
        np.sqrt(var),
        batch,
        int(weights.sum()),
        first.l0,
        first.reference,
        first.n_electrons,
    )


def _column_errors(batch_density: np.ndarray) -> np.ndarray:
    return np.std(batch_density, axis=0, ddof=1) / math.sqrt(batch_density.shape[0])


def uniform_enclosed(nu: float, R: float, l0: float = 1.0) -> float:
    """``<n>_R = nu * Phi/Phi0`` for a uniform density ``nu / (2 pi l0^2)``."""
    return nu * flux_ratio(R, l0)


def flux_ratio(R: float, l0: float = 1.0) -> float:
    """Flux quanta through a disk of radius ``R``: ``R^2 / (2 l0^2)``."""
    return R * R / (2.0 * l0 * l0)


def quasihole_berry_phase(
    R: float,
    *,
    nu: float | None = None,
    density: DensityEstimate | None = None,
    l0: float = 1.0,
) -> float:
    """Berry phase of a quasihole taken once around a circle of radius ``R``.

    Each enclosed electron contributes ``2 pi i`` to the loop integral of
    ``d ln(z - z0)``, so ``gamma = -2 pi <n>_R``. ``<n>_R`` comes from a
    uniform filling ``nu`` or from a Monte Carlo ``density`` estimate
    (radius in units of ``l0``).
    """
    if R < 0:
        raise ValueError("R must be non-negative")
    if (nu is None) == (density is None):
        raise ValueError("give exactly one of nu (uniform mode) or density (estimated mode)")
    if nu is not None:
        if not 0 < nu <= 1:
            raise ValueError("filling factor must lie in (0, 1]")
        return -2.0 * math.pi * uniform_enclosed(nu, R, l0)
    count, _ = density.enclosed(R / l0)
    return -2.0 * math.pi * count


def effective_charge(gamma: float, flux: float) -> float:
    """``e*/e`` from matching ``gamma`` to an Aharonov-Bohm phase ``2 pi (e*/e) Phi/Phi0``."""
    if flux == 0:
        raise ValueError("flux ratio must be non-zero")
    if flux < 0:
        raise ValueError("flux ratio must be positive")
    return gamma / (2.0 * math.pi * flux)


@dataclass(frozen=True)
class LandauReport:
    degeneracy: float
    filling: float
    filling_from_density: float
    density: float
    flux_ratio: float
    flux_ratio_from_l0: float
    enclosed_direct: float
    enclosed_chain: float

    @property
    def consistent(self) -> bool:
        return (
            math.isclose(self.filling, self.filling_from_density, rel_tol=1e-12)
            and math.isclose(self.flux_ratio, self.flux_ratio_from_l0, rel_tol=1e-12)
            and math.isclose(self.enclosed_direct, self.enclosed_chain, rel_tol=1e-12)
        )


def landau_relations(area: float, l0: float, n_electrons: float, B: float | None = None) -> LandauReport:
    """Landau-level bookkeeping for ``n_electrons`` on ``area`` at field ``B``.

    With ``hbar = c = e = 1``: ``Phi0 = 2 pi`` and ``l0^2 = 1/B``; ``B``
    defaults to ``1/l0^2``. ``enclosed_direct`` is ``n0 * S`` and
    ``enclosed_chain`` is ``nu * S / (2 pi l0^2)``; they agree whenever the
    inputs are consistent.
    """
    if min(area, l0, n_electrons) <= 0 or (B is not None and B <= 0):
        raise ValueError("inputs must be positive")
    B = 1.0 / l0**2 if B is None else B
    degeneracy = area / (2 * math.pi * l0**2)
    nu = n_electrons / degeneracy
    n0 = n_electrons / area
    flux = B * area / (2 * math.pi)
    return LandauReport(
        degeneracy=degeneracy,
        filling=nu,
        filling_from_density=2 * math.pi * l0**2 * n0,
        density=n0,
        flux_ratio=flux,
        flux_ratio_from_l0=area / (2 * math.pi * l0**2),
        enclosed_direct=n0 * area,
        enclosed_chain=nu * flux,
    )


def droplet_area(n_electrons: int, m: int, l0: float = 1.0) -> float:
    """Area whose orbital count satisfies ``m (N_e - 1) = N(s) - 1``."""
    return 2 * math.pi * l0**2 * (m * (n_electrons - 1) + 1)
