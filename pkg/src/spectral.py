"""
Spectral functions of the donor and acceptor
Decay rates, energy shifts, bath correlation functions, emission densities,
self-consistent renormalized frequencies and the overlap efficiency.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar

from config import settings
from src.errors import (ConvergenceError, DegenerateInputError, DomainError,
                        ParameterError, QuadratureError)
from src.network_model import ACCEPTOR, DONOR, BathSpectrum, SinkParameters, SystemPartition
from src.quadrature import QuadratureWindow, default_window, integrate

logger = logging.getLogger(__name__)

OWNERS = {DONOR: "donor", ACCEPTOR: "acceptor"}
ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Coupling weights |⟨α|g_j⟩|², energies ε_α and rates Γ_α seen by site j"""

    owner: int
    weights: np.ndarray
    energies: np.ndarray
    rates: np.ndarray
    bare_frequency: float

    def __post_init__(self):
        arrays = {}
        for name in ("weights", "energies", "rates"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        if self.owner not in OWNERS:
            raise ParameterError(f"owner must be donor (0) or acceptor (1), got {self.owner}")
        if not (arrays["weights"].size == arrays["energies"].size == arrays["rates"].size):
            raise ParameterError("weights, energies and rates must have equal length")
        if np.any(arrays["weights"] < 0) or np.any(arrays["rates"] <= 0):
            raise ParameterError("weights must be nonnegative and rates strictly positive")
        if not math.isfinite(self.bare_frequency):
            raise ParameterError("bare frequency must be finite")

    @property
    def name(self) -> str:
        return OWNERS[self.owner]

    @property
    def coupling_strength(self) -> float:
        """‖g_j‖²"""
        return float(np.sum(self.weights))

    def default_window(self) -> QuadratureWindow:
        return default_window(np.append(self.energies, self.bare_frequency), self.rates)


def build_profiles(part: SystemPartition, spectrum: BathSpectrum) -> Tuple[SpectralProfile, SpectralProfile]:
    donor = SpectralProfile(DONOR, spectrum.weights_donor, spectrum.eigenvalues,
                            spectrum.rates, part.donor_energy)
    acceptor = SpectralProfile(ACCEPTOR, spectrum.weights_acceptor, spectrum.eigenvalues,
                               spectrum.rates, part.acceptor_energy)
    return donor, acceptor


def joint_window(profiles: Sequence[SpectralProfile]) -> QuadratureWindow:
    energies = np.concatenate([np.append(p.energies, p.bare_frequency) for p in profiles])
    rates = np.concatenate([p.rates for p in profiles])
    return default_window(energies, rates)


def _scalar_or_array(values: np.ndarray, omega: ArrayLike):
    return values.item() if np.ndim(omega) == 0 else values


def _lorentz_terms(profile: SpectralProfile, omega: ArrayLike):
    x = np.asarray(omega, dtype=float)[..., None] - profile.energies
    return x, x * x + profile.rates ** 2


def decay_rate(profile: SpectralProfile, omega: ArrayLike) -> ArrayLike:
    """γ_j(ω) = Σ_α w_α Γ_α / ((ω−ε_α)² + Γ_α²)"""
    _, denominator = _lorentz_terms(profile, omega)
    values = (profile.weights * profile.rates / denominator).sum(axis=-1)
    return _scalar_or_array(values, omega)


def energy_shift(profile: SpectralProfile, omega: ArrayLike) -> ArrayLike:
    """δ_j(ω) = Σ_α w_α (ω−ε_α) / ((ω−ε_α)² + Γ_α²)"""
    x, denominator = _lorentz_terms(profile, omega)
    values = (profile.weights * x / denominator).sum(axis=-1)
    return _scalar_or_array(values, omega)


def correlation_function(profile: SpectralProfile, t: ArrayLike) -> ArrayLike:
    """G_jj(t) = Σ_α w_α exp(−iε_α t − Γ_α t) for t ≥ 0"""
    times = np.asarray(t, dtype=float)
    if np.any(times < 0):
        raise DomainError("correlation function is defined for t >= 0 only")
    exponent = -(1j * profile.energies + profile.rates) * times[..., None]
    values = (profile.weights * np.exp(exponent)).sum(axis=-1)
    return _scalar_or_array(values, t)


def laplace_transform(profile: SpectralProfile, omega: float,
                      horizon: Optional[float] = None, tolerance: float = 1e-10) -> complex:
    """Numerical ∫₀^T e^{iωt} G_jj(t) dt, T defaulting to 20/Γ_min"""
    horizon = horizon or 20.0 / float(np.min(profile.rates))
    window = QuadratureWindow(0.0, horizon, 1e-4)
    result = integrate(lambda t: np.exp(1j * omega * t) * correlation_function(profile, t),
                       window, tolerance=tolerance)
    return complex(result.value)


def spectral_density(profile: SpectralProfile, omega: ArrayLike) -> ArrayLike:
    """Un-normalized f_j(ω) = γ_j / (π [(ω − ω_j − δ_j)² + γ_j²])"""
    gamma = np.asarray(decay_rate(profile, omega))
    delta = np.asarray(energy_shift(profile, omega))
    detuning = np.asarray(omega, dtype=float) - profile.bare_frequency - delta
    denominator = detuning ** 2 + gamma ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(gamma > 0, gamma / (np.pi * denominator), 0.0)
    return _scalar_or_array(np.asarray(values), omega)


@dataclass(frozen=True, eq=False)
class NormalizedDensity:
    """Density evaluator rescaled to unit mass over its window"""

    raw: Callable[[np.ndarray], np.ndarray]
    scale: float
    window: Optional[QuadratureWindow] = None
    peaks: Tuple[float, ...] = ()
    label: str = ""

    def __call__(self, omega: ArrayLike) -> ArrayLike:
        return self.scale * np.asarray(self.raw(omega))

    @property
    def normalization(self) -> float:
        """∫_window raw dω"""
        return 1.0 / self.scale

    @classmethod
    def lorentzian(cls, center: float, width: float, label: str = "lorentzian") -> "NormalizedDensity":
        """Analytically normalized Lorentzian on the whole real line"""
        if not width > 0:
            raise ParameterError("Lorentzian width must be positive")

        def raw(omega):
            x = np.asarray(omega, dtype=float) - center
            return width / (np.pi * (x * x + width * width))

        return cls(raw=raw, scale=1.0, peaks=(center,), label=label)


DensitySource = Union[SpectralProfile, Callable[[np.ndarray], np.ndarray]]


def normalize_density(source: DensitySource, window: QuadratureWindow,
                      breakpoints: Iterable[float] = ()) -> NormalizedDensity:
    if isinstance(source, SpectralProfile):
        profile = source
        raw = lambda omega: spectral_density(profile, omega)  # noqa: E731
        peaks = tuple(profile.energies) + (profile.bare_frequency,) + tuple(breakpoints)
        label = profile.name
    else:
        raw = source
        peaks = tuple(breakpoints)
        label = getattr(source, "__name__", "density")

    mass = integrate(raw, window, peaks).value.real
    if not mass > window.absolute_tolerance:
        raise DegenerateInputError(f"{label} density integrates to {mass:.3g} over the window")
    logger.debug("Normalization of %s density: %.12g", label, mass)
    return NormalizedDensity(raw=raw, scale=1.0 / mass, window=window, peaks=peaks, label=label)


@dataclass(frozen=True)
class SelfConsistentSolution:
    frequency: float
    residual: float
    roots: Tuple[float, ...]
    fixed_point_converged: bool


def solve_self_consistent(bare_frequency: float, shift: Callable[[ArrayLike], ArrayLike],
                          window: QuadratureWindow) -> SelfConsistentSolution:
    """
    Solve ω = ω_j + δ(ω): damped fixed-point iteration from ω_j, then a sign-change
    scan of g(ω) = ω − ω_j − δ(ω) over the window refined by Brent's method. The
    root nearest ω_j is selected; all roots are reported.
    """
    def g(omega):
        omega = np.asarray(omega, dtype=float)
        return omega - bare_frequency - np.broadcast_to(shift(omega), omega.shape)

    damping = settings.ROOT_DAMPING
    omega = float(bare_frequency)
    converged = False
    for _ in range(settings.ROOT_MAX_ITERATIONS):
        update = float(bare_frequency + np.asarray(shift(omega)))
        if not math.isfinite(update):
            break
        omega = (1.0 - damping) * omega + damping * update
        if abs(float(g(omega))) < settings.ROOT_TOLERANCE:
            converged = True
            break

    lower = min(window.lower, bare_frequency)
    upper = max(window.upper, bare_frequency)
    grid = np.linspace(lower, upper, settings.ROOT_SCAN_POINTS)
    values = g(grid)
    roots: List[float] = [float(x) for x, v in zip(grid, values) if v == 0.0]
    crossings = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)
    for k in crossings:
        roots.append(float(brentq(lambda x: float(g(x)), grid[k], grid[k + 1], xtol=1e-13)))
    if converged:
        roots.append(omega)

    if not roots:
        residual = float(np.min(np.abs(values)))
        raise ConvergenceError("no solution of the self-consistent frequency equation",
                               (lower, upper), residual)

    # near-duplicates collapse onto the candidate with the smallest |g|
    roots = sorted(set(roots))
    merged: List[float] = []
    for root in roots:
        if merged and abs(root - merged[-1]) <= 1e-6:
            if abs(float(g(root))) < abs(float(g(merged[-1]))):
                merged[-1] = root
        else:
            merged.append(root)
    best = min(merged, key=lambda r: (abs(r - bare_frequency), r))
    residual = abs(float(g(best)))
    if residual >= settings.ROOT_TOLERANCE:
        raise ConvergenceError("self-consistent frequency residual above tolerance",
                               (lower, upper), residual)
    return SelfConsistentSolution(best, residual, tuple(merged), converged)


def renormalized_frequency(profile: SpectralProfile,
                           window: Optional[QuadratureWindow] = None) -> float:
    return solve_renormalized(profile, window).frequency


def solve_renormalized(profile: SpectralProfile,
                       window: Optional[QuadratureWindow] = None) -> SelfConsistentSolution:
    window = window or profile.default_window()
    solution = solve_self_consistent(profile.bare_frequency,
                                     lambda omega: energy_shift(profile, omega), window)
    logger.debug("%s renormalized frequency %.6f (roots %s)", profile.name,
                 solution.frequency, [round(r, 4) for r in solution.roots])
    return solution


@dataclass(frozen=True)
class LorentzianParameters:
    frequency: float
    width: float
    roots: Tuple[float, ...] = ()


def lorentzian_parameters(profile: SpectralProfile,
                          window: Optional[QuadratureWindow] = None) -> LorentzianParameters:
    """(ω_jʳ, γ_j(ω_jʳ)) of the Lorentzian approximation"""
    solution = solve_renormalized(profile, window)
    width = float(decay_rate(profile, solution.frequency))
    if not (width > 0 and math.isfinite(width)):
        raise DegenerateInputError(f"{profile.name} has vanishing width at its renormalized frequency")
    return LorentzianParameters(solution.frequency, width, solution.roots)


def _product(f1: NormalizedDensity, f2: NormalizedDensity):
    return lambda omega: np.sqrt(np.clip(np.asarray(f1(omega)) * np.asarray(f2(omega)), 0.0, None))


def overlap_efficiency(f1: NormalizedDensity, f2: NormalizedDensity,
                       window: QuadratureWindow) -> float:
    """𝓕 = [∫ √(f₁f₂) dω]² over the window"""
    peaks = sorted(set(f1.peaks) | set(f2.peaks))
    result = integrate(_product(f1, f2), window, peaks)
    value = float(result.value.real) ** 2
    if value > 1.0:
        if value - 1.0 <= settings.OVERLAP_CLAMP:
            return 1.0
        raise QuadratureError(f"overlap {value:.9f} exceeds 1", result.error, window.absolute_tolerance)
    return value


@dataclass(frozen=True)
class ResonanceSummary:
    renorm_donor: float
    renorm_acceptor: float
    width_donor: float
    width_acceptor: float
    resonance_frequency: float
    effective_width: float
    detuning: float
    bare_detuning: float = 0.0
    roots_donor: Tuple[float, ...] = field(default=())
    roots_acceptor: Tuple[float, ...] = field(default=())


def resonance_peak(f1: NormalizedDensity, f2: NormalizedDensity,
                   window: QuadratureWindow, points: int = 20001) -> Tuple[float, float]:
    """Location of the maximum of √(f₁f₂) and half its full width at half maximum"""
    product = _product(f1, f2)
    grid = window.grid(points)
    values = product(grid)
    k = int(np.argmax(values))
    peak_value = float(values[k])
    if not peak_value > 0 or peak_value - float(np.min(values)) <= 1e-12 * peak_value:
        raise DegenerateInputError("product density is flat over the window")

    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    refined = minimize_scalar(lambda x: -float(product(x)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-9 * max(1.0, abs(grid[k]))})
    omega0 = float(refined.x) if -refined.fun >= peak_value else float(grid[k])
    peak_value = max(peak_value, float(product(omega0)))
    half = 0.5 * peak_value

    def crossing(indices):
        for i in indices:
            a, b = grid[i], grid[i + 1]
            if (values[i] - half) * (values[i + 1] - half) <= 0:
                return float(brentq(lambda x: float(product(x)) - half, a, b, xtol=1e-10))
        raise DegenerateInputError("half maximum of the product density lies outside the window")

    left = crossing(range(k - 1, -1, -1))
    right = crossing(range(k, points - 1))
    return omega0, 0.5 * (right - left)


def resonance_summary(donor: SpectralProfile, acceptor: SpectralProfile,
                      window: Optional[QuadratureWindow] = None,
                      densities: Optional[Tuple[NormalizedDensity, NormalizedDensity]] = None
                      ) -> ResonanceSummary:
    window = window or joint_window([donor, acceptor])
    p1 = lorentzian_parameters(donor, window)
    p2 = lorentzian_parameters(acceptor, window)
    if densities is None:
        densities = (normalize_density(donor, window, (p1.frequency,)),
                     normalize_density(acceptor, window, (p2.frequency,)))
    omega0, width = resonance_peak(densities[0], densities[1], window)
    return ResonanceSummary(
        renorm_donor=p1.frequency,
        renorm_acceptor=p2.frequency,
        width_donor=p1.width,
        width_acceptor=p2.width,
        resonance_frequency=omega0,
        effective_width=width,
        detuning=abs(p1.frequency - p2.frequency),
        bare_detuning=abs(donor.bare_frequency - acceptor.bare_frequency),
        roots_donor=p1.roots,
        roots_acceptor=p2.roots,
    )


@dataclass(frozen=True)
class ApetCheck:
    frequency_mismatch: float
    width_mismatch: float
    satisfied: bool


def apet_condition(summary: ResonanceSummary, frequency_tolerance: float = 10.0,
                   width_tolerance: float = 10.0) -> ApetCheck:
    """Resonance condition ω₁ʳ = ω₂ʳ and γ₁ = γ₂ within the given tolerances (cm⁻¹)"""
    df = abs(summary.renorm_donor - summary.renorm_acceptor)
    dw = abs(summary.width_donor - summary.width_acceptor)
    return ApetCheck(df, dw, df <= frequency_tolerance and dw <= width_tolerance)


def sink_dominance(sink: SinkParameters, width: float, factor: float = 3.0) -> dict:
    """Whether |h₂,N+1| and Γ_N+1 exceed the resonance width by the given factor"""
    return {
        "coupling_over_width": sink.acceptor_sink_coupling / width,
        "rate_over_width": sink.sink_rate / width,
        "coupling_dominates": sink.acceptor_sink_coupling >= factor * width,
        "rate_dominates": sink.sink_rate >= factor * width,
    }


def heating_estimate(donor_energy: float, acceptor_energy: float) -> dict:
    """Energy per exciton a downhill relaxation model would leave in the vibrations"""
    gap = abs(donor_energy - acceptor_energy)
    return {"energy_cm": gap, "energy_kelvin": gap * settings.KELVIN_PER_INVERSE_CM}


def spectra_table(donor: SpectralProfile, acceptor: SpectralProfile,
                  f1: NormalizedDensity, f2: NormalizedDensity, grid: np.ndarray) -> pd.DataFrame:
    """Columns omega, gamma1, gamma2, delta1, delta2, f1, f2, sqrt_f1f2"""
    d1, d2 = np.asarray(f1(grid)), np.asarray(f2(grid))
    return pd.DataFrame({
        "omega": grid,
        "gamma1": decay_rate(donor, grid),
        "gamma2": decay_rate(acceptor, grid),
        "delta1": energy_shift(donor, grid),
        "delta2": energy_shift(acceptor, grid),
        "f1": d1,
        "f2": d2,
        "sqrt_f1f2": np.sqrt(d1 * d2),
    })
