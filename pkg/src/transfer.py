"""
Phase-limited transfer probability and the bouncing-exciton efficiency

Times are in reciprocal-cm⁻¹ units (ω·t is a phase); the CLI converts to ps.
Phase convention: θ(ω; t₀) = 2 arctan((ω−ω₀)/γ) + (τ(ω) − t₀)(ω−ω₀), which puts
the constant-τ optimum at t₀ = τ + 1/γ.
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import minimize, minimize_scalar

from src.errors import DomainError, ParameterError, QuadratureError, SearchError
from src.quadrature import QuadratureWindow, integrate
from src.spectral import NormalizedDensity

logger = logging.getLogger(__name__)

ARRIVAL_SCAN_POINTS = 41
QUADRATIC_ARRIVAL_POINTS = 21
KAPPA_SCAN_POINTS = 16
# scan budget per phase integral; oscillations beyond it count as failed points
SCAN_MAX_INTERVALS = 2048
# scans with a larger share of failed quadratures are rejected
MAX_FAILED_FRACTION = 0.75


class PhaseModel(BaseModel):
    """ω₀, γ, the propagation-time model τ(ω) = τ₀ + κ(ω−ω₀)² and the arrival time t₀"""

    model_config = ConfigDict(frozen=True)

    resonance_frequency: float = Field(allow_inf_nan=False)
    width: float = Field(gt=0.0, allow_inf_nan=False)
    tau_model: Literal["constant", "quadratic"] = "constant"
    tau_propagation: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)
    curvature: float = Field(default=0.0, allow_inf_nan=False)
    arrival_time: Optional[float] = Field(default=None, allow_inf_nan=False)

    @field_validator("curvature")
    @classmethod
    def _constant_has_no_curvature(cls, value, info):
        if info.data.get("tau_model") == "constant" and value != 0.0:
            raise ValueError("a constant propagation time has zero curvature")
        return value

    def propagation_time(self, omega):
        x = np.asarray(omega, dtype=float) - self.resonance_frequency
        return self.tau_propagation + self.curvature * x * x

    def at(self, arrival_time: float, curvature: Optional[float] = None) -> "PhaseModel":
        update = {"arrival_time": float(arrival_time)}
        if curvature is not None:
            update["curvature"] = float(curvature)
        return self.model_copy(update=update)


class BounceParameters(BaseModel):
    """Single-shot dissipation p, per-flight recombination q and bounce count n (∞ allowed)"""

    model_config = ConfigDict(frozen=True)

    p: float = Field(ge=0.0, le=1.0)
    q: float = Field(ge=0.0, le=1.0)
    n: float = 1

    @field_validator("n")
    @classmethod
    def _positive_count(cls, value):
        if math.isinf(value) and value > 0:
            return value
        if value < 1 or value != int(value):
            raise ValueError(f"bounce count must be a positive integer or infinity, got {value}")
        return value

    @property
    def finite(self) -> bool:
        return not math.isinf(self.n)


def phase(model: PhaseModel, omega):
    if model.arrival_time is None:
        raise ParameterError("phase needs an arrival time t0")
    x = np.asarray(omega, dtype=float) - model.resonance_frequency
    theta = 2.0 * np.arctan(x / model.width) + (model.propagation_time(omega) - model.arrival_time) * x
    return theta.item() if np.ndim(omega) == 0 else theta


def transfer_probability(f1: NormalizedDensity, f2: NormalizedDensity, model: Optional[PhaseModel],
                         window: QuadratureWindow, max_intervals: Optional[int] = None) -> float:
    """𝒫₁₂ = |∫ e^{iθ(ω;t₀)} √(f₁f₂) dω|²; model None means θ ≡ 0"""
    def integrand(omega):
        amplitude = np.sqrt(np.clip(np.asarray(f1(omega)) * np.asarray(f2(omega)), 0.0, None))
        if model is None:
            return amplitude
        return amplitude * np.exp(1j * phase(model, omega))

    peaks = set(f1.peaks) | set(f2.peaks)
    if model is not None:
        peaks.add(model.resonance_frequency)
    peaks = sorted(peaks)
    result = integrate(integrand, window, peaks, max_intervals=max_intervals)
    return abs(result.value) ** 2


def matched_lorentzians(resonance_frequency: float, width: float) -> Tuple[NormalizedDensity, NormalizedDensity]:
    f = NormalizedDensity.lorentzian(resonance_frequency, width)
    return f, f


@dataclass(frozen=True)
class ArrivalOptimum:
    arrival_time: float
    probability: float
    curvature: float = 0.0
    unimodal: bool = True
    failed_points: int = 0

    def delay(self, tau_propagation: float) -> float:
        return self.arrival_time - tau_propagation


def is_unimodal(values: np.ndarray, relative_tolerance: float = 1e-6) -> bool:
    """True when the sequence rises then falls, ignoring steps below tolerance × max"""
    values = np.asarray(values, dtype=float)
    steps = np.diff(values)
    significant = np.sign(steps[np.abs(steps) > relative_tolerance * max(np.max(np.abs(values)), 1e-300)])
    if significant.size == 0:
        return False
    falling = np.flatnonzero(significant < 0)
    return falling.size == 0 or bool(np.all(significant[falling[0]:] < 0))


def _scan_arrival(f1, f2, model, window, times, max_intervals):
    values = np.full(times.size, np.nan)
    for i, t0 in enumerate(times):
        try:
            values[i] = transfer_probability(f1, f2, model.at(t0), window, max_intervals)
        except QuadratureError:
            continue
    return values


def _check_scan(values: np.ndarray, best: Tuple[int, ...]) -> int:
    """
    Count failed scan points and reject scans whose optimum cannot be trusted:
    a failed point next to the best one, or more than MAX_FAILED_FRACTION failed.
    """
    failed = np.isnan(values)
    count = int(failed.sum())
    if not count:
        return 0
    around = tuple(slice(max(i - 1, 0), i + 2) for i in best)
    if failed[around].any():
        raise SearchError(f"{count} of {values.size} transfer-probability evaluations failed, "
                          "including points next to the optimum; narrow the window")
    if count > MAX_FAILED_FRACTION * values.size:
        raise SearchError(f"{count} of {values.size} transfer-probability evaluations failed; "
                          "narrow the window")
    logger.warning("%d of %d transfer-probability evaluations failed and were skipped",
                   count, values.size)
    return count


def _golden_arrival(f1, f2, model, window, bracket, tolerance) -> Tuple[float, float]:
    """Bounded golden-section/parabolic maximization of 𝒫₁₂ over t₀"""
    result = minimize_scalar(
        lambda t0: -transfer_probability(f1, f2, model.at(t0), window),
        bounds=bracket, method="bounded", options={"xatol": tolerance},
    )
    return float(result.x), float(-result.fun)


def optimize_arrival(f1: NormalizedDensity, f2: NormalizedDensity, model: PhaseModel,
                     window: QuadratureWindow, bracket: Optional[Tuple[float, float]] = None,
                     kappa_range: Optional[Tuple[float, float]] = None) -> ArrivalOptimum:
    """
    Maximize 𝒫₁₂ over the arrival time, and over κ for the quadratic τ-model.

    The t₀ bracket defaults to [τ₀ − 10/γ, τ₀ + 10/γ]; κ ranges over
    [−50, 50]/γ³ unless given.
    """
    gamma = model.width
    lo, hi = bracket if bracket is not None else (model.tau_propagation - 10.0 / gamma,
                                                   model.tau_propagation + 10.0 / gamma)
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ParameterError(f"arrival-time bracket [{lo}, {hi}] is degenerate")
    tolerance = 1e-4 / gamma

    if model.tau_model == "quadratic":
        return _optimize_quadratic(f1, f2, model, window, (lo, hi), kappa_range, tolerance)

    times = np.linspace(lo, hi, ARRIVAL_SCAN_POINTS)
    values = _scan_arrival(f1, f2, model, window, times, None)
    if np.all(np.isnan(values)):
        raise QuadratureError("transfer probability failed at every arrival time", math.inf,
                              window.absolute_tolerance)
    k = int(np.nanargmax(values))
    failed = _check_scan(values, (k,))
    unimodal = is_unimodal(values[~np.isnan(values)])
    if not unimodal:
        logger.warning("Transfer probability is not unimodal in t0; refining the best grid cell")
    cell = (times[max(k - 1, 0)], times[min(k + 1, times.size - 1)])
    t_best, p_best = _golden_arrival(f1, f2, model, window, cell, tolerance)
    if p_best < values[k]:
        t_best, p_best = float(times[k]), float(values[k])
    return ArrivalOptimum(t_best, p_best, model.curvature, unimodal, failed)


def _kappa_grid(kappa_range: Tuple[float, float], gamma: float) -> np.ndarray:
    lo, hi = kappa_range
    magnitudes = np.geomspace(1e-3, 50.0, KAPPA_SCAN_POINTS) / gamma ** 3
    grid = np.concatenate([-magnitudes[::-1], [0.0], magnitudes])
    grid = grid[(grid >= lo) & (grid <= hi)]
    return np.unique(np.concatenate([grid, [lo, hi]]))


def _optimize_quadratic(f1, f2, model, window, bracket, kappa_range, tolerance) -> ArrivalOptimum:
    gamma = model.width
    kappa_range = kappa_range or (-50.0 / gamma ** 3, 50.0 / gamma ** 3)
    if not kappa_range[0] <= kappa_range[1]:
        raise ParameterError(f"curvature range {kappa_range} is empty")

    times = np.linspace(bracket[0], bracket[1], QUADRATIC_ARRIVAL_POINTS)
    kappas = _kappa_grid(kappa_range, gamma)
    values = np.array([_scan_arrival(f1, f2, model.at(times[0], kappa), window, times, SCAN_MAX_INTERVALS)
                       for kappa in kappas])
    if np.all(np.isnan(values)):
        raise QuadratureError("transfer probability failed over the whole (κ, t₀) scan", math.inf,
                              window.absolute_tolerance)
    i, k = np.unravel_index(int(np.nanargmax(values)), values.shape)
    failed = _check_scan(values, (int(i), int(k)))
    best = (float(values[i, k]), float(kappas[i]), float(times[k]))
    logger.debug("Coarse (κ, t0) optimum %.6g at κ=%.4g, t0=%.4g", *best)

    # polish in dimensionless coordinates (κγ³, t₀γ)
    scale = np.array([gamma ** 3, gamma])

    def objective(u):
        kappa, t0 = u / scale
        if not (kappa_range[0] <= kappa <= kappa_range[1] and bracket[0] <= t0 <= bracket[1]):
            return 0.0
        try:
            return -transfer_probability(f1, f2, model.at(t0, kappa), window, SCAN_MAX_INTERVALS)
        except QuadratureError:
            return 0.0

    start = np.array([best[1], best[2]]) * scale
    simplex = np.array([start, start + [0.5 * abs(start[0]) + 1e-3, 0.0], start + [0.0, 0.25]])
    result = minimize(objective, start, method="Nelder-Mead",
                      options={"initial_simplex": simplex, "xatol": 1e-6, "fatol": 1e-12})
    kappa, t0 = result.x / scale
    probability = -float(result.fun)
    if probability < best[0]:
        probability, kappa, t0 = best

    t_cell = (max(bracket[0], t0 - 0.5 / gamma), min(bracket[1], t0 + 0.5 / gamma))
    t_refined, p_refined = _golden_arrival(f1, f2, model.at(t0, kappa), window, t_cell, tolerance)
    if p_refined >= probability:
        t0, probability = t_refined, p_refined
    return ArrivalOptimum(float(t0), float(probability), float(kappa), True, failed)


def single_shot_probability(overlap: float, phase_factor: float) -> float:
    """p = 𝓕 × (𝒫₁₂/𝓕)"""
    for name, value in (("overlap", overlap), ("phase factor", phase_factor)):
        if not 0.0 <= value <= 1.0:
            raise ParameterError(f"{name} must lie in [0, 1], got {value}")
    return overlap * phase_factor


def _escape(p: float, q: float) -> float:
    """1 − (1−q)²(1−p), written without cancellation"""
    return p + (1.0 - p) * q * (2.0 - q)


def bounce_efficiency(bp: BounceParameters) -> float:
    """η(n) = p(1−q)(1 − [(1−q)²(1−p)]ⁿ) / (1 − (1−q)²(1−p))"""
    if not bp.finite:
        raise DomainError("bounce_efficiency needs a finite bounce count; use asymptotic_efficiency")
    p, q, n = bp.p, bp.q, int(bp.n)
    if p == 0.0:
        return 0.0
    ratio = (1.0 - q) ** 2 * (1.0 - p)
    remaining = 1.0 if ratio == 0.0 else -math.expm1(n * math.log(ratio))
    return p * (1.0 - q) * remaining / _escape(p, q)


@dataclass(frozen=True)
class AsymptoticEfficiency:
    exact: float
    first_order: float


def asymptotic_efficiency(bp: BounceParameters) -> AsymptoticEfficiency:
    """η(∞) exactly, with the first-order-in-q form 1 − q[1 + 2(1−p)/p] alongside"""
    p, q = bp.p, bp.q
    if p == 0.0:
        raise DomainError("η(∞) is undefined without a dissipation channel (p = 0)")
    exact = p * (1.0 - q) / _escape(p, q)
    first_order = 1.0 - q * (1.0 + 2.0 * (1.0 - p) / p)
    return AsymptoticEfficiency(exact, first_order)


def recombination_probability(flight_time: float, tau_recombination: float) -> float:
    """q ≃ flight time / recombination time (any common unit)"""
    if not flight_time > 0 or not tau_recombination > 0:
        raise ParameterError("flight and recombination times must be positive")
    q = flight_time / tau_recombination
    if q > 1.0:
        raise ParameterError(f"flight time exceeds the recombination time (q = {q:g})")
    return q
