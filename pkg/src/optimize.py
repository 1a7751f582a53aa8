"""
Parameter search over the decoherence rates and sink parameters
Random sampling, simplex refinement, the (h₂₈, ω₈) landscape and the
temperature dependence of the overlap efficiency.
"""
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import minimize

from config import settings
from src.errors import (ConvergenceError, DegenerateInputError, DomainError, FormatError,
                        ParameterError, QuadratureError, SearchError)
from src.network_model import (BathSpectrum, ExcitonNetwork, SinkParameters, SystemPartition,
                               diagonalize_bath, partition)
from src.quadrature import QuadratureWindow
from src.spectral import (NormalizedDensity, SpectralProfile, build_profiles, joint_window,
                          normalize_density, overlap_efficiency)

logger = logging.getLogger(__name__)

# failures a search records and skips; everything else propagates
EVALUATION_FAILURES = (ConvergenceError, QuadratureError, DegenerateInputError)
BOUNDARY_TOLERANCE = 1e-6

Interval = Tuple[float, float]


def optimum_rates() -> Tuple[float, ...]:
    """Γ₃..Γ₇ and Γ₈ of the published optimum"""
    return tuple(settings.OPTIMUM_RATES) + (settings.OPTIMUM_SINK_RATE,)


def optimum_parameters() -> np.ndarray:
    return pack_parameters(optimum_rates(), SinkParameters())


def parameter_names(n_rates: int) -> List[str]:
    """gamma3..gamma{N+1}, omega{N+1}, h2{N+1}"""
    sink = n_rates + 2
    return [f"gamma{a}" for a in range(3, sink + 1)] + [f"omega{sink}", f"h2{sink}"]


def pack_parameters(rates: Sequence[float], sink: SinkParameters) -> np.ndarray:
    """Rates end with the sink's Γ, which SinkParameters also carries"""
    rates = [float(r) for r in rates]
    if len(rates) and rates[-1] != sink.sink_rate:
        sink = sink.model_copy(update={"sink_rate": rates[-1]})
    return np.array(rates + [sink.sink_energy, sink.acceptor_sink_coupling])


def unpack_parameters(vector: Sequence[float]) -> Tuple[np.ndarray, SinkParameters]:
    vector = np.asarray(vector, dtype=float)
    rates = vector[:-2]
    sink = SinkParameters(sink_energy=float(vector[-2]), acceptor_sink_coupling=float(vector[-1]),
                          sink_rate=float(rates[-1]))
    return rates, sink


def n_rates_for(net: ExcitonNetwork) -> int:
    return net.n_sites - 2


class ParameterBounds(BaseModel):
    """Sampling intervals (cm⁻¹); gamma_range applies to every Γ_α including the sink's"""

    model_config = ConfigDict(frozen=True)

    omega8_range: Interval = settings.OMEGA8_RANGE
    gamma_range: Interval = settings.GAMMA_RANGE
    h28_range: Interval = settings.H28_RANGE
    # per-rate intervals (Γ₃ first) replacing gamma_range when given
    rate_ranges: Optional[Tuple[Interval, ...]] = None

    @field_validator("omega8_range", "gamma_range", "h28_range")
    @classmethod
    def _ordered(cls, value):
        lo, hi = value
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ValueError(f"interval [{lo}, {hi}] is empty")
        return value

    @field_validator("rate_ranges")
    @classmethod
    def _ordered_rates(cls, value):
        for lo, hi in value or ():
            if not (math.isfinite(lo) and math.isfinite(hi)) or not 0 < lo <= hi:
                raise ValueError(f"rate interval [{lo}, {hi}] must be positive and nonempty")
        return value

    @model_validator(mode="after")
    def _positive_rates(self):
        if self.gamma_range[0] <= 0:
            raise ValueError("gamma_range must be strictly positive")
        if self.h28_range[0] < 0:
            raise ValueError("h28_range must be nonnegative")
        return self

    def box(self, n_rates: int) -> Tuple[np.ndarray, np.ndarray]:
        ranges = list(self.rate_ranges) if self.rate_ranges else [self.gamma_range] * n_rates
        if len(ranges) != n_rates:
            raise ParameterError(f"bounds give {len(ranges)} rate intervals, the network needs {n_rates}")
        lower = [r[0] for r in ranges] + [self.omega8_range[0], self.h28_range[0]]
        upper = [r[1] for r in ranges] + [self.omega8_range[1], self.h28_range[1]]
        return np.array(lower, dtype=float), np.array(upper, dtype=float)

    def contains(self, vector: Sequence[float]) -> bool:
        lower, upper = self.box(len(vector) - 2)
        vector = np.asarray(vector, dtype=float)
        return bool(np.all(vector >= lower) and np.all(vector <= upper))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ParameterBounds":
        """Read bounds from a JSON or YAML document"""
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise FormatError(f"{path}: cannot read bounds file ({e})") from e
        try:
            if path.suffix.lower() in (".yaml", ".yml"):
                document = yaml.safe_load(text)
            else:
                document = json.loads(text)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise FormatError(f"{path}: malformed bounds file ({e})") from e
        if not isinstance(document, dict):
            raise FormatError(f"{path}: bounds file must hold a mapping")
        return cls(**{k: tuple(v) for k, v in document.items()})

    @classmethod
    def pinned(cls, vector: Sequence[float]) -> "ParameterBounds":
        """Degenerate bounds holding every coordinate at the given vector"""
        vector = [float(v) for v in vector]
        rates = vector[:-2]
        return cls(omega8_range=(vector[-2], vector[-2]), h28_range=(vector[-1], vector[-1]),
                   gamma_range=(min(rates), max(rates)), rate_ranges=tuple((r, r) for r in rates))


class SearchRecord(BaseModel):
    """One scored parameter vector"""

    parameters: List[float]
    names: List[str]
    objective: float = Field(ge=0.0, le=1.0)
    seed: int = Field(ge=0)
    evaluations: int = Field(gt=0)
    provenance: Literal["sampled", "refined"] = "sampled"
    index: int = 0
    failures: int = 0
    at_lower: List[bool] = []
    at_upper: List[bool] = []

    @property
    def sink_ratio(self) -> float:
        """|ω₈| / h₂₈"""
        h = self.parameters[-1]
        return abs(self.parameters[-2]) / h if h > 0 else math.inf

    def as_row(self) -> dict:
        row = {"index": self.index, "provenance": self.provenance, "seed": self.seed}
        row.update(zip(self.names, self.parameters))
        row.update({"objective": self.objective, "evaluations": self.evaluations,
                    "failures": self.failures})
        row.update({f"{n}_at_lower": b for n, b in zip(self.names, self.at_lower)})
        row.update({f"{n}_at_upper": b for n, b in zip(self.names, self.at_upper)})
        return row


def boundary_flags(vector: Sequence[float], bounds: ParameterBounds) -> Tuple[List[bool], List[bool]]:
    vector = np.asarray(vector, dtype=float)
    lower, upper = bounds.box(vector.size - 2)
    slack = BOUNDARY_TOLERANCE * (upper - lower)
    return (list(map(bool, vector - lower <= slack)), list(map(bool, upper - vector <= slack)))


def _record(vector, objective, bounds, seed, evaluations, provenance, index=0, failures=0) -> SearchRecord:
    at_lower, at_upper = boundary_flags(vector, bounds)
    return SearchRecord(
        parameters=[float(v) for v in vector], names=parameter_names(len(vector) - 2),
        objective=float(objective), seed=seed, evaluations=evaluations, provenance=provenance,
        index=index, failures=failures, at_lower=at_lower, at_upper=at_upper,
    )


@dataclass(frozen=True)
class PipelineResult:
    partition: SystemPartition
    spectrum: BathSpectrum
    donor: SpectralProfile
    acceptor: SpectralProfile
    window: QuadratureWindow
    f1: NormalizedDensity
    f2: NormalizedDensity
    overlap: float


def run_pipeline(net: ExcitonNetwork, rates: Sequence[float], sink: SinkParameters,
                 window: Optional[QuadratureWindow] = None,
                 rate_order: Optional[str] = None) -> PipelineResult:
    """partition → diagonalize → profiles → normalize → overlap"""
    part = partition(net, sink)
    spectrum = diagonalize_bath(part, rates, rate_order)
    donor, acceptor = build_profiles(part, spectrum)
    window = window or joint_window([donor, acceptor])
    f1 = normalize_density(donor, window)
    f2 = normalize_density(acceptor, window)
    overlap = overlap_efficiency(f1, f2, window)
    return PipelineResult(part, spectrum, donor, acceptor, window, f1, f2, overlap)


def evaluate_objective(net: ExcitonNetwork, params: Sequence[float],
                       window: Optional[QuadratureWindow] = None,
                       rate_order: Optional[str] = None) -> float:
    """𝓕 for a parameter vector (Γ₃..Γ_N+1, ω_N+1, h₂,N+1)"""
    rates, sink = unpack_parameters(params)
    return run_pipeline(net, rates, sink, window, rate_order).overlap


def sample_parameters(bounds: ParameterBounds, rng: np.random.Generator, n_rates: int = 6) -> np.ndarray:
    lower, upper = bounds.box(n_rates)
    return rng.uniform(lower, upper)


def _evaluation_task(task):
    """Worker body: sample with the index's own stream, then score"""
    net, bounds, seed_sequence, rate_order = task
    rng = np.random.default_rng(seed_sequence)
    vector = sample_parameters(bounds, rng, n_rates_for(net))
    try:
        return vector, evaluate_objective(net, vector, rate_order=rate_order), None
    except EVALUATION_FAILURES as e:
        return vector, None, f"{type(e).__name__}: {e}"


def _fan_out(function, tasks, workers: int):
    if workers <= 1:
        return [function(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


@dataclass(frozen=True)
class SearchOutcome:
    best: SearchRecord
    top: Tuple[SearchRecord, ...]
    records: Tuple[SearchRecord, ...]
    failures: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_row() for r in self.records])


def random_search(net: ExcitonNetwork, bounds: ParameterBounds, budget: int, seed: int,
                  workers: Optional[int] = None, top_k: Optional[int] = None,
                  rate_order: Optional[str] = None) -> SearchOutcome:
    """
    Best-of-budget uniform sampling.

    Evaluation i draws from SeedSequence(seed).spawn(budget)[i], so results do not
    depend on the worker count; ties go to the earliest index.
    """
    if budget < 1:
        raise ParameterError(f"search budget must be at least 1, got {budget}")
    workers = workers or settings.SEARCH_WORKERS
    top_k = top_k or settings.SEARCH_TOP_K

    streams = np.random.SeedSequence(seed).spawn(budget)
    tasks = [(net, bounds, s, rate_order) for s in streams]
    results = _fan_out(_evaluation_task, tasks, workers)

    records, failures = [], []
    for i, (vector, objective, failure) in enumerate(results):
        if failure is not None:
            failures.append(f"#{i}: {failure}")
            continue
        records.append(_record(vector, objective, bounds, seed, 1, "sampled", index=i))
    for message in failures[:5]:
        logger.warning("Evaluation failed %s", message)
    if not records:
        raise SearchError(f"all {budget} evaluations failed", failures)

    ranked = sorted(records, key=lambda r: (-r.objective, r.index))
    best = ranked[0].model_copy(update={"evaluations": budget, "failures": len(failures)})
    logger.info("Random search: best 𝓕 %.6f at #%d, %d failures", best.objective, best.index, len(failures))
    return SearchOutcome(best, tuple(ranked[:top_k]), tuple(records), len(failures))


def refine_local(net: ExcitonNetwork, start: Sequence[float], bounds: ParameterBounds,
                 seed: Optional[int] = None, max_evaluations: Optional[int] = None,
                 rate_order: Optional[str] = None) -> SearchRecord:
    """
    Nelder-Mead on −𝓕 in box-scaled coordinates, projected onto the box.

    Stops when the simplex diameter falls below REFINE_DIAMETER (scaled units) or
    after max_evaluations; a collapsed simplex is restarted once with jitter. The
    returned objective is never below the start's.
    """
    seed = settings.SEED if seed is None else seed
    max_evaluations = max_evaluations or settings.REFINE_MAX_EVALUATIONS
    start = np.asarray(start, dtype=float)
    if not bounds.contains(start):
        raise ParameterError("refinement must start inside the bounds")

    lower, upper = bounds.box(start.size - 2)
    span = upper - lower
    free = span > 0
    evaluations = 0
    failures = 0
    best = {"vector": start.copy(), "objective": -1.0}

    def vector_of(u):
        vector = start.copy()
        vector[free] = lower[free] + np.clip(u, 0.0, 1.0) * span[free]
        return vector

    def objective(u):
        nonlocal evaluations, failures
        vector = vector_of(u)
        evaluations += 1
        try:
            value = evaluate_objective(net, vector, rate_order=rate_order)
        except EVALUATION_FAILURES:
            failures += 1
            return 1.0
        if value > best["objective"]:
            best.update(vector=vector, objective=value)
        return -value

    u0 = (start[free] - lower[free]) / span[free]
    start_objective = -objective(u0)
    if not free.any():
        if best["objective"] < 0:
            raise SearchError("refinement start cannot be evaluated")
        return _record(start, best["objective"], bounds, seed, evaluations, "refined", failures=failures)

    def simplex_around(u, rng=None):
        dim = u.size
        steps = np.full(dim, 0.05)
        if rng is not None:
            steps *= rng.uniform(0.5, 1.5, dim)
        vertices = [u]
        for k in range(dim):
            vertex = u.copy()
            vertex[k] = u[k] + steps[k] if u[k] + steps[k] <= 1.0 else u[k] - steps[k]
            vertices.append(vertex)
        return np.array(vertices)

    options = {"xatol": settings.REFINE_DIAMETER, "fatol": math.inf}
    result = minimize(objective, u0, method="Nelder-Mead",
                      options={**options, "initial_simplex": simplex_around(u0),
                               "maxfev": max_evaluations})
    simplex = result.final_simplex[0]
    rank = np.linalg.matrix_rank(simplex[1:] - simplex[0], tol=1e-12)
    if rank < u0.size and evaluations < max_evaluations:
        logger.warning("Simplex collapsed (rank %d of %d); restarting with jitter", rank, u0.size)
        rng = np.random.default_rng(seed)
        u_best = (best["vector"][free] - lower[free]) / span[free]
        minimize(objective, u_best, method="Nelder-Mead",
                 options={**options, "initial_simplex": simplex_around(u_best, rng),
                          "maxfev": max_evaluations - evaluations})

    if best["objective"] < 0:
        raise SearchError("refinement produced no successful evaluation")
    logger.info("Refinement: 𝓕 %.6f -> %.6f in %d evaluations", start_objective,
                best["objective"], evaluations)
    return _record(best["vector"], best["objective"], bounds, seed, evaluations, "refined",
                   failures=failures)


def optimize_parameters(net: ExcitonNetwork, bounds: ParameterBounds, budget: int, seed: int,
                        refine: bool = True, workers: Optional[int] = None,
                        top_k: Optional[int] = None, rate_order: Optional[str] = None) -> SearchOutcome:
    """Random search followed by refinement of the top-k candidates"""
    outcome = random_search(net, bounds, budget, seed, workers, top_k, rate_order)
    if not refine:
        return outcome
    refined = [refine_local(net, r.parameters, bounds, seed, rate_order=rate_order) for r in outcome.top]
    candidates = sorted(refined + [outcome.best], key=lambda r: -r.objective)
    best = candidates[0].model_copy(update={
        "evaluations": budget + sum(r.evaluations for r in refined),
        "failures": outcome.failures + sum(r.failures for r in refined),
    })
    return SearchOutcome(best, tuple(refined), outcome.records + tuple(refined), outcome.failures)


@dataclass(frozen=True)
class GridSweep:
    h28_grid: np.ndarray
    omega8_grid: np.ndarray
    overlap: np.ndarray
    failed: np.ndarray

    def argmax(self) -> Tuple[float, float, float]:
        """(h₂₈, ω₈, 𝓕) at the best successful cell"""
        masked = np.where(self.failed, -np.inf, self.overlap)
        i, j = np.unravel_index(int(np.argmax(masked)), masked.shape)
        return float(self.h28_grid[i]), float(self.omega8_grid[j]), float(self.overlap[i, j])

    def to_frame(self) -> pd.DataFrame:
        h, w = np.meshgrid(self.h28_grid, self.omega8_grid, indexing="ij")
        return pd.DataFrame({
            "h28": h.ravel(), "omega8": w.ravel(),
            "F": self.overlap.ravel(), "failed": self.failed.ravel(),
        })


def _sweep_task(task):
    net, vector, rate_order = task
    try:
        return evaluate_objective(net, vector, rate_order=rate_order)
    except EVALUATION_FAILURES as e:
        logger.warning("Grid point %s failed: %s", np.round(vector[-2:], 3).tolist(), e)
        return math.nan


def grid_sweep(net: ExcitonNetwork, h28_grid: Sequence[float], omega8_grid: Sequence[float],
               rates: Optional[Sequence[float]] = None, workers: Optional[int] = None,
               rate_order: Optional[str] = None) -> GridSweep:
    """𝓕 on the (h₂₈, ω₈) grid with fixed rates; rows follow h28_grid, columns omega8_grid"""
    h28_grid = np.asarray(h28_grid, dtype=float)
    omega8_grid = np.asarray(omega8_grid, dtype=float)
    if h28_grid.size == 0 or omega8_grid.size == 0:
        raise ParameterError("sweep grids must be nonempty")
    rates = [float(r) for r in (optimum_rates() if rates is None else rates)]
    tasks = [(net, np.array(rates + [w, h]), rate_order) for h in h28_grid for w in omega8_grid]
    values = np.array(_fan_out(_sweep_task, tasks, workers or settings.SEARCH_WORKERS), dtype=float)
    overlap = values.reshape(h28_grid.size, omega8_grid.size)
    return GridSweep(h28_grid, omega8_grid, overlap, np.isnan(overlap))


class TemperatureModel(BaseModel):
    """Γ_k(T) = Γ_k(T₀)·T/T₀ for every bath eigenstate, sink included"""

    model_config = ConfigDict(frozen=True)

    reference_temperature: float = Field(default=settings.REFERENCE_TEMPERATURE, gt=0.0)
    reference_rates: Tuple[float, ...] = Field(default_factory=optimum_rates)

    @field_validator("reference_rates")
    @classmethod
    def _positive(cls, value):
        if not value or any(not r > 0 for r in value):
            raise ValueError("reference rates must be strictly positive")
        return value

    def rates_at(self, temperature: float) -> np.ndarray:
        if not temperature > 0:
            raise DomainError(f"temperature must be positive, got {temperature}")
        return np.asarray(self.reference_rates) * (temperature / self.reference_temperature)


def temperature_sweep(net: ExcitonNetwork, model: TemperatureModel, temperatures: Sequence[float],
                      sink: Optional[SinkParameters] = None,
                      rate_order: Optional[str] = None) -> pd.DataFrame:
    """Columns temperature, scale, F, failed"""
    temperatures = [float(t) for t in temperatures]
    bad = [t for t in temperatures if not t > 0]
    if bad:
        raise DomainError(f"temperatures must be positive, got {bad}")
    sink = sink or SinkParameters()
    rows = []
    for t in temperatures:
        vector = pack_parameters(model.rates_at(t), sink)
        value = _sweep_task((net, vector, rate_order))
        rows.append({"temperature": t, "scale": t / model.reference_temperature,
                     "F": value, "failed": math.isnan(value)})
    return pd.DataFrame(rows)
