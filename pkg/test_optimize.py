"""
Tests for the parameter search, the sink-parameter landscape and the temperature sweep
"""
import json
from pathlib import Path

import numpy as np
import pytest

import src.optimize as optimize
from config import settings
from src.errors import ConvergenceError, DomainError, FormatError, ParameterError, SearchError
from src.network_model import SinkParameters, load_network
from src.optimize import (ParameterBounds, SearchRecord, TemperatureModel, evaluate_objective,
                          optimum_parameters, optimum_rates, grid_sweep, optimize_parameters,
                          pack_parameters, parameter_names, random_search, refine_local, run_pipeline,
                          sample_parameters,
                          temperature_sweep, unpack_parameters)
from src.quadrature import QuadratureWindow
from src.spectral import lorentzian_parameters

DATASET = Path(__file__).parent / "data" / "fmo_adolphs_renger.json"

slow = pytest.mark.skipif(not settings.RUN_SLOW_TESTS, reason="set RUN_SLOW_TESTS=1")


@pytest.fixture(scope="module")
def fmo():
    return load_network(DATASET)


@pytest.fixture
def pinned_rates():
    return tuple((r, r) for r in optimum_rates())


def test_parameter_layout():
    assert parameter_names(6) == ["gamma3", "gamma4", "gamma5", "gamma6", "gamma7", "gamma8",
                                  "omega8", "h28"]
    vector = optimum_parameters()
    np.testing.assert_array_equal(vector, [59.6, 90.0, 50.3, 59.7, 89.7, 50.1, -500.0, 327.0])
    rates, sink = unpack_parameters(vector)
    assert sink == SinkParameters()
    np.testing.assert_array_equal(pack_parameters(rates, sink), vector)


def test_pack_uses_last_rate_for_the_sink():
    vector = pack_parameters([60.0, 70.0, 80.0], SinkParameters(sink_rate=55.0))
    assert unpack_parameters(vector)[1].sink_rate == 80.0


def test_objective_at_published_optimum(fmo):
    assert evaluate_objective(fmo, optimum_parameters()) == pytest.approx(0.75, abs=0.03)


def test_decoupled_sink_does_not_matter(fmo):
    window = QuadratureWindow(-2500.0, 2500.0)
    values = [evaluate_objective(fmo, list(optimum_rates()) + [w, 0.0], window=window)
              for w in (-900.0, -500.0, -100.0)]
    assert max(values) - min(values) < 1e-7


def test_acceptor_moves_up_with_sink_coupling(fmo):
    strong = run_pipeline(fmo, optimum_rates(), SinkParameters())
    weak = run_pipeline(fmo, optimum_rates(), SinkParameters(acceptor_sink_coupling=0.0))
    assert (lorentzian_parameters(strong.acceptor, strong.window).frequency
            > lorentzian_parameters(weak.acceptor, weak.window).frequency)


def test_bounds_validation():
    with pytest.raises(ValueError):
        ParameterBounds(omega8_range=(0.0, -500.0))
    with pytest.raises(ValueError):
        ParameterBounds(gamma_range=(0.0, 90.0))
    with pytest.raises(ValueError):
        ParameterBounds(h28_range=(-1.0, 600.0))
    with pytest.raises(ValueError):
        ParameterBounds(rate_ranges=((10.0, 5.0),))
    with pytest.raises(ParameterError):
        ParameterBounds(rate_ranges=((50.0, 60.0),) * 6).box(5)


def test_bounds_box_and_contains():
    bounds = ParameterBounds()
    lower, upper = bounds.box(6)
    np.testing.assert_array_equal(lower, [50.0] * 6 + [-500.0, 0.0])
    np.testing.assert_array_equal(upper, [90.0] * 6 + [0.0, 600.0])
    assert bounds.contains(optimum_parameters())
    assert not bounds.contains(list(optimum_rates()) + [-600.0, 327.0])


def test_sample_parameters():
    bounds = ParameterBounds()
    first = sample_parameters(bounds, np.random.default_rng(5))
    again = sample_parameters(bounds, np.random.default_rng(5))
    np.testing.assert_array_equal(first, again)
    assert bounds.contains(first)

    rng = np.random.default_rng(11)
    omega8 = np.array([sample_parameters(bounds, rng)[6] for _ in range(10_000)])
    assert -500.0 <= omega8.min() <= -475.0
    assert -25.0 <= omega8.max() <= 0.0

    pinned = ParameterBounds(h28_range=(327.0, 327.0))
    assert sample_parameters(pinned, np.random.default_rng(1))[7] == 327.0


def test_bounds_from_files(tmp_path):
    json_path = tmp_path / "bounds.json"
    json_path.write_text(json.dumps({"omega8_range": [-800, 0], "h28_range": [100, 400]}))
    bounds = ParameterBounds.from_file(json_path)
    assert bounds.omega8_range == (-800.0, 0.0)
    assert bounds.gamma_range == settings.GAMMA_RANGE

    yaml_path = tmp_path / "bounds.yaml"
    yaml_path.write_text("gamma_range: [40, 100]\n")
    assert ParameterBounds.from_file(yaml_path).gamma_range == (40.0, 100.0)

    broken = tmp_path / "broken.json"
    broken.write_text("{ nope")
    with pytest.raises(FormatError):
        ParameterBounds.from_file(broken)
    with pytest.raises(FormatError):
        ParameterBounds.from_file(tmp_path / "missing.json")


def test_pinned_bounds_search_reproduces_published_value(fmo):
    bounds = ParameterBounds.pinned(optimum_parameters())
    outcome = random_search(fmo, bounds, budget=3, seed=1, workers=1)
    np.testing.assert_array_equal(outcome.best.parameters, optimum_parameters())
    assert outcome.best.objective == pytest.approx(0.75, abs=0.03)
    assert all(outcome.best.at_lower) and all(outcome.best.at_upper)
    assert outcome.best.evaluations == 3


def test_random_search_is_reproducible(fmo):
    first = random_search(fmo, ParameterBounds(), budget=6, seed=11, workers=1, top_k=3)
    again = random_search(fmo, ParameterBounds(), budget=6, seed=11, workers=1, top_k=3)
    assert [r.parameters for r in first.records] == [r.parameters for r in again.records]
    assert first.best == again.best
    assert len(first.top) == 3
    assert [r.objective for r in first.top] == sorted((r.objective for r in first.top), reverse=True)
    assert all(0.0 <= r.objective <= 1.0 for r in first.records)
    assert all(ParameterBounds().contains(r.parameters) for r in first.records)


def test_random_search_ignores_worker_count(fmo):
    serial = random_search(fmo, ParameterBounds(), budget=4, seed=5, workers=1)
    parallel = random_search(fmo, ParameterBounds(), budget=4, seed=5, workers=2)
    assert [r.parameters for r in serial.records] == [r.parameters for r in parallel.records]
    assert [r.objective for r in serial.records] == [r.objective for r in parallel.records]


def test_random_search_rejects_empty_budget(fmo):
    with pytest.raises(ParameterError):
        random_search(fmo, ParameterBounds(), budget=0, seed=1)


def test_random_search_skips_failed_evaluations(fmo, monkeypatch):
    real = optimize.evaluate_objective

    def flaky(net, vector, window=None, rate_order=None):
        if vector[-1] > 500.0:
            raise ConvergenceError("no root", (-1.0, 1.0), 0.5)
        return real(net, vector, window, rate_order)

    monkeypatch.setattr(optimize, "evaluate_objective", flaky)
    outcome = random_search(fmo, ParameterBounds(), budget=6, seed=3, workers=1)
    assert outcome.failures + len(outcome.records) == 6
    assert all(r.parameters[-1] <= 500.0 for r in outcome.records)
    assert outcome.best.failures == outcome.failures


def test_random_search_with_every_evaluation_failing(fmo, monkeypatch):
    def broken(*args, **kwargs):
        raise ConvergenceError("no root")

    monkeypatch.setattr(optimize, "evaluate_objective", broken)
    with pytest.raises(SearchError) as info:
        random_search(fmo, ParameterBounds(), budget=3, seed=3, workers=1)
    assert len(info.value.failures) == 3


def test_refinement_keeps_the_published_optimum(fmo, pinned_rates):
    # default ω8 interval [−500, 0], so the start sits on its lower edge
    bounds = ParameterBounds(h28_range=(280.0, 380.0), rate_ranges=pinned_rates)
    start = optimum_parameters()
    start_value = evaluate_objective(fmo, start)
    refined = refine_local(fmo, start, bounds, seed=1, max_evaluations=120)
    assert refined.provenance == "refined"
    assert refined.objective >= start_value
    assert refined.objective - start_value < 0.01
    assert bounds.contains(refined.parameters)
    assert refined.evaluations <= 130


def test_refinement_with_nothing_free(fmo):
    bounds = ParameterBounds.pinned(optimum_parameters())
    record = refine_local(fmo, optimum_parameters(), bounds, seed=1)
    assert record.evaluations == 1
    assert record.objective == pytest.approx(evaluate_objective(fmo, optimum_parameters()))


def test_refinement_must_start_inside(fmo):
    with pytest.raises(ParameterError):
        refine_local(fmo, list(optimum_rates()) + [-700.0, 327.0], ParameterBounds())


def test_search_record_helpers():
    record = SearchRecord(parameters=[60.0, -450.0, 300.0], names=["gamma3", "omega3", "h23"],
                          objective=0.5, seed=1, evaluations=1, at_lower=[False] * 3,
                          at_upper=[False] * 3)
    assert record.sink_ratio == pytest.approx(1.5)
    row = record.as_row()
    assert row["omega3"] == -450.0 and row["objective"] == 0.5
    with pytest.raises(ValueError):
        SearchRecord(parameters=[1.0], names=["x"], objective=1.5, seed=1, evaluations=1)


def test_grid_sweep_layout(fmo):
    sweep = grid_sweep(fmo, [160.0, 327.0], [-500.0, -100.0], workers=1)
    assert sweep.overlap.shape == (2, 2)
    assert not sweep.failed.any()
    assert sweep.overlap[1, 0] == pytest.approx(0.75, abs=0.03)
    assert sweep.overlap[0, 0] == pytest.approx(0.18, abs=0.03)
    h28, omega8, best = sweep.argmax()
    assert (h28, omega8) == (327.0, -500.0)
    frame = sweep.to_frame()
    assert list(frame.columns) == ["h28", "omega8", "F", "failed"]
    assert len(frame) == 4
    with pytest.raises(ParameterError):
        grid_sweep(fmo, [], [-500.0])


def test_landscape_ridge_ratio(fmo):
    sweep = grid_sweep(fmo, np.linspace(250.0, 400.0, 16), [-500.0, -450.0, -400.0], workers=1)
    h28, omega8, best = sweep.argmax()
    assert abs(omega8) / h28 == pytest.approx(1.5, abs=0.15)
    assert best >= 0.72


def test_temperature_model():
    model = TemperatureModel()
    np.testing.assert_allclose(model.rates_at(77.0), optimum_rates())
    np.testing.assert_allclose(model.rates_at(154.0), 2 * np.asarray(optimum_rates()))
    with pytest.raises(DomainError):
        model.rates_at(0.0)
    with pytest.raises(ValueError):
        TemperatureModel(reference_rates=(50.0, -1.0))


def test_temperature_sweep(fmo):
    temperatures = [20.0, 40.0, 60.0, 77.0, 100.0, 150.0, 200.0, 231.0]
    frame = temperature_sweep(fmo, TemperatureModel(), temperatures)
    assert list(frame.columns) == ["temperature", "scale", "F", "failed"]
    assert not frame["failed"].any()
    values = frame["F"].to_numpy()
    peak = int(np.argmax(values))
    assert np.all(np.diff(values[:peak + 1]) > 0)
    physiological = frame[frame["temperature"] >= 77.0]["F"]
    assert (physiological.max() - physiological.min()) / physiological.max() < 0.15
    with pytest.raises(DomainError):
        temperature_sweep(fmo, TemperatureModel(), [77.0, -1.0])


@slow
def test_optimize_parameters_refines_the_best_sample(fmo):
    outcome = optimize_parameters(fmo, ParameterBounds(), budget=20, seed=2, refine=True, workers=1, top_k=1)
    sampled = max(r.objective for r in outcome.records if r.provenance == "sampled")
    assert outcome.best.objective >= sampled
    assert outcome.best.evaluations > 20


@slow
def test_random_search_attainment(fmo):
    outcome = random_search(fmo, ParameterBounds(), budget=10_000, seed=settings.DEFAULT_SEED,
                            workers=settings.SEARCH_WORKERS)
    assert outcome.best.objective >= 0.70


@slow
def test_search_and_refinement_find_the_resonant_sink(fmo):
    outcome = optimize_parameters(fmo, ParameterBounds(), budget=10_000, seed=settings.DEFAULT_SEED,
                                  refine=True, workers=settings.SEARCH_WORKERS)
    assert outcome.best.objective >= 0.74
    assert outcome.best.sink_ratio == pytest.approx(1.5, abs=0.15)
