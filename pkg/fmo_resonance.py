"""
Command-line front end for the FMO resonance toolkit

    python fmo_resonance.py <validate|spectra|resonance|transfer|bounce|optimize|sweep|tempsweep> [flags]

Times on the command line are in ps, energies and rates in cm⁻¹.
Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage error.
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import settings
from src.errors import NUMERICAL_ERRORS, ValidationError
from src.network_model import ExcitonNetwork, SinkParameters, load_network
from src.optimize import (ParameterBounds, TemperatureModel, grid_sweep,
                          optimize_parameters, run_pipeline, temperature_sweep)
from src.quadrature import QuadratureWindow
from src.results_io import write_document, write_results
from src.spectral import (NormalizedDensity, apet_condition, heating_estimate, overlap_efficiency,
                          resonance_summary, sink_dominance, spectra_table)
from src.transfer import (BounceParameters, PhaseModel, asymptotic_efficiency, bounce_efficiency,
                          optimize_arrival, recombination_probability)

logger = logging.getLogger("fmo_resonance")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


class RunConfig(BaseModel):
    """Everything a subcommand needs besides its own flags"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    network_path: Path
    sink: SinkParameters
    rates: Tuple[float, ...]
    window: Optional[QuadratureWindow] = None
    output_dir: Path
    seed: int
    seed_source: str = "default"
    rate_order: str = settings.RATE_ORDER

    def metadata(self, command: str, net: Optional[ExcitonNetwork] = None) -> dict:
        meta = {"command": command, "seed": self.seed, "seed_source": self.seed_source,
                "rate_order": self.rate_order, "network": str(self.network_path)}
        if net is not None:
            meta["network_label"] = net.label
        return meta


def ps_to_internal(t_ps: float) -> float:
    return t_ps / settings.PS_PER_INVERSE_CM


def internal_to_ps(t: float) -> float:
    return t * settings.PS_PER_INVERSE_CM


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _interval(text: str) -> Tuple[float, float]:
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got '{text}'")
    return parts[0], parts[1]


def _grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected min:max:steps, got '{text}'")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1:
        raise argparse.ArgumentTypeError("steps must be at least 1")
    return np.linspace(lo, hi, steps)


def _count(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity", "∞") else float(int(text))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fmo_resonance", description="Resonance energy transfer in the FMO complex")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--network", default=settings.FMO_DATASET, help="network JSON file")
    common.add_argument("--output-dir", default=settings.OUTPUT_DIRECTORY)
    common.add_argument("--rates", type=_floats, default=None,
                        help="Γ₃..Γ_N (and optionally Γ_N+1) in cm⁻¹")
    common.add_argument("--sink-energy", type=float, default=settings.OPTIMUM_SINK_ENERGY)
    common.add_argument("--sink-coupling", type=float, default=settings.OPTIMUM_SINK_COUPLING,
                        help="acceptor-sink coupling h28 (cm⁻¹)")
    common.add_argument("--sink-rate", type=float, default=settings.OPTIMUM_SINK_RATE)
    common.add_argument("--window", type=_interval, default=None, help="integration window lo:hi")
    common.add_argument("--rate-order", choices=("descending", "ascending"), default=settings.RATE_ORDER,
                        help="which bath eigenstate gets Γ₃ (see DESIGN.md, rate ordering)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--log-level", default=settings.LOG_LEVEL)

    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    sub.add_parser("validate", parents=[common], help="check the network constraints")

    p = sub.add_parser("spectra", parents=[common], help="γ, δ and densities on a grid")
    p.add_argument("--grid", type=_grid, default=None, help="min:max:steps")
    p.add_argument("--points", type=int, default=settings.SPECTRA_POINTS)

    sub.add_parser("resonance", parents=[common], help="renormalized frequencies, widths and 𝓕")

    p = sub.add_parser("transfer", parents=[common], help="phase-limited transfer probability")
    p.add_argument("--tau-model", choices=("constant", "quadratic"), default="constant")
    p.add_argument("--tau", type=float, default=1.0, help="propagation time τ₀ (ps)")
    p.add_argument("--kappa-range", type=_interval, default=None, help="κ range lo:hi (ps·cm²)")
    p.add_argument("--t0-range", type=_interval, default=None, help="arrival-time bracket lo:hi (ps)")
    p.add_argument("--omega0", type=float, default=None, help="matched Lorentzians centred here (cm⁻¹)")
    p.add_argument("--gamma", type=float, default=None, help="width of the matched Lorentzians (cm⁻¹)")

    p = sub.add_parser("bounce", parents=[common], help="bouncing-exciton efficiency")
    p.add_argument("--p", type=float, required=True, help="single-shot dissipation probability")
    p.add_argument("--q", type=float, default=None, help="per-flight recombination probability")
    p.add_argument("--n", type=_count, default=5.0, help="bounce count or 'inf'")
    p.add_argument("--flight-time", type=float, default=None, help="flight time (ps), gives q")
    p.add_argument("--recombination-time", type=float, default=1000.0, help="recombination time (ps)")

    p = sub.add_parser("optimize", parents=[common], help="random search and simplex refinement")
    p.add_argument("--budget", type=int, default=settings.SEARCH_BUDGET)
    p.add_argument("--bounds-file", default=None, help="JSON or YAML bounds")
    p.add_argument("--refine", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--workers", type=int, default=settings.SEARCH_WORKERS)
    p.add_argument("--top-k", type=int, default=settings.SEARCH_TOP_K)

    p = sub.add_parser("sweep", parents=[common], help="𝓕 over the (h28, ω8) plane")
    p.add_argument("--h28", dest="h28_grid", type=_grid, default=_grid("0:600:61"))
    p.add_argument("--omega8", type=_grid, default=_grid("-1000:0:51"))
    p.add_argument("--workers", type=int, default=settings.SEARCH_WORKERS)

    p = sub.add_parser("tempsweep", parents=[common], help="𝓕 versus temperature")
    p.add_argument("--tmin", type=float, default=20.0)
    p.add_argument("--tmax", type=float, default=1000.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    return parser


def run_config(args) -> RunConfig:
    if args.seed is not None:
        seed, source = args.seed, "flag"
    elif settings.SEED_FROM_ENVIRONMENT:
        seed, source = settings.SEED, "environment (FMO_SEED)"
    else:
        seed, source = settings.DEFAULT_SEED, "default"
    window = None
    if args.window is not None:
        window = QuadratureWindow(args.window[0], args.window[1])
    sink = SinkParameters(sink_energy=args.sink_energy, acceptor_sink_coupling=args.sink_coupling,
                          sink_rate=args.sink_rate)
    rates = tuple(args.rates) if args.rates else tuple(settings.OPTIMUM_RATES)
    return RunConfig(network_path=Path(args.network), sink=sink, rates=rates, window=window,
                     output_dir=Path(args.output_dir), seed=seed, seed_source=source,
                     rate_order=args.rate_order)


def cmd_validate(args, cfg: RunConfig) -> int:
    try:
        net = load_network(cfg.network_path)
    except ValidationError as e:
        print(f"✗ {cfg.network_path}")
        for v in e.report.violations:
            print(f"  - {v.message}")
        raise
    print(f"✓ {net.label or cfg.network_path}: {net.n_pigments} pigments + sink, constraints satisfied")
    return EXIT_OK


def _pipeline(cfg: RunConfig):
    net = load_network(cfg.network_path)
    return net, run_pipeline(net, cfg.rates, cfg.sink, cfg.window, cfg.rate_order)


def cmd_spectra(args, cfg: RunConfig) -> int:
    net, result = _pipeline(cfg)
    grid = args.grid if args.grid is not None else result.window.grid(args.points)
    table = spectra_table(result.donor, result.acceptor, result.f1, result.f2, grid)
    path = write_results(table, "csv", cfg.output_dir / "spectra.csv", cfg.metadata("spectra", net))
    peak = table.loc[table["sqrt_f1f2"].idxmax(), "omega"]
    print(f"✓ 𝓕 = {result.overlap:.4f}, √(f1 f2) peaks at ω = {peak:.1f} cm⁻¹")
    print(f"✓ Wrote {len(table)} rows to {path}")
    return EXIT_OK


def cmd_resonance(args, cfg: RunConfig) -> int:
    net, result = _pipeline(cfg)
    summary = resonance_summary(result.donor, result.acceptor, result.window, (result.f1, result.f2))
    check = apet_condition(summary)
    document = {
        "metadata": cfg.metadata("resonance", net),
        "overlap": result.overlap,
        "summary": summary.__dict__,
        "apet": check.__dict__,
        "sink_dominance": sink_dominance(cfg.sink, summary.effective_width),
        "heating": heating_estimate(result.partition.donor_energy, result.partition.acceptor_energy),
        "normalization": {"donor": result.f1.normalization, "acceptor": result.f2.normalization},
    }
    path = write_document(document, cfg.output_dir / "resonance.json")
    print(f"✓ ω₁ʳ = {summary.renorm_donor:.2f}, ω₂ʳ = {summary.renorm_acceptor:.2f} cm⁻¹ "
          f"(γ₁ = {summary.width_donor:.2f}, γ₂ = {summary.width_acceptor:.2f})")
    print(f"✓ ω₀ = {summary.resonance_frequency:.2f} cm⁻¹, γ = {summary.effective_width:.2f} cm⁻¹, "
          f"𝓕 = {result.overlap:.4f}")
    print(f"✓ Resonance condition {'met' if check.satisfied else 'not met'}; "
          f"relaxation would dump {document['heating']['energy_kelvin']:.0f} K per exciton")
    print(f"✓ Wrote {path}")
    return EXIT_OK


def _transfer_densities(args, cfg: RunConfig):
    """Matched Lorentzians, or the Lorentzian approximation of the FMO donor and acceptor"""
    if args.omega0 is not None or args.gamma is not None:
        if args.omega0 is None or args.gamma is None:
            raise ValueError("--omega0 and --gamma go together")
        f = NormalizedDensity.lorentzian(args.omega0, args.gamma)
        return None, f, f, args.omega0, args.gamma
    net, result = _pipeline(cfg)
    summary = resonance_summary(result.donor, result.acceptor, result.window, (result.f1, result.f2))
    f1 = NormalizedDensity.lorentzian(summary.renorm_donor, summary.width_donor, "donor")
    f2 = NormalizedDensity.lorentzian(summary.renorm_acceptor, summary.width_acceptor, "acceptor")
    return net, f1, f2, summary.resonance_frequency, summary.effective_width


def cmd_transfer(args, cfg: RunConfig) -> int:
    net, f1, f2, omega0, gamma = _transfer_densities(args, cfg)
    span = 200.0 if args.tau_model == "constant" else 30.0
    window = cfg.window or QuadratureWindow(omega0 - span * gamma, omega0 + span * gamma)
    tau = ps_to_internal(args.tau)
    model = PhaseModel(resonance_frequency=omega0, width=gamma, tau_model=args.tau_model,
                       tau_propagation=tau)
    bracket = None
    if args.t0_range is not None:
        bracket = (ps_to_internal(args.t0_range[0]), ps_to_internal(args.t0_range[1]))
    kappa_range = None
    if args.kappa_range is not None:
        kappa_range = (ps_to_internal(args.kappa_range[0]), ps_to_internal(args.kappa_range[1]))

    optimum = optimize_arrival(f1, f2, model, window, bracket, kappa_range)
    overlap = overlap_efficiency(f1, f2, window)
    factor = optimum.probability / overlap if overlap > 0 else 0.0
    document = {
        "metadata": cfg.metadata("transfer", net),
        "t0_opt": internal_to_ps(optimum.arrival_time),
        "P_opt": optimum.probability,
        "F": overlap,
        "phase_factor": factor,
        "tau": args.tau,
        "delay": internal_to_ps(optimum.delay(tau)),
        "kappa": internal_to_ps(optimum.curvature),
        "resonance_frequency": omega0,
        "width": gamma,
        "unimodal": optimum.unimodal,
        "failed_points": optimum.failed_points,
    }
    path = write_document(document, cfg.output_dir / "transfer.json")
    print(f"✓ t₀* = {document['t0_opt']:.4f} ps (τ + {document['delay']:.4f} ps), "
          f"𝒫* = {optimum.probability:.4f}, 𝓕 = {overlap:.4f}, phase factor {factor:.4f}")
    print(f"✓ Wrote {path}")
    return EXIT_OK


def cmd_bounce(args, cfg: RunConfig) -> int:
    q = args.q
    if args.flight_time is not None:
        q = recombination_probability(args.flight_time, args.recombination_time)
    if q is None:
        raise ValueError("give --q or --flight-time")
    bp = BounceParameters(p=args.p, q=q, n=args.n)
    n_text = "∞" if not bp.finite else str(int(bp.n))
    if bp.p == 0.0 and bp.finite:
        # η(∞) is undefined without dissipation
        document = {"metadata": cfg.metadata("bounce"), "p": bp.p, "q": bp.q, "n": n_text,
                    "eta_n": 0.0, "eta_inf": None, "eta_inf_first_order": None}
        write_document(document, cfg.output_dir / "bounce.json")
        print(f"η({n_text})=0.0000, η(∞) undefined")
        return EXIT_OK
    limit = asymptotic_efficiency(bp)
    eta_n = bounce_efficiency(bp) if bp.finite else limit.exact
    document = {"metadata": cfg.metadata("bounce"), "p": bp.p, "q": bp.q, "n": n_text,
                "eta_n": eta_n, "eta_inf": limit.exact, "eta_inf_first_order": limit.first_order}
    write_document(document, cfg.output_dir / "bounce.json")
    print(f"η({n_text})={eta_n:.4f}, η(∞)={limit.exact:.4f}")
    return EXIT_OK


def cmd_optimize(args, cfg: RunConfig) -> int:
    net = load_network(cfg.network_path)
    bounds = ParameterBounds.from_file(args.bounds_file) if args.bounds_file else ParameterBounds()
    outcome = optimize_parameters(net, bounds, args.budget, cfg.seed, refine=args.refine,
                                  workers=args.workers, top_k=args.top_k, rate_order=cfg.rate_order)
    meta = cfg.metadata("optimize", net)
    meta.update({"budget": args.budget, "refine": args.refine, "failures": outcome.failures})
    json_path = write_document({"metadata": meta, "best": outcome.best, "top": list(outcome.top)},
                               cfg.output_dir / "optimize.json")
    csv_path = write_results(outcome.to_frame(), "csv", cfg.output_dir / "optimize_evaluations.csv", meta)
    best = outcome.best
    print(f"✓ Best 𝓕 = {best.objective:.4f} ({best.provenance}), |ω8|/h28 = {best.sink_ratio:.3f}")
    print("✓ " + ", ".join(f"{n}={v:.2f}" for n, v in zip(best.names, best.parameters)))
    flagged = [n for n, lo, hi in zip(best.names, best.at_lower, best.at_upper) if lo or hi]
    if flagged:
        print(f"✓ At a bound: {', '.join(flagged)}")
    print(f"✓ Wrote {json_path} and {csv_path}")
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    net = load_network(cfg.network_path)
    rates = list(cfg.rates) + ([cfg.sink.sink_rate] if len(cfg.rates) == net.n_sites - 3 else [])
    sweep = grid_sweep(net, args.h28_grid, args.omega8, rates, args.workers, cfg.rate_order)
    path = write_results(sweep.to_frame(), "csv", cfg.output_dir / "sweep.csv", cfg.metadata("sweep", net))
    h, w, value = sweep.argmax()
    ratio = abs(w) / h if h > 0 else math.inf
    print(f"✓ Maximum 𝓕 = {value:.4f} at h28 = {h:.1f}, ω8 = {w:.1f} (|ω8|/h28 = {ratio:.3f})")
    if sweep.failed.any():
        print(f"✓ {int(sweep.failed.sum())} grid points failed and are flagged")
    print(f"✓ Wrote {path}")
    return EXIT_OK


def cmd_tempsweep(args, cfg: RunConfig) -> int:
    net = load_network(cfg.network_path)
    if args.steps < 1:
        raise ValueError("--steps must be at least 1")
    spacing = np.geomspace if args.spacing == "log" else np.linspace
    if args.tmin <= 0 and args.spacing == "log":
        raise ValueError("log spacing needs --tmin > 0")
    temperatures = spacing(args.tmin, args.tmax, args.steps)
    rates = list(cfg.rates) + ([cfg.sink.sink_rate] if len(cfg.rates) == net.n_sites - 3 else [])
    model = TemperatureModel(reference_rates=tuple(rates))
    table = temperature_sweep(net, model, temperatures, cfg.sink, cfg.rate_order)
    path = write_results(table, "csv", cfg.output_dir / "tempsweep.csv", cfg.metadata("tempsweep", net))
    best = table.loc[table["F"].idxmax()]
    print(f"✓ 𝓕 peaks at {best['F']:.4f} near T = {best['temperature']:.0f} K")
    print(f"✓ Wrote {path}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "spectra": cmd_spectra,
    "resonance": cmd_resonance,
    "transfer": cmd_transfer,
    "bounce": cmd_bounce,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "tempsweep": cmd_tempsweep,
}


def run_command(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE

    try:
        logging.basicConfig(level=str(args.log_level).upper(),
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = run_config(args)
        logger.debug("Run configuration: %s", cfg)
        return COMMANDS[args.command](args, cfg)
    except NUMERICAL_ERRORS as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        print(f"error: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(run_command())
