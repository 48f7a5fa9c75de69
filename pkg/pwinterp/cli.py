"""
Command-line front end.

    pwinterp <command> CONFIG [--output-dir DIR] [--seed N] [--set key=value ...]

Every command builds its artifacts in memory and writes them together with a
summary.yaml recording the inputs (with sha256 hashes), the seed and the
package version. Nothing is written when a command fails.

Exit codes:
    0  success
    1  unexpected error
    2  unknown command or bad command-line usage
    3  configuration file problem (unreadable, include cycle, missing input)
    4  parameter outside its documented range
    5  numerical failure (quadrature, truncation, underflow, multiple zero)
    6  domain error (sequence or interpolation problem)
    7  control problem error
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import yaml

from pwinterp import __version__
from pwinterp.biortho import (
    BiorthogonalFamily,
    GeneratingFunction,
    biorthogonal_from_S,
    load_family,
    validate_family,
    weak_interpolation_report,
)
from pwinterp.config import COMMANDS, ConfigLoader, RunConfig, init_settings
from pwinterp.control import (
    ControlProblem,
    ControlSignal,
    DiagonalSystem,
    controllability_report,
    min_norm_control,
    simulate,
)
from pwinterp.errors import ConfigError, PWInterpError
from pwinterp.interp import InterpolationProblem, norm_stability_study, solve_interpolation
from pwinterp.io_formats import (
    csv_text,
    dense_vector,
    read_indexed_complex,
    read_weights,
    sha256_file,
    write_artifacts,
)
from pwinterp.log_config import configure_logging
from pwinterp.mcphail import WeightedPair, mcphail_measure, mq_check
from pwinterp.multiplier import build_multiplier, decay_certificate, rectangle_grid
from pwinterp.seqlab import (
    ComplexSequence,
    HalfPlane,
    blaschke_condition_sum,
    carleson_measure_constant,
    carleson_products,
    carleson_sweep,
    density_interpolation_test,
    imaginary_ladder,
    perturbed_integers,
    separation_report,
    shifted_integers,
    sigma_measure,
    upper_uniform_density,
)

logger = logging.getLogger(__name__)

Artifacts = Dict[str, str]
Results = Dict[str, Any]


# Inputs


def load_nodes(cfg: RunConfig) -> ComplexSequence:
    """Nodes from `nodes_file` or from the named generator."""
    if cfg.nodes_file is not None:
        return ComplexSequence.from_file(cfg.nodes_file)
    if cfg.generator == "perturbed-integers":
        return perturbed_integers(cfg.p, cfg.N)
    if cfg.generator == "shifted-integers":
        return shifted_integers(cfg.N, complex(cfg.shift, cfg.shift_im))
    if cfg.generator == "imaginary-ladder":
        return imaginary_ladder(cfg.N)
    raise ConfigError(f"command '{cfg.command}' needs nodes_file or generator")


def load_family_for(cfg: RunConfig, nodes: ComplexSequence) -> BiorthogonalFamily:
    if cfg.family_manifest is not None:
        return load_family(cfg.family_manifest, nodes)
    return biorthogonal_from_S(GeneratingFunction(nodes, tail_offset=cfg.tail_offset))


def load_modal_vector(path: Optional[Path], size: int, what: str) -> np.ndarray:
    if path is None:
        return np.zeros(size, dtype=complex)
    return dense_vector(read_indexed_complex(path), size, what)


def require(cfg: RunConfig, *names: str) -> None:
    missing = [name for name in names if getattr(cfg, name) is None]
    if missing:
        raise ConfigError(f"command '{cfg.command}' needs {', '.join(missing)}")


def _complex_rows(points: np.ndarray) -> List[Tuple[float, float]]:
    return [(float(z.real), float(z.imag)) for z in points]


# Commands


def run_analyze_sequence(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    seq = load_nodes(cfg)
    hp = HalfPlane(cfg.a, cfg.side)
    theta = carleson_products(seq, hp)
    separation = separation_report(seq, hp)
    blaschke = blaschke_condition_sum(seq, hp)
    rows = [
        (n, re, im, float(t), float(np.log(t)))
        for n, ((re, im), t) in enumerate(zip(_complex_rows(seq.points), theta))
    ]
    artifacts = {"carleson_products.csv": csv_text(["n", "re", "im", "theta", "log_theta"], rows)}
    results: Results = {
        "nodes": len(seq),
        "inf_theta": float(theta.min()),
        "psh_gap": separation.psh_gap,
        "euclid_gap": separation.euclid_gap,
        "blaschke_sum": blaschke.total,
        "blaschke_last_term": blaschke.last_term,
    }
    if seq.strip_bound is not None:
        density = upper_uniform_density(seq, cfg.r_grid)
        artifacts["density.csv"] = csv_text(["r", "ratio"], density)
        results["density_at_largest_r"] = density[-1][1]
    return artifacts, results


def run_density(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    seq = load_nodes(cfg)
    ratios = upper_uniform_density(seq, cfg.r_grid)
    verdict = density_interpolation_test(seq, cfg.tau, cfg.r_grid)
    return {"density.csv": csv_text(["r", "ratio"], ratios)}, dict(verdict._asdict())


def run_carleson_measure(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    seq = load_nodes(cfg)
    hp = HalfPlane(cfg.a, cfg.side)
    measure = sigma_measure(seq, hp)
    constant = carleson_measure_constant(measure, hp)
    sweep = carleson_sweep(seq, cfg.offsets)
    artifacts = {
        "sigma_measure.csv": csv_text(
            ["re", "im", "mass"],
            [(re, im, float(m)) for (re, im), m in zip(_complex_rows(measure.locations), measure.masses)],
        ),
        "carleson_sweep.csv": csv_text(["offset", "side", "inf_theta", "count"], sweep),
    }
    return artifacts, {"carleson_measure_constant": constant}


def run_build_multiplier(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    H = build_multiplier(cfg.epsilon)
    x = np.linspace(-cfg.probe_radius, cfg.probe_radius, cfg.probe_points)
    values = H(x)
    artifacts = {
        "multiplier_spectrum.csv": H.spectrum.to_spectrum_text(),
        "multiplier_profile.csv": csv_text(
            ["x", "re_H", "im_H"], [(float(t), float(v.real), float(v.imag)) for t, v in zip(x, values)]
        ),
    }
    return artifacts, {"epsilon": H.epsilon, "normalization": H.normalization, "H_at_zero": float(H(0.0).real)}


def run_multiplier_probe(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    H = build_multiplier(cfg.epsilon)
    certificate = decay_certificate(H, cfg.probe_radius, cfg.probe_height, cfg.probe_points)
    grid = rectangle_grid(cfg.probe_radius, cfg.probe_height, cfg.probe_points, 1)
    values = np.abs(H(grid)) * (1.0 + np.abs(grid))
    artifacts = {
        "decay_profile.csv": csv_text(["x", "abs_H_times_1_plus_x"], zip(grid.real.tolist(), values.tolist()))
    }
    return artifacts, dict(certificate._asdict())


def run_build_family(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    nodes = load_nodes(cfg)
    family = load_family_for(cfg, nodes)
    deviation = validate_family(family)
    report = weak_interpolation_report(family, cfg.tau, cfg.p)
    rows = [
        (n, re, im, float(norm))
        for n, ((re, im), norm) in enumerate(zip(_complex_rows(nodes.points), report.norms))
    ]
    artifacts = {"family_norms.csv": csv_text(["n", "re", "im", "normalized_norm"], rows)}
    return artifacts, {
        "mode": family.mode,
        "nodes": len(nodes),
        "biorthogonality_deviation": deviation,
        "sup_normalized_norm": report.sup_norm,
        "argmax": report.argmax,
    }


def _interpolation_problem(cfg: RunConfig, nodes: ComplexSequence) -> InterpolationProblem:
    require(cfg, "data_file")
    data = dense_vector(read_indexed_complex(cfg.data_file), len(nodes), "data")
    weights = None
    if cfg.weights_file is not None:
        entries = read_weights(cfg.weights_file)
        weights = dense_vector(entries, len(nodes), "weight").real
    return InterpolationProblem(nodes, data, cfg.p, cfg.tau, cfg.epsilon, weights)


def run_solve_interpolation(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    nodes = load_nodes(cfg)
    prob = _interpolation_problem(cfg, nodes)
    family = load_family_for(cfg, nodes)
    f, report = solve_interpolation(prob, family, build_multiplier(cfg.epsilon))
    x = np.linspace(-cfg.probe_radius, cfg.probe_radius, cfg.probe_points)
    samples = f(x)
    artifacts = {
        "node_residuals.csv": csv_text(
            ["n", "residual"], [(n, float(r)) for n, r in enumerate(report.residuals)]
        ),
        "interpolant_samples.csv": csv_text(
            ["x", "re_f", "im_f"], [(float(t), float(v.real), float(v.imag)) for t, v in zip(x, samples)]
        ),
    }
    return artifacts, {
        "node_residual": report.node_residual,
        "norm_ratio": report.norm_ratio,
        "interpolant_norm": report.interpolant_norm,
        "data_norm": report.data_norm,
        "achieved_bandwidth": report.achieved_bandwidth,
        "weighting": report.weighting,
    }


def run_norm_study(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    nodes = load_nodes(cfg)
    family = load_family_for(cfg, nodes)
    study = norm_stability_study(
        nodes, family, build_multiplier(cfg.epsilon), cfg.trials, cfg.p, cfg.tau, cfg.seed
    )
    artifacts = {"norm_ratios.csv": csv_text(["trial", "norm_ratio"], enumerate(study.ratios.tolist()))}
    return artifacts, {
        "trials": cfg.trials,
        "min": study.minimum,
        "median": study.median,
        "max": study.maximum,
        "max_over_median": study.spread,
        "max_residual": study.max_residual,
    }


def run_mcphail_check(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    seq = load_nodes(cfg)
    hp = HalfPlane(cfg.a, cfg.side)
    weights = np.ones(len(seq))
    if cfg.weights_file is not None:
        weights = dense_vector(read_weights(cfg.weights_file), len(seq), "weight").real
    inside = hp.contains(seq.points)
    if not inside.all():
        logger.warning(f"{int((~inside).sum())} nodes outside the {cfg.side} half-plane are left out")
    pair = WeightedPair(seq.subset(inside), weights[inside], cfg.q, hp)
    measure = mcphail_measure(pair)
    verdict = mq_check(pair, threshold=cfg.threshold)
    artifacts = {
        "mcphail_measure.csv": csv_text(
            ["re", "im", "mass"],
            [(re, im, float(m)) for (re, im), m in zip(_complex_rows(measure.locations), measure.masses)],
        )
    }
    return artifacts, {
        "nodes_used": len(pair),
        "nodes_left_out": int((~inside).sum()),
        "constant": verdict.constant,
        "threshold": verdict.threshold,
        "satisfied": verdict.satisfied,
    }


def _control_inputs(cfg: RunConfig) -> Tuple[DiagonalSystem, np.ndarray]:
    require(cfg, "system_file")
    system = DiagonalSystem.from_file(cfg.system_file)
    x0 = load_modal_vector(cfg.x0_file, len(system), "x0")
    return system, x0


def run_control_solve(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    require(cfg, "horizon", "x1_file")
    system, x0 = _control_inputs(cfg)
    x1 = load_modal_vector(cfg.x1_file, len(system), "x1")
    signal = min_norm_control(system, ControlProblem(x0, x1, cfg.horizon))
    return {"control_signal.csv": signal.to_text()}, {
        "norm": signal.norm,
        "norm_squared": signal.norm**2,
        "gram_condition": signal.gram_condition,
        "regularized": signal.regularized,
        "moment_residual": signal.moment_residual,
    }


def run_control_simulate(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    system, x0 = _control_inputs(cfg)
    signal = ControlSignal.from_file(cfg.signal_file) if cfg.signal_file is not None else None
    if signal is None:
        require(cfg, "horizon")
    trajectory = simulate(system, signal, x0, cfg.horizon)
    rows = [
        (float(t), n, float(x.real), float(x.imag))
        for t, state in zip(trajectory.times, trajectory.states)
        for n, x in enumerate(state)
    ]
    endpoint = {f"x{n}": [float(x.real), float(x.imag)] for n, x in enumerate(trajectory.endpoint)}
    return {"trajectory.csv": csv_text(["t", "n", "re_x", "im_x"], rows)}, {
        "panels": trajectory.panels,
        "endpoint_change": trajectory.change,
        "endpoint": endpoint,
    }


def run_control_report(cfg: RunConfig) -> Tuple[Artifacts, Results]:
    require(cfg, "horizon")
    system, _ = _control_inputs(cfg)
    report = controllability_report(system, cfg.horizon, trials=cfg.trials, seed=cfg.seed)
    artifacts = {"gram_profile.csv": csv_text(["horizon", "gram_condition"], report.condition_profile)}
    return artifacts, {
        "infinite_time_constant": report.infinite_time_constant,
        "finite_time_constant": report.finite_time_constant,
        "offsets": report.offsets,
    }


HANDLERS: Dict[str, Callable[[RunConfig], Tuple[Artifacts, Results]]] = {
    "analyze-sequence": run_analyze_sequence,
    "density": run_density,
    "carleson-measure": run_carleson_measure,
    "build-multiplier": run_build_multiplier,
    "multiplier-probe": run_multiplier_probe,
    "build-family": run_build_family,
    "solve-interpolation": run_solve_interpolation,
    "norm-study": run_norm_study,
    "mcphail-check": run_mcphail_check,
    "control-solve": run_control_solve,
    "control-simulate": run_control_simulate,
    "control-report": run_control_report,
}


def _plain(value: Any) -> Any:
    """Convert numpy scalars and tuples into YAML-friendly values."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def summary_text(cfg: RunConfig, results: Results) -> str:
    summary = {
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.seed,
        "inputs": {
            name: {"path": str(path), "sha256": sha256_file(path)}
            for name, path in sorted(cfg.input_files().items())
        },
        "results": _plain(results),
    }
    return yaml.safe_dump(summary, sort_keys=False)


def dispatch(cfg: RunConfig) -> List[Path]:
    """Run one command and write its artifacts plus summary.yaml atomically."""
    artifacts, results = HANDLERS[cfg.command](cfg)
    artifacts["summary.yaml"] = summary_text(cfg, results)
    return write_artifacts(cfg.output_dir, artifacts)


def parse_overrides(items: List[str]) -> Dict[str, str]:
    overrides = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwinterp",
        description="Interpolation diagnostics, Paley-Wiener interpolants and moment-based control.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Environment Variables:
  PWINTERP_CONFIG_DIR   Directory searched for bare config names (default: conf.d)
  PWINTERP_OUTPUT_DIR   Output directory when the config sets none
  PWINTERP_LOG_DIR      Directory for pwinterp.log (default: logs)
  DOTENV_PATH           .env file loaded before the settings (default: .env)
        """,
    )
    parser.add_argument("command", choices=COMMANDS, help="Command to run")
    parser.add_argument("config", help="Run configuration file (key = value lines)")
    parser.add_argument("--output-dir", help="Directory for the artifacts")
    parser.add_argument("--seed", type=int, help="Seed for randomised studies")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a configuration value (repeatable)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug output")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else "INFO")
    env_file = Path(os.getenv("DOTENV_PATH", ".env"))
    init_settings(env_file if env_file.is_file() else None)

    try:
        overrides = parse_overrides(args.set)
        overrides["command"] = args.command
        if args.output_dir:
            overrides["output_dir"] = args.output_dir
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        cfg = ConfigLoader().load(args.config, overrides)
        written = dispatch(cfg)
    except PWInterpError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly: {e}")
        return 1

    logger.info(f"{args.command} finished: {', '.join(p.name for p in written)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
