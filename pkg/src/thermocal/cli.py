"""Command-line interface.

Verbs mirror the analysis stages:

    simulate     forward power series at a fixed parameter point
    generate     synthetic measurement series with known truth sidecar
    sensitivity  OAT screening plus first-order Sobol indices
    calibrate    posterior sampling against the measurement series
    validate     posterior-predictive check of the calibrated model
    propagate    push the posterior to the period-mean power QoI
    decide       optimal fixed fee per defection-rate value
    pipeline     calibrate -> validate -> propagate -> decide (+ screening)

Each verb reads one YAML config (all fields defaulted), writes its report
files plus a `manifest_<verb>.json` into the output directory, and leaves
its input files untouched.  Downstream verbs consume the artifacts of
upstream ones from the same output directory and say which verb to run
when one is missing.  A lock file guards the output directory against
concurrent runs.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError, DataError, DomainError
from . import decision as decision_mod
from . import io
from . import mcmc
from . import sensitivity as sens
from . import validation as val
from .statmodel import PosteriorModel, PriorSpec
from .synthetic import SyntheticDataSpec, generate_measurements
from .thermal import simulate

LOCK_NAME = ".thermocal.lock"

_COMMANDS = {
    "simulate": "run the forward model at synthetic.theta0 and save the power series",
    "generate": "draw a synthetic measurement series with a truth sidecar",
    "sensitivity": "screen parameters (OAT hybrid index + first-order Sobol)",
    "calibrate": "sample the posterior and store the chain with predictions",
    "validate": "posterior-predictive p-value check of a calibrated chain",
    "propagate": "turn stored predictions into period-mean power draws",
    "decide": "optimize the fixed fee over the propagated QoI draws",
    "pipeline": "all stages in sequence, reusing the in-memory chain",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermocal",
        description="Bayesian calibration of a lumped thermal test cell, from "
                    "forward simulation to fixed-fee pricing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, help_text in _COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text, description=help_text)
        cmd.add_argument("--config", metavar="PATH", default=None,
                         help="YAML run configuration (defaults used when omitted)")
        cmd.add_argument("--seed", metavar="U64", type=int, default=None,
                         help="override both the sampler seed and the synthetic-data seed")
        cmd.add_argument("--out", metavar="DIR", default=None,
                         help="override the output directory from the config")
        cmd.add_argument("--threads", metavar="N", type=int, default=1,
                         help="worker threads (recorded in the manifest; stages here "
                              "are single-threaded)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(f"--seed must be >= 0, got {args.seed}")
            config.mcmc.seed = args.seed
            config.synthetic.seed = args.seed
        if args.out is not None:
            config.paths.out = args.out
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        _run(args.command, config, args.threads)
        return 0
    except ConfigError as exc:
        print(f"thermocal: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"thermocal: data error: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"thermocal: numerical error: {exc}", file=sys.stderr)
        return 4


def _run(command: str, config: RunConfig, threads: int) -> None:
    out_dir = Path(config.paths.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory {out_dir} is locked by another run; "
                          f"remove {lock} if it is stale") from None
    os.write(fd, f"{os.getpid()}\n".encode())
    os.close(fd)
    started = time.perf_counter()
    try:
        artifacts = _DISPATCH[command](config, out_dir)
        manifest = {
            "command": command,
            "config_hash": config.config_hash(),
            "seed": config.mcmc.seed,
            "synthetic_seed": config.synthetic.seed,
            "threads": threads,
            "out_dir": str(out_dir),
            "artifacts": sorted(artifacts),
            "wall_time_s": round(time.perf_counter() - started, 3),
            "versions": _versions(),
        }
        io.write_json(out_dir / f"manifest_{command}.json", manifest)
    finally:
        lock.unlink(missing_ok=True)


def _versions() -> dict:
    import numba
    import scipy
    import yaml
    return {
        "thermocal": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "pyyaml": yaml.__version__,
    }


def _load_common(config: RunConfig, *, measurements: bool = False):
    names = ("forcing", "geometry") + (("measurements",) if measurements else ())
    paths = config.require_inputs(names)
    forcing = io.load_forcing(paths["forcing"])
    geom = io.load_geometry(paths["geometry"])
    z = None
    if measurements:
        _, z = io.load_measurements(paths["measurements"])
    return forcing, geom, z


def _prior(config: RunConfig) -> PriorSpec:
    return PriorSpec(theta_lower=np.asarray(config.prior.theta_lower, float),
                     theta_upper=np.asarray(config.prior.theta_upper, float))


def cmd_simulate(config: RunConfig, out: Path) -> list[str]:
    forcing, geom, _ = _load_common(config)
    theta = np.asarray(config.synthetic.theta0, dtype=float)
    series = simulate(theta, config.y0, forcing, geom)
    io.save_measurements(out / "simulation.csv", forcing.timestamps, series.powers)
    io.write_json(out / "simulate.json", {
        "theta": [float(v) for v in theta],
        "y0": config.y0,
        "n_steps": forcing.n,
        "dt_s": forcing.dt,
        "mean_power_w": float(np.mean(series.powers)),
        "min_power_w": float(np.min(series.powers)),
        "max_power_w": float(np.max(series.powers)),
        "initial_power_w": series.initial_power,
    })
    return ["simulation.csv", "simulate.json"]


def cmd_generate(config: RunConfig, out: Path) -> list[str]:
    forcing, geom, _ = _load_common(config)
    spec = SyntheticDataSpec(
        theta0=np.asarray(config.synthetic.theta0, dtype=float),
        noise_sd=config.synthetic.noise_sd,
        bias=config.synthetic.bias,
        seed=config.synthetic.seed,
        y0=config.y0,
    )
    stamps, z, truth = generate_measurements(spec, forcing, geom, config.block_count)
    io.save_measurements(out / "measurements_synthetic.csv", stamps, z)
    io.write_json(out / "measurements_synthetic_truth.json", truth)
    return ["measurements_synthetic.csv", "measurements_synthetic_truth.json"]


def cmd_sensitivity(config: RunConfig, out: Path) -> list[str]:
    forcing, geom, _ = _load_common(config)
    threshold = config.sensitivity.require_threshold()
    lower = np.asarray(config.prior.theta_lower, float)
    upper = np.asarray(config.prior.theta_upper, float)
    nominal = (np.asarray(config.sensitivity.nominal, float)
               if config.sensitivity.nominal is not None
               else 0.5 * (lower + upper))
    spec = sens.OATSpec(nominal=nominal, threshold=threshold,
                        fraction=config.sensitivity.fraction,
                        theta_lower=lower, theta_upper=upper)
    powers = lambda th: simulate(th, config.y0, forcing, geom).powers
    screening = sens.oat_screening(powers, spec)
    qoi = lambda th: float(np.mean(simulate(th, config.y0, forcing, geom).powers))
    sobol = {p: sens.sobol_first_order(qoi, p, config.sensitivity.sobol_n,
                                       theta_lower=lower, theta_upper=upper,
                                       seed=config.mcmc.seed)
             for p in (1, 2, 3)}
    with (out / "sensitivity.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "s_mean", "s_std", "s_hybrid",
                         "sobol_first_order", "retained"])
        for idx in screening.indices:
            writer.writerow([
                sens.param_name(idx.param), repr(idx.s_mean), repr(idx.s_std),
                repr(idx.s_hybrid), repr(float(sobol[idx.param])),
                str(int(idx.param in screening.retained)),
            ])
    io.write_json(out / "sensitivity.json", {
        "threshold": threshold,
        "fraction": config.sensitivity.fraction,
        "nominal": [float(v) for v in nominal],
        "retained": [f"theta{p}" for p in screening.retained],
        "sobol_n": config.sensitivity.sobol_n,
        "sobol_negative_flags": [f"theta{p}" for p, s in sobol.items() if s < 0.0],
        "indices": {
            f"theta{idx.param}": {"s_mean": idx.s_mean, "s_std": idx.s_std,
                                  "s_hybrid": idx.s_hybrid,
                                  "sobol_first_order": float(sobol[idx.param])}
            for idx in screening.indices
        },
    })
    return ["sensitivity.csv", "sensitivity.json"]


def _calibrate(config: RunConfig, out: Path):
    forcing, geom, z = _load_common(config, measurements=True)
    model = PosteriorModel(z, forcing, geom, prior=_prior(config),
                           block_count=config.block_count, y0=config.y0)
    chains = [
        mcmc.run_chain(model,
                       n_iter=config.mcmc.n_iter, burn_in=config.mcmc.burn_in,
                       thin=config.mcmc.thin, policy=config.mcmc.policy(),
                       seed=config.mcmc.seed, chain_index=k,
                       lambda2_update=config.mcmc.lambda2_update)
        for k in range(config.mcmc.chains)
    ]
    merged = mcmc.merge_chains(chains)
    io.save_chain_csv(out / "chain.csv", merged.thetas, merged.lambda2s)
    io.save_series_ensemble_csv(out / "predictions.csv", merged.predictions)
    diag = mcmc.diagnostics(merged)
    diag["settings"] = {
        "n_iter": config.mcmc.n_iter, "burn_in": config.mcmc.burn_in,
        "thin": config.mcmc.thin, "chains": config.mcmc.chains,
        "seed": config.mcmc.seed, "lambda2_update": config.mcmc.lambda2_update,
    }
    diag["per_chain"] = [
        {"chain_index": c.chain_index,
         "acceptance": {k: float(v) for k, v in c.acceptance.items()},
         "final_scales": [float(s) for s in c.final_scales],
         "scale_changes": int(c.scale_iterations.size)}
        for c in chains
    ]
    diag["n_simulations"] = model.simulation_count
    io.write_json(out / "diagnostics.json", diag)
    sample = val.PosteriorSample.from_chain(merged)
    return ["chain.csv", "predictions.csv", "diagnostics.json"], z, sample


def cmd_calibrate(config: RunConfig, out: Path) -> list[str]:
    artifacts, _, _ = _calibrate(config, out)
    return artifacts


def _load_sample(out: Path) -> val.PosteriorSample:
    chain_path = out / "chain.csv"
    pred_path = out / "predictions.csv"
    for p in (chain_path, pred_path):
        if not p.exists():
            raise DataError(f"missing {p.name} in {out}; run \"thermocal calibrate\" first")
    thetas, lambda2s = io.load_chain_csv(chain_path)
    preds = io.load_series_ensemble_csv(pred_path)
    if preds.shape[0] != thetas.shape[0]:
        raise DataError(f"chain.csv has {thetas.shape[0]} draws but predictions.csv "
                        f"has {preds.shape[0]}; re-run \"thermocal calibrate\"")
    return val.PosteriorSample(thetas, lambda2s, preds)


def _validate(config: RunConfig, out: Path, z, sample) -> list[str]:
    if sample.m < config.validation.min_draws:
        raise DomainError(f"only {sample.m} retained draws but validation.min_draws = "
                          f"{config.validation.min_draws}; lengthen the chain")
    report = val.validate_model(z, sample, alpha=config.validation.alpha,
                                seed=config.mcmc.seed)
    io.write_json(out / "validation.json", report.as_dict())
    return ["validation.json"]


def cmd_validate(config: RunConfig, out: Path) -> list[str]:
    _, _, z = _load_common(config, measurements=True)
    sample = _load_sample(out)
    return _validate(config, out, z, sample)


def _propagate(out: Path, sample) -> tuple[list[str], np.ndarray]:
    ensemble = val.propagate(sample)
    io.save_qoi_csv(out / "qoi.csv", ensemble.qoi)
    io.save_series_ensemble_csv(out / "ensemble.csv", ensemble.series)
    lo, mid, hi = ensemble.quantiles([0.025, 0.5, 0.975])
    io.write_json(out / "propagate.json", {
        "n_draws": int(ensemble.qoi.size),
        "qoi_mean_power_w": float(np.mean(ensemble.qoi)),
        "qoi_sd_power_w": float(np.std(ensemble.qoi, ddof=1)),
        "qoi_quantiles": {"0.025": float(lo), "0.5": float(mid), "0.975": float(hi)},
        "mean_trajectory_power_w": [float(v) for v in ensemble.mean_trajectory],
    })
    return ["qoi.csv", "ensemble.csv", "propagate.json"], ensemble.qoi


def cmd_propagate(config: RunConfig, out: Path) -> list[str]:
    sample = _load_sample(out)
    artifacts, _ = _propagate(out, sample)
    return artifacts


def _decide(config: RunConfig, out: Path, qoi: np.ndarray) -> list[str]:
    artifacts = []
    results = []
    for k, c in enumerate(config.decision.c_values):
        spec = decision_mod.UtilitySpec(m=config.decision.m, c=c)
        res = decision_mod.optimize_fee(qoi, spec,
                                        grid_points=config.decision.grid_points,
                                        tol=config.decision.tol)
        curve_name = f"decision_curve_{k}.csv"
        io.save_curve_csv(out / curve_name, res.grid, res.expected_utility, res.se)
        artifacts.append(curve_name)
        results.append({
            "c": float(c),
            "d_hat": res.d_hat,
            "utility_at_d_hat": res.utility_at_d_hat,
            "warning_flags": res.warnings,
            "curve_file": curve_name,
        })
    io.write_json(out / "decision.json", {"m": config.decision.m, "results": results})
    artifacts.append("decision.json")
    return artifacts


def cmd_decide(config: RunConfig, out: Path) -> list[str]:
    qoi_path = out / "qoi.csv"
    if not qoi_path.exists():
        raise DataError(f"missing qoi.csv in {out}; run \"thermocal propagate\" first")
    qoi = io.load_qoi_csv(qoi_path)
    return _decide(config, out, qoi)


def cmd_pipeline(config: RunConfig, out: Path) -> list[str]:
    artifacts = cmd_sensitivity(config, out)
    cal_artifacts, z, sample = _calibrate(config, out)
    artifacts += cal_artifacts
    artifacts += _validate(config, out, z, sample)
    prop_artifacts, qoi = _propagate(out, sample)
    artifacts += prop_artifacts
    artifacts += _decide(config, out, qoi)
    return artifacts


_DISPATCH = {
    "simulate": cmd_simulate,
    "generate": cmd_generate,
    "sensitivity": cmd_sensitivity,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
    "propagate": cmd_propagate,
    "decide": cmd_decide,
    "pipeline": cmd_pipeline,
}

if __name__ == "__main__":
    sys.exit(main())
