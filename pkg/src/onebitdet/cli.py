"""Command-line front end: analysis reports, parameter sweeps, validation runs.

Subcommands
    analyze        single-configuration report (moments, thresholds, P_D, chi)
    sweep-sensors  chi versus array size over an SNR list
    sweep-time     chi versus observation time (snapshots = rate * time)
    validate       analytic P_D versus Monte Carlo estimate over an SNR grid

Every CSV written is accompanied by a JSON manifest recording the full
parameter set, numeric-policy constants, and environment versions;
re-running from the manifest reproduces the CSV byte for byte.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy

from . import __version__, detector, montecarlo, orthant
from .array_model import ArrayConfig, build_steering, receive_covariance
from .detector import (
    ConditioningError,
    asymptotic_rates,
    design_gaussian,
    design_onebit,
    roc_quality,
)
from .montecarlo import simulate_statistics, wilson_interval
from .onebit_moments import StatSelector
from .orthant import QuadratureError

__all__ = ["main", "RunManifest"]

CSV_SCHEMA = "onebitdet-csv/1"
SNAPSHOT_RATE_PER_MS = 2046.0  # Nyquist-rate snapshots per millisecond
DEFAULT_SEED = 157542

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RunManifest:
    """Sidecar metadata sufficient to reproduce a CSV bit-exactly."""

    tool: str
    version: str
    command: str
    schema: str
    params: dict
    numeric_policy: dict
    environment: dict
    created: str

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _numeric_policy() -> dict:
    return {
        "orthant_abs_tol": orthant.ABS_TOL,
        "orthant_eval_cap": orthant.EVAL_CAP,
        "orthant_clamp_tol": orthant.CLAMP_TOL,
        "orthant_perturb_shrink": orthant.PERTURB_SHRINK,
        "orthant_key_grid": orthant.KEY_GRID,
        "roc_vmax": detector.ROC_VMAX,
        "roc_gl_nodes": detector.ROC_GL_NODES,
        "ridge_base": detector.RIDGE_BASE,
        "ridge_doublings": detector.RIDGE_DOUBLINGS,
        "rng": montecarlo.RNG_ALGORITHM,
        "csv_float_format": ".12g",
        "trials_allocation": "per grid point per hypothesis",
    }


def _environment() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _fmt(value) -> str:
    """CSV cell: 12 significant decimal digits, empty for None."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _mix64(x: int) -> int:
    """SplitMix64 finalizer; used to derive per-point seeds."""
    x &= _U64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _U64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _U64
    return x ^ (x >> 31)


def point_seed(master_seed: int, index: int) -> int:
    """Deterministic per-point seed for sweep/validation grids."""
    return _mix64((master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _U64)


def gamma_from_snr_db(snr_db: float) -> float:
    """Source amplitude from SNR in dB (SNR = gamma^2)."""
    return 10.0 ** (snr_db / 20.0)


def _chi_db(chi: float):
    return 10.0 * np.log10(chi) if chi > 0 else None


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}") from None

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise SystemExit(1 if status else 0)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="onebitdet",
        description="Detection analysis for one-bit quantized sensor arrays. "
        "SNR is given in dB with source amplitude gamma = 10^(SNR_dB/20) "
        "(i.e. SNR = gamma^2) against unit-variance sensor noise.",
    )
    parser.add_argument("--version", action="version", version=f"onebitdet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sensors=8, zeta=15.0, snapshots=100):
        p.add_argument("--sensors", type=int, default=sensors,
                       help=f"number of array sensors (default {sensors})")
        p.add_argument("--zeta", type=float, default=zeta,
                       help=f"arrival angle in degrees (default {zeta})")
        p.add_argument("--snapshots", type=int, default=snapshots,
                       help=f"snapshots K per decision (default {snapshots})")
        p.add_argument("--snr", type=float, action="append", default=None,
                       help="SNR in dB; repeat the flag for several values")
        p.add_argument("--gamma0", type=float, default=0.0,
                       help="null-hypothesis source amplitude (default 0)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"master seed (default {DEFAULT_SEED})")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: hardware parallelism)")
        p.add_argument("--out", type=str, default=None, help="CSV output path")

    p = sub.add_parser("analyze", help="single-configuration detection report")
    common(p)
    p.add_argument("--pfa", type=float, action="append", default=None,
                   help="false-alarm probability; repeatable (default 1e-3)")
    p.add_argument("--benchmark-gaussian", action="store_true",
                   help="also report the unquantized benchmark detector")

    p = sub.add_parser("sweep-sensors", help="chi versus array size")
    common(p, sensors=20, zeta=45.0, snapshots=2046)
    p.add_argument("--sensors-min", type=int, default=2,
                   help="smallest array size (default 2)")
    p.add_argument("--benchmark-gaussian", action="store_true",
                   help="add chi of the unquantized benchmark as extra columns")
    p.add_argument("--gnuplot", action="store_true",
                   help="also write a gnuplot script next to the CSV")

    p = sub.add_parser("sweep-time", help="chi versus observation time")
    common(p, sensors=8, zeta=30.0)
    p.add_argument("--time-min", type=float, default=0.1,
                   help="shortest observation time in ms (default 0.1)")
    p.add_argument("--time-max", type=float, default=10.0,
                   help="longest observation time in ms (default 10)")
    p.add_argument("--time-points", type=int, default=61,
                   help="log-spaced time grid size (default 61)")
    p.add_argument("--gnuplot", action="store_true",
                   help="also write a gnuplot script next to the CSV")

    p = sub.add_parser("validate", help="analytic versus simulated detection rate")
    common(p)
    p.add_argument("--snr-min", type=float, default=-19.0)
    p.add_argument("--snr-max", type=float, default=-5.0)
    p.add_argument("--snr-step", type=float, default=1.0)
    p.add_argument("--pfa", type=float, action="append", default=None,
                   help="false-alarm probability; repeatable (default 1e-3 and 1e-4)")
    p.add_argument("--trials", type=int, default=100_000,
                   help="Monte Carlo trials per grid point (default 100000)")

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("--manifest", type=str, required=True, help="manifest JSON path")
    p.add_argument("--out", type=str, default=None,
                   help="CSV output path (default: manifest's recorded path)")
    return parser


def _resolved_params(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


def _emit(args, command: str, params: dict, header: list[str], rows: list[list],
          gnuplot: str | None = None) -> None:
    if not args.out:
        return
    _write_csv(args.out, header, rows)
    manifest = RunManifest(
        tool="onebitdet",
        version=__version__,
        command=command,
        schema=CSV_SCHEMA,
        params=params,
        numeric_policy=_numeric_policy(),
        environment=_environment(),
        created=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )
    manifest.write(args.out + ".manifest.json")
    if gnuplot:
        with open(args.out + ".gp", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(gnuplot)


def _validate_inputs(args) -> None:
    if args.sensors < 1:
        raise ValueError("--sensors must be a positive integer")
    if not -90.0 <= args.zeta <= 90.0:
        raise ValueError("--zeta must lie in [-90, 90] degrees")
    if args.snapshots < 1:
        raise ValueError("--snapshots must be positive")
    if args.gamma0 < 0:
        raise ValueError("--gamma0 must be nonnegative")
    if getattr(args, "trials", 1) < 1:
        raise ValueError("--trials must be positive")
    if getattr(args, "threads", 1) < 1:
        raise ValueError("--threads must be positive")
    for pfa in getattr(args, "pfa", None) or []:
        if not 0.0 < pfa < 1.0:
            raise ValueError("--pfa must lie strictly between 0 and 1")


# ----------------------------------------------------------------- analyze --

def _cmd_analyze(args) -> int:
    _validate_inputs(args)
    snrs = args.snr if args.snr is not None else [-15.0]
    pfas = args.pfa if args.pfa is not None else [1e-3]
    config = ArrayConfig(args.sensors, np.deg2rad(args.zeta))
    header = ["model", "snr_db", "gamma1", "pfa", "threshold", "pd", "chi", "chi_db"]
    rows = []
    for snr_db in snrs:
        gamma1 = gamma_from_snr_db(snr_db)
        designs = [("one-bit", design_onebit(config, args.gamma0, gamma1, args.snapshots))]
        if args.benchmark_gaussian:
            designs.append(("gaussian", design_gaussian(config, args.gamma0, gamma1,
                                                        args.snapshots)))
        print(f"S={args.sensors} zeta={args.zeta:g} deg K={args.snapshots} "
              f"SNR={snr_db:g} dB (gamma0={args.gamma0:g}, gamma1={gamma1:.6g})")
        for model, design in designs:
            chi = roc_quality(design).chi
            chi_db = _chi_db(chi)
            db_text = f"{chi_db:.4f} dB" if chi_db is not None else "n/a"
            print(f"  [{model}] mu0={design.mu0:.6g} sigma0={design.sigma0:.6g} "
                  f"mu1={design.mu1:.6g} sigma1={design.sigma1:.6g}")
            print(f"  [{model}] chi={chi:.9g} ({db_text})")
            for pfa in pfas:
                pd, xi = asymptotic_rates(design, pfa)
                print(f"  [{model}] pfa={pfa:g}: threshold={xi:.6g} pd={pd:.9g}")
                rows.append([model, snr_db, gamma1, pfa, xi, pd, chi, chi_db])
    params = _resolved_params(args, ["sensors", "zeta", "snapshots", "gamma0", "seed"])
    params.update(snr=snrs, pfa=pfas, benchmark_gaussian=args.benchmark_gaussian)
    _emit(args, "analyze", params, header, rows)
    return 0


# ------------------------------------------------------------------ sweeps --

def _sensor_point(task):
    sensors, zeta_deg, gamma0, snr_db, snapshots, benchmark = task
    config = ArrayConfig(sensors, np.deg2rad(zeta_deg))
    gamma1 = gamma_from_snr_db(snr_db)
    chi = roc_quality(design_onebit(config, gamma0, gamma1, snapshots)).chi
    chi_g = None
    if benchmark:
        chi_g = roc_quality(design_gaussian(config, gamma0, gamma1, snapshots)).chi
    return chi, chi_g


def _map_points(fn, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


_SWEEP_GNUPLOT = """set datafile separator ','
set key autotitle columnhead
set grid
set xlabel '{xlabel}'
set ylabel 'chi [dB]'
plot for [snr in '{snrs}'] '{csv}' \\
    using {xcol}:(strcol({snrcol}) eq snr ? column({ycol}) : 1/0) \\
    with linespoints title sprintf('SNR=%s dB', snr)
"""


def _cmd_sweep_sensors(args) -> int:
    _validate_inputs(args)
    if args.sensors_min < 1 or args.sensors_min > args.sensors:
        raise ValueError("need 1 <= --sensors-min <= --sensors")
    snrs = args.snr if args.snr is not None else [-15.0, -18.0, -21.0, -24.0]
    sensor_grid = list(range(args.sensors_min, args.sensors + 1))
    tasks = [(s, args.zeta, args.gamma0, snr, args.snapshots, args.benchmark_gaussian)
             for s in sensor_grid for snr in snrs]
    results = _map_points(_sensor_point, tasks, args.threads)
    header = ["sensors", "snr_db", "chi", "chi_db"]
    if args.benchmark_gaussian:
        header += ["chi_gaussian", "chi_gaussian_db"]
    rows = []
    for (s, _, _, snr, _, _), (chi, chi_g) in zip(tasks, results):
        row = [s, snr, chi, _chi_db(chi)]
        if args.benchmark_gaussian:
            row += [chi_g, _chi_db(chi_g)]
        rows.append(row)
    params = _resolved_params(args, ["sensors", "sensors_min", "zeta", "snapshots",
                                     "gamma0", "seed"])
    params.update(snr=snrs, benchmark_gaussian=args.benchmark_gaussian)
    gp = None
    if args.gnuplot and args.out:
        gp = _SWEEP_GNUPLOT.format(xlabel="number of sensors", csv=args.out,
                                   snrs=" ".join(f"{v:g}" for v in snrs),
                                   xcol=1, snrcol=2, ycol=4)
    _emit(args, "sweep-sensors", params, header, rows, gnuplot=gp)
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return 0


def snapshots_for_time(t_ms: float) -> int:
    """Snapshot budget for an observation time, rounding half up."""
    return int(np.floor(SNAPSHOT_RATE_PER_MS * t_ms + 0.5))


def _time_point(task):
    sensors, zeta_deg, gamma0, snr_db, snapshots = task
    config = ArrayConfig(sensors, np.deg2rad(zeta_deg))
    gamma1 = gamma_from_snr_db(snr_db)
    return roc_quality(design_onebit(config, gamma0, gamma1, snapshots)).chi


def _cmd_sweep_time(args) -> int:
    _validate_inputs(args)
    if not 0 < args.time_min <= args.time_max:
        raise ValueError("need 0 < --time-min <= --time-max")
    if args.time_points < 1:
        raise ValueError("--time-points must be positive")
    snrs = args.snr if args.snr is not None else [-15.0, -18.0, -21.0, -24.0]
    if args.time_points == 1:
        times = [args.time_min]
    else:
        times = list(np.logspace(np.log10(args.time_min), np.log10(args.time_max),
                                 args.time_points))
    tasks = [(args.sensors, args.zeta, args.gamma0, snr, snapshots_for_time(t))
             for t in times for snr in snrs]
    chis = _map_points(_time_point, tasks, args.threads)
    header = ["t_ms", "snapshots", "snr_db", "chi", "chi_db"]
    rows = []
    idx = 0
    for t in times:
        for snr in snrs:
            k = tasks[idx][4]
            chi = chis[idx]
            rows.append([t, k, snr, chi, _chi_db(chi)])
            idx += 1
    params = _resolved_params(args, ["sensors", "zeta", "gamma0", "seed",
                                     "time_min", "time_max", "time_points"])
    params.update(snr=snrs)
    gp = None
    if args.gnuplot and args.out:
        gp = _SWEEP_GNUPLOT.format(xlabel="observation time [ms]", csv=args.out,
                                   snrs=" ".join(f"{v:g}" for v in snrs),
                                   xcol=1, snrcol=3, ycol=5)
    _emit(args, "sweep-time", params, header, rows, gnuplot=gp)
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return 0


# ---------------------------------------------------------------- validate --

def _validate_point(task):
    (sensors, zeta_deg, gamma0, snr_db, snapshots, trials, pfas, seed) = task
    config = ArrayConfig(sensors, np.deg2rad(zeta_deg))
    gamma1 = gamma_from_snr_db(snr_db)
    design = design_onebit(config, gamma0, gamma1, snapshots)
    cov1 = receive_covariance(build_steering(config), gamma1)
    selector = StatSelector(config.channels)
    stats = simulate_statistics(cov1, design.weights, selector, trials,
                                snapshots, seed, threads=1)
    rows = []
    for pfa in pfas:
        pd_an, xi = asymptotic_rates(design, pfa)
        hits = int(np.count_nonzero(stats > xi))
        lo, hi = wilson_interval(hits, trials)
        rows.append([snr_db, pfa, pd_an, hits / trials, lo, hi, seed])
    return rows


def _cmd_validate(args) -> int:
    _validate_inputs(args)
    if args.snr is not None:
        snrs = list(args.snr)
    else:
        if args.snr_step <= 0:
            raise ValueError("--snr-step must be positive")
        count = int(np.floor((args.snr_max - args.snr_min) / args.snr_step + 0.5)) + 1
        snrs = [args.snr_min + i * args.snr_step for i in range(count)]
    pfas = args.pfa if args.pfa is not None else [1e-3, 1e-4]
    tasks = [(args.sensors, args.zeta, args.gamma0, snr, args.snapshots,
              args.trials, tuple(pfas), point_seed(args.seed, i))
             for i, snr in enumerate(snrs)]
    results = _map_points(_validate_point, tasks, args.threads)
    header = ["snr_db", "pfa", "pd_analytic", "pd_empirical", "ci_low", "ci_high", "seed"]
    rows = [row for point_rows in results for row in point_rows]
    params = _resolved_params(args, ["sensors", "zeta", "snapshots", "gamma0",
                                     "trials", "seed"])
    params.update(snr=snrs, pfa=pfas)
    _emit(args, "validate", params, header, rows)
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return 0


# ------------------------------------------------------------------ replay --

_REPLAY_DISPATCH = {
    "analyze": (_cmd_analyze, "analyze"),
    "sweep-sensors": (_cmd_sweep_sensors, "sweep-sensors"),
    "sweep-time": (_cmd_sweep_time, "sweep-time"),
    "validate": (_cmd_validate, "validate"),
}


def _cmd_replay(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    command = manifest["command"]
    if command not in _REPLAY_DISPATCH:
        raise ValueError(f"manifest records unknown command {command!r}")
    params = manifest["params"]
    argv = [command]
    for key, value in params.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, list):
            for item in value:
                argv.extend([flag, repr(item) if not isinstance(item, str) else item])
        else:
            argv.extend([flag, repr(value) if not isinstance(value, str) else value])
    if args.out:
        argv.extend(["--out", args.out])
    return main(argv)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "analyze": _cmd_analyze,
        "sweep-sensors": _cmd_sweep_sensors,
        "sweep-time": _cmd_sweep_time,
        "validate": _cmd_validate,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        print(f"onebitdet: error: {exc}", file=sys.stderr)
        return 1
    except (QuadratureError, ConditioningError, np.linalg.LinAlgError,
            scipy.linalg.LinAlgError) as exc:
        print(f"onebitdet: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
