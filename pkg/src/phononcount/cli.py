"""Command-line front end.

Every command writes a JSON run manifest (command line, config path and
sha256, seed, outputs, package version) before any output file.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import counting, dynamics, fit, fock, io
from .exceptions import PhononCountError, SchemaError
from .params import Config, Detuning, default_config_path, gamma_om, load_config

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 3
EXIT_INVALID_CELLS = 4
MAX_GRID_CELLS = 1_000_000
SWEEP_QUANTITIES = ("n_max", "c_eff", "fidelity", "t_fock")


class _ManifestWriter:
    def __init__(self, args: argparse.Namespace, argv: list[str], config_path: Path | None):
        self.payload: dict[str, Any] = {
            "command": args.command if args.command != "fit" else f"fit {args.kind}",
            "argv": argv,
            "config_path": None if config_path is None else str(config_path),
            "config_sha256": None if config_path is None else io.sha256_file(config_path),
            "seed": getattr(args, "seed", None),
            "outputs": [],
            "tool_version": __version__,
        }

    def write(self, path: Path, outputs: list[Path]) -> None:
        self.payload["outputs"] = [str(p) for p in outputs]
        io.write_json(path, self.payload)


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def _parse_seed(raw: str) -> int | None:
    if raw.lower() == "none":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be a non-negative integer or 'none'") from None
    if seed < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return seed


def _positive_float(raw: str) -> float:
    value = float(raw)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("must be a positive number")
    return value


def _load(args) -> tuple[Config, Path]:
    path = Path(args.config) if args.config else default_config_path()
    return load_config(path), path


# ---------------------------------------------------------------- commands

def cmd_trace(args, cfg: Config, manifest: _ManifestWriter) -> int:
    t_max = cfg.pulse.t_pulse if args.t_max is None else args.t_max
    if args.points < 1:
        raise PhononCountError("--points must be >= 1")
    times = np.linspace(0.0, t_max, args.points) if args.points > 1 else np.array([0.0])
    trace = dynamics.pulse_trace(cfg.device, cfg.bath, cfg.pulse, times)
    out = Path(args.out)
    manifest.write(_manifest_path(out), [out])
    io.write_trace_csv(out, trace)
    return EXIT_OK


def cmd_histogram(args, cfg: Config, manifest: _ManifestWriter) -> int:
    window = tuple(args.window) if args.window else (0.0, min(cfg.pulse.t_per, 2 * cfg.pulse.t_pulse))
    hist = counting.synth_histogram(cfg.device, cfg.bath, cfg.detection, cfg.pulse,
                                    args.integration_time, rng_seed=args.seed, window=window)
    out = Path(args.out)
    manifest.write(_manifest_path(out), [out])
    io.write_histogram_csv(out, hist)
    return EXIT_OK


def cmd_calibrate(args, cfg: Config, manifest: _ManifestWriter) -> int:
    red = io.read_histogram_csv(args.red)
    blue = io.read_histogram_csv(args.blue)
    trace = counting.calibrate_trace(red, blue, cfg.device, cfg.detection, args.detuning, cfg.bath)
    out = Path(args.out)
    manifest.write(_manifest_path(out), [out])
    io.write_trace_csv(out, trace)
    return EXIT_OK


def _axis(spec: Any, name: str) -> np.ndarray:
    if isinstance(spec, list):
        values = np.asarray(spec, dtype=float)
    elif isinstance(spec, dict):
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"grid-spec: {name} needs start, stop, num") from None
        scale = spec.get("scale", "linear")
        if scale == "log":
            values = np.geomspace(start, stop, num)
        elif scale == "linear":
            values = np.linspace(start, stop, num)
        else:
            raise SchemaError(f"grid-spec: {name}.scale must be 'linear' or 'log'")
    else:
        raise SchemaError(f"grid-spec: {name} must be a list or a range object")
    if values.size == 0 or np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise SchemaError(f"grid-spec: {name} must be non-empty and positive")
    return values


def _read_grid_spec(raw: str) -> dict:
    text = raw if raw.lstrip().startswith("{") else Path(raw).read_text(encoding="utf-8")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"grid-spec: invalid JSON ({exc})") from None
    if not isinstance(spec, dict):
        raise SchemaError("grid-spec: top level must be an object")
    unknown = set(spec) - {"t_per_s", "t_pulse_s", "quantities", "eta"}
    if unknown:
        raise SchemaError(f"grid-spec: unknown key(s) {', '.join(sorted(unknown))}")
    return spec


def cmd_sweep(args, cfg: Config, manifest: _ManifestWriter) -> int:
    spec = _read_grid_spec(args.grid_spec)
    for key in ("t_per_s", "t_pulse_s"):
        if key not in spec:
            raise SchemaError(f"grid-spec: {key} is required")
    t_pers = _axis(spec["t_per_s"], "t_per_s")
    t_pulses = _axis(spec["t_pulse_s"], "t_pulse_s")
    if t_pers.size * t_pulses.size > MAX_GRID_CELLS:
        raise SchemaError(f"grid has {t_pers.size * t_pulses.size} cells; limit is {MAX_GRID_CELLS}")
    quantities = spec.get("quantities", list(SWEEP_QUANTITIES))
    bad = [q for q in quantities if q not in SWEEP_QUANTITIES]
    if bad or not quantities:
        raise SchemaError(f"grid-spec: quantities must be a non-empty subset of {SWEEP_QUANTITIES}")
    det = cfg.detection
    if "eta" in spec:
        det = replace(det, eta=float(spec["eta"]))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {q: out / f"{q}.csv" for q in quantities}
    manifest.write(out / "manifest.json", list(paths.values()))
    pulse = cfg.pulse.with_(detuning=Detuning.RED, bin_width=min(cfg.pulse.bin_width, t_pulses.min()))
    status = EXIT_OK
    if "n_max" in paths:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            values = dynamics.max_occupancy_map(cfg.device, cfg.bath, pulse, t_pers, t_pulses)
        io.write_map_csv(paths["n_max"], t_pers, t_pulses, values, "n_max")
    if "c_eff" in paths:
        values = dynamics.min_c_eff_map(cfg.device, cfg.bath, pulse, t_pers, t_pulses)
        io.write_map_csv(paths["c_eff"], t_pers, t_pulses, values, "c_eff")
    if "fidelity" in paths or "t_fock" in paths:
        sweep = fock.fock_fidelity_sweep(cfg.device, cfg.bath, det, pulse, t_pulses, t_pers)
        for q in ("fidelity", "t_fock"):
            if q in paths:
                io.write_sweep_csv(paths[q], sweep)
        if np.any(sweep.flag == "error"):
            print(f"sweep: {int(np.sum(sweep.flag == 'error'))} cell(s) outside model validity",
                  file=sys.stderr)
            status = EXIT_INVALID_CELLS
    return status


def _weights_from_sigma(cols: dict, value_key: str, log_space: bool):
    if "sigma" not in cols:
        return None
    sigma = cols["sigma"]
    if log_space:
        sigma = sigma / cols[value_key]
    if np.any(sigma <= 0):
        raise SchemaError("sigma must be positive")
    return 1.0 / sigma**2


def cmd_fit(args, cfg: Config, manifest: _ManifestWriter) -> int:
    cols = io.read_points_csv(args.data, args.kind)
    detuning = Detuning.coerce(args.detuning) if args.detuning else cfg.pulse.detuning
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.kind == "decay":
            result = fit.fit_decay(np.column_stack([cols["t_per_s"], cols["ratio"]]),
                                   _weights_from_sigma(cols, "ratio", True))
        elif args.kind == "pulse":
            trace = dynamics.OccupancyTrace(cols["t_s"], cols["n"], cols.get("segment"),
                                            cols.get("sigma"))
            pulse = cfg.pulse.with_(detuning=detuning)
            rb = dynamics.rates(cfg.device, cfg.bath, pulse)
            spont = gamma_om(cfg.device, pulse.n_c_on) if detuning is Detuning.BLUE else 0.0
            result = fit.fit_pulse_occupancy(trace, rb.gamma_total, cfg.bath.hot_source(),
                                             cfg.device.gamma_0 * cfg.bath.n_0, spont)
        elif args.kind == "cw":
            result = fit.fit_cw_heating(np.column_stack([cols["n_c"], cols["value"]]), cfg.device,
                                        detuning, _weights_from_sigma(cols, "value", True))
        else:
            result = fit.extract_g0(np.column_stack([cols["n_c"], cols["linewidth_red_rad_s"],
                                                     cols["linewidth_blue_rad_s"]]), cfg.device)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    manifest.write(_manifest_path(out), [out])
    io.write_json(out, result.to_dict())
    return EXIT_OK if result.converged else EXIT_ERROR


def cmd_config_example(args, cfg: Config, manifest: _ManifestWriter) -> int:
    out = Path(args.out)
    manifest.write(_manifest_path(out), [out])
    out.write_bytes(default_config_path().read_bytes())
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phononcount",
        description="Pulsed optomechanical phonon counting: forward models, sweeps and fits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="device config JSON (default: bundled device)")
        p.add_argument("--out", required=True, help="output path")
        return p

    p = add("trace", "occupancy over one period")
    p.add_argument("--t-max", type=_positive_float, default=None,
                   help="end time in s (default: pulse width)")
    p.add_argument("--points", type=int, default=201)

    p = add("histogram", "simulated arrival-time histogram")
    p.add_argument("--integration-time", type=_positive_float, required=True, help="seconds")
    p.add_argument("--seed", type=_parse_seed, default=None,
                   help="RNG seed, or 'none' for expected counts")
    p.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"),
                   help="time window in s (default: 0 to twice the pulse width)")

    p = add("calibrate", "occupancy trace from a red/blue histogram pair")
    p.add_argument("--red", required=True)
    p.add_argument("--blue", required=True)
    p.add_argument("--detuning", choices=["red", "blue"], default="red",
                   help="which histogram supplies the trace shape")

    p = add("sweep", "heatmaps over pulse period and width")
    p.add_argument("--grid-spec", required=True, help="JSON file or inline JSON object")

    p = add("fit", "fit a model to a data CSV")
    p.add_argument("kind", choices=["decay", "pulse", "cw", "g0"])
    p.add_argument("data", help="input CSV")
    p.add_argument("--detuning", choices=["red", "blue"], default=None,
                   help="override the config detuning (pulse and cw fits)")

    add("config-example", "write the bundled device config")
    return parser


COMMANDS = {
    "trace": cmd_trace,
    "histogram": cmd_histogram,
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "config-example": cmd_config_example,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        cfg, path = _load(args)
        manifest = _ManifestWriter(args, argv, path)
        return COMMANDS[args.command](args, cfg, manifest)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PhononCountError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
