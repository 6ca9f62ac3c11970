"""``cqed-sim`` command-line tool.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage error.
Every run writes its data files plus ``manifest.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .config_io import load_document, readout_section, resolve_path
from .dispersive import (default_reference, effective_system, exchange_rate, field_sweep, modes_for,
                         write_sweep_csv)
from .fit import fit, problem_from_json, read_data_csv, write_fit_json
from .model import ConfigError, NumericalError
from .readout import (resolve_threads, semi_analytic_readout, simulate_readout,
                      write_histogram_csv, write_readout_json)
from .spectrum import transmission_spectrum, write_spectrum_csv

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("spectrum", "modes", "sweep", "readout", "fit", "validate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> np.ndarray:
    """``START:STOP:POINTS`` in GHz."""
    parts = text.split(":")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) != 3:
            raise ValueError
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"expected START:STOP:POINTS, got {text!r}")
    if points < 1 or (points > 1 and not stop > start):
        raise argparse.ArgumentTypeError(f"need POINTS >= 1 and STOP > START, got {text!r}")
    return np.linspace(start, stop, points)


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True,
                        help="config JSON path or bundled name (device1, device2, fig2_pair, ...)")
    common.add_argument("--out", default="cqed_out", help="output directory")
    common.add_argument("--seed", type=_u64, default=None)
    common.add_argument("--threads", type=_positive, default=None,
                        help="worker threads (default: $CQED_SIM_THREADS, else all cores)")
    common.add_argument("--grid", type=parse_grid, default=None, metavar="START:STOP:POINTS")

    parser = _Parser(prog="cqed-sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check a config")
    sub.add_parser("spectrum", parents=[common], help="transmission spectrum CSV")
    p = sub.add_parser("modes", parents=[common], help="collective modes of the effective matrix")
    p.add_argument("--reference", type=float, default=None, help="elimination frequency, GHz")
    p = sub.add_parser("sweep", parents=[common], help="magnetic-field sweep map")
    p.add_argument("--prep", default=None, help="named spin preparation from the config's sweep section")
    p = sub.add_parser("readout", parents=[common], help="single-shot readout Monte Carlo")
    p.add_argument("--trials", type=_positive, default=None)
    p = sub.add_parser("fit", parents=[common], help="least-squares fit of a measured spectrum")
    p.add_argument("--data", required=True, help="CSV with omega_GHz,T columns")
    p.add_argument("--problem", required=True, help="fit problem JSON (free, bounds, initial)")
    return parser


def _grid(args, doc, config) -> np.ndarray:
    if args.grid is not None:
        return args.grid
    g = doc.get("grid")
    if g is not None:
        return np.linspace(float(g["start"]), float(g["stop"]), int(g["points"]))
    c = config.cavity
    return np.linspace(c.omega_c - 3 * c.kappa, c.omega_c + 3 * c.kappa, 2001)


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _cmd_validate(args, config, doc, out):
    print(f"ok: {len(config.emitters)} emitter(s), kappa={config.cavity.kappa} GHz")
    return []


def _cmd_spectrum(args, config, doc, out):
    spec = transmission_spectrum(_grid(args, doc, config), config)
    path = out / "spectrum.csv"
    write_spectrum_csv(path, spec)
    return [path]


def _cmd_modes(args, config, doc, out):
    m, tr = effective_system(config, args.reference)
    modes = modes_for(config, args.reference)
    ref = args.reference
    if ref is None:
        ref = default_reference(tr)
    delta = config.cavity.omega_c - ref
    pairs = []
    if delta != 0:
        for a in range(len(tr)):
            for b in range(a + 1, len(tr)):
                pairs.append({"emitters": [int(tr.emitter_index[a]), int(tr.emitter_index[b])],
                              "J_GHz": exchange_rate(tr.g[a], tr.g[b], delta, config.cavity.kappa)})
    doc_out = {
        "reference_GHz": ref,
        "emitters": [int(i) for i in tr.emitter_index],
        "matrix": {"re": m.real.tolist(), "im": m.imag.tolist()},
        "modes": [
            {"frequency_GHz": float(v.real), "fwhm_GHz": float(-2 * v.imag), "label": lab,
             "coupling_weight": float(w), "vector": {"re": vec.real.tolist(), "im": vec.imag.tolist()}}
            for v, vec, lab, w in zip(modes.eigenvalues, modes.eigenvectors, modes.labels,
                                      modes.coupling_weights)
        ],
        "exchange_rates": pairs,
    }
    path = out / "modes.json"
    _write_json(path, doc_out)
    return [path]


def _cmd_sweep(args, config, doc, out):
    sec = doc.get("sweep")
    if sec is None:
        raise ConfigError(["sweep: section missing from config"])
    preps = sec.get("preps", {})
    name = args.prep or sec.get("default_prep")
    if name not in preps:
        raise ConfigError([f"sweep.preps: no preparation named {name!r} (have {sorted(preps)})"])
    b_values = np.linspace(float(sec["b_start"]), float(sec["b_stop"]), int(sec["b_points"]))
    result = field_sweep(config, b_values, preps[name], _grid(args, doc, config), sec.get("reference"))
    csv_path = out / "sweep.csv"
    json_path = out / "sweep_summary.json"
    write_sweep_csv(csv_path, result)
    summary = result.summary()
    summary["prep"] = name
    _write_json(json_path, summary)
    return [csv_path, json_path]


def _cmd_readout(args, config, doc, out):
    params, info = readout_section(doc, seed=args.seed, trials=args.trials)
    result = simulate_readout(params, threads=resolve_threads(args.threads))
    theta, fid = semi_analytic_readout(params)
    info.update({"semi_analytic_threshold": theta, "semi_analytic_fidelity": fid,
                 "standard_error": result.standard_error()})
    json_path = out / "readout.json"
    csv_path = out / "readout_histograms.csv"
    write_readout_json(json_path, params, result, info)
    write_histogram_csv(csv_path, result)
    return [json_path, csv_path]


def _cmd_fit(args, config, doc, out):
    omega, T = read_data_csv(args.data)
    try:
        problem_doc = json.loads(Path(args.problem).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{args.problem}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}"])
    problem = problem_from_json(problem_doc, omega, T, config)
    if args.seed is not None:
        problem.seed = args.seed
    result = fit(problem)
    path = out / "fit_result.json"
    write_fit_json(path, result)
    return [path]


_COMMANDS = {"validate": _cmd_validate, "spectrum": _cmd_spectrum, "modes": _cmd_modes,
             "sweep": _cmd_sweep, "readout": _cmd_readout, "fit": _cmd_fit}


def _join_grid(argv):
    # grids usually start below zero; keep argparse from reading "-150:150:2001" as a flag
    out = []
    it = iter(argv)
    for a in it:
        if a == "--grid":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--grid={nxt}")
        else:
            out.append(a)
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _join_grid(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    t0 = time.perf_counter()
    out = Path(args.out)
    try:
        config, doc = load_document(args.config)
        out.mkdir(parents=True, exist_ok=True)
        outputs = _COMMANDS[args.command](args, config, doc, out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print("invalid input:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    manifest = {
        "subcommand": args.command,
        "config": str(resolve_path(args.config)),
        "outputs": [str(p) for p in outputs],
        "seed": args.seed,
        "threads": resolve_threads(args.threads),
        "backend": _accel.backend_name(),
        "tool_version": __version__,
        "wall_time_s": time.perf_counter() - t0,
    }
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
