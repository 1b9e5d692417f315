"""Command-line front end: ``synth``, ``segment`` and ``eval``.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, RunConfig, load_config, parse_value
from .data import (
    confusion_matrix,
    count_switches,
    generate_slds,
    hamming_error,
    match_labels,
    parse_layout,
    switch_points,
    toy_spec,
)
from .errors import SamplerError, ValidationError
from .gibbs import run_chain
from .stats import make_rng

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

# flag name -> config key for the common overrides
OVERRIDE_FLAGS = {
    "seed": "seed",
    "iterations": "iterations",
    "L": "L",
    "chains": "chains",
    "select_window": "select_window",
    "burn_in": "burn_in",
    "thin": "thin",
    "sticky": "sticky",
    "resample_hyperparameters": "resample_hyperparameters",
}


class UsageError(ValidationError):
    pass


def _float_text(value):
    return repr(float(value))


def write_matrix_csv(path, rows):
    with open(path, "w", newline="") as fh:
        for row in np.atleast_2d(rows):
            fh.write(",".join(_float_text(v) for v in row) + "\n")


def write_labels(path, labels):
    with open(path, "w", newline="") as fh:
        fh.write("".join(f"{int(k)}\n" for k in labels))


def _split_header(lines, path):
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise UsageError(f"{path}: file is empty")
    try:
        [float(v) for v in lines[0].split(",")]
    except ValueError:
        return lines[1:]
    return lines


def read_matrix_csv(path):
    """T x D float array from a comma-separated file with an optional header row."""
    with open(path) as fh:
        lines = _split_header(fh.read().splitlines(), path)
    try:
        rows = [[float(v) for v in line.split(",")] for line in lines]
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError(f"{path}: rows must all have the same number of columns")
    return np.array(rows)


def read_labels(path):
    with open(path) as fh:
        lines = _split_header(fh.read().splitlines(), path)
    try:
        return np.array([int(line.split(",")[0]) for line in lines], dtype=np.int64)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _dump_json(path, doc):
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_synth(args):
    layout = parse_layout(args.layout) if args.layout else None
    spec = toy_spec(T=args.T, layout=layout)
    traj = generate_slds(spec, make_rng(args.seed))
    write_matrix_csv(args.out, traj.y)
    if args.labels:
        write_labels(args.labels, traj.z_true)
    if args.states:
        write_matrix_csv(args.states, traj.x_true)
    return EXIT_OK


def build_config(args):
    config = load_config(args.config) if args.config else RunConfig()
    flat = {}
    for flag, key in OVERRIDE_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            flat[key] = value
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects key=value, got {item!r}")
        flat[key.strip()] = parse_value(value)
    return RunConfig.from_flat(flat, config)


def _chain_task(payload):
    y, config, chain_seed = payload
    return run_chain(y, config, make_rng(chain_seed))


def run_chains(y, config):
    """Run ``config.chains`` chains with seeds ``seed + i``; results in chain order."""
    payloads = [(y, config, config.seed + i) for i in range(config.chains)]
    workers = min(config.chains, os.cpu_count() or 1)
    if workers <= 1:
        return [_chain_task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_task, payloads))


def _chain_summary(index, config, result, truth):
    z = result.best.z
    summary = {
        "chain": index,
        "seed": config.seed + index,
        "best_index": result.best_index,
        "best_log_joint": float(result.log_joint_trace[result.best_index]),
        "num_modes_used": int(len(np.unique(z))),
        "num_switches": count_switches(z),
    }
    if truth is not None:
        summary["hamming_vs_truth"] = hamming_error(z, truth)
    return summary


def result_document(config, results, truth=None):
    """JSON-ready result for the best chain plus a summary of every chain."""
    summaries = [_chain_summary(i, config, r, truth) for i, r in enumerate(results)]
    best_chain = max(range(len(results)), key=lambda i: (summaries[i]["best_log_joint"], -i))
    result = results[best_chain]
    best = result.best
    used = np.unique(best.z)
    return {
        "z_best": best.z.tolist(),
        "switch_points": switch_points(best.z).tolist(),
        "num_modes_used": int(len(used)),
        "dynamics_best": [
            {"mode": int(k), "A": best.dynamics.A[k].tolist(), "Sigma": best.dynamics.Sigma[k].tolist()}
            for k in used
        ],
        "log_joint_initial": float(result.log_joint_trace[0]),
        "log_joint_trace": result.log_joint_trace[1 + config.burn_in:].tolist(),
        "hamming_vs_truth": None if truth is None else hamming_error(best.z, truth),
        "best_chain": best_chain,
        "chains": summaries,
        "config_echo": config.to_flat(),
    }


def plot_rows(y, state, truth=None):
    """Long-format rows ``(t, series, dimension, value, mode, true_mode)``."""
    rows = []
    for series, values in (("observation", y), ("state", state.x)):
        for t in range(len(values)):
            for d, v in enumerate(values[t]):
                true_mode = "" if truth is None else int(truth[t])
                rows.append((t, series, d, _float_text(v), int(state.z[t]), true_mode))
    return rows


def write_plot_data(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write("t,series,dimension,value,mode,true_mode\n")
        fh.write("".join(",".join(str(v) for v in row) + "\n" for row in rows))


def cmd_segment(args):
    config = build_config(args)
    y = read_matrix_csv(args.input)
    truth = read_labels(args.truth) if args.truth else None
    if truth is not None and len(truth) != len(y):
        raise UsageError(f"truth has {len(truth)} labels but the input has {len(y)} rows")
    results = run_chains(y, config)
    doc = result_document(config, results, truth)
    _dump_json(args.out, doc)
    timings_path = args.timings or (None if args.out in (None, "-") else args.out + ".timings.json")
    if timings_path:
        _dump_json(timings_path, {"chains": [r.timings for r in results]})
    if args.emit_plot_data:
        write_plot_data(args.emit_plot_data, plot_rows(y, results[doc["best_chain"]].best, truth))
    return EXIT_OK


def evaluate(z_pred, z_true):
    if len(z_pred) != len(z_true):
        raise UsageError(f"prediction has {len(z_pred)} labels but truth has {len(z_true)}")
    conf, pred_labels, true_labels = confusion_matrix(z_pred, z_true)
    mapping, _ = match_labels(z_pred, z_true)
    return {
        "hamming": hamming_error(z_pred, z_true),
        "mapping": {str(k): v for k, v in mapping.items()},
        "confusion": {
            "predicted_labels": pred_labels.tolist(),
            "true_labels": true_labels.tolist(),
            "counts": conf.tolist(),
        },
        "switches_predicted": count_switches(z_pred),
        "switches_true": count_switches(z_true),
    }


def cmd_eval(args):
    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    _dump_json(args.out, evaluate(pred, truth))
    return EXIT_OK


def _bool(text):
    value = parse_value(text)
    if not isinstance(value, bool):
        raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="hdpslds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="simulate the three-mode toy system")
    p.add_argument("--T", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout", help="segments as 'len:mode,len:mode,...' (modes 1-3)")
    p.add_argument("--out", required=True, help="observations CSV")
    p.add_argument("--labels", help="true mode labels, one per line")
    p.add_argument("--states", help="true latent states CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="run the Gibbs sampler on a trajectory")
    p.add_argument("input", help="observations CSV (T rows, optional header)")
    p.add_argument("--out", default="-", help="result JSON (default stdout)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--truth", help="true labels, to report the Hamming error")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--select-window", dest="select_window", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--sticky", type=_bool)
    p.add_argument("--resample-hyperparameters", dest="resample_hyperparameters", type=_bool)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--timings", help="wall-clock sidecar JSON (default OUT.timings.json)")
    p.add_argument("--emit-plot-data", dest="emit_plot_data", help="long-format CSV for plotting")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="compare predicted and true labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SamplerError as exc:
        print(f"error: numerical failure at {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
