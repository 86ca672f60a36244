"""Command-line surface: fit, simulate, evaluate and export-embedding.

Every run emits a manifest next to its main output recording the command,
all flags, the seed, the input digest and the software version; the
manifest hash (which excludes wall time) is cited in every result file,
and result files contain no timestamps so replays are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time

import numpy as np

from . import __version__
from .data import DataError, WeightMatrix
from .evaluate import log_abs_loss, reconstruct
from .inference import FitConfig, fit
from .initialization import InitConfig, initialize_state
from .io import (
    atomic_write,
    fmt,
    parse_fit_report,
    read_weight_matrix,
    write_fit_report,
    write_truth,
    write_weight_matrix,
)
from .model import Hyperparams, ModelError
from .simulate import (
    SimulationConfig,
    SimulationError,
    average_network,
    homogeneous_network,
    sample_network,
    sample_parameters,
)

MANIFEST_FORMAT = "slpm-manifest/1"
EVAL_FORMAT = "slpm-eval-report/1"
EMBEDDING_FORMAT = "slpm-embedding/1"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


def _file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


class Manifest:
    """Deterministic run record; the hash excludes wall time."""

    def __init__(self, command: str, args: dict, inputs: dict):
        self.lines = ["format: %s" % MANIFEST_FORMAT,
                      "version: %s" % __version__,
                      "command: %s" % command]
        for name in sorted(inputs):
            self.lines.append("input_digest.%s: %s" % (name, inputs[name]))
        for name in sorted(args):
            self.lines.append("arg.%s: %s" % (name, args[name]))
        payload = "\n".join(self.lines) + "\n"
        self.hash = hashlib.sha256(payload.encode()).hexdigest()

    def write(self, path: str, wall_time: float) -> None:
        text = "\n".join(self.lines + ["manifest_hash: %s" % self.hash,
                                       "wall_time_s: %s" % fmt(wall_time)]) + "\n"
        atomic_write(path, text)


def _flag_dict(args, names) -> dict:
    return {name: getattr(args, name.replace("-", "_")) for name in names}


def _load_matrix(args, path) -> WeightMatrix:
    if args.no_self_loops and not args.square:
        raise UsageError("--no-self-loops requires --square")
    return read_weight_matrix(path, fmt_name=args.format,
                              absent_as_missing=args.absent_as_missing,
                              square=args.square,
                              no_self_loops=args.no_self_loops)


class UsageError(Exception):
    pass


def _add_matrix_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["csv", "mm"], default="csv",
                   help="matrix file format (dense CSV or Matrix Market coordinate)")
    p.add_argument("--square", action="store_true",
                   help="treat the matrix as unipartite (rows and columns share labels)")
    p.add_argument("--no-self-loops", action="store_true",
                   help="mask the diagonal; requires --square")
    p.add_argument("--absent-as-missing", action="store_true",
                   help="coordinate-format entries absent from the file are masked "
                        "instead of observed zeros")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("SLPM_THREADS", "1")),
                   help="maximum worker threads (the current implementation "
                        "is single-threaded and deterministic at any setting)")


FIT_FLAGS = ["dims", "delta", "a", "b", "tol", "max-iter", "seed", "init",
             "init-cross", "init-eps", "square", "no-self-loops",
             "absent-as-missing", "threads", "format"]


def cmd_fit(args) -> int:
    data = _load_matrix(args, args.input)
    manifest = Manifest("fit", _flag_dict(args, FIT_FLAGS),
                        {"input": _file_digest(args.input)})
    start = time.perf_counter()
    hyper = Hyperparams.default(args.dims, delta=args.delta, a=args.a, b=args.b)
    init_cfg = InitConfig(method=args.init, cross=args.init_cross,
                          epsilon=args.init_eps, seed=args.seed)
    state0 = initialize_state(data, hyper, init_cfg)
    config = FitConfig(tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    state, report = fit(data, hyper, state0, config)
    write_fit_report(data, state, report, args.output, manifest.hash)
    if args.reconstruction_out:
        write_weight_matrix(reconstruct(state, mask=data.mask),
                            args.reconstruction_out, args.format)
    manifest.write(args.output + ".manifest", time.perf_counter() - start)
    return EXIT_OK


SIM_FLAGS = ["model", "M", "N", "Ktrue", "mixing", "position-law", "sim-delta",
             "sim-a", "sim-b", "seed", "format", "threads"]


def cmd_simulate(args) -> int:
    manifest = Manifest("simulate", _flag_dict(args, SIM_FLAGS), {})
    start = time.perf_counter()
    if args.model == "homogeneous":
        data = homogeneous_network(args.M, args.N, args.seed)
        params = None
    else:
        mixing = args.mixing
        if mixing not in ("uniform", "dirichlet"):
            mixing = np.array([float(f) for f in mixing.split(",")])
        config = SimulationConfig(M=args.M, N=args.N, K_true=args.Ktrue,
                                  mixing=mixing, delta=args.sim_delta,
                                  position_law=args.position_law,
                                  a=args.sim_a, b=args.sim_b, seed=args.seed)
        if args.model == "slpm":
            data, params = sample_network(config)
        else:
            params = sample_parameters(config)
            data = average_network(params)
    write_weight_matrix(data, args.output, args.format)
    if params is not None:
        write_truth(params, args.output + ".truth")
    manifest.write(args.output + ".manifest", time.perf_counter() - start)
    return EXIT_OK


EVAL_FLAGS = ["square", "no-self-loops", "absent-as-missing", "format",
              "threads", "seed"]


def cmd_evaluate(args) -> int:
    inputs = {"observed": _file_digest(args.observed),
              "predicted": _file_digest(args.predicted)}
    if args.report:
        inputs["report"] = _file_digest(args.report)
    manifest = Manifest("evaluate", _flag_dict(args, EVAL_FLAGS), inputs)
    start = time.perf_counter()
    observed = _load_matrix(args, args.observed)
    predicted = _load_matrix(args, args.predicted)
    loss = log_abs_loss(observed, predicted)
    lines = ["format: %s" % EVAL_FORMAT,
             "manifest_hash: %s" % manifest.hash,
             "loss: %s" % fmt(loss)]
    if args.report:
        parsed = parse_fit_report(args.report)
        lines.append("effective_K: %s" % parsed["header"]["effective_K"])
        lines.append("effective_K_strict: %s"
                     % parsed["header"]["effective_K_strict"])
        lines.append("")
        lines.append("[mixing]")
        lines.append("rank\tcomponent\tproportion")
        for row in parsed["sections"]["mixing"]["rows"]:
            lines.append("\t".join(row))
    text = "\n".join(lines) + "\n"
    if args.output:
        atomic_write(args.output, text)
        manifest.write(args.output + ".manifest", time.perf_counter() - start)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export_embedding(args) -> int:
    manifest = Manifest("export-embedding", {"seed": args.seed},
                        {"report": _file_digest(args.report)})
    start = time.perf_counter()
    parsed = parse_fit_report(args.report)
    mixing_rows = parsed["sections"]["mixing"]["rows"]
    if len(mixing_rows) < 2:
        raise ModelError("report has fewer than two components")
    top = [int(mixing_rows[0][1]), int(mixing_rows[1][1])]
    node_cols = parsed["sections"]["nodes"]["columns"]
    ix = {name: pos for pos, name in enumerate(node_cols)}
    xa, ya = "alpha_%d" % top[0], "alpha_%d" % top[1]
    lines = ["# format: %s" % EMBEDDING_FORMAT,
             "# manifest_hash: %s" % manifest.hash,
             "# components: %d %d (top two by mixing proportion)" % tuple(top),
             "label\tside\tindex\tx\ty\tdegree"]
    for row in parsed["sections"]["nodes"]["rows"]:
        side = row[ix["side"]]
        index = row[ix["index"]]
        label = ("U%s" if side == "sender" else "V%s") % index
        lines.append("\t".join([label, side, index, row[ix[xa]], row[ix[ya]],
                                row[ix["degree"]]]))
    atomic_write(args.output, "\n".join(lines) + "\n")
    manifest.write(args.output + ".manifest", time.perf_counter() - start)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slpm",
        description="Sparse latent position models for nonnegative weighted networks")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the model to a weight matrix")
    p.add_argument("input", help="path to the observed matrix")
    p.add_argument("--output", "-o", required=True, help="report file to write")
    p.add_argument("--dims", type=int, default=10,
                   help="number of latent dimensions (default 10)")
    p.add_argument("--delta", type=float, default=0.001,
                   help="Dirichlet shrinkage prior (default 0.001)")
    p.add_argument("--a", type=float, default=1.0, help="gamma prior shape")
    p.add_argument("--b", type=float, default=1.0, help="gamma prior rate")
    p.add_argument("--tol", type=float, default=0.01,
                   help="stop when a sweep gains less free energy than this")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--init", choices=["mds", "random"], default="mds")
    p.add_argument("--init-cross", choices=["recip", "raw"], default="raw",
                   help="cross blocks of the init dissimilarity: reciprocal "
                        "of X+eps (default) or raw weights")
    p.add_argument("--init-eps", type=float, default=1e-4,
                   help="positive shift added to the matrix before the "
                        "dissimilarity construction")
    p.add_argument("--reconstruction-out", default=None,
                   help="also write the reconstructed matrix here")
    _add_matrix_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="generate synthetic data")
    p.add_argument("--output", "-o", required=True, help="matrix file to write")
    p.add_argument("--model", choices=["slpm", "slpm-average", "homogeneous"],
                   default="slpm")
    p.add_argument("--M", type=int, required=True, help="number of senders")
    p.add_argument("--N", type=int, required=True, help="number of receivers")
    p.add_argument("--Ktrue", type=int, default=3, help="true latent dimensions")
    p.add_argument("--mixing", default="uniform",
                   help="'uniform', 'dirichlet' or an explicit comma list")
    p.add_argument("--position-law", choices=["normal", "hierarchical"],
                   default="normal")
    p.add_argument("--sim-delta", type=float, default=1.0,
                   help="Dirichlet concentration when mixing='dirichlet'")
    p.add_argument("--sim-a", type=float, default=1.0,
                   help="precision shape under the hierarchical law")
    p.add_argument("--sim-b", type=float, default=1.0,
                   help="precision rate under the hierarchical law")
    p.add_argument("--format", choices=["csv", "mm"], default="csv")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate",
                       help="log-abs loss between two matrices, plus "
                            "dimension counts from a fit report")
    p.add_argument("--observed", required=True)
    p.add_argument("--predicted", required=True)
    p.add_argument("--report", default=None, help="fit report to echo counts from")
    p.add_argument("--output", "-o", default=None, help="write here instead of stdout")
    _add_matrix_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-embedding",
                       help="write the coordinates of the two most relevant "
                            "dimensions with node labels and degrees")
    p.add_argument("--report", required=True, help="fit report to read")
    p.add_argument("--output", "-o", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_export_embedding)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print("error: usage: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print("error: input: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    except (ModelError, SimulationError, ValueError) as exc:
        print("error: numeric: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # pragma: no cover
        print("error: unexpected: %s" % exc, file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
