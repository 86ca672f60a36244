"""File formats: dense CSV and Matrix Market matrices, fit reports, truth
files.  All numeric output uses 17 significant digits so float64 values
round-trip exactly, and every writer goes through an atomic
write-to-temp-then-rename so failures never leave partial outputs."""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .data import DataError, WeightMatrix
from .evaluate import dimension_variances
from .inference import FitReport
from .model import GenerativeParams, VariationalState

REPORT_FORMAT = "slpm-fit-report/1"
TRUTH_FORMAT = "slpm-truth/1"
MM_HEADER = "%%MatrixMarket matrix coordinate real general"


def fmt(x: float) -> str:
    return "%.17g" % x


def atomic_write(path: str, text: str) -> None:
    """Write text to path via a temp file and rename; no partial outputs."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# weight matrices


def read_csv_matrix(path: str) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataError("ragged CSV: line %d has %d fields, expected %d"
                                % (lineno, len(fields), width))
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise DataError("unparseable number on line %d: %s"
                                % (lineno, exc)) from exc
    if not rows:
        raise DataError("empty CSV file: %s" % path)
    return np.array(rows)


def read_mm_matrix(path: str, absent_as_missing: bool = False):
    """Read a Matrix Market coordinate file into dense values plus a mask.

    Entries absent from the file are observed zeros by default, or masked
    when ``absent_as_missing`` is set.  Duplicate coordinates are summed.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("%%MatrixMarket"):
            raise DataError("missing MatrixMarket header in %s" % path)
        parts = header.lower().split()
        if parts[1:3] != ["matrix", "coordinate"] or parts[4] != "general":
            raise DataError("only 'matrix coordinate real general' is supported")
        lineno = 1
        dims = None
        entries = []
        for line in fh:
            lineno += 1
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            fields = line.split()
            if dims is None:
                if len(fields) != 3:
                    raise DataError("bad size line %d: expected 'M N nnz'" % lineno)
                dims = tuple(int(f) for f in fields)
                continue
            if len(fields) != 3:
                raise DataError("bad entry on line %d: expected 'i j value'" % lineno)
            try:
                i, j = int(fields[0]), int(fields[1])
                v = float(fields[2])
            except ValueError as exc:
                raise DataError("unparseable entry on line %d: %s"
                                % (lineno, exc)) from exc
            entries.append((i, j, v))
    if dims is None:
        raise DataError("missing size line in %s" % path)
    M, N, nnz = dims
    if len(entries) != nnz:
        raise DataError("size line declares %d entries, found %d" % (nnz, len(entries)))
    values = np.zeros((M, N))
    explicit = np.zeros((M, N), dtype=bool)
    for i, j, v in entries:
        if not (1 <= i <= M and 1 <= j <= N):
            raise DataError("entry (%d, %d) outside declared %d x %d shape"
                            % (i, j, M, N))
        values[i - 1, j - 1] += v
        explicit[i - 1, j - 1] = True
    mask = explicit if absent_as_missing else np.ones((M, N), dtype=bool)
    return values, mask


def read_weight_matrix(path: str, fmt_name: str = "csv",
                       absent_as_missing: bool = False,
                       square: bool = False,
                       no_self_loops: bool = False) -> WeightMatrix:
    """Load a weight matrix, validating nonnegativity and finiteness."""
    if fmt_name == "csv":
        values = read_csv_matrix(path)
        mask = None
    elif fmt_name == "mm":
        values, mask = read_mm_matrix(path, absent_as_missing)
    else:
        raise DataError("unknown format %r (expected 'csv' or 'mm')" % fmt_name)
    return WeightMatrix(values, mask=mask, square_mode=square,
                        exclude_diagonal=no_self_loops)


def matrix_to_csv(data: WeightMatrix) -> str:
    lines = [",".join(fmt(v) for v in row) for row in data.values]
    return "\n".join(lines) + "\n"


def matrix_to_mm(data: WeightMatrix) -> str:
    """Serialize every observed entry (zeros included) as explicit triples."""
    obs = np.argwhere(data.mask)
    lines = [MM_HEADER, "%d %d %d" % (data.shape[0], data.shape[1], len(obs))]
    for i, j in obs:
        lines.append("%d %d %s" % (i + 1, j + 1, fmt(data.values[i, j])))
    return "\n".join(lines) + "\n"


def write_weight_matrix(data: WeightMatrix, path: str,
                        fmt_name: str = "csv") -> None:
    if fmt_name == "csv":
        atomic_write(path, matrix_to_csv(data))
    elif fmt_name == "mm":
        atomic_write(path, matrix_to_mm(data))
    else:
        raise DataError("unknown format %r (expected 'csv' or 'mm')" % fmt_name)


# ---------------------------------------------------------------------------
# fit reports


def render_fit_report(data: WeightMatrix, state: VariationalState,
                      report: FitReport, manifest_hash: str = "none") -> str:
    """Structured text report: key/value header plus tab-separated blocks."""
    totals = state.resp.sum(axis=(0, 1))
    order = np.argsort(-totals, kind="stable")
    props = totals / data.n_observed
    variances = dimension_variances(state)
    out = []
    out.append("format: %s" % REPORT_FORMAT)
    out.append("manifest_hash: %s" % manifest_hash)
    out.append("rows: %d" % state.M)
    out.append("cols: %d" % state.N)
    out.append("dims: %d" % state.K)
    out.append("observed: %d" % data.n_observed)
    out.append("iterations: %d" % report.iterations)
    out.append("converged: %s" % ("true" if report.converged else "false"))
    out.append("effective_K: %d" % report.effective_K)
    out.append("effective_K_strict: %d" % report.effective_K_strict)
    out.append("floored_steps: %d" % report.floored_steps)
    out.append("")
    out.append("[mixing]")
    out.append("rank\tcomponent\tproportion")
    for rank, k in enumerate(order, start=1):
        out.append("%d\t%d\t%s" % (rank, k, fmt(props[k])))
    out.append("")
    out.append("[dirichlet]")
    out.append("component\tvalue")
    for k in range(state.K):
        out.append("%d\t%s" % (k, fmt(state.dirichlet[k])))
    out.append("")
    out.append("[gamma]")
    out.append("component\tshape\trate")
    for k in range(state.K):
        out.append("%d\t%s\t%s" % (k, fmt(state.gamma_shape[k]),
                                   fmt(state.gamma_rate[k])))
    out.append("")
    out.append("[dimension_variance]")
    out.append("component\tpooled_variance")
    for k in range(state.K):
        out.append("%d\t%s" % (k, fmt(variances[k])))
    out.append("")
    out.append("[free_energy]")
    out.append("iteration\tvalue")
    for it, val in enumerate(report.free_energy_trace):
        out.append("%d\t%s" % (it, fmt(val)))
    out.append("")
    out.append("[nodes]")
    header = ["side", "index", "degree"]
    header += ["alpha_%d" % k for k in range(state.K)]
    header += ["beta_%d" % k for k in range(state.K)]
    out.append("\t".join(header))
    row_deg = np.where(data.mask, data.values, 0.0).sum(axis=1)
    col_deg = np.where(data.mask, data.values, 0.0).sum(axis=0)
    for i in range(state.M):
        cells = ["sender", str(i), fmt(row_deg[i])]
        cells += [fmt(v) for v in state.alpha_u[i]]
        cells += [fmt(v) for v in state.beta_u[i]]
        out.append("\t".join(cells))
    for j in range(state.N):
        cells = ["receiver", str(j), fmt(col_deg[j])]
        cells += [fmt(v) for v in state.alpha_v[j]]
        cells += [fmt(v) for v in state.beta_v[j]]
        out.append("\t".join(cells))
    return "\n".join(out) + "\n"


def write_fit_report(data: WeightMatrix, state: VariationalState,
                     report: FitReport, path: str,
                     manifest_hash: str = "none") -> None:
    atomic_write(path, render_fit_report(data, state, report, manifest_hash))


def parse_fit_report(path: str) -> dict:
    """Parse a fit report back into header fields and section row lists."""
    header: dict = {}
    sections: dict = {}
    current = None
    rows = None
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                rows = {"columns": None, "rows": []}
                sections[current] = rows
                continue
            if current is None:
                key, _, value = line.partition(":")
                header[key.strip()] = value.strip()
            else:
                cells = line.split("\t")
                if rows["columns"] is None:
                    rows["columns"] = cells
                else:
                    rows["rows"].append(cells)
    if header.get("format") != REPORT_FORMAT:
        raise DataError("%s is not a fit report (format: %r)"
                        % (path, header.get("format")))
    return {"header": header, "sections": sections}


# ---------------------------------------------------------------------------
# simulation ground truth


def render_truth(params: GenerativeParams) -> str:
    M = params.U.shape[0]
    N = params.V.shape[0]
    out = []
    out.append("format: %s" % TRUTH_FORMAT)
    out.append("rows: %d" % M)
    out.append("cols: %d" % N)
    out.append("dims: %d" % params.K)
    out.append("")
    out.append("[mixing]")
    out.append("component\tvalue")
    for k in range(params.K):
        out.append("%d\t%s" % (k, fmt(params.mixing[k])))
    out.append("")
    out.append("[precisions]")
    out.append("component\tvalue")
    for k in range(params.K):
        out.append("%d\t%s" % (k, fmt(params.precisions[k])))
    out.append("")
    out.append("[sender_positions]")
    out.append("index\t" + "\t".join("coord_%d" % k for k in range(params.K)))
    for i in range(M):
        out.append("%d\t%s" % (i, "\t".join(fmt(v) for v in params.U[i])))
    out.append("")
    out.append("[receiver_positions]")
    out.append("index\t" + "\t".join("coord_%d" % k for k in range(params.K)))
    for j in range(N):
        out.append("%d\t%s" % (j, "\t".join(fmt(v) for v in params.V[j])))
    if params.allocations is not None:
        out.append("")
        out.append("[allocations]")
        out.append("row\t" + "\t".join("col_%d" % j for j in range(N)))
        for i in range(M):
            out.append("%d\t%s" % (i, "\t".join(str(int(z))
                                                for z in params.allocations[i])))
    return "\n".join(out) + "\n"


def write_truth(params: GenerativeParams, path: str) -> None:
    atomic_write(path, render_truth(params))
