"""Post-fit evaluation: reconstruction, log-abs loss, dimension counts and
plot-ready log-log distribution summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import WeightMatrix
from .model import VariationalState, _moment_arrays

LOSS_CLAMP = 1e-12
DIMENSION_THRESHOLD = 0.01


def reconstruct(state: VariationalState,
                mask: np.ndarray | None = None) -> WeightMatrix:
    """Responsibility-weighted plug-in predictor: sum_k resp / eta.

    Each component contributes its exponential mean 1/E[rate] weighted by
    the edge's responsibility.  Entries masked during the fit carry zero
    responsibilities and predict 0; pass the data mask to stamp them as
    unobserved on the output.
    """
    if state.resp is None:
        raise ValueError("state has no responsibilities; fit first")
    _, _, eta, _ = _moment_arrays(state)
    xhat = (state.resp / eta).sum(axis=2)
    return WeightMatrix(xhat, mask=mask)


def global_mean_predictor(data: WeightMatrix) -> WeightMatrix:
    """Constant baseline: every observed entry predicted by the global mean."""
    mean = float(data.values[data.mask].mean())
    return WeightMatrix(np.full(data.shape, mean), mask=data.mask.copy())


def log_abs_loss(observed: WeightMatrix, predicted: WeightMatrix) -> float:
    """Mean natural log of absolute prediction errors over observed entries.

    Errors are clamped below at 1e-12 so exact matches stay finite.
    """
    if not observed.same_layout(predicted):
        raise ValueError("matrices must share shape and observation mask")
    err = np.abs(observed.values - predicted.values)[observed.mask]
    return float(np.log(np.maximum(err, LOSS_CLAMP)).mean())


def estimate_dimensions(state: VariationalState,
                        threshold: float = DIMENSION_THRESHOLD):
    """Dimension counts and sorted mixing proportions from responsibilities.

    Proportions are total responsibility mass per component over the
    number of observed edges (the responsibilities of each observed edge
    sum to one, so the total mass equals that count).  Returns the strict
    count of components with any mass, the count above ``threshold`` and
    the sorted proportions.
    """
    if state.resp is None:
        raise ValueError("state has no responsibilities; fit first")
    totals = state.resp.sum(axis=(0, 1))
    n_obs = totals.sum()
    props = np.sort(totals / n_obs)[::-1]
    k_strict = int((totals > 0).sum())
    k_tau = int((props > threshold).sum())
    return k_strict, k_tau, props


def dimension_variances(state: VariationalState) -> np.ndarray:
    """Pooled empirical variance of the position means per dimension.

    Sender and receiver means are pooled before taking the variance.
    """
    pooled = np.vstack([state.alpha_u, state.alpha_v])
    return np.var(pooled, axis=0)


@dataclass
class HistogramTable:
    """Log-log histogram: base-10 log bin centers and relative frequencies.

    ``counts`` conserve the number of positive values; zeros are excluded
    from the bins and reported in ``zero_count``.
    """

    log10_center: np.ndarray
    counts: np.ndarray
    log10_frequency: np.ndarray
    zero_count: int
    total_positive: int

    def to_tsv(self) -> str:
        lines = ["log10_center\tcount\tlog10_frequency"]
        for c, n, f in zip(self.log10_center, self.counts, self.log10_frequency):
            lines.append("%.17g\t%d\t%.17g" % (c, n, f))
        lines.append("# zero_count\t%d" % self.zero_count)
        lines.append("# total_positive\t%d" % self.total_positive)
        return "\n".join(lines) + "\n"


def _log_histogram(values: np.ndarray, bins: int) -> HistogramTable:
    values = np.asarray(values, dtype=float)
    zero_count = int((values == 0).sum())
    pos = values[values > 0]
    if pos.size == 0:
        empty = np.array([])
        return HistogramTable(empty, empty.astype(int), empty, zero_count, 0)
    lo, hi = pos.min(), pos.max()
    if lo == hi:
        edges = np.array([lo * (1 - 1e-12), hi * (1 + 1e-12)])
    else:
        edges = np.logspace(np.log10(lo), np.log10(hi), bins + 1)
        edges[-1] *= 1 + 1e-12
    counts, edges = np.histogram(pos, bins=edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    occupied = counts > 0
    freq = counts[occupied] / pos.size
    return HistogramTable(np.log10(centers[occupied]), counts[occupied],
                          np.log10(freq), zero_count, int(pos.size))


def distribution_summaries(data: WeightMatrix,
                           bins: int = 30) -> tuple[HistogramTable, HistogramTable]:
    """Histogram tables for the observed positive weights and the row sums."""
    weights = data.values[data.mask]
    degrees = np.where(data.mask, data.values, 0.0).sum(axis=1)
    return _log_histogram(weights, bins), _log_histogram(degrees, bins)


def survival_slope(values: np.ndarray, tail_fraction: float = 0.1,
                   min_survivors: int = 10) -> float:
    """Least-squares slope of the log-log empirical survival curve tail.

    Fitted over the top survival decade: the largest ``tail_fraction`` of
    the positive values (survival probabilities from ``tail_fraction``
    down to ``min_survivors``/n, keeping the estimate away from the noisy
    extreme order statistics).  A heavy tail shows a slope shallower
    (greater) than -1.
    """
    v = np.sort(np.asarray(values, dtype=float))
    v = v[v > 0]
    n = v.size
    if n < 3 * min_survivors:
        raise ValueError("need at least %d positive values" % (3 * min_survivors))
    surv = 1.0 - np.arange(1, n + 1) / n
    keep = (surv <= tail_fraction) & (surv >= min_survivors / n)
    xs = v[keep]
    ss = surv[keep]
    pos = (xs > 0) & (ss > 0)
    if pos.sum() < 2:
        raise ValueError("fewer than 2 usable tail points")
    slope, _ = np.polyfit(np.log10(xs[pos]), np.log10(ss[pos]), 1)
    return float(slope)
