"""Model types, edge-moment quantities and the variational free energy.

The model is a finite mixture of K unidimensional latent-distance
components for a nonnegative M x N weight matrix: each edge weight is
exponential with rate equal to the squared coordinate gap between its two
endpoints in a single latent dimension.  The mean-field variational family
uses per-edge multinomial responsibilities, independent Gaussians for
every latent coordinate, one global Dirichlet over mixing proportions and
one gamma per precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln

from .data import WeightMatrix

RESP_SUM_TOL = 1e-12


class ModelError(ValueError):
    """Raised on structural violations (dimension mismatches, bad domains)."""


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class Hyperparams:
    """Prior constants: Dirichlet concentrations and gamma shape/rate per component."""

    delta: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.delta = np.atleast_1d(np.array(self.delta, dtype=float))
        self.a = np.atleast_1d(np.array(self.a, dtype=float))
        self.b = np.atleast_1d(np.array(self.b, dtype=float))
        K = self.delta.shape[0]
        if self.a.shape != (K,) or self.b.shape != (K,):
            raise ModelError("hyperparameter vectors must share length K")
        if K < 1:
            raise ModelError("need at least one component")
        if np.any(self.delta <= 0) or np.any(self.a <= 0) or np.any(self.b <= 0):
            raise ModelError("hyperparameters must be strictly positive")

    @property
    def K(self) -> int:
        return self.delta.shape[0]

    @classmethod
    def default(cls, K: int, delta: float = 0.001, a: float = 1.0,
                b: float = 1.0) -> "Hyperparams":
        """Shrinkage defaults: delta = 0.001, a = b = 1 for every component."""
        return cls(np.full(K, delta), np.full(K, a), np.full(K, b))


@dataclass
class VariationalState:
    """All tilde-parameters of the mean-field family plus per-node step sizes.

    ``resp`` is (M, N, K) and may be None before the first responsibility
    update; on masked edges it is stored as exact zeros so that every
    responsibility-weighted sum automatically runs over observed entries.
    ``step_u``/``step_v`` hold the persistent backtracking learning rate of
    each (node, side) pair.
    """

    resp: np.ndarray | None
    alpha_u: np.ndarray
    beta_u: np.ndarray
    alpha_v: np.ndarray
    beta_v: np.ndarray
    dirichlet: np.ndarray
    gamma_shape: np.ndarray
    gamma_rate: np.ndarray
    step_u: np.ndarray
    step_v: np.ndarray

    @property
    def M(self) -> int:
        return self.alpha_u.shape[0]

    @property
    def N(self) -> int:
        return self.alpha_v.shape[0]

    @property
    def K(self) -> int:
        return self.alpha_u.shape[1]

    def copy(self) -> "VariationalState":
        return VariationalState(
            None if self.resp is None else self.resp.copy(),
            self.alpha_u.copy(), self.beta_u.copy(),
            self.alpha_v.copy(), self.beta_v.copy(),
            self.dirichlet.copy(), self.gamma_shape.copy(),
            self.gamma_rate.copy(), self.step_u.copy(), self.step_v.copy())

    def validate(self, data: WeightMatrix | None = None) -> None:
        M, N, K = self.M, self.N, self.K
        if self.alpha_u.shape != (M, K) or self.beta_u.shape != (M, K):
            raise ModelError("sender position arrays must be (M, K)")
        if self.alpha_v.shape != (N, K) or self.beta_v.shape != (N, K):
            raise ModelError("receiver position arrays must be (N, K)")
        for name, arr in (("beta_u", self.beta_u), ("beta_v", self.beta_v),
                          ("dirichlet", self.dirichlet),
                          ("gamma_shape", self.gamma_shape),
                          ("gamma_rate", self.gamma_rate),
                          ("step_u", self.step_u), ("step_v", self.step_v)):
            if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
                raise ModelError("%s must be strictly positive and finite" % name)
        if self.dirichlet.shape != (K,) or self.gamma_shape.shape != (K,) \
                or self.gamma_rate.shape != (K,):
            raise ModelError("global parameter vectors must have length K")
        if self.step_u.shape != (M,) or self.step_v.shape != (N,):
            raise ModelError("step sizes are per (node, side)")
        if data is not None and data.shape != (M, N):
            raise ModelError("state dimensions %s do not match data %s"
                             % ((M, N), data.shape))
        if self.resp is not None:
            if self.resp.shape != (M, N, K):
                raise ModelError("responsibilities must be (M, N, K)")
            if np.any(self.resp < 0) or np.any(self.resp > 1):
                raise ModelError("responsibilities must lie in [0, 1]")
            if data is not None:
                sums = self.resp.sum(axis=2)[data.mask]
                if np.any(np.abs(sums - 1.0) > RESP_SUM_TOL):
                    raise ModelError("observed-edge responsibilities must sum to 1")


@dataclass
class GenerativeParams:
    """Ground-truth parameters used by the simulator.

    ``allocations`` holds the 0-based component index of every edge.
    """

    mixing: np.ndarray
    precisions: np.ndarray
    U: np.ndarray
    V: np.ndarray
    allocations: np.ndarray | None = None

    def __post_init__(self):
        self.mixing = np.asarray(self.mixing, dtype=float)
        self.precisions = np.asarray(self.precisions, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if abs(self.mixing.sum() - 1.0) > 1e-10:
            raise ModelError("mixing proportions must sum to 1")
        if np.any(self.precisions <= 0):
            raise ModelError("precisions must be positive")

    @property
    def K(self) -> int:
        return self.mixing.shape[0]


# ---------------------------------------------------------------------------
# edge-moment quantities


def edge_moments(alpha_u, beta_u, alpha_v, beta_v):
    """Mean and variance of the squared coordinate gap under the Gaussians.

    The gap U - V is Gaussian with mean m = alpha_u - alpha_v and variance
    v = beta_u + beta_v, so its square has mean eta = v + m^2 and variance
    zeta = 4 m^2 v + 2 v^2 = 2 eta^2 - 2 m^4.  Inputs may be scalars or
    broadcastable arrays; variances must be strictly positive.
    """
    beta_u = np.asarray(beta_u, dtype=float)
    beta_v = np.asarray(beta_v, dtype=float)
    if np.any(beta_u <= 0) or np.any(beta_v <= 0):
        raise ModelError("variances must be strictly positive")
    m = np.asarray(alpha_u, dtype=float) - np.asarray(alpha_v, dtype=float)
    v = beta_u + beta_v
    eta = v + m * m
    zeta = 4.0 * m * m * v + 2.0 * v * v
    if eta.ndim == 0:
        return float(eta), float(zeta)
    return eta, zeta


def expected_log_theta(eta, zeta):
    """E[log theta] under a gamma calibrated to mean eta and variance zeta.

    The matched gamma has shape eta^2/zeta and rate eta/zeta, giving
    psi(eta^2/zeta) - log(eta/zeta).  The shape is evaluated as
    eta * (eta / zeta) to avoid overflow for extreme positions.
    """
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(eta <= 0) or np.any(zeta <= 0):
        raise ModelError("eta and zeta must be strictly positive")
    ratio = eta / zeta
    out = digamma(eta * ratio) - np.log(ratio)
    if out.ndim == 0:
        return float(out)
    return out


def _moment_arrays(state: VariationalState):
    """(M, N, K) arrays of m, v, eta, zeta for all edges and components."""
    m = state.alpha_u[:, None, :] - state.alpha_v[None, :, :]
    v = state.beta_u[:, None, :] + state.beta_v[None, :, :]
    eta = v + m * m
    zeta = 4.0 * m * m * v + 2.0 * v * v
    return m, v, eta, zeta


def _edge_loglik(eta, zeta, x):
    """Per-edge-component data term: E[log theta] - x * eta.

    ``x`` broadcasts as (M, N) against (M, N, K) moments.
    """
    ratio = eta / zeta
    return digamma(eta * ratio) - np.log(ratio) - x[..., None] * eta


def second_moment_sums(state: VariationalState) -> np.ndarray:
    """Per-component sums of (variance + mean^2) over all positions."""
    su = (state.beta_u + state.alpha_u ** 2).sum(axis=0)
    sv = (state.beta_v + state.alpha_v ** 2).sum(axis=0)
    return su + sv


# ---------------------------------------------------------------------------
# free energy


def _likelihood_entropy_term(state: VariationalState, data: WeightMatrix) -> float:
    """Responsibility-weighted data terms plus the allocation entropy.

    Invariant under a common shift applied simultaneously to all sender and
    receiver means (only gaps enter).  Runs over observed edges only: the
    stored responsibilities are zero on masked edges.
    """
    _, _, eta, zeta = _moment_arrays(state)
    g = _edge_loglik(eta, zeta, data.values)
    lam = state.resp
    with np.errstate(divide="ignore", invalid="ignore"):
        contrib = np.where(lam > 0, lam * (g - np.log(np.where(lam > 0, lam, 1.0))), 0.0)
    return float(contrib.sum())


def _mixing_term(dirichlet: np.ndarray, resp_totals: np.ndarray,
                 hyper: Hyperparams) -> float:
    """All terms involving the variational Dirichlet parameters."""
    total = dirichlet.sum()
    coeff = hyper.delta - dirichlet + resp_totals
    val = float((coeff * (digamma(dirichlet) - digamma(total))).sum())
    val += float(gammaln(dirichlet).sum() - gammaln(total))
    return val


def _precision_term(gamma_shape: np.ndarray, gamma_rate: np.ndarray,
                    ssq: np.ndarray, hyper: Hyperparams, M: int, N: int) -> float:
    """All terms involving the variational gamma parameters."""
    coeff = hyper.a - gamma_shape + 0.5 * (M + N)
    val = float((coeff * (digamma(gamma_shape) - np.log(gamma_rate))).sum())
    val -= float((gamma_shape / gamma_rate * (hyper.b + 0.5 * ssq)).sum())
    val += float((gamma_shape - gamma_shape * np.log(gamma_rate)
                  + gammaln(gamma_shape)).sum())
    return val


def _position_entropy_term(state: VariationalState) -> float:
    return 0.5 * float(np.log(state.beta_u).sum() + np.log(state.beta_v).sum())


def free_energy(state: VariationalState, data: WeightMatrix,
                hyper: Hyperparams) -> float:
    """Variational free energy, with the additive constant fixed to zero.

    Only differences matter; the constant is held fixed across a fit so the
    monotonicity of the trace is meaningful.  Requires responsibilities to
    be populated.
    """
    if state.resp is None:
        raise ModelError("responsibilities are unset; run a responsibility update first")
    if data.shape != (state.M, state.N) or hyper.K != state.K:
        raise ModelError("state, data and hyperparameter dimensions disagree")
    resp_totals = state.resp.sum(axis=(0, 1))
    return (_likelihood_entropy_term(state, data)
            + _mixing_term(state.dirichlet, resp_totals, hyper)
            + _precision_term(state.gamma_shape, state.gamma_rate,
                              second_moment_sums(state), hyper,
                              state.M, state.N)
            + _position_entropy_term(state))


def _node_terms(state: VariationalState, data: WeightMatrix,
                hyper: Hyperparams, side: str, node: int,
                alpha, beta, dims) -> float:
    """Free-energy terms that involve one node's positions in given dims.

    ``alpha``/``beta`` are the candidate values for the selected dims;
    everything else is read from ``state``.  Used to form incremental
    differences.  Only the gap enters the moments, so the sign convention
    of the gap is immaterial.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if side == "sender":
        other_a = state.alpha_v[:, dims]
        other_b = state.beta_v[:, dims]
        lam = state.resp[node][:, dims]
        x = data.values[node, :]
        obs = data.mask[node, :]
    elif side == "receiver":
        other_a = state.alpha_u[:, dims]
        other_b = state.beta_u[:, dims]
        lam = state.resp[:, node][:, dims]
        x = data.values[:, node]
        obs = data.mask[:, node]
    else:
        raise ModelError("side must be 'sender' or 'receiver'")
    m = alpha[None, :] - other_a
    v = beta[None, :] + other_b
    eta = v + m * m
    zeta = 4.0 * m * m * v + 2.0 * v * v
    ratio = eta / zeta
    g = digamma(eta * ratio) - np.log(ratio) - x[:, None] * eta
    lik = float((lam * g)[obs].sum())
    ab = state.gamma_shape[dims] / state.gamma_rate[dims]
    prior = -0.5 * float((ab * (beta + alpha ** 2)).sum())
    entropy = 0.5 * float(np.log(beta).sum())
    return lik + prior + entropy


def free_energy_node_delta(state: VariationalState, data: WeightMatrix,
                           hyper: Hyperparams, side: str, node: int,
                           dim, new_alpha, new_beta) -> float:
    """F(state with one node's position replaced) - F(state).

    ``dim`` may be a single dimension index or None, meaning all K
    dimensions move jointly (``new_alpha``/``new_beta`` are then length-K).
    Touches only the terms involving that node: its observed incident
    edges, its second-moment contribution, and its entropy term.
    """
    if state.resp is None:
        raise ModelError("responsibilities are unset; run a responsibility update first")
    new_beta_arr = np.atleast_1d(np.asarray(new_beta, dtype=float))
    if np.any(new_beta_arr <= 0):
        raise ModelError("candidate variances must be strictly positive")
    dims = np.arange(state.K) if dim is None else np.atleast_1d(dim)
    if side == "sender":
        old_alpha = state.alpha_u[node, dims]
        old_beta = state.beta_u[node, dims]
    else:
        old_alpha = state.alpha_v[node, dims]
        old_beta = state.beta_v[node, dims]
    new = _node_terms(state, data, hyper, side, node, new_alpha, new_beta, dims)
    old = _node_terms(state, data, hyper, side, node, old_alpha, old_beta, dims)
    return new - old
