"""Distance-based initialization of the variational state.

Sender/receiver similarities come from the Gram matrices of the (shifted)
weight matrix; their elementwise reciprocals form the diagonal blocks of
a joint dissimilarity over all M + N nodes, with the shifted weights (or
their reciprocals, see ``cross``) as the cross blocks.  Nonmetric MDS of
that matrix provides the initial position means; position variances are
inflated to 20x the empirical variance of the means.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from sklearn.isotonic import IsotonicRegression

from .data import WeightMatrix
from .model import Hyperparams, VariationalState

SMACOF_MAX_ITER = 300
SMACOF_REL_TOL = 1e-6
VARIANCE_INFLATION = 20.0


@dataclass
class DissimilarityMatrix:
    """Joint (M+N) x (M+N) dissimilarity over senders then receivers."""

    D: np.ndarray
    epsilon: float = 1e-4

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=float)
        n = self.D.shape[0]
        if self.D.shape != (n, n):
            raise ValueError("dissimilarity matrix must be square")
        if not np.allclose(self.D, self.D.T):
            raise ValueError("dissimilarity matrix must be symmetric")
        if not np.all(np.isfinite(self.D)):
            raise ValueError("dissimilarity entries must be finite")
        if np.any(np.diag(self.D) != 0):
            raise ValueError("dissimilarity diagonal must be zero")

    @property
    def n(self) -> int:
        return self.D.shape[0]


@dataclass
class MdsResult:
    coords: np.ndarray
    stress1: float
    stress_trace: np.ndarray
    degenerate: bool = False


@dataclass
class InitConfig:
    """Options for building the starting variational state."""

    method: str = "mds"          # "mds" or "random"
    cross: str = "raw"           # cross blocks: raw weights, or reciprocal of X+eps
    epsilon: float = 1e-4
    eps0: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("mds", "random"):
            raise ValueError("init method must be 'mds' or 'random'")
        if self.cross not in ("recip", "raw"):
            raise ValueError("cross mode must be 'recip' or 'raw'")
        if self.epsilon <= 0 or self.eps0 <= 0:
            raise ValueError("epsilon and eps0 must be positive")


def dissimilarity_matrix(data: WeightMatrix, epsilon: float = 1e-4,
                         cross: str = "raw") -> DissimilarityMatrix:
    """Assemble the joint sender/receiver dissimilarity block matrix.

    With Xs = X + epsilon (unobserved entries treated as zero weight),
    sender similarities are sqrt(Xs Xs' / N) elementwise and receiver
    similarities sqrt(Xs' Xs / M); the diagonal blocks are their
    elementwise reciprocals.  The cross blocks are Xs itself
    (``cross='raw'``, the default) or its elementwise reciprocal
    (``cross='recip'``).  The diagonal is zero.
    """
    M, N = data.shape
    xs = np.where(data.mask, data.values, 0.0) + epsilon
    s_u = np.sqrt(xs @ xs.T / N)
    s_v = np.sqrt(xs.T @ xs / M)
    d_u = 1.0 / s_u
    d_v = 1.0 / s_v
    x_cross = 1.0 / xs if cross == "recip" else xs.copy()
    n = M + N
    D = np.empty((n, n))
    D[:M, :M] = d_u
    D[:M, M:] = x_cross
    D[M:, :M] = x_cross.T
    D[M:, M:] = d_v
    np.fill_diagonal(D, 0.0)
    return DissimilarityMatrix(D, epsilon)


def classical_mds(D: np.ndarray, K: int) -> np.ndarray:
    """Torgerson scaling: double-center the squared dissimilarities.

    Eigendirections with nonpositive eigenvalues contribute zero columns.
    """
    n = D.shape[0]
    J = np.eye(n) - np.ones((n, n)) / n
    B = -0.5 * J @ (D ** 2) @ J
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:K]
    lams = np.clip(vals[order], 0.0, None)
    coords = vecs[:, order] * np.sqrt(lams)
    if K > n:
        coords = np.hstack([coords, np.zeros((n, K - n))])
    return coords


def kruskal_stress(D, coords, disparities: np.ndarray | None = None) -> float:
    """Stress-1 of a configuration against a dissimilarity matrix.

    When ``disparities`` is omitted they are recomputed by monotone
    regression of the configuration distances on the dissimilarity order.
    """
    Dm = D.D if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)
    n = Dm.shape[0]
    iu = np.triu_indices(n, 1)
    d_obs = Dm[iu]
    dist = pdist(coords)
    if disparities is None:
        disparities = IsotonicRegression(increasing=True).fit_transform(d_obs, dist)
    denom = float((dist ** 2).sum())
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(((dist - disparities) ** 2).sum() / denom))


def nonmetric_mds(D, K: int, seed: int = 0) -> MdsResult:
    """Embed the nodes by SMACOF iterations with monotone regression.

    Starts from the classical-MDS configuration; alternates isotonic
    regression of the current distances on the dissimilarity ranks
    (disparities rescaled to a fixed total square, which keeps the step an
    exact constrained minimizer and the tracked stress non-increasing)
    with Guttman-transform configuration updates.  Deterministic; the seed
    is accepted for interface stability but no randomness is used.
    A rank-degenerate input (all off-diagonal dissimilarities equal)
    returns the classical configuration flagged as degenerate.
    """
    Dm = D.D if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)
    n = Dm.shape[0]
    iu = np.triu_indices(n, 1)
    d_obs = Dm[iu]
    coords = classical_mds(Dm, K)

    if np.all(d_obs == d_obs[0]):
        return MdsResult(coords, kruskal_stress(Dm, coords), np.array([]),
                         degenerate=True)

    n_pairs = d_obs.size
    iso = IsotonicRegression(increasing=True)
    trace = []
    prev = None
    for _ in range(SMACOF_MAX_ITER):
        dist = pdist(coords)
        disparities = iso.fit_transform(d_obs, dist)
        ssq = float((disparities ** 2).sum())
        if ssq == 0.0:
            break
        disparities = disparities * np.sqrt(n_pairs / ssq)
        sigma = float(((dist - disparities) ** 2).sum()) / n_pairs
        trace.append(sigma)
        if prev is not None and prev - sigma < SMACOF_REL_TOL * max(prev, 1e-30):
            break
        prev = sigma
        # Guttman transform
        safe = np.where(dist > 0, dist, 1.0)
        ratio = np.where(dist > 0, disparities / safe, 0.0)
        R = np.zeros((n, n))
        R[iu] = ratio
        R += R.T
        B = np.diag(R.sum(axis=1)) - R
        coords = B @ coords / n
    return MdsResult(coords, kruskal_stress(Dm, coords), np.array(trace),
                     degenerate=False)


def initialize_state(data: WeightMatrix, hyper: Hyperparams,
                     config: InitConfig | None = None) -> VariationalState:
    """Build the starting state: MDS (or random) means, inflated variances.

    Position variances are set, per side, to 20x the empirical variance of
    all that side's means (falling back to 1 with a warning when the means
    are all identical).  The Dirichlet and gamma parameters start at 1;
    responsibilities stay unset and are filled by the first update inside
    the fit loop.
    """
    if config is None:
        config = InitConfig()
    M, N = data.shape
    K = hyper.K
    if config.method == "random":
        rng = np.random.default_rng(config.seed)
        alpha_u = rng.standard_normal((M, K))
        alpha_v = rng.standard_normal((N, K))
    else:
        diss = dissimilarity_matrix(data, config.epsilon, config.cross)
        res = nonmetric_mds(diss, K, config.seed)
        alpha_u = res.coords[:M]
        alpha_v = res.coords[M:]

    def inflated(alpha, side):
        var = float(np.var(alpha))
        if var == 0.0:
            warnings.warn("zero empirical variance of %s means; variances set to 1"
                          % side)
            return np.ones_like(alpha)
        return np.full_like(alpha, VARIANCE_INFLATION * var)

    return VariationalState(
        resp=None,
        alpha_u=alpha_u,
        beta_u=inflated(alpha_u, "sender"),
        alpha_v=alpha_v,
        beta_v=inflated(alpha_v, "receiver"),
        dirichlet=np.ones(K),
        gamma_shape=np.ones(K),
        gamma_rate=np.ones(K),
        step_u=np.full(M, config.eps0),
        step_v=np.full(N, config.eps0),
    )
