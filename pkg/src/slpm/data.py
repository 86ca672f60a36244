"""Observed-data container for nonnegative weighted (bipartite) networks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Raised when an observed matrix violates its structural invariants."""


@dataclass
class WeightMatrix:
    """A nonnegative M x N weight matrix with an optional observation mask.

    Rows index sender nodes, columns index receiver nodes.  ``mask[i, j]``
    is True when entry (i, j) is observed; unobserved entries are stored
    as 0.0 and excluded from every likelihood sum downstream.  The square
    (unipartite) case is flagged with ``square_mode``; ``exclude_diagonal``
    masks self-edges and is only valid together with ``square_mode``.
    """

    values: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]
    square_mode: bool = False
    exclude_diagonal: bool = False

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DataError("weight matrix must be two-dimensional")
        M, N = self.values.shape
        if M < 1 or N < 1:
            raise DataError("weight matrix must have at least one row and column")
        if self.mask is None:
            self.mask = np.ones((M, N), dtype=bool)
        else:
            self.mask = np.array(self.mask, dtype=bool)
            if self.mask.shape != (M, N):
                raise DataError("mask shape %s does not match matrix shape %s"
                                % (self.mask.shape, (M, N)))
        if self.exclude_diagonal:
            if not self.square_mode:
                raise DataError("exclude_diagonal requires square_mode")
            if M != N:
                raise DataError("exclude_diagonal requires a square matrix")
            np.fill_diagonal(self.mask, False)
        if self.square_mode and M != N:
            raise DataError("square_mode requires M == N, got %d x %d" % (M, N))
        if not self.mask.any():
            raise DataError("at least one entry must be observed")
        obs = self.values[self.mask]
        if not np.all(np.isfinite(obs)):
            i, j = self._first_bad(~np.isfinite(self.values) & self.mask)
            raise DataError("non-finite entry at row %d, column %d" % (i, j))
        if np.any(obs < 0):
            i, j = self._first_bad((self.values < 0) & self.mask)
            raise DataError("negative entry %g at row %d, column %d"
                            % (self.values[i, j], i, j))
        # canonical storage: unobserved entries are zero
        self.values = np.where(self.mask, self.values, 0.0)

    def _first_bad(self, bad):
        i, j = np.argwhere(bad)[0]
        return int(i), int(j)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    def copy(self) -> "WeightMatrix":
        return WeightMatrix(self.values.copy(), self.mask.copy(),
                            self.square_mode, self.exclude_diagonal)

    def same_layout(self, other: "WeightMatrix") -> bool:
        return self.shape == other.shape and bool(np.array_equal(self.mask, other.mask))
