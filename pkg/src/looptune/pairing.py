"""Relative-gain pairing analysis for square multivariable plants.

The relative gain array at frequency w is the Schur (element-wise) product

    RGA(G) = G(iw) o (G(iw)^-1)^T

and the relative interaction array is RIA = 1/RGA - 1 element-wise.  A RIA
entry of zero marks an ideal pairing; large magnitudes discourage it.  Pair
selection is either the greedy rule (repeatedly take the global minimum
|RIA|, drop its row and column) or an optimal assignment minimizing the sum
of |RIA| over a perfect matching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, SingularGainMatrix
from .linss import StateSpaceModel, _rcond, transfer_at

RCOND_LIMIT = 1e-12


@dataclass
class GainMatrix:
    """Complex gains (CV rows, MV columns) at one frequency in rad/s."""

    values: np.ndarray
    cv_names: list[str] = field(default_factory=list)
    mv_names: list[str] = field(default_factory=list)
    frequency: float = 0.0

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        q, p = self.values.shape
        if not self.cv_names:
            self.cv_names = [f"cv{i + 1}" for i in range(q)]
        if not self.mv_names:
            self.mv_names = [f"mv{j + 1}" for j in range(p)]
        if len(self.cv_names) != q or len(set(self.cv_names)) != q:
            raise DimensionMismatch("cv_names must be unique and match rows")
        if len(self.mv_names) != p or len(set(self.mv_names)) != p:
            raise DimensionMismatch("mv_names must be unique and match columns")

    @classmethod
    def from_state_space(cls, ss: StateSpaceModel, omega: float = 0.0) -> "GainMatrix":
        return cls(values=transfer_at(ss, 1j * omega),
                   cv_names=list(ss.output_names),
                   mv_names=list(ss.input_names), frequency=float(omega))

    @classmethod
    def from_plant(cls, plant, omega: float = 0.0) -> "GainMatrix":
        q, p = plant.n_outputs, plant.n_inputs
        values = np.zeros((q, p), dtype=complex)
        for (i, j), tf in plant.entries.items():
            values[i, j] = tf.evaluate(1j * omega)
        return cls(values=values, cv_names=list(plant.cv_names),
                   mv_names=list(plant.mv_names), frequency=float(omega))


@dataclass
class LoopPair:
    cv_index: int
    mv_index: int
    phi: complex
    rga: complex
    negative_rga_warning: bool


@dataclass
class PairingResult:
    """RGA/RIA matrices plus an ordered perfect matching of (CV, MV) pairs."""

    lam: np.ndarray
    phi: np.ndarray
    pairs: list
    method: str
    cv_names: list[str] = field(default_factory=list)
    mv_names: list[str] = field(default_factory=list)

    def total_interaction(self) -> float:
        return float(sum(abs(p.phi) for p in self.pairs))

    def named_pairs(self) -> list:
        if not self.cv_names:
            return [(p.cv_index, p.mv_index) for p in self.pairs]
        return [(self.cv_names[p.cv_index], self.mv_names[p.mv_index])
                for p in self.pairs]


def rga(g) -> np.ndarray:
    """Relative gain array via an LU solve of G^T X = I (no explicit inverse)."""
    values = g.values if isinstance(g, GainMatrix) else np.atleast_2d(np.asarray(g, dtype=complex))
    q, p = values.shape
    if q != p:
        raise DimensionMismatch(f"relative gains need a square matrix, got {q}x{p}")
    if _rcond(values) < RCOND_LIMIT:
        raise SingularGainMatrix("gain matrix is singular within rcond 1e-12")
    x = np.linalg.solve(values.T, np.eye(q, dtype=complex))
    return values * x


def ria(lam) -> np.ndarray:
    """Relative interaction array 1/RGA - 1; a zero gain maps to +inf."""
    lam = np.atleast_2d(np.asarray(lam, dtype=complex))
    phi = np.empty_like(lam)
    zero = lam == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        phi[~zero] = 1.0 / lam[~zero] - 1.0
    phi[zero] = complex(np.inf, 0.0)
    return phi


def _lambda_from_phi(phi: np.ndarray) -> np.ndarray:
    lam = np.empty_like(phi)
    infinite = ~np.isfinite(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam[~infinite] = 1.0 / (phi[~infinite] + 1.0)
    lam[infinite] = 0.0
    return lam


def _build_pairs(order, phi, lam):
    pairs = []
    for i, j in order:
        pairs.append(LoopPair(cv_index=int(i), mv_index=int(j),
                              phi=complex(phi[i, j]), rga=complex(lam[i, j]),
                              negative_rga_warning=bool(lam[i, j].real < 0.0)))
    return pairs


def pair_sequential(phi, cv_names=None, mv_names=None) -> PairingResult:
    """Greedy pairing: take the global minimum |RIA|, drop its row and
    column, repeat.  Ties break on the lowest row index, then column."""
    phi = np.atleast_2d(np.asarray(phi, dtype=complex))
    q, p = phi.shape
    if q != p:
        raise DimensionMismatch("pairing needs a square RIA matrix")
    cost = np.abs(phi)
    used_rows = set()
    used_cols = set()
    order = []
    for _ in range(q):
        best = None
        best_val = np.inf
        for i in range(q):
            if i in used_rows:
                continue
            for j in range(p):
                if j in used_cols:
                    continue
                if best is None or cost[i, j] < best_val:
                    best = (i, j)
                    best_val = cost[i, j]
        order.append(best)
        used_rows.add(best[0])
        used_cols.add(best[1])
    lam = _lambda_from_phi(phi)
    return PairingResult(lam=lam, phi=phi, pairs=_build_pairs(order, phi, lam),
                         method="sequential",
                         cv_names=list(cv_names or []), mv_names=list(mv_names or []))


def pair_assignment(phi, cv_names=None, mv_names=None) -> PairingResult:
    """Optimal pairing minimizing the summed |RIA| over perfect matchings.

    Infinite entries enter the assignment with a large finite penalty so the
    problem stays well-posed; the matching is listed by increasing |RIA|.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=complex))
    q, p = phi.shape
    if q != p:
        raise DimensionMismatch("pairing needs a square RIA matrix")
    cost = np.abs(phi)
    finite = np.isfinite(cost)
    penalty = (cost[finite].max() + 1.0) * 1e6 if finite.any() else 1.0
    cost = np.where(finite, cost, penalty)
    rows, cols = linear_sum_assignment(cost)
    order = sorted(zip(rows.tolist(), cols.tolist()),
                   key=lambda ij: (cost[ij[0], ij[1]], ij[0]))
    lam = _lambda_from_phi(phi)
    return PairingResult(lam=lam, phi=phi, pairs=_build_pairs(order, phi, lam),
                         method="assignment",
                         cv_names=list(cv_names or []), mv_names=list(mv_names or []))


def analyze(g: GainMatrix, method: str = "sequential") -> PairingResult:
    """RGA, RIA, and pairing for one gain matrix in a single call."""
    lam = rga(g)
    phi = ria(lam)
    if method == "sequential":
        result = pair_sequential(phi, g.cv_names, g.mv_names)
    elif method == "assignment":
        result = pair_assignment(phi, g.cv_names, g.mv_names)
    else:
        raise ValueError("method must be 'sequential' or 'assignment'")
    result.lam = lam
    for pair in result.pairs:
        pair.rga = complex(lam[pair.cv_index, pair.mv_index])
        pair.negative_rga_warning = bool(pair.rga.real < 0.0)
    return result
