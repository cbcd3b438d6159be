"""Linear state-space models obtained from DAE Jacobian blocks.

A semi-explicit DAE  x' = f(x, y, u),  0 = g(x, y, u),  z = h(x, y, u)
linearized at a steady state yields nine Jacobian blocks.  Eliminating the
algebraic variables through the (nonsingular) g-Jacobian gives an ordinary
(A, B, C, D) model whose transfer matrix can be evaluated at any complex
frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, FrequencyAtPole, SingularAlgebraicJacobian
from .ioutil import mat_from_obj, mat_to_obj, require

# Reciprocal condition estimate below this counts as singular.  The reduction
# assumes a valid steady state; anything this ill-conditioned is treated as an
# index problem or a bad linearization point rather than noise.
RCOND_LIMIT = 1e-12


def _as_matrix(a, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise DimensionMismatch(f"block '{name}' must be a 2-d matrix")
    return arr


def _rcond(a: np.ndarray) -> float:
    """Reciprocal 2-norm condition number (0.0 for an all-zero matrix)."""
    if a.shape[0] == 0:
        return 1.0
    s = np.linalg.svd(a, compute_uv=False)
    smax = s[0]
    if smax == 0.0 or not np.isfinite(smax):
        return 0.0
    return float(s[-1] / smax)


@dataclass(frozen=True)
class DaeJacobians:
    """The nine Jacobian blocks of a semi-explicit DAE at one operating point.

    Shapes (n differential states, m algebraic states, p inputs, q outputs):
    fx n*n, fy n*m, fu n*p, gx m*n, gy m*m, gu m*p, hx q*n, hy q*m, hu q*p.
    Disturbance channels, if any, are folded into extra input columns.
    """

    fx: np.ndarray
    fy: np.ndarray
    fu: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    gu: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hu: np.ndarray

    def __post_init__(self):
        for name in ("fx", "fy", "fu", "gx", "gy", "gu", "hx", "hy", "hu"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), name))
        n = self.fx.shape[0]
        m = self.gy.shape[0]
        p = self.fu.shape[1]
        q = self.hx.shape[0]
        expected = {
            "fx": (n, n), "fy": (n, m), "fu": (n, p),
            "gx": (m, n), "gy": (m, m), "gu": (m, p),
            "hx": (q, n), "hy": (q, m), "hu": (q, p),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionMismatch(
                    f"block '{name}' has shape {got}, expected {shape}")

    @property
    def n_states(self) -> int:
        return self.fx.shape[0]

    @property
    def n_algebraic(self) -> int:
        return self.gy.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.fu.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.hx.shape[0]

    def to_dict(self) -> dict:
        out = {"kind": "dae_jacobians"}
        for name in ("fx", "fy", "fu", "gx", "gy", "gu", "hx", "hy", "hu"):
            out[name] = mat_to_obj(getattr(self, name))
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "DaeJacobians":
        blocks = {}
        for name in ("fx", "fy", "fu", "gx", "gy", "gu", "hx", "hy", "hu"):
            blocks[name] = mat_from_obj(require(obj, name, "dae_jacobians"), name)
        return cls(**blocks)


@dataclass
class StateSpaceModel:
    """Ordinary linear model  x' = A x + B u,  z = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_names: list[str] = field(default_factory=list)
    output_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        self.B = _as_matrix(self.B, "B")
        self.C = _as_matrix(self.C, "C")
        self.D = _as_matrix(self.D, "D")
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        p = self.B.shape[1]
        q = self.C.shape[0]
        if self.B.shape != (n, p) or self.C.shape != (q, n) or self.D.shape != (q, p):
            raise DimensionMismatch(
                f"inconsistent shapes: A{self.A.shape} B{self.B.shape} "
                f"C{self.C.shape} D{self.D.shape}")
        if not self.input_names:
            self.input_names = [f"u{i + 1}" for i in range(p)]
        if not self.output_names:
            self.output_names = [f"z{i + 1}" for i in range(q)]
        if len(self.input_names) != p or len(set(self.input_names)) != p:
            raise DimensionMismatch("input_names must be unique and match B columns")
        if len(self.output_names) != q or len(set(self.output_names)) != q:
            raise DimensionMismatch("output_names must be unique and match C rows")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "state_space",
            "a": mat_to_obj(self.A),
            "b": mat_to_obj(self.B),
            "c": mat_to_obj(self.C),
            "d": mat_to_obj(self.D),
            "input_names": list(self.input_names),
            "output_names": list(self.output_names),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StateSpaceModel":
        return cls(
            A=mat_from_obj(require(obj, "a", "state_space"), "a"),
            B=mat_from_obj(require(obj, "b", "state_space"), "b"),
            C=mat_from_obj(require(obj, "c", "state_space"), "c"),
            D=mat_from_obj(require(obj, "d", "state_space"), "d"),
            input_names=list(obj.get("input_names", [])),
            output_names=list(obj.get("output_names", [])),
        )


def reduce_dae(j: DaeJacobians,
               input_names=None, output_names=None) -> StateSpaceModel:
    """Eliminate the algebraic variables and return the (A, B, C, D) model.

    A = fx - fy gy^-1 gx      B = fu - fy gy^-1 gu
    C = hx - hy gy^-1 gx      D = hu - hy gy^-1 gu

    Raises SingularAlgebraicJacobian when gy is singular within the
    conditioning threshold.
    """
    if j.n_algebraic == 0:
        A, B, C, D = j.fx.copy(), j.fu.copy(), j.hx.copy(), j.hu.copy()
    else:
        if _rcond(j.gy) < RCOND_LIMIT:
            raise SingularAlgebraicJacobian(
                "algebraic Jacobian gy is singular within rcond 1e-12")
        w = np.linalg.solve(j.gy, np.hstack([j.gx, j.gu]))
        wx, wu = w[:, : j.n_states], w[:, j.n_states:]
        A = j.fx - j.fy @ wx
        B = j.fu - j.fy @ wu
        C = j.hx - j.hy @ wx
        D = j.hu - j.hy @ wu
    return StateSpaceModel(A, B, C, D,
                           input_names=list(input_names or []),
                           output_names=list(output_names or []))


def transfer_at(ss: StateSpaceModel, s: complex) -> np.ndarray:
    """Evaluate G(s) = C (sI - A)^-1 B + D by linear solve.

    Raises FrequencyAtPole when sI - A is singular within the conditioning
    threshold (the requested frequency sits on a system pole).
    """
    s = complex(s)
    n = ss.n_states
    if n == 0:
        return ss.D.astype(complex)
    m = s * np.eye(n) - ss.A
    if _rcond(m) < RCOND_LIMIT:
        raise FrequencyAtPole(f"s = {s} is numerically at a pole of the model")
    return ss.C @ np.linalg.solve(m, ss.B.astype(complex)) + ss.D
