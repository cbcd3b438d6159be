"""Transfer-function data model, closed-form step responses, and simulation.

The model family is gain / zero time constants / pole time constants / dead
time:

    G(s) = k0 * prod_i (tz_i s + 1) / prod_j (tp_j s + 1) * exp(-delay s)

For one or two lags and at most one zero the unit-step response has a closed
form.  With distinct lags tau1 != tau2 and dt = t - delay:

    s(t) = Kh (1 - (tz - tau1)/(tau2 - tau1) e^(-dt/tau1)
                 - (tau2 - tz)/(tau2 - tau1) e^(-dt/tau2))

and for a repeated lag tau1 == tau2:

    s(t) = Kh (1 - (1 + dt (tau1 - tz)/tau1^2) e^(-dt/tau1))

where Kh = k0 H(t - delay) gates the response to zero before the dead time.
Everything else goes through the state-space realization and the fixed-step
RK4 kernels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ImproperSystem, UnsupportedStructure
from .ioutil import fmt_float, require
from .linss import StateSpaceModel

# Relative gap below which two pole time constants take the repeated-lag
# branch; absorbs representation noise without masking genuinely split poles.
EQUAL_POLE_RTOL = 1e-9
# Relative gap for exact zero-pole cancellation before realization.
CANCEL_RTOL = 1e-9


@dataclass(frozen=True)
class TransferFunction:
    """Immutable gain-zeros-poles-delay model; time constants in seconds.

    Pole time constants must be positive (stable lags) and are stored in
    descending order, as are the signed zero time constants.  tz = 0 encodes
    an absent zero since (0 s + 1) = 1; negative tz is an inverse response.
    """

    k0: float
    zeros: tuple = ()
    poles: tuple = ()
    delay: float = 0.0

    def __post_init__(self):
        k0 = float(self.k0)
        zeros = tuple(sorted((float(z) for z in self.zeros), reverse=True))
        poles = tuple(sorted((float(p) for p in self.poles), reverse=True))
        delay = float(self.delay)
        if not all(np.isfinite((k0, delay) + zeros + poles)):
            raise ValueError("transfer function parameters must be finite")
        if any(p <= 0.0 for p in poles):
            raise ValueError("pole time constants must be positive")
        if delay < 0.0:
            raise ValueError("dead time must be nonnegative")
        object.__setattr__(self, "k0", k0)
        object.__setattr__(self, "zeros", zeros)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "delay", delay)

    def evaluate(self, s: complex) -> complex:
        """G(s) at one complex frequency (delay included)."""
        s = complex(s)
        num = complex(self.k0)
        for z in self.zeros:
            num *= z * s + 1.0
        den = complex(1.0)
        for p in self.poles:
            den *= p * s + 1.0
        return num / den * np.exp(-self.delay * s)

    @property
    def dc_gain(self) -> float:
        return self.k0

    def to_dict(self) -> dict:
        return {"k0": self.k0, "zeros": list(self.zeros),
                "poles": list(self.poles), "delay": self.delay}

    @classmethod
    def from_dict(cls, obj: dict) -> "TransferFunction":
        return cls(
            k0=float(require(obj, "k0", "transfer_function")),
            zeros=tuple(obj.get("zeros", [])),
            poles=tuple(obj.get("poles", [])),
            delay=float(obj.get("delay", 0.0)),
        )


@dataclass
class TimeSeries:
    """Named sample channels on a shared strictly increasing time grid."""

    t: np.ndarray
    channels: dict

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1:
            raise ValueError("t must be one-dimensional")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("t must be strictly increasing")
        clean = {}
        for name, values in self.channels.items():
            arr = np.asarray(values, dtype=float)
            if arr.shape != self.t.shape:
                raise ValueError(f"channel '{name}' length does not match t")
            clean[str(name)] = arr
        self.channels = clean

    def __len__(self) -> int:
        return self.t.size

    def to_csv(self, path) -> None:
        names = list(self.channels)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(["t_seconds"] + names) + "\n")
            cols = [self.channels[n] for n in names]
            for k in range(self.t.size):
                row = [fmt_float(self.t[k])] + [fmt_float(col[k]) for col in cols]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, "r", newline="") as fh:
            header = fh.readline().strip().split(",")
            if not header or header[0] != "t_seconds":
                raise ValueError("first CSV column must be t_seconds")
            names = header[1:]
            rows = [line.strip().split(",") for line in fh if line.strip()]
        data = np.array([[float(v) for v in row] for row in rows])
        if data.size == 0:
            data = data.reshape(0, len(names) + 1)
        return cls(t=data[:, 0],
                   channels={n: data[:, i + 1] for i, n in enumerate(names)})


def equal_pole_dispatch(poles) -> str:
    """Select the repeated-lag or distinct-lag closed form for two poles."""
    if len(poles) != 2:
        raise ValueError("dispatch needs exactly two pole time constants")
    p1, p2 = float(poles[0]), float(poles[1])
    if abs(p1 - p2) <= EQUAL_POLE_RTOL * max(abs(p1), abs(p2)):
        return "equal"
    return "distinct"


def _step_curve(k0, tz, poles, delay, t):
    """Closed-form unit-step response on raw parameter values.

    Shared by the public evaluator and the identification residuals, which
    must see a smooth function of the unsorted pole pair.
    """
    t = np.asarray(t, dtype=float)
    gate = t >= delay
    dt_ = np.where(gate, t - delay, 0.0)
    if len(poles) == 1:
        p1 = poles[0]
        resp = 1.0 - (p1 - tz) / p1 * np.exp(-dt_ / p1)
    else:
        p1, p2 = poles
        if equal_pole_dispatch((p1, p2)) == "equal":
            resp = 1.0 - (1.0 + dt_ * (p1 - tz) / (p1 * p1)) * np.exp(-dt_ / p1)
        else:
            resp = (1.0
                    - (tz - p1) / (p2 - p1) * np.exp(-dt_ / p1)
                    - (p2 - tz) / (p2 - p1) * np.exp(-dt_ / p2))
    return np.where(gate, k0 * resp, 0.0)


def step_response_analytic(g: TransferFunction, t):
    """Unit-step response from the closed forms; zero before the dead time.

    Supports one or two poles and at most one zero; anything else must go
    through step_response_numeric.
    """
    if len(g.poles) not in (1, 2) or len(g.zeros) > 1:
        raise UnsupportedStructure(
            "closed form covers 1-2 poles and at most 1 zero; "
            "use step_response_numeric")
    tz = g.zeros[0] if g.zeros else 0.0
    out = _step_curve(g.k0, tz, g.poles, g.delay, t)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return float(out)
    return out


def to_state_space(g: TransferFunction) -> tuple[float, StateSpaceModel]:
    """Controllable-canonical realization of the rational part.

    Exactly matching zero/pole pairs (relative gap <= 1e-9) cancel first,
    so e.g. (3s+1)/(3s+1) realizes as a plain gain.  The dead time is
    returned separately for sample-resolution buffering.
    """
    zeros = [z for z in g.zeros if z != 0.0]
    poles = list(g.poles)
    kept = []
    for z in zeros:
        hit = None
        for idx, p in enumerate(poles):
            if abs(z - p) <= CANCEL_RTOL * max(abs(z), abs(p)):
                hit = idx
                break
        if hit is None:
            kept.append(z)
        else:
            poles.pop(hit)
    if len(kept) > len(poles):
        raise ImproperSystem(
            f"{len(kept)} zeros against {len(poles)} poles after cancellation")

    num = np.array([g.k0])
    for z in kept:
        num = np.convolve(num, [1.0, z])  # ascending powers of s
    den = np.array([1.0])
    for p in poles:
        den = np.convolve(den, [1.0, p])

    n = len(poles)
    if n == 0:
        model = StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)),
                                np.zeros((1, 0)), [[num[0]]])
        return g.delay, model

    lead = den[n]
    alpha = den[:n] / lead
    beta = np.zeros(n + 1)
    beta[: num.size] = num / lead

    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = 1.0
    A[n - 1, :] = -alpha
    B = np.zeros((n, 1))
    B[n - 1, 0] = 1.0
    C = (beta[:n] - beta[n] * alpha).reshape(1, n)
    D = np.array([[beta[n]]])
    return g.delay, StateSpaceModel(A, B, C, D)


def _resolve_grid(t_grid, dt: float) -> np.ndarray:
    if np.isscalar(t_grid) or np.asarray(t_grid).ndim == 0:
        horizon = float(t_grid)
        if horizon < 0:
            raise ValueError("horizon must be nonnegative")
        n = int(np.floor(horizon / dt + 0.5)) + 1
        return np.arange(n) * dt
    grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(grid)
    if grid.size > 1 and not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError("explicit grid spacing must equal dt")
    return grid


def step_response_numeric(g: TransferFunction, t_grid, dt: float) -> TimeSeries:
    """Fixed-step RK4 unit-step response sampled on a uniform grid.

    ``t_grid`` is either the horizon in seconds or an explicit uniform grid
    with spacing ``dt``.  The dead time is rounded to the nearest whole
    number of steps (at worst half a step of shift, documented behavior).
    """
    dt = float(dt)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if g.poles and dt > min(g.poles) / 10.0:
        warnings.warn(
            f"dt = {dt} s does not resolve the fastest lag "
            f"({min(g.poles)} s) within a factor of 10", stacklevel=2)
    grid = _resolve_grid(t_grid, dt)
    delay, ss = to_state_space(g)
    nd = int(np.floor(delay / dt + 0.5))
    m, nb = kernels.rk4_input_map(ss.A, ss.B, dt)
    c = ss.C.ravel()
    d = float(ss.D[0, 0])
    u = np.ones(grid.size)
    y = kernels.lti_filter(m, nb, c, d, u, nd)
    return TimeSeries(t=grid, channels={"y": y})
