"""Step-test generation, response normalization, and transfer-function fits.

The identification path mirrors the plant-test protocol: step each MV by a
set of relative sizes, record every CV at a fixed rate, normalize each
response by the MV move,

    s(t) = (z(t) - z(t0)) / (u(t) - u(t0)),

then fit the gain / two lags / one zero / dead-time model to the normalized
data with a damped Gauss-Newton (Levenberg-Marquardt) loop on the closed-form
step response.  The dead time makes the objective only piecewise smooth, so
the fit alternates a sample-resolution grid search over the delay with smooth
optimization of the remaining parameters, then polishes all five jointly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NeverResponds, ZeroStep
from .lti import TimeSeries, TransferFunction, _step_curve, to_state_space
from .plant import PlantMatrix

# Detection threshold for "the response has started".
RESPONSE_EPS = 1e-10
# Relative gap under which a fitted pole pair is re-fit on the repeated-lag
# branch with a single shared time constant.
EQUAL_POLE_REFIT_RTOL = 1e-3


def _exp(v: float) -> float:
    # exp that saturates instead of raising or underflowing to zero, so a
    # wild trial step during the optimization yields a huge (or uselessly
    # tiny) residual rather than an overflow error or a zero-length lag
    return math.exp(min(max(v, -700.0), 700.0))


@dataclass(frozen=True)
class StepExperiment:
    """Step-test protocol: relative MV moves and the recording window.

    ``sample_rate`` is in samples per hour (100/h means one sample every
    36 s).  ``sample_rate=None`` refines the rate per MV so the fastest lag
    in that column is resolved; ``tf=None`` picks the settling horizon per MV.
    ``mv_name=None`` steps every MV in turn.
    """

    mv_name: str | None = None
    step_sizes: tuple = (-0.01, -0.005, 0.005, 0.01)
    t0: float = 0.0
    tf: float | None = None
    sample_rate: float | None = 100.0

    def __post_init__(self):
        if any(s == 0.0 for s in self.step_sizes) or not self.step_sizes:
            raise ValueError("step sizes must be nonzero")
        if self.tf is not None and self.tf <= self.t0:
            raise ValueError("tf must be greater than t0")
        if self.sample_rate is not None and self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def to_dict(self) -> dict:
        return {"mv_name": self.mv_name, "step_sizes": list(self.step_sizes),
                "t0": self.t0, "tf": self.tf, "sample_rate": self.sample_rate}

    @classmethod
    def from_dict(cls, obj: dict) -> "StepExperiment":
        return cls(mv_name=obj.get("mv_name"),
                   step_sizes=tuple(obj.get("step_sizes", (-0.01, -0.005, 0.005, 0.01))),
                   t0=float(obj.get("t0", 0.0)),
                   tf=obj.get("tf"),
                   sample_rate=obj.get("sample_rate", 100.0))


@dataclass
class NormalizedStep:
    """One normalized response; t is seconds relative to the step instant."""

    t: np.ndarray
    s: np.ndarray
    cv_name: str = ""
    mv_name: str = ""
    step_size: float = 0.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.t.shape != self.s.shape or self.t.ndim != 1:
            raise ValueError("t and s must be 1-d arrays of equal length")


@dataclass
class FitResult:
    model: TransferFunction
    residual_norm: float
    converged: bool
    iterations: int


@dataclass
class BatteryResult:
    """Normalized responses per (CV, MV) pair plus the responsiveness table."""

    cv_names: list[str]
    mv_names: list[str]
    steps: dict = field(default_factory=dict)  # (cv, mv) -> [NormalizedStep]
    responsiveness: np.ndarray | None = None   # q x p max |relative CV change|
    records: dict = field(default_factory=dict)  # mv -> TimeSeries (normalized)


def normalize_step(t, z, u, t0: float = 0.0) -> NormalizedStep:
    """Normalize one recorded response by the MV move.

    Locates the step as the first sample after ``t0`` where u leaves its
    stationary value, returns s = (z - z(t0)) / (u - u(t0)) from there on and
    exactly zero before, with time re-zeroed at the step instant.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    i0 = int(np.searchsorted(t, t0, side="right")) - 1
    if i0 < 0:
        raise ValueError("t0 lies before the first sample")
    u0 = u[i0]
    z0 = z[i0]
    thresh = 1e-15 * max(abs(u0), 1.0)
    moved = np.flatnonzero(np.abs(u - u0) > thresh)
    moved = moved[moved > i0]
    if moved.size == 0:
        raise ZeroStep("the MV never left its stationary value")
    k_step = int(moved[0])
    s = np.zeros_like(z)
    s[k_step:] = (z[k_step:] - z0) / (u[k_step:] - u0)
    return NormalizedStep(t=t - t[k_step], s=s)


def initial_guess(step: NormalizedStep) -> TransferFunction:
    """Starting model: tail-average gain, first-motion delay, 63% lags.

    The gain is the mean of the final 5% of the window (reduces to the last
    sample for settled data), the dead time is the first sample whose
    magnitude exceeds 1e-10, and both lags start at half the 63% rise time
    past the dead time.  The zero starts at 0.
    """
    t, s = step.t, step.s
    idx = np.flatnonzero(np.abs(s) > RESPONSE_EPS)
    if idx.size == 0:
        raise NeverResponds("response never exceeds 1e-10 in magnitude")
    taud = max(float(t[idx[0]]), 0.0)
    tail = t >= t[-1] - 0.05 * (t[-1] - t[0])
    k0 = float(np.mean(s[tail]))
    if k0 == 0.0:
        k0 = float(s[idx[-1]])
    risen = np.flatnonzero(np.abs(s) >= 0.63 * abs(k0))
    t63 = float(t[risen[0]]) if risen.size else float(t[-1])
    dt_med = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    tau = max((t63 - taud) / 2.0, dt_med / 10.0, 1e-9)
    return TransferFunction(k0, (0.0,), (tau, tau), taud)


def _lm(residual, x0, max_iter, clamp=None, xtol=1e-12, ftol=1e-13):
    """Damped Gauss-Newton with central-difference Jacobians.

    The Jacobian perturbation is 1e-6 relative (floored at 1e-6 absolute for
    parameters near zero).  Returns (x, sse, iterations, converged).
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    sse = float(r @ r)
    lam = 1e-3
    it = 0
    converged = False
    npar = x.size
    while it < max_iter:
        it += 1
        if sse <= 1e-300:
            converged = True
            break
        jac = np.empty((r.size, npar))
        for i in range(npar):
            h = 1e-6 * max(abs(x[i]), 1.0)
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            if clamp is not None:
                xp = clamp(xp)
                xm = clamp(xm)
            denom = xp[i] - xm[i]
            if denom == 0.0:
                jac[:, i] = 0.0
            else:
                jac[:, i] = (residual(xp) - residual(xm)) / denom
        jtj = jac.T @ jac
        jtr = jac.T @ r
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1e-300
        accepted = False
        while lam <= 1e12:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + delta
            if clamp is not None:
                x_new = clamp(x_new)
            r_new = residual(x_new)
            sse_new = float(r_new @ r_new)
            if np.isfinite(sse_new) and sse_new <= sse:
                step_small = np.all(np.abs(x_new - x) <= xtol * (np.abs(x) + xtol))
                improvement = sse - sse_new
                x, r, sse = x_new, r_new, sse_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                if step_small or improvement <= ftol * max(sse, 1e-300):
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            # no damped step improves the fit: treat as a local optimum
            converged = True
            break
        if converged:
            break
    return x, sse, it, converged


def fit_sopdt(step: NormalizedStep, guess: TransferFunction,
              max_iter: int = 500) -> FitResult:
    """Least-squares fit of gain / two lags / one zero / dead time.

    Alternates a sample-resolution grid search over the dead time with
    Levenberg-Marquardt on (k0, ln tau1, ln tau2, tau_z), then polishes all
    five parameters jointly.  Lags stay positive through the log
    parameterization and the dead time is clamped at zero.  Because a single
    descent can stall on overshooting or two-timescale data, the same
    procedure is restarted from a small fixed set of reshaped variants of the
    guess and the best sum of squares wins (``max_iter`` caps each descent).
    A near-repeated fitted pole pair (relative gap < 1e-3) is re-fit on the
    repeated-lag branch with one shared time constant and kept when it does
    at least as well.
    """
    if len(guess.poles) != 2 or len(guess.zeros) != 1:
        raise ValueError("guess must have exactly 2 poles and 1 zero")
    t = step.t
    s = step.s
    n = s.size

    def resid_full(k0, tz, ta, tb, taud):
        return _step_curve(k0, tz, (ta, tb), taud, t) - s

    def resid4(x, taud):
        return resid_full(x[0], x[1], _exp(x[2]), _exp(x[3]), taud)

    def resid5(x):
        return resid_full(x[0], x[1], _exp(x[2]), _exp(x[3]),
                          max(x[4], 0.0))

    def clamp5(x):
        x = x.copy()
        x[4] = max(x[4], 0.0)
        return x

    sample_times = np.unique(t[t >= 0.0])
    dt_med = float(np.median(np.diff(t))) if t.size > 1 else 1.0

    def tail_time_constant(k0):
        # slope of log |s - k0| over the mid decay estimates the slowest lag
        resid = np.abs(s - k0)
        scale = abs(k0)
        mask = (t > 0.0) & (resid > 0.02 * scale) & (resid < 0.7 * scale)
        if np.count_nonzero(mask) < 4:
            return None
        slope = np.polyfit(t[mask], np.log(resid[mask]), 1)[0]
        if not np.isfinite(slope) or slope >= 0.0:
            return None
        return -1.0 / slope

    good_rms = 1e-8 * max(abs(guess.k0), 1e-30)
    good_sse = n * good_rms * good_rms

    def delay_candidates(taud):
        cand = sample_times[np.abs(sample_times - taud) <= 25.0 * dt_med]
        cand = np.union1d(cand, [0.0, taud])
        if cand.size > 81:  # cap the grid cost on dense or nonuniform data
            keep = np.unique(np.round(
                np.linspace(0, cand.size - 1, 81)).astype(int))
            cand = np.union1d(cand[keep], [0.0, taud])
        return cand

    def descend(k0, tz, la, lb, taud):
        start = (k0, tz, la, lb, taud)
        iters = 0
        # alternate a coarse dead-time search at sample resolution with a
        # smooth descent of the remaining parameters, then polish jointly
        for _ in range(3):
            cand = delay_candidates(taud)
            sses = [float(np.sum(
                resid_full(k0, tz, _exp(la), _exp(lb), c) ** 2))
                for c in cand]
            taud_new = float(cand[int(np.argmin(sses))])
            x, _, it, _ = _lm(lambda v: resid4(v, taud_new),
                              np.array([k0, tz, la, lb]),
                              max_iter=max_iter)
            k0, tz, la, lb = x
            iters += it
            if taud_new == taud:
                break
            taud = taud_new
        best = _lm(resid5, np.array([k0, tz, la, lb, taud]),
                   max_iter=max_iter, clamp=clamp5)
        iters += best[2]
        if best[1] > good_sse:
            # the grid can drag the dead time out of an already-good basin
            # (a zero trades off against the delay); retry as a pure joint
            # descent from the untouched start and keep the better fit
            direct = _lm(resid5, np.array(start), max_iter=max_iter,
                         clamp=clamp5)
            iters += direct[2]
            if direct[1] < best[1]:
                best = direct
        return best[0], best[1], iters, best[3]

    k0_g = guess.k0
    tz_g = guess.zeros[0]
    tau_g = math.sqrt(guess.poles[0] * guess.poles[1])
    la_g, lb_g = math.log(guess.poles[0]), math.log(guess.poles[1])
    taud_g = guess.delay
    tau_t = tail_time_constant(k0_g) or tau_g
    lt = math.log(tau_t)
    starts = [
        (k0_g, tz_g, la_g, lb_g, taud_g),
        (k0_g, 3.0 * tau_t, lt, lt, taud_g),            # overshoot shape
        (k0_g, -tau_t, lt, lt, taud_g),                 # inverse response
        (k0_g, tz_g, math.log(5.0 * tau_t), math.log(tau_t / 5.0), taud_g),
        (k0_g, tz_g, lt, lt, taud_g),                   # tail time scale
    ]

    best = None
    total_iters = 0
    for start in starts:
        x, sse, iters, conv = descend(*start)
        total_iters += iters
        if best is None or sse < best[1]:
            best = (x, sse, conv)
        if best[1] <= good_sse:
            break

    x, sse, converged = best
    k0, tz, la, lb, taud = x[0], x[1], x[2], x[3], max(x[4], 0.0)
    ta, tb = _exp(la), _exp(lb)

    # repeated-lag re-fit with one shared time constant
    if abs(ta - tb) <= EQUAL_POLE_REFIT_RTOL * max(ta, tb):
        lshared = math.log(math.sqrt(ta * tb))

        def resid_eq(x):
            tau = math.exp(x[2])
            return _step_curve(x[0], x[1], (tau, tau), max(x[3], 0.0), t) - s

        def clamp_eq(v):
            v = v.copy()
            v[3] = max(v[3], 0.0)
            return v

        xe, sse_eq, it_eq, conv_eq = _lm(
            resid_eq, np.array([k0, tz, lshared, taud]),
            max_iter=max(max_iter - total_iters, 1), clamp=clamp_eq)
        total_iters += it_eq
        if sse_eq <= sse * (1.0 + 1e-12):
            k0, tz, taud = xe[0], xe[1], max(xe[3], 0.0)
            ta = tb = math.exp(xe[2])
            sse = sse_eq
            converged = conv_eq

    model = TransferFunction(k0, (tz,), (ta, tb), taud)
    return FitResult(model=model,
                     residual_norm=float(math.sqrt(sse / n)),
                     converged=bool(converged),
                     iterations=total_iters)


def _settle_horizon(tf: TransferFunction) -> float:
    return 10.0 * (sum(tf.poles) + sum(-z for z in tf.zeros if z < 0) + tf.delay)


def run_step_battery(plant: PlantMatrix, exp: StepExperiment) -> BatteryResult:
    """Open-loop step tests on every MV (or the one named in the experiment).

    Each step size is simulated separately at a fixed internal RK4 step that
    resolves the fastest lag in the column, recorded at the experiment's
    sampling rate, and normalized by the MV move.  The responsiveness table
    collects max |z - z_ss| / |z_ss| per (CV, MV) over all steps, the raw
    material for a responsiveness heat map.
    """
    q, p = plant.n_outputs, plant.n_inputs
    if exp.mv_name is None:
        mv_indices = list(range(p))
    else:
        mv_indices = [plant.mv_names.index(exp.mv_name)]
    result = BatteryResult(cv_names=list(plant.cv_names),
                           mv_names=[plant.mv_names[j] for j in mv_indices])
    responsiveness = np.zeros((q, p))

    for j in mv_indices:
        column = [(i, plant.entry(i, j)) for i in range(q)]
        column = [(i, tf) for i, tf in column if tf is not None]
        fastest = min((min(tf.poles) for _, tf in column if tf.poles),
                      default=None)

        if exp.sample_rate is None:
            interval = 36.0 if fastest is None else min(36.0, fastest / 5.0)
        else:
            interval = 3600.0 / exp.sample_rate
        if exp.tf is None:
            horizon = max((_settle_horizon(tf) for _, tf in column),
                          default=20.0 * interval)
            horizon = max(horizon, 20.0 * interval)
        else:
            horizon = exp.tf - exp.t0
        n_rec = int(math.ceil(horizon / interval)) + 1

        # the internal step must resolve the fastest lag and keep the
        # sample-rounding of each resolvable dead time below 1%
        dt_target = interval
        if fastest is not None:
            dt_target = min(dt_target, fastest / 10.0)
        for _, tf in column:
            if tf.delay >= interval / 10.0:
                dt_target = min(dt_target, tf.delay / 100.0)
        nsub = max(1, int(math.ceil(interval / dt_target)))
        dt = interval / nsub
        n_int = (n_rec - 1) * nsub + 1

        t_rec = np.arange(n_rec) * interval
        u_ss_j = plant.u_ss[j]
        mv_name = plant.mv_names[j]
        channels = {}

        realizations = []
        for i, tf in column:
            delay, ss = to_state_space(tf)
            m, nb = kernels.rk4_input_map(ss.A, ss.B, dt)
            nd = int(math.floor(delay / dt + 0.5))
            realizations.append((i, m, nb, ss.C.ravel(), float(ss.D[0, 0]), nd))

        for size in exp.step_sizes:
            du = size * u_ss_j
            u_int = np.full(n_int, du)
            u_int[:nsub] = 0.0  # move applied after the first recorded sample
            u_rec = np.full(n_rec, u_ss_j + du)
            u_rec[0] = u_ss_j
            channels[f"{mv_name}@{size:+g}"] = u_rec
            for i, m, nb, c, d, nd in realizations:
                y = kernels.lti_filter(m, nb, c, d, u_int, nd)
                z_rec = plant.z_ss[i] + y[::nsub]
                cv_name = plant.cv_names[i]
                norm = normalize_step(t_rec, z_rec, u_rec, t0=exp.t0)
                norm.cv_name, norm.mv_name, norm.step_size = cv_name, mv_name, size
                result.steps.setdefault((cv_name, mv_name), []).append(norm)
                channels[f"{cv_name}@{size:+g}"] = norm.s
                scale = max(abs(plant.z_ss[i]), 1e-30)
                responsiveness[i, j] = max(responsiveness[i, j],
                                           float(np.max(np.abs(y)) / scale))
            # CVs with no coupling to this MV are recorded as flat zero
            present = {i for i, tf in column}
            for i in range(q):
                if i not in present:
                    cv_name = plant.cv_names[i]
                    flat = NormalizedStep(t=t_rec - t_rec[1], s=np.zeros(n_rec),
                                          cv_name=cv_name, mv_name=mv_name,
                                          step_size=size)
                    result.steps.setdefault((cv_name, mv_name), []).append(flat)
                    channels[f"{cv_name}@{size:+g}"] = flat.s

        result.records[mv_name] = TimeSeries(t=t_rec, channels=channels)

    if exp.mv_name is not None:
        responsiveness = responsiveness[:, mv_indices]
    result.responsiveness = responsiveness
    return result
