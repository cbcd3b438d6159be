"""Fixed-step simulation kernels with a compiled core and a pure-Python twin.

The hot loops (open-loop sampled response and the closed-loop co-simulation)
live in the Cython extension ``looptune._fastloop``.  When the extension is
unavailable, or when ``LOOPTUNE_BACKEND=py`` is set, the pure-Python module
``looptune._pyloop`` provides the same functions with identical semantics.

Both backends consume the per-step transition maps produced by
``rk4_transition``: for x' = A x + B u with u held constant over one step of
length dt (zero-order hold), classical RK4 collapses to

    x+ = M x + S B u dt,   M = sum_{i<=4} (A dt)^i / i!,
                           S = sum_{i<=3} (A dt)^i / (i+1)!

so the per-step work is a small matrix-vector product.  This is exactly the
four-stage RK4 update, precomputed once per system.
"""

from __future__ import annotations

import os

import numpy as np

_requested = os.environ.get("LOOPTUNE_BACKEND", "auto").lower()
if _requested not in ("auto", "c", "py"):
    raise ValueError("LOOPTUNE_BACKEND must be one of: auto, c, py")

if _requested in ("auto", "c"):
    try:
        from . import _fastloop as _impl
        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        from . import _pyloop as _impl
        BACKEND = "py"
else:
    from . import _pyloop as _impl
    BACKEND = "py"


def rk4_transition(A: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-step state map (M, N) of classical RK4 under zero-order hold.

    Advancing is  x+ = M x + N u  with u the held input value; N already
    contains the B column and the dt factor.  A may be 0x0 (static system).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 0))
    z = A * dt
    eye = np.eye(n)
    z2 = z @ z
    z3 = z2 @ z
    m = eye + z + z2 / 2.0 + z3 / 6.0 + (z3 @ z) / 24.0
    s = eye + z / 2.0 + z2 / 6.0 + z3 / 24.0
    return m, s * dt


def rk4_input_map(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Convenience wrapper returning (M, N @ B) with N from rk4_transition."""
    m, s_dt = rk4_transition(A, dt)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if m.shape[0] == 0:
        return m, np.zeros(0)
    return m, (s_dt @ B).ravel()


def lti_filter(m, nb, c, d, u, nd):
    """Sampled output of one SISO realization driven by input samples ``u``.

    ``nd`` is the dead time in whole samples; input history before the start
    is zero.  y[k] = c x[k] + d u[k - nd], then the state advances with the
    same delayed, held input.
    """
    m = np.ascontiguousarray(m, dtype=float)
    nb = np.ascontiguousarray(nb, dtype=float).ravel()
    c = np.ascontiguousarray(c, dtype=float).ravel()
    u = np.ascontiguousarray(u, dtype=float).ravel()
    if nd < 0:
        raise ValueError("delay must be a nonnegative sample count")
    return _impl.lti_filter(m, nb, c, float(d), u, int(nd))


def closed_loop(entries, loops, u_ss, z_ss, sp, u_open, dt, n_steps):
    """Co-simulate a matrix of SISO realizations under decentralized PI laws.

    entries: list of (cv_index, mv_index, M, NB, C, d, nd) realizations in
        deviation coordinates around (u_ss, z_ss).
    loops: list of (cv_index, mv_index, kp, ki, u_min, u_max).
    sp: (n_steps, q) absolute setpoint samples; u_open: (n_steps, p) absolute
        values applied to MVs that are not claimed by a loop.

    Returns (Z, U, I): absolute CV and MV traces plus the per-loop error
    integrals.  The integrator always accumulates (no anti-windup) while the
    MV output is clamped to its limits.
    """
    u_ss = np.ascontiguousarray(u_ss, dtype=float).ravel()
    z_ss = np.ascontiguousarray(z_ss, dtype=float).ravel()
    sp = np.ascontiguousarray(sp, dtype=float)
    u_open = np.ascontiguousarray(u_open, dtype=float)
    q, p = z_ss.size, u_ss.size
    if sp.shape != (n_steps, q) or u_open.shape != (n_steps, p):
        raise ValueError("schedule arrays must be (n_steps, q) and (n_steps, p)")

    erow, ecol, edim, end = [], [], [], []
    moff, voff = [], []
    mflat, nbflat, cflat, dvals = [], [], [], []
    mpos = vpos = 0
    for (i, j, m, nb, c, d, nd) in entries:
        m = np.ascontiguousarray(m, dtype=float)
        nb = np.ascontiguousarray(nb, dtype=float).ravel()
        c = np.ascontiguousarray(c, dtype=float).ravel()
        n = nb.size
        if m.shape != (n, n) or c.size != n:
            raise ValueError("entry realization shapes are inconsistent")
        erow.append(i)
        ecol.append(j)
        edim.append(n)
        end.append(int(nd))
        moff.append(mpos)
        voff.append(vpos)
        mflat.extend(m.ravel())
        nbflat.extend(nb)
        cflat.extend(c)
        dvals.append(float(d))
        mpos += n * n
        vpos += n

    mv_loop = np.full(p, -1, dtype=np.int64)
    lcv, lmv, kp, ki, umin, umax = [], [], [], [], [], []
    for idx, (i, j, kpv, kiv, lo, hi) in enumerate(loops):
        lcv.append(i)
        lmv.append(j)
        kp.append(float(kpv))
        ki.append(float(kiv))
        umin.append(float(lo))
        umax.append(float(hi))
        mv_loop[j] = idx

    hist_len = max([ndv for ndv in end], default=0) + 1

    def arr(x, dtype=float):
        return np.ascontiguousarray(np.asarray(x, dtype=dtype))

    return _impl.closed_loop(
        arr(erow, np.int64), arr(ecol, np.int64), arr(edim, np.int64),
        arr(end, np.int64), arr(moff, np.int64), arr(voff, np.int64),
        arr(mflat), arr(nbflat), arr(cflat), arr(dvals),
        arr(lcv, np.int64), arr(lmv, np.int64),
        arr(kp), arr(ki), arr(umin), arr(umax), mv_loop,
        u_ss, z_ss, sp, u_open, float(dt), int(n_steps), int(hist_len))
