"""Pure-Python twin of the compiled simulation kernels.

Slow-path reference implementation; semantics match looptune._fastloop.
Dead time is handled at sample resolution: an index shift into the input
history for the open-loop filter, a circular buffer per MV in the closed
loop.
"""

from __future__ import annotations

import numpy as np


def lti_filter(m, nb, c, d, u, nd):
    n = nb.size
    n_steps = u.size
    y = np.empty(n_steps)
    x = np.zeros(n)
    for k in range(n_steps):
        ud = u[k - nd] if k >= nd else 0.0
        y[k] = c @ x + d * ud
        x = m @ x + nb * ud
    return y


def closed_loop(erow, ecol, edim, end, moff, voff, mflat, nbflat, cflat,
                dvals, lcv, lmv, kp, ki, umin, umax, mv_loop,
                u_ss, z_ss, sp, u_open, dt, n_steps, hist_len):
    ne = erow.size
    nl = lcv.size
    q = z_ss.size
    p = u_ss.size

    mats = []
    for e in range(ne):
        n = edim[e]
        mats.append((
            mflat[moff[e]:moff[e] + n * n].reshape(n, n),
            nbflat[voff[e]:voff[e] + n],
            cflat[voff[e]:voff[e] + n],
        ))
    states = [np.zeros(edim[e]) for e in range(ne)]
    hist = np.zeros((p, hist_len))

    Z = np.empty((n_steps, q))
    U = np.empty((n_steps, p))
    INT = np.empty((n_steps, nl))
    integ = np.zeros(nl)
    u = np.empty(p)

    for k in range(n_steps):
        z = z_ss.copy()
        for e in range(ne):
            _, _, cv = mats[e]
            ye = cv @ states[e]
            if dvals[e] != 0.0:
                # Feedthrough with zero delay would close an algebraic loop
                # through the controller, so it sees the previous sample.
                kf = k - max(end[e], 1)
                if kf >= 0:
                    ye += dvals[e] * hist[ecol[e], kf % hist_len]
            z[erow[e]] += ye

        for l in range(nl):
            err = sp[k, lcv[l]] - z[lcv[l]]
            integ[l] += err * dt
            raw = u_ss[lmv[l]] + kp[l] * err + ki[l] * integ[l]
            u[lmv[l]] = min(max(raw, umin[l]), umax[l])
        for j in range(p):
            if mv_loop[j] < 0:
                u[j] = u_open[k, j]

        Z[k] = z
        U[k] = u
        INT[k] = integ

        for j in range(p):
            hist[j, k % hist_len] = u[j] - u_ss[j]
        for e in range(ne):
            mm, nbv, _ = mats[e]
            kf = k - end[e]
            ud = hist[ecol[e], kf % hist_len] if kf >= 0 else 0.0
            states[e] = mm @ states[e] + nbv * ud

    return Z, U, INT
