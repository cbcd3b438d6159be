# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-step simulation kernels (see looptune._pyloop for the
reference semantics)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def lti_filter(double[:, ::1] m, double[::1] nb, double[::1] c, double d,
               double[::1] u, Py_ssize_t nd):
    cdef Py_ssize_t n_steps = u.shape[0]
    cdef Py_ssize_t n = nb.shape[0]
    out = np.empty(n_steps)
    xa = np.zeros(n)
    xb = np.zeros(n)
    cdef double[::1] y = out
    cdef double[::1] x = xa
    cdef double[::1] xn = xb
    cdef double[::1] tmp
    cdef Py_ssize_t k, i, jj
    cdef double ud, acc
    for k in range(n_steps):
        ud = u[k - nd] if k >= nd else 0.0
        acc = d * ud
        for i in range(n):
            acc += c[i] * x[i]
        y[k] = acc
        for i in range(n):
            acc = nb[i] * ud
            for jj in range(n):
                acc += m[i, jj] * x[jj]
            xn[i] = acc
        tmp = x
        x = xn
        xn = tmp
    return out


def closed_loop(long long[::1] erow, long long[::1] ecol, long long[::1] edim,
                long long[::1] end, long long[::1] moff, long long[::1] voff,
                double[::1] mflat, double[::1] nbflat, double[::1] cflat,
                double[::1] dvals, long long[::1] lcv, long long[::1] lmv,
                double[::1] kp, double[::1] ki, double[::1] umin,
                double[::1] umax, long long[::1] mv_loop,
                double[::1] u_ss, double[::1] z_ss,
                double[:, ::1] sp, double[:, ::1] u_open,
                double dt, Py_ssize_t n_steps, Py_ssize_t hist_len):
    cdef Py_ssize_t ne = erow.shape[0]
    cdef Py_ssize_t nl = lcv.shape[0]
    cdef Py_ssize_t q = z_ss.shape[0]
    cdef Py_ssize_t p = u_ss.shape[0]

    cdef Py_ssize_t nx_total = 0
    cdef Py_ssize_t e, i, jj, k, l, j, n, mo, vo, kf
    for e in range(ne):
        nx_total += edim[e]

    x_arr = np.zeros(nx_total)
    xn_arr = np.zeros(nx_total)
    hist_arr = np.zeros((p, hist_len))
    z_arr = np.empty(q)
    u_arr = np.empty(p)
    integ_arr = np.zeros(nl)
    xoff_arr = np.zeros(ne, dtype=np.int64)

    Z_arr = np.empty((n_steps, q))
    U_arr = np.empty((n_steps, p))
    INT_arr = np.empty((n_steps, nl))

    cdef double[::1] x = x_arr
    cdef double[::1] xn = xn_arr
    cdef double[:, ::1] hist = hist_arr
    cdef double[::1] z = z_arr
    cdef double[::1] u = u_arr
    cdef double[::1] integ = integ_arr
    cdef long long[::1] xoff = xoff_arr
    cdef double[:, ::1] Z = Z_arr
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] INT = INT_arr

    cdef Py_ssize_t pos = 0
    for e in range(ne):
        xoff[e] = pos
        pos += edim[e]

    cdef double acc, err, raw, ud
    for k in range(n_steps):
        for i in range(q):
            z[i] = z_ss[i]
        for e in range(ne):
            n = edim[e]
            vo = voff[e]
            acc = 0.0
            for i in range(n):
                acc += cflat[vo + i] * x[xoff[e] + i]
            if dvals[e] != 0.0:
                kf = k - (end[e] if end[e] > 1 else 1)
                if kf >= 0:
                    acc += dvals[e] * hist[ecol[e], kf % hist_len]
            z[erow[e]] += acc

        for l in range(nl):
            err = sp[k, lcv[l]] - z[lcv[l]]
            integ[l] += err * dt
            raw = u_ss[lmv[l]] + kp[l] * err + ki[l] * integ[l]
            if raw < umin[l]:
                raw = umin[l]
            elif raw > umax[l]:
                raw = umax[l]
            u[lmv[l]] = raw
        for j in range(p):
            if mv_loop[j] < 0:
                u[j] = u_open[k, j]

        for i in range(q):
            Z[k, i] = z[i]
        for j in range(p):
            U[k, j] = u[j]
        for l in range(nl):
            INT[k, l] = integ[l]

        for j in range(p):
            hist[j, k % hist_len] = u[j] - u_ss[j]
        for e in range(ne):
            n = edim[e]
            mo = moff[e]
            vo = voff[e]
            kf = k - end[e]
            ud = hist[ecol[e], kf % hist_len] if kf >= 0 else 0.0
            for i in range(n):
                acc = nbflat[vo + i] * ud
                for jj in range(n):
                    acc += mflat[mo + i * n + jj] * x[xoff[e] + jj]
                xn[xoff[e] + i] = acc
            for i in range(n):
                x[xoff[e] + i] = xn[xoff[e] + i]

    return Z_arr, U_arr, INT_arr
