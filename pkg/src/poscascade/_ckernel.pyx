# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop kernel; arithmetic mirrors ``_pykernel.run_loop``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, pow, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF MAXN = 16

cdef enum:
    OK = 0
    NEGATIVE_STATE = 1
    XN_FLOOR = 2
    NON_FINITE = 3
    DELAY_DOMAIN = 4


cdef struct Ctx:
    int n
    double dt
    double* d
    double* R        # (n+1) x n
    double* coef     # n x n
    double* ref      # rows of n+1
    double* ubuf
    long kmax
    int sat_on
    double beta, ks, eta
    int delay_on
    double gamma, kd
    int ctrl_on
    double k, lam, alpha, tau_hat
    double en0


cdef inline double lookup(Ctx* c, double q, int right) nogil:
    cdef double s, f
    cdef long i
    if q < 0.0 or (q == 0.0 and not right):
        return 0.0
    s = q / c.dt
    i = <long>s
    if i >= c.kmax:
        return c.ubuf[c.kmax]
    f = s - i
    return c.ubuf[i] + f * (c.ubuf[i + 1] - c.ubuf[i])


cdef inline double sat(Ctx* c, double u) nogil:
    if c.sat_on:
        return c.beta / (1.0 + exp(-c.ks * (u - c.eta)))
    return u


cdef inline void derivs(Ctx* c, double* x, double* out) nogil:
    cdef int j, col
    cdef double acc
    for j in range(c.n):
        acc = 0.0
        for col in range(c.n):
            acc += c.R[j * c.n + col] * x[col]
        out[j] = acc


cdef int stage(Ctx* c, long m, double* x, int first, double* xd,
               double* dx1, int* comp, double* val) nogil:
    cdef int n = c.n
    cdef int i, j, gt
    cdef double t_s = m * 0.5 * c.dt
    cdef double* rr = c.ref + m * (n + 1)
    cdef double e1, en, raw, u_s, xn, tau, ud, gu, eu
    derivs(c, x, dx1)
    e1 = rr[0] - dx1[0]
    en = 0.0
    for j in range(n):
        en += c.coef[(n - 1) * n + j] * (rr[j] - dx1[j])
    if c.ctrl_on:
        gt = 1 if e1 >= 0.0 else 0
        raw = gt * (c.k * (en - c.en0) + x[n])
        u_s = raw if raw > 0.0 else 0.0
    else:
        u_s = 0.0
    if c.delay_on:
        xn = x[n - 1]
        if not xn > 0.0:
            comp[0] = n - 1
            val[0] = xn
            return DELAY_DOMAIN
        tau = c.gamma * pow(xn, -c.kd)
        ud = lookup(c, t_s - tau, first)
    else:
        ud = u_s
    gu = sat(c, ud)
    for i in range(n - 1):
        xd[i] = x[i + 1] - c.d[i] * x[i]
    xd[n - 1] = -c.d[n - 1] * x[n - 1] + gu
    xd[n] = 0.0
    if c.ctrl_on:
        eu = lookup(c, t_s - c.tau_hat, first) - u_s
        xd[n] = c.k * (c.lam * en + c.alpha * eu)
    return OK


def run_loop(int n, d, R, coef, ref, x0, double dt, long nsteps,
             bint sat_on, double beta, double ks, double eta,
             bint delay_on, double gamma, double kd, double phi1,
             bint ctrl_on, double k, double lam, double alpha, double tau_hat,
             double pos_tol):
    if n < 1 or n > MAXN:
        raise ValueError(f"compiled kernel supports 1 <= n <= {MAXN}")
    cdef long N = nsteps
    cdef double[::1] d_v = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[:, ::1] R_v = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[:, ::1] C_v = np.ascontiguousarray(coef, dtype=np.float64)
    cdef double[:, ::1] ref_v = np.ascontiguousarray(ref, dtype=np.float64)
    cdef double[::1] ubuf = np.zeros(N + 1)

    X_a = np.zeros((N + 1, n))
    E_a = np.zeros((N + 1, n))
    nu_a = np.zeros(N + 1)
    raw_a = np.zeros(N + 1)
    u_a = np.zeros(N + 1)
    gu_a = np.zeros(N + 1)
    tau_a = np.zeros(N + 1)
    eu_a = np.zeros(N + 1)
    ea_a = np.zeros(N + 1)
    gate_a = np.zeros(N + 1, dtype=np.int8)
    clamp_a = np.zeros(N + 1, dtype=np.int8)
    cdef double[:, ::1] X = X_a
    cdef double[:, ::1] E = E_a
    cdef double[::1] NU = nu_a, RAW = raw_a, U = u_a, GU = gu_a, TAU = tau_a
    cdef double[::1] EU = eu_a, EA = ea_a
    cdef signed char[::1] GATE = gate_a, CLAMP = clamp_a

    cdef Ctx c
    c.n = n
    c.dt = dt
    c.d = &d_v[0]
    c.R = &R_v[0, 0]
    c.coef = &C_v[0, 0]
    c.ref = &ref_v[0, 0]
    c.ubuf = &ubuf[0]
    c.kmax = 0
    c.sat_on = sat_on
    c.beta = beta
    c.ks = ks
    c.eta = eta
    c.delay_on = delay_on
    c.gamma = gamma
    c.kd = kd
    c.ctrl_on = ctrl_on
    c.k = k
    c.lam = lam
    c.alpha = alpha
    c.tau_hat = tau_hat
    c.en0 = 0.0

    cdef double y[MAXN + 1]
    cdef double ys[MAXN + 1]
    cdef double yn[MAXN + 1]
    cdef double k1[MAXN + 1]
    cdef double k2[MAXN + 1]
    cdef double k3[MAXN + 1]
    cdef double k4[MAXN + 1]
    cdef double dx1[MAXN + 1]
    cdef double ev[MAXN]
    cdef int i, j, gt, code = OK, comp = -1
    cdef long step, idx, m, bad_step = -1
    cdef double val = 0.0, h2 = 0.5 * dt, acc, e1, en, raw, u, t, tau, ud, gu, eu
    cdef double top, en_dot, de, v
    cdef double* rr
    cdef long state_clamps = 0

    for i in range(n):
        y[i] = x0[i]
    y[n] = 0.0

    with nogil:
        idx = 0
        while True:
            # commit: errors and control at t_idx
            m = 2 * idx
            t = m * 0.5 * dt
            rr = c.ref + m * (n + 1)
            derivs(&c, y, dx1)
            for i in range(n):
                acc = 0.0
                for j in range(i + 1):
                    acc += c.coef[i * n + j] * (rr[j] - dx1[j])
                ev[i] = acc
            e1 = ev[0]
            en = ev[n - 1]
            if idx == 0:
                c.en0 = en
            if ctrl_on:
                gt = 1 if e1 >= 0.0 else 0
                raw = gt * (k * (en - c.en0) + y[n])
                u = raw if raw > 0.0 else 0.0
            else:
                gt = 0
                raw = 0.0
                u = 0.0
            c.ubuf[idx] = u
            c.kmax = idx
            # record
            if delay_on:
                tau = gamma * pow(y[n - 1], -kd)
                ud = lookup(&c, t - tau, 0)
            else:
                tau = 0.0
                ud = u
            gu = sat(&c, ud)
            eu = lookup(&c, t - tau_hat, 0) - u
            top = 0.0
            for j in range(n):
                top += c.R[n * n + j] * y[j]
            top = top + gu
            en_dot = 0.0
            for j in range(n):
                if j + 1 < n:
                    de = rr[j + 1] - dx1[j + 1]
                else:
                    de = rr[j + 1] - top
                en_dot += c.coef[(n - 1) * n + j] * de
            for i in range(n):
                X[idx, i] = y[i]
                E[idx, i] = ev[i]
            NU[idx] = y[n]
            RAW[idx] = raw
            U[idx] = u
            GU[idx] = gu
            TAU[idx] = tau
            EU[idx] = eu
            EA[idx] = en_dot + lam * en + alpha * eu
            GATE[idx] = gt
            CLAMP[idx] = 1 if (gt == 1 and raw < 0.0) else 0

            if idx == N:
                break
            step = idx
            # RK4 stages
            code = stage(&c, 2 * step, y, 1, k1, dx1, &comp, &val)
            if code != OK:
                bad_step = step
                break
            for i in range(n + 1):
                ys[i] = y[i] + h2 * k1[i]
            code = stage(&c, 2 * step + 1, ys, 0, k2, dx1, &comp, &val)
            if code != OK:
                bad_step = step
                break
            for i in range(n + 1):
                ys[i] = y[i] + h2 * k2[i]
            code = stage(&c, 2 * step + 1, ys, 0, k3, dx1, &comp, &val)
            if code != OK:
                bad_step = step
                break
            for i in range(n + 1):
                ys[i] = y[i] + dt * k3[i]
            code = stage(&c, 2 * step + 2, ys, 0, k4, dx1, &comp, &val)
            if code != OK:
                bad_step = step
                break
            for i in range(n + 1):
                yn[i] = y[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
            for i in range(n + 1):
                v = yn[i]
                if not isfinite(v):
                    code = NON_FINITE
                    comp = i
                    val = v
                    break
                if i < n and v < 0.0:
                    if v >= -pos_tol:
                        yn[i] = 0.0
                        state_clamps += 1
                    else:
                        code = NEGATIVE_STATE
                        comp = i
                        val = v
                        break
            if code == OK and delay_on and not yn[n - 1] > phi1:
                code = XN_FLOOR
                comp = n - 1
                val = yn[n - 1]
            if code != OK:
                bad_step = step + 1
                break
            for i in range(n + 1):
                y[i] = yn[i]
            idx += 1

    out = {"x": X_a, "e": E_a, "nu": nu_a, "u_raw": raw_a, "u": u_a, "g_u_tau": gu_a,
           "tau": tau_a, "e_u": eu_a, "e_a": ea_a, "gate": gate_a, "clamp": clamp_a}
    if code != OK:
        return out, (code, bad_step, comp, val), state_clamps
    return out, (OK, -1, -1, 0.0), state_clamps
