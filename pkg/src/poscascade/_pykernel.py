"""Pure-Python closed-loop integration kernel.

Mirrors ``_ckernel.pyx`` operation for operation so both backends produce the
same floating-point results. Keep the two in sync.
"""

from math import exp, isfinite

import numpy as np

OK = 0
NEGATIVE_STATE = 1
XN_FLOOR = 2
NON_FINITE = 3
DELAY_DOMAIN = 4


class _Abort(Exception):
    def __init__(self, code, comp, value):
        self.code, self.comp, self.value = code, comp, value


def run_loop(n, d, R, coef, ref, x0, dt, nsteps,
             sat_on, beta, ks, eta,
             delay_on, gamma, kd, phi1,
             ctrl_on, k, lam, alpha, tau_hat, pos_tol,
             chain=None, rhs_extra=None):
    """Fixed-step RK4 over (x, nu) with the input read from a delayed history.

    ``ref`` holds reference derivatives 0..n on the half-step grid
    ``m * dt / 2``. ``chain(x, j)`` replaces the linear ``R[j] @ x`` rows when
    the plant has coupling maps; ``rhs_extra(x)`` then returns the extra terms
    of each state derivative.
    """
    d = [float(v) for v in d]
    R = [[float(v) for v in row] for row in R]
    cn = [float(v) for v in coef[n - 1]]
    coef = [[float(v) for v in row] for row in coef]
    ref = np.asarray(ref, dtype=float).tolist()
    N = int(nsteps)

    ubuf = [0.0] * (N + 1)
    kmax = 0

    X = np.zeros((N + 1, n))
    E = np.zeros((N + 1, n))
    out = {name: np.zeros(N + 1) for name in
           ("nu", "u_raw", "u", "g_u_tau", "tau", "e_u", "e_a")}
    gate_arr = np.zeros(N + 1, dtype=np.int8)
    clamp_arr = np.zeros(N + 1, dtype=np.int8)

    def lookup(q, right):
        if q < 0.0 or (q == 0.0 and not right):
            return 0.0
        s = q / dt
        i = int(s)
        if i >= kmax:
            return ubuf[kmax]
        f = s - i
        return ubuf[i] + f * (ubuf[i + 1] - ubuf[i])

    def sat(u):
        if sat_on:
            return beta / (1.0 + exp(-ks * (u - eta)))
        return u

    def derivs(x, upto):
        if chain is not None:
            xa = np.asarray(x[:n])
            return [chain(xa, j) for j in range(upto)]
        res = []
        for j in range(upto):
            r = R[j]
            acc = 0.0
            for c in range(n):
                acc += r[c] * x[c]
            res.append(acc)
        return res

    def stage(m, x, nu, first):
        t_s = m * 0.5 * dt
        rr = ref[m]
        dx1 = derivs(x, n)
        e1 = rr[0] - dx1[0]
        en = 0.0
        for j in range(n):
            en += cn[j] * (rr[j] - dx1[j])
        if ctrl_on:
            gt = 1 if e1 >= 0.0 else 0
            raw = gt * (k * (en - en0) + nu)
            u_s = raw if raw > 0.0 else 0.0
        else:
            u_s = 0.0
        if delay_on:
            xn = x[n - 1]
            if not xn > 0.0:
                raise _Abort(DELAY_DOMAIN, n - 1, xn)
            tau = gamma * xn ** (-kd)
            ud = lookup(t_s - tau, first)
        else:
            ud = u_s
        gu = sat(ud)
        xd = [0.0] * (n + 1)
        for i in range(n - 1):
            xd[i] = x[i + 1] - d[i] * x[i]
        xd[n - 1] = -d[n - 1] * x[n - 1] + gu
        if rhs_extra is not None:
            extra = rhs_extra(np.asarray(x[:n]))
            for i in range(n):
                xd[i] += extra[i]
        if ctrl_on:
            eu = lookup(t_s - tau_hat, first) - u_s
            xd[n] = k * (lam * en + alpha * eu)
        return xd

    def commit(idx, x, nu):
        m = 2 * idx
        t = m * 0.5 * dt
        rr = ref[m]
        dx1 = derivs(x, n)
        ev = [0.0] * n
        for i in range(n):
            row = coef[i]
            acc = 0.0
            for j in range(i + 1):
                acc += row[j] * (rr[j] - dx1[j])
            ev[i] = acc
        e1 = ev[0]
        en = ev[n - 1]
        return e1, en, ev, rr, dx1, t

    def record(idx, x, nu, e1, en, ev, rr, dx1, t, gt, raw, u):
        if delay_on:
            tau = gamma * x[n - 1] ** (-kd)
            ud = lookup(t - tau, False)
        else:
            tau = 0.0
            ud = u
        gu = sat(ud)
        eu = lookup(t - tau_hat, False) - u
        if chain is not None:
            top = chain(np.asarray(x[:n]), n, gu)
        else:
            r = R[n]
            top = 0.0
            for c in range(n):
                top += r[c] * x[c]
            top = top + gu
        en_dot = 0.0
        for j in range(n):
            de = rr[j + 1] - (dx1[j + 1] if j + 1 < n else top)
            en_dot += cn[j] * de
        ea = en_dot + lam * en + alpha * eu
        X[idx] = x[:n]
        E[idx] = ev
        out["nu"][idx] = nu
        out["u_raw"][idx] = raw
        out["u"][idx] = u
        out["g_u_tau"][idx] = gu
        out["tau"][idx] = tau
        out["e_u"][idx] = eu
        out["e_a"][idx] = ea
        gate_arr[idx] = gt
        clamp_arr[idx] = 1 if (gt == 1 and raw < 0.0) else 0

    def control(e1, en, nu):
        if not ctrl_on:
            return 0, 0.0, 0.0
        gt = 1 if e1 >= 0.0 else 0
        raw = gt * (k * (en - en0) + nu)
        return gt, raw, (raw if raw > 0.0 else 0.0)

    y = [float(v) for v in x0] + [0.0]
    en0 = 0.0
    e1, en, ev, rr, dx1, t = commit(0, y, 0.0)
    en0 = en
    gt, raw, u = control(e1, en, 0.0)
    ubuf[0] = u
    record(0, y, 0.0, e1, en, ev, rr, dx1, t, gt, raw, u)

    status = (OK, -1, -1, 0.0)
    state_clamps = 0
    h2 = 0.5 * dt
    for step in range(N):
        try:
            k1 = stage(2 * step, y, y[n], True)
            ys = [y[i] + h2 * k1[i] for i in range(n + 1)]
            k2 = stage(2 * step + 1, ys, ys[n], False)
            ys = [y[i] + h2 * k2[i] for i in range(n + 1)]
            k3 = stage(2 * step + 1, ys, ys[n], False)
            ys = [y[i] + dt * k3[i] for i in range(n + 1)]
            k4 = stage(2 * step + 2, ys, ys[n], False)
        except _Abort as ab:
            status = (ab.code, step, ab.comp, ab.value)
            break
        yn = [y[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
              for i in range(n + 1)]
        bad = None
        for i in range(n + 1):
            v = yn[i]
            if not isfinite(v):
                bad = (NON_FINITE, step + 1, i, v)
                break
            if i < n and v < 0.0:
                if v >= -pos_tol:
                    yn[i] = 0.0
                    state_clamps += 1
                else:
                    bad = (NEGATIVE_STATE, step + 1, i, v)
                    break
        if bad is None and delay_on and not yn[n - 1] > phi1:
            bad = (XN_FLOOR, step + 1, n - 1, yn[n - 1])
        if bad is not None:
            status = bad
            break
        y = yn
        e1, en, ev, rr, dx1, t = commit(step + 1, y, y[n])
        gt, raw, u = control(e1, en, y[n])
        ubuf[step + 1] = u
        kmax = step + 1
        record(step + 1, y, y[n], e1, en, ev, rr, dx1, t, gt, raw, u)

    out.update(x=X, e=E, gate=gate_arr, clamp=clamp_arr)
    return out, status, state_clamps
