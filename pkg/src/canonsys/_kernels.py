"""Hot numeric kernels.

Everything in this module is written in nopython-compatible style: plain
loops, scalars and preallocated ndarrays, no Python objects.  The functions
are compiled with numba on the numba backend and run unchanged as ordinary
Python on the fallback backend (see :mod:`canonsys._backend`).

State layout of the integrator: ``ncols`` column solutions of y' = zJHy are
stacked as ``[y1_0, y2_0, y1_1, y2_1, ...]``; when ``use_aux`` is set, one
extra component per column follows, carrying the regularised functional
S = sum_n z^n w_n(t)^T J y(t), whose derivative is -z^(Delta+1) w_Delta^T H y.
"""

import math

import numpy as np

from ._backend import jit_compile

# Hamiltonian entry piece kinds
KIND_POWER = 0  # c * |t - center| ** exponent
KIND_POLY = 1   # c0 + c1 t + ... + c7 t^7  (padded with zeros)

PARAM_WIDTH = 8

# integrator status codes
OK = 0
MAX_STEPS = 1
STEP_UNDERFLOW = 2
REJECT_LIMIT = 3

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = (3 / 40, 9 / 40)
_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_B = _A[6, :].copy()  # 5th order weights (FSAL)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output interpolant (Shampine); y(t0+x*h) = y0 + h * K^T P @ [x,x^2,x^3,x^4]
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
# PI step controller exponents for an order-5 error estimator
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_EPS = np.finfo(np.float64).eps


def _find_piece(breaks, t):
    n = breaks.shape[0] - 1
    if t <= breaks[0]:
        return 0
    if t >= breaks[n]:
        return n - 1
    lo = 0
    hi = n - 1
    while hi > lo:
        mid = (lo + hi + 1) // 2
        if breaks[mid] <= t:
            lo = mid
        else:
            hi = mid - 1
    return lo


_find_piece = jit_compile(_find_piece)


def _entry_eval(breaks, kinds, params, t):
    idx = _find_piece(breaks, t)
    if kinds[idx] == KIND_POWER:
        c = params[idx, 0]
        if c == 0.0:
            return 0.0
        d = abs(t - params[idx, 1])
        p = params[idx, 2]
        if d == 0.0 and p < 0.0:
            return math.inf
        return c * d ** p
    acc = 0.0
    for j in range(PARAM_WIDTH - 1, -1, -1):
        acc = acc * t + params[idx, j]
    return acc


_entry_eval = jit_compile(_entry_eval)


def _pcheb_eval(breaks, coefs, t):
    """Evaluate a piecewise Chebyshev series by Clenshaw recurrence."""
    idx = _find_piece(breaks, t)
    a = breaks[idx]
    b = breaks[idx + 1]
    x = 2.0 * (t - a) / (b - a) - 1.0
    if x < -1.0:
        x = -1.0
    elif x > 1.0:
        x = 1.0
    u1 = 0.0
    u2 = 0.0
    for j in range(coefs.shape[1] - 1, 0, -1):
        u0 = 2.0 * x * u1 - u2 + coefs[idx, j]
        u2 = u1
        u1 = u0
    return x * u1 - u2 + coefs[idx, 0]


_pcheb_eval = jit_compile(_pcheb_eval)


def _rhs(b1, k1, p1, b2, k2, p2, b3, k3, p3,
         wd_breaks, wd_c1, wd_c2, use_aux, zdelta,
         z, ncols, t, y, out):
    h1 = _entry_eval(b1, k1, p1, t)
    h2 = _entry_eval(b2, k2, p2, t)
    h3 = _entry_eval(b3, k3, p3, t)
    if use_aux:
        w1 = _pcheb_eval(wd_breaks, wd_c1, t)
        w2 = _pcheb_eval(wd_breaks, wd_c2, t)
    else:
        w1 = 0.0
        w2 = 0.0
    for c in range(ncols):
        y1 = y[2 * c]
        y2 = y[2 * c + 1]
        hy1 = h1 * y1 + h3 * y2
        hy2 = h3 * y1 + h2 * y2
        out[2 * c] = -z * hy2
        out[2 * c + 1] = z * hy1
        if use_aux:
            out[2 * ncols + c] = -zdelta * (w1 * hy1 + w2 * hy2)
    return h1 + h2 + abs(h3)  # finite iff all entries are


_rhs = jit_compile(_rhs)


def _scaled_rms(err, y0, y1, rtol, atol):
    dim = err.shape[0]
    acc = 0.0
    for i in range(dim):
        m0 = abs(y0[i])
        m1 = abs(y1[i])
        big = m0 if m0 > m1 else m1
        sc = atol + rtol * big
        r = abs(err[i]) / sc
        acc += r * r
    return math.sqrt(acc / dim)


_scaled_rms = jit_compile(_scaled_rms)


def _abs_norm(v):
    acc = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        acc += a * a
    return math.sqrt(acc / v.shape[0])


_abs_norm = jit_compile(_abs_norm)


def rk45_integrate(b1, k1, p1, b2, k2, p2, b3, k3, p3,
                   wd_breaks, wd_c1, wd_c2, use_aux, zdelta,
                   z, t0, t_end, y0, ncols,
                   rtol, atol, max_steps):
    """Adaptive Dormand-Prince 5(4) run from t0 to t_end (either direction).

    Returns (status, n_accepted, ts, ys, qs, t_reached); ts has the accepted
    grid (n+1 points), ys the states there, qs the per-step dense-output
    coefficients K^T P of shape (n, dim, 4).
    """
    dim = y0.shape[0]
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)

    ts = np.empty(max_steps + 1, np.float64)
    ys = np.empty((max_steps + 1, dim), np.complex128)
    qs = np.empty((max_steps, dim, 4), np.complex128)

    K = np.empty((7, dim), np.complex128)
    ytmp = np.empty(dim, np.complex128)
    f0 = np.empty(dim, np.complex128)

    t = t0
    y = y0.copy()
    trace = _rhs(b1, k1, p1, b2, k2, p2, b3, k3, p3,
                 wd_breaks, wd_c1, wd_c2, use_aux, zdelta,
                 z, ncols, t, y, f0)
    ts[0] = t
    ys[0] = y
    if not math.isfinite(trace):
        return REJECT_LIMIT, 0, ts, ys, qs, t
    if span == 0.0:
        return OK, 0, ts, ys, qs, t

    # initial step: standard two-probe heuristic
    d0 = _abs_norm(y)
    d1 = _abs_norm(f0)
    if d0 < 1e-5 or d1 < 1e-5:
        h_abs = 1e-6 * span
    else:
        h_abs = 0.01 * d0 / d1
    if h_abs > span:
        h_abs = span

    nacc = 0
    nrej = 0
    err_prev = -1.0
    status = MAX_STEPS
    for _ in range(max_steps * 4):
        if nacc >= max_steps:
            status = MAX_STEPS
            break
        if direction * (t_end - t) <= 0.0:
            status = OK
            break
        floor = 16.0 * _EPS * max(abs(t), abs(t_end))
        if h_abs < floor:
            status = STEP_UNDERFLOW
            break
        remaining = abs(t_end - t)
        if h_abs > remaining:
            h_abs = remaining
        h = direction * h_abs
        t_new = t + h
        if direction * (t_end - t_new) < 0.0:
            t_new = t_end
            h = t_new - t

        bad = False
        K[0] = f0
        for s in range(1, 7):
            for i in range(dim):
                acc = 0.0 + 0.0j
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            tr = _rhs(b1, k1, p1, b2, k2, p2, b3, k3, p3,
                      wd_breaks, wd_c1, wd_c2, use_aux, zdelta,
                      z, ncols, t + _C[s] * h, ytmp, K[s])
            if not math.isfinite(tr):
                bad = True
                break
        if not bad:
            # 5th-order solution sits in the last stage state (FSAL pair)
            y_new = ytmp.copy()
            for i in range(dim):
                acc = 0.0 + 0.0j
                for j in range(7):
                    acc += _E[j] * K[j, i]
                f0[i] = acc  # reuse as scratch for the error vector
            err = _scaled_rms(f0, y, y_new, rtol, atol) * h_abs
            if not math.isfinite(err):
                bad = True
        if bad:
            h_abs *= 0.5
            nrej += 1
            if nrej > 64:
                status = REJECT_LIMIT
                break
            for i in range(dim):
                f0[i] = K[0, i]  # K[0] still holds f(t, y)
            continue

        if err <= 1.0:
            for i in range(dim):
                for m in range(4):
                    acc = 0.0 + 0.0j
                    for j in range(7):
                        acc += K[j, i] * _P[j, m]
                    qs[nacc, i, m] = acc
            nacc += 1
            ts[nacc] = t_new
            ys[nacc] = y_new
            t = t_new
            y = y_new
            for i in range(dim):
                f0[i] = K[6, i]  # FSAL: last stage is f(t_new, y_new)
            if err == 0.0:
                factor = _MAX_FACTOR
            elif err_prev < 0.0:
                factor = _SAFETY * err ** -0.2
            else:
                factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
            if factor > _MAX_FACTOR:
                factor = _MAX_FACTOR
            elif factor < _MIN_FACTOR:
                factor = _MIN_FACTOR
            h_abs *= factor
            err_prev = err
            nrej = 0
        else:
            factor = _SAFETY * err ** -0.2
            if factor < _MIN_FACTOR:
                factor = _MIN_FACTOR
            h_abs *= factor
            nrej += 1
            if nrej > 64:
                status = REJECT_LIMIT
                break
            for i in range(dim):
                f0[i] = K[0, i]

    return status, nacc, ts, ys, qs, t


rk45_integrate = jit_compile(rk45_integrate)
