# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-loop kernels.

Same signatures and return values as ``lprnn._pykernels``. Matrix products go
through the BLAS that scipy ships (``scipy.linalg.cython_blas``); elementwise
work runs in plain C loops.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, exp, fabs, floor, INFINITY
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

DEF ACT_IDENTITY = 0
DEF ACT_TANH = 1
DEF ACT_RELU = 2
DEF ACT_SIGMOID = 3


cdef inline double _sigmoid(double z) nogil:
    # exp is markedly cheaper than tanh in libm; exp overflow still yields 0
    return 1.0 / (1.0 + exp(-z))


cdef inline double _act(double z, int code) nogil:
    if code == ACT_TANH:
        return tanh(z)
    if code == ACT_RELU:
        return z if z > 0.0 else 0.0
    if code == ACT_SIGMOID:
        return _sigmoid(z)
    return z


cdef inline double _act_grad(double out, int code) nogil:
    if code == ACT_TANH:
        return 1.0 - out * out
    if code == ACT_RELU:
        return 1.0 if out > 0.0 else 0.0
    if code == ACT_SIGMOID:
        return out * (1.0 - out)
    return 1.0


cdef void _gemm(char ta, char tb, int m, int n, int k, double alpha,
                double* a, int lda, double* b, int ldb, double beta,
                double* c, int ldc) nogil:
    # row-major C = alpha * op(A) op(B) + beta * C via column-major dgemm on the transposes
    dgemm(&tb, &ta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


def lowpass(const double[:, ::1] x, const double[::1] alpha, const double[::1] y0):
    cdef Py_ssize_t steps = x.shape[0], n = x.shape[1], t, i
    out = np.empty((steps, n))
    cdef double[:, ::1] y = out
    cdef double prev
    for i in range(n):
        prev = y0[i]
        for t in range(steps):
            prev = alpha[i] * prev + (1.0 - alpha[i]) * x[t, i]
            y[t, i] = prev
    return out


def rnn_forward(const double[:, :, ::1] x, const double[:, ::1] w_in, const double[:, ::1] w_rec,
                const double[::1] b, const double[::1] alpha, const double[:, ::1] y0, int act):
    cdef int steps = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef int hidden = w_rec.shape[0]
    cdef int t, j, i
    y_arr = np.empty((steps + 1, batch, hidden))
    s_arr = np.empty((steps, batch, hidden))
    z_arr = np.empty((steps, batch, hidden))
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, :, ::1] s = s_arr
    cdef double[:, :, ::1] z = z_arr
    cdef double zv
    y[0, :, :] = y0
    for t in range(steps):
        for j in range(batch):
            for i in range(hidden):
                z[t, j, i] = b[i]
    with nogil:
        # input drive for every step at once
        if steps > 0:
            _gemm(b'N', b'T', steps * batch, hidden, n_in, 1.0, &x[0, 0, 0], n_in,
                  &w_in[0, 0], n_in, 1.0, &z[0, 0, 0], hidden)
        for t in range(steps):
            _gemm(b'N', b'T', batch, hidden, hidden, 1.0, &y[t, 0, 0], hidden,
                  &w_rec[0, 0], hidden, 1.0, &z[t, 0, 0], hidden)
            for j in range(batch):
                for i in range(hidden):
                    zv = _act(z[t, j, i], act)
                    s[t, j, i] = zv
                    y[t + 1, j, i] = alpha[i] * y[t, j, i] + (1.0 - alpha[i]) * zv
    return y_arr, s_arr


def rnn_backward(const double[:, :, ::1] x, const double[:, :, ::1] y, const double[:, :, ::1] s,
                 const double[:, ::1] w_in, const double[:, ::1] w_rec, const double[::1] alpha, int act,
                 const double[:, :, ::1] dy):
    cdef int steps = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef int hidden = w_rec.shape[0]
    cdef int t, j, i
    gz_arr = np.empty((steps, batch, hidden))
    carry_arr = np.zeros((batch, hidden))
    gy_arr = np.empty((batch, hidden))
    dalpha_arr = np.zeros(hidden)
    dw_in_arr = np.zeros((hidden, n_in))
    dw_rec_arr = np.zeros((hidden, hidden))
    dx_arr = np.zeros((steps, batch, n_in))
    cdef double[:, :, ::1] gz = gz_arr
    cdef double[:, ::1] carry = carry_arr
    cdef double[:, ::1] gy = gy_arr
    cdef double[::1] dalpha = dalpha_arr
    cdef double[:, ::1] dw_in = dw_in_arr
    cdef double[:, ::1] dw_rec = dw_rec_arr
    cdef double[:, :, ::1] dx = dx_arr
    cdef double g
    with nogil:
        for t in range(steps - 1, -1, -1):
            for j in range(batch):
                for i in range(hidden):
                    g = dy[t, j, i] + carry[j, i]
                    gy[j, i] = g
                    gz[t, j, i] = g * (1.0 - alpha[i]) * _act_grad(s[t, j, i], act)
                    dalpha[i] += g * (y[t, j, i] - s[t, j, i])
                    carry[j, i] = g * alpha[i]
            _gemm(b'N', b'N', batch, hidden, hidden, 1.0, &gz[t, 0, 0], hidden,
                  &w_rec[0, 0], hidden, 1.0, &carry[0, 0], hidden)
        if steps > 0:
            _gemm(b'T', b'N', hidden, n_in, steps * batch, 1.0, &gz[0, 0, 0], hidden,
                  &x[0, 0, 0], n_in, 0.0, &dw_in[0, 0], n_in)
            _gemm(b'T', b'N', hidden, hidden, steps * batch, 1.0, &gz[0, 0, 0], hidden,
                  &y[0, 0, 0], hidden, 0.0, &dw_rec[0, 0], hidden)
            _gemm(b'N', b'N', steps * batch, n_in, hidden, 1.0, &gz[0, 0, 0], hidden,
                  &w_in[0, 0], n_in, 0.0, &dx[0, 0, 0], n_in)
    db_arr = gz_arr.reshape(steps * batch, hidden).sum(axis=0)
    return dw_in_arr, dw_rec_arr, db_arr, dalpha_arr, dx_arr, carry_arr


def lstm_forward(const double[:, :, ::1] x, const double[:, ::1] wx, const double[:, ::1] wh, const double[::1] b,
                 const double[::1] alpha, const double[:, ::1] h0, const double[:, ::1] c0,
                 int act_state, int act_out):
    cdef int steps = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef int hidden = wh.shape[1]
    cdef int h4 = 4 * hidden
    cdef int t, j, i
    h_arr = np.empty((steps + 1, batch, hidden))
    c_arr = np.empty((steps + 1, batch, hidden))
    gates_arr = np.empty((steps, batch, h4))
    m_arr = np.empty((steps, batch, hidden))
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] c = c_arr
    cdef double[:, :, ::1] gates = gates_arr
    cdef double[:, :, ::1] m = m_arr
    cdef double f, ig, o, g, cv, mv
    h[0, :, :] = h0
    c[0, :, :] = c0
    for t in range(steps):
        for j in range(batch):
            for i in range(h4):
                gates[t, j, i] = b[i]
    with nogil:
        if steps > 0:
            _gemm(b'N', b'T', steps * batch, h4, n_in, 1.0, &x[0, 0, 0], n_in,
                  &wx[0, 0], n_in, 1.0, &gates[0, 0, 0], h4)
        for t in range(steps):
            _gemm(b'N', b'T', batch, h4, hidden, 1.0, &h[t, 0, 0], hidden,
                  &wh[0, 0], hidden, 1.0, &gates[t, 0, 0], h4)
            for j in range(batch):
                for i in range(hidden):
                    f = _sigmoid(gates[t, j, i])
                    ig = _sigmoid(gates[t, j, hidden + i])
                    o = _sigmoid(gates[t, j, 2 * hidden + i])
                    g = _act(gates[t, j, 3 * hidden + i], act_state)
                    gates[t, j, i] = f
                    gates[t, j, hidden + i] = ig
                    gates[t, j, 2 * hidden + i] = o
                    gates[t, j, 3 * hidden + i] = g
                    cv = f * c[t, j, i] + ig * g
                    c[t + 1, j, i] = cv
                    mv = _act(cv, act_out)
                    m[t, j, i] = mv
                    h[t + 1, j, i] = alpha[i] * h[t, j, i] + (1.0 - alpha[i]) * (o * mv)
    return h_arr, c_arr, gates_arr, m_arr


def lstm_backward(const double[:, :, ::1] x, const double[:, :, ::1] h, const double[:, :, ::1] c,
                  const double[:, :, ::1] gates, const double[:, :, ::1] m, const double[:, ::1] wx,
                  const double[:, ::1] wh, const double[::1] alpha, int act_state, int act_out,
                  const double[:, :, ::1] dh):
    cdef int steps = x.shape[0], batch = x.shape[1], n_in = x.shape[2]
    cdef int hidden = wh.shape[1]
    cdef int h4 = 4 * hidden
    cdef int t, j, i
    ga_arr = np.empty((steps, batch, h4))
    dh_carry_arr = np.zeros((batch, hidden))
    dc_carry_arr = np.zeros((batch, hidden))
    dalpha_arr = np.zeros(hidden)
    dwx_arr = np.zeros((h4, n_in))
    dwh_arr = np.zeros((h4, hidden))
    dx_arr = np.zeros((steps, batch, n_in))
    cdef double[:, :, ::1] ga = ga_arr
    cdef double[:, ::1] dh_carry = dh_carry_arr
    cdef double[:, ::1] dc_carry = dc_carry_arr
    cdef double[::1] dalpha = dalpha_arr
    cdef double[:, ::1] dwx = dwx_arr
    cdef double[:, ::1] dwh = dwh_arr
    cdef double[:, :, ::1] dx = dx_arr
    cdef double f, ig, o, g, mv, gh, ghbar, gc
    with nogil:
        for t in range(steps - 1, -1, -1):
            for j in range(batch):
                for i in range(hidden):
                    f = gates[t, j, i]
                    ig = gates[t, j, hidden + i]
                    o = gates[t, j, 2 * hidden + i]
                    g = gates[t, j, 3 * hidden + i]
                    mv = m[t, j, i]
                    gh = dh[t, j, i] + dh_carry[j, i]
                    dalpha[i] += gh * (h[t, j, i] - o * mv)
                    ghbar = gh * (1.0 - alpha[i])
                    gc = dc_carry[j, i] + ghbar * o * _act_grad(mv, act_out)
                    ga[t, j, i] = gc * c[t, j, i] * f * (1.0 - f)
                    ga[t, j, hidden + i] = gc * g * ig * (1.0 - ig)
                    ga[t, j, 2 * hidden + i] = ghbar * mv * o * (1.0 - o)
                    ga[t, j, 3 * hidden + i] = gc * ig * _act_grad(g, act_state)
                    dh_carry[j, i] = gh * alpha[i]
                    dc_carry[j, i] = gc * f
            _gemm(b'N', b'N', batch, hidden, h4, 1.0, &ga[t, 0, 0], h4,
                  &wh[0, 0], hidden, 1.0, &dh_carry[0, 0], hidden)
        if steps > 0:
            _gemm(b'T', b'N', h4, n_in, steps * batch, 1.0, &ga[0, 0, 0], h4,
                  &x[0, 0, 0], n_in, 0.0, &dwx[0, 0], n_in)
            _gemm(b'T', b'N', h4, hidden, steps * batch, 1.0, &ga[0, 0, 0], h4,
                  &h[0, 0, 0], hidden, 0.0, &dwh[0, 0], hidden)
            _gemm(b'N', b'N', steps * batch, n_in, h4, 1.0, &ga[0, 0, 0], h4,
                  &wx[0, 0], n_in, 0.0, &dx[0, 0, 0], n_in)
    db_arr = ga_arr.reshape(steps * batch, h4).sum(axis=0)
    return dwx_arr, dwh_arr, db_arr, dalpha_arr, dx_arr, dh_carry_arr, dc_carry_arr


cdef inline int _fire(double* u, double theta, bint bipolar) nogil:
    # subtractive reset; all crossings inside the substep are emitted
    cdef int n = 0
    cdef double uv = u[0]
    if uv >= theta:
        n = <int>floor(uv / theta)
        uv -= n * theta
        if uv >= theta:
            n += 1
            uv -= theta
    elif bipolar and uv <= -theta:
        n = -<int>floor(-uv / theta)
        uv -= n * theta
        if uv <= -theta:
            n -= 1
            uv += theta
    elif not bipolar and uv < -theta:
        uv = -theta
    u[0] = uv
    return n


def ds_encode(const double[::1] drive, double theta, double beta, int oversampling, bint bipolar,
              double u0, double r0):
    cdef Py_ssize_t n = drive.shape[0], k
    cdef double dt = 1.0 / oversampling
    cdef double quantum = theta * oversampling
    cdef double u = u0, r = r0, d, excess, max_excess = -INFINITY
    cdef int q
    r_arr = np.empty(n)
    u_pre_arr = np.empty(n)
    counts_arr = np.zeros(n, dtype=np.int32)
    cdef double[::1] r_out = r_arr
    cdef double[::1] u_pre = u_pre_arr
    cdef int[::1] counts = counts_arr
    with nogil:
        for k in range(n):
            d = drive[k]
            u += d * dt
            u_pre[k] = u
            excess = fabs(u) - (theta + fabs(d) * dt)
            if excess > max_excess:
                max_excess = excess
            q = _fire(&u, theta, bipolar)
            counts[k] = q
            r = beta * r + (1.0 - beta) * q * quantum
            r_out[k] = r
    return r_arr, counts_arr, u_pre_arr, u, r, max_excess


def snn_simulate(const double[:, ::1] x, const double[:, ::1] w_in, const double[:, ::1] w_rec, const double[::1] b,
                 int act, const double[::1] beta, const double[::1] theta, int oversampling, bint bipolar,
                 const double[::1] r0, bint hold, bint record):
    cdef int steps = x.shape[0]
    cdef int hidden = w_rec.shape[0]
    cdef int t, k, i, q, one = 1
    cdef double dt = 1.0 / oversampling
    cdef double excess, max_excess = -INFINITY, uv, dv
    decoded_arr = np.empty((steps, hidden))
    counts_pos_arr = np.zeros(hidden, dtype=np.int64)
    counts_neg_arr = np.zeros(hidden, dtype=np.int64)
    step_spikes_arr = np.zeros(steps, dtype=np.int64)
    raster_arr = np.zeros((steps * oversampling if record else 0, hidden), dtype=np.int32)
    drive_in_arr = np.ascontiguousarray(np.asarray(x) @ np.asarray(w_in).T + np.asarray(b))
    r_arr = np.array(r0, copy=True)
    r_new_arr = np.empty(hidden)
    u_arr = np.zeros(hidden)
    d_arr = np.empty(hidden)
    cdef double[:, ::1] decoded = decoded_arr
    cdef long long[::1] counts_pos = counts_pos_arr
    cdef long long[::1] counts_neg = counts_neg_arr
    cdef long long[::1] step_spikes = step_spikes_arr
    cdef int[:, ::1] raster = raster_arr
    cdef double[:, ::1] drive_in = drive_in_arr
    cdef double[::1] r = r_arr
    cdef double[::1] r_new = r_new_arr
    cdef double[::1] u = u_arr
    cdef double[::1] d = d_arr
    with nogil:
        for t in range(steps):
            for k in range(oversampling):
                if k == 0 or not hold:
                    for i in range(hidden):
                        d[i] = drive_in[t, i]
                    # d += w_rec @ r
                    _gemm(b'N', b'N', hidden, one, hidden, 1.0, &w_rec[0, 0], hidden,
                          &r[0], one, 1.0, &d[0], one)
                    for i in range(hidden):
                        d[i] = _act(d[i], act)
                for i in range(hidden):
                    dv = d[i]
                    uv = u[i] + dv * dt
                    excess = fabs(uv) - (theta[i] + fabs(dv) * dt)
                    if excess > max_excess:
                        max_excess = excess
                    q = _fire(&uv, theta[i], bipolar)
                    u[i] = uv
                    if q > 0:
                        counts_pos[i] += q
                        step_spikes[t] += q
                    elif q < 0:
                        counts_neg[i] -= q
                        step_spikes[t] -= q
                    if record:
                        raster[t * oversampling + k, i] = q
                    r_new[i] = beta[i] * r[i] + (1.0 - beta[i]) * q * theta[i] * oversampling
                for i in range(hidden):
                    r[i] = r_new[i]
            for i in range(hidden):
                decoded[t, i] = r[i]
    return (decoded_arr, counts_pos_arr, counts_neg_arr, step_spikes_arr, max_excess,
            raster_arr if record else None)
