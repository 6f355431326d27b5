"""Pure-Python/numpy reference kernels.

Every public function here has a twin with the same signature in
``_ckernels.pyx``. Arrays are C-contiguous float64 unless noted; sequence
tensors are time-major ``(T, B, n)``. Activation codes: 0 identity, 1 tanh,
2 relu, 3 sigmoid.
"""
from __future__ import annotations

import numpy as np

ACT_IDENTITY, ACT_TANH, ACT_RELU, ACT_SIGMOID = 0, 1, 2, 3


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def _act(z, code):
    if code == ACT_TANH:
        return np.tanh(z)
    if code == ACT_RELU:
        return np.maximum(z, 0.0)
    if code == ACT_SIGMOID:
        return _sigmoid(z)
    return z.copy()


def _act_grad_from_out(out, code):
    # derivative expressed through the activation output
    if code == ACT_TANH:
        return 1.0 - out * out
    if code == ACT_RELU:
        return (out > 0.0).astype(np.float64)
    if code == ACT_SIGMOID:
        return out * (1.0 - out)
    return np.ones_like(out)


def lowpass(x, alpha, y0):
    steps, n = x.shape
    y = np.empty((steps, n))
    prev = y0.copy()
    keep = 1.0 - alpha
    for t in range(steps):
        prev = alpha * prev + keep * x[t]
        y[t] = prev
    return y


def rnn_forward(x, w_in, w_rec, b, alpha, y0, act):
    """Low-pass RNN over a batch.

    Returns ``(y, s)``: ``y`` is ``(T+1, B, H)`` with ``y[0] = y0`` and ``s`` is
    the ``(T, B, H)`` activation stream.
    """
    steps, batch, n_in = x.shape
    hidden = w_rec.shape[0]
    drive = (x.reshape(steps * batch, n_in) @ w_in.T).reshape(steps, batch, hidden)
    drive += b
    y = np.empty((steps + 1, batch, hidden))
    s = np.empty((steps, batch, hidden))
    y[0] = y0
    keep = 1.0 - alpha
    w_rec_t = w_rec.T
    for t in range(steps):
        z = drive[t] + y[t] @ w_rec_t
        s[t] = _act(z, act)
        y[t + 1] = alpha * y[t] + keep * s[t]
    return y, s


def rnn_backward(x, y, s, w_in, w_rec, alpha, act, dy):
    """BPTT for ``rnn_forward``.

    ``dy`` is the direct loss gradient on every output ``y[1:]``. Returns
    ``(dw_in, dw_rec, db, dalpha, dx, dy0)``.
    """
    steps, batch, n_in = x.shape
    hidden = w_rec.shape[0]
    gz = np.empty((steps, batch, hidden))
    carry = np.zeros((batch, hidden))
    dalpha = np.zeros(hidden)
    keep = 1.0 - alpha
    for t in range(steps - 1, -1, -1):
        gy = dy[t] + carry
        g = gy * keep * _act_grad_from_out(s[t], act)
        gz[t] = g
        dalpha += np.sum(gy * (y[t] - s[t]), axis=0)
        carry = gy * alpha + g @ w_rec
    flat = gz.reshape(steps * batch, hidden)
    dw_in = flat.T @ x.reshape(steps * batch, n_in)
    dw_rec = flat.T @ y[:-1].reshape(steps * batch, hidden)
    db = flat.sum(axis=0)
    dx = (flat @ w_in).reshape(steps, batch, n_in)
    return dw_in, dw_rec, db, dalpha, dx, carry


def lstm_forward(x, wx, wh, b, alpha, h0, c0, act_state, act_out):
    """Low-pass LSTM over a batch; gate blocks ordered (f, i, o, candidate).

    Returns ``(h, c, gates, m)``: ``h``/``c`` are ``(T+1, B, H)`` including the
    initial states, ``gates`` holds post-nonlinearity gate values
    ``(T, B, 4H)`` and ``m = act_out(c_t)`` is ``(T, B, H)``.
    """
    steps, batch, n_in = x.shape
    hidden = wh.shape[1]
    drive = (x.reshape(steps * batch, n_in) @ wx.T).reshape(steps, batch, 4 * hidden)
    drive += b
    h = np.empty((steps + 1, batch, hidden))
    c = np.empty((steps + 1, batch, hidden))
    gates = np.empty((steps, batch, 4 * hidden))
    m = np.empty((steps, batch, hidden))
    h[0] = h0
    c[0] = c0
    keep = 1.0 - alpha
    wh_t = wh.T
    h3 = 3 * hidden
    for t in range(steps):
        a = drive[t] + h[t] @ wh_t
        gt = gates[t]
        gt[:, :h3] = _sigmoid(a[:, :h3])
        gt[:, h3:] = _act(a[:, h3:], act_state)
        f = gt[:, :hidden]
        i = gt[:, hidden:2 * hidden]
        o = gt[:, 2 * hidden:h3]
        g = gt[:, h3:]
        c[t + 1] = f * c[t] + i * g
        m[t] = _act(c[t + 1], act_out)
        h[t + 1] = alpha * h[t] + keep * (o * m[t])
    return h, c, gates, m


def lstm_backward(x, h, c, gates, m, wx, wh, alpha, act_state, act_out, dh):
    """BPTT for ``lstm_forward``.

    Returns ``(dwx, dwh, db, dalpha, dx, dh0, dc0)``.
    """
    steps, batch, n_in = x.shape
    hidden = wh.shape[1]
    h3 = 3 * hidden
    ga = np.empty((steps, batch, 4 * hidden))
    dh_carry = np.zeros((batch, hidden))
    dc_carry = np.zeros((batch, hidden))
    dalpha = np.zeros(hidden)
    keep = 1.0 - alpha
    for t in range(steps - 1, -1, -1):
        gt = gates[t]
        f = gt[:, :hidden]
        i = gt[:, hidden:2 * hidden]
        o = gt[:, 2 * hidden:h3]
        g = gt[:, h3:]
        gh = dh[t] + dh_carry
        hbar = o * m[t]
        dalpha += np.sum(gh * (h[t] - hbar), axis=0)
        ghbar = gh * keep
        gc = dc_carry + ghbar * o * _act_grad_from_out(m[t], act_out)
        gat = ga[t]
        gat[:, :hidden] = gc * c[t] * f * (1.0 - f)
        gat[:, hidden:2 * hidden] = gc * g * i * (1.0 - i)
        gat[:, 2 * hidden:h3] = ghbar * m[t] * o * (1.0 - o)
        gat[:, h3:] = gc * i * _act_grad_from_out(g, act_state)
        dh_carry = gh * alpha + gat @ wh
        dc_carry = gc * f
    flat = ga.reshape(steps * batch, 4 * hidden)
    dwx = flat.T @ x.reshape(steps * batch, n_in)
    dwh = flat.T @ h[:-1].reshape(steps * batch, hidden)
    db = flat.sum(axis=0)
    dx = (flat @ wx).reshape(steps, batch, n_in)
    return dwx, dwh, db, dalpha, dx, dh_carry, dc_carry


def _fire(u, theta, bipolar):
    """Subtractive reset; returns ``(signed spike count, u after reset)``.

    Several threshold crossings may fall inside one substep; they are all
    emitted, so the integrator never overloads.
    """
    if u >= theta:
        n = int(u // theta)
        u -= n * theta
        if u >= theta:
            n += 1
            u -= theta
        return n, u
    if bipolar and u <= -theta:
        n = int(-u // theta)
        u += n * theta
        if u <= -theta:
            n += 1
            u += theta
        return -n, u
    if not bipolar and u < -theta:
        u = -theta
    return 0, u


def ds_encode(drive, theta, beta, oversampling, bipolar, u0, r0):
    """First-order asynchronous delta-sigma encoder on a substep grid.

    ``drive`` is sampled per substep. Returns ``(r, counts, u_pre, u, r_last,
    max_excess)``: the decoded trace, signed spike counts per substep, the
    integrator value before each reset, the final state, and the largest
    ``|u_pre| - (theta + |drive| dt)`` seen (<= 0 for a bounded integrator).
    """
    n = drive.shape[0]
    dt = 1.0 / oversampling
    quantum = theta * oversampling
    r_out = np.empty(n)
    u_pre = np.empty(n)
    counts = np.zeros(n, dtype=np.int32)
    u = float(u0)
    r = float(r0)
    max_excess = -np.inf
    for k in range(n):
        d = float(drive[k])
        u += d * dt
        u_pre[k] = u
        excess = abs(u) - (theta + abs(d) * dt)
        if excess > max_excess:
            max_excess = excess
        q, u = _fire(u, theta, bipolar)
        counts[k] = q
        r = beta * r + (1.0 - beta) * q * quantum
        r_out[k] = r
    return r_out, counts, u_pre, u, r, max_excess


def snn_simulate(x, w_in, w_rec, b, act, beta, theta, oversampling, bipolar, r0,
                 hold, record):
    """Network of delta-sigma neurons driven by the lpRNN nonlinearity.

    Each unit's drive is ``act(w_rec @ r + w_in @ x_t + b)`` evaluated on the
    decoded neighbour values ``r`` (every substep, or once per RNN step when
    ``hold``). Returns ``(decoded, counts_pos, counts_neg, step_spikes,
    max_excess, raster)``; ``decoded[t]`` is the decoder state at the end of
    RNN step ``t`` and ``raster`` (signed counts per substep and unit) is
    ``None`` unless ``record``.
    """
    steps = x.shape[0]
    hidden = w_rec.shape[0]
    dt = 1.0 / oversampling
    quantum = theta * oversampling
    keep = 1.0 - beta
    r = r0.copy()
    u = np.zeros(hidden)
    decoded = np.empty((steps, hidden))
    counts_pos = np.zeros(hidden, dtype=np.int64)
    counts_neg = np.zeros(hidden, dtype=np.int64)
    step_spikes = np.zeros(steps, dtype=np.int64)
    raster = np.zeros((steps * oversampling, hidden), dtype=np.int32) if record else None
    max_excess = -np.inf
    drive_in = x @ w_in.T + b
    for t in range(steps):
        if hold:
            d = _act(drive_in[t] + w_rec @ r, act)
        for k in range(oversampling):
            if not hold:
                d = _act(drive_in[t] + w_rec @ r, act)
            u += d * dt
            excess = np.max(np.abs(u) - (theta + np.abs(d) * dt))
            if excess > max_excess:
                max_excess = excess
            q = np.zeros(hidden)
            up = u >= theta
            n = np.floor(u[up] / theta[up])
            q[up] = n
            if bipolar:
                down = u <= -theta
                q[down] = -np.floor(-u[down] / theta[down])
            u -= q * theta
            # floor rounding can leave one more quantum on either side
            over = u >= theta
            q[over] += 1
            u[over] -= theta[over]
            if bipolar:
                under = u <= -theta
                q[under] -= 1
                u[under] += theta[under]
            else:
                np.maximum(u, -theta, out=u)
            counts_pos += np.where(q > 0, q, 0).astype(np.int64)
            counts_neg += np.where(q < 0, -q, 0).astype(np.int64)
            step_spikes[t] += int(np.abs(q).sum())
            if record:
                raster[t * oversampling + k] = q
            r = beta * r + keep * q * quantum
        decoded[t] = r
    return decoded, counts_pos, counts_neg, step_spikes, max_excess, raster
