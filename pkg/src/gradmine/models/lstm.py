"""LSTM classifier with hand-derived gradients.

Cell, per step over embedded tokens x_t (all gates elementwise):

    z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)     input gate
    f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)     forget gate
    g_t = tanh(W_c x_t + U_c h_{t-1} + b_c)        candidate cell
    C_t = z_t * g_t + f_t * C_{t-1}
    o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)     exposure gate
    h_t = o_t * tanh(C_t)

The classification head mean-pools h_1..h_T and applies a softmax layer;
the loss is the negative log-likelihood of the sample's label. The W_c
block of the backward pass is the norm proxy used by importance mining.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .common import STREAM_INIT, stream_rng
from ..tensor import log_softmax, sigmoid

BASE_SELECTOR = "w_c"
FORGET_BIAS = 1.0  # keeps early memory from washing out

# Candidate-cell input weights start near zero so the mined norm of this
# block reflects accumulated per-sample updates rather than init mass.
BASE_BLOCK_SCALE = 0.02

GATES = ("z", "f", "c", "o")


@dataclass
class LstmParams:
    w_emb: np.ndarray  # (vocab, embed)
    w_z: np.ndarray  # (hidden, embed)
    w_f: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    u_z: np.ndarray  # (hidden, hidden)
    u_f: np.ndarray
    u_c: np.ndarray
    u_o: np.ndarray
    b_z: np.ndarray  # (hidden,)
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    w_cls: np.ndarray  # (classes, hidden)
    b_cls: np.ndarray  # (classes,)
    h0: np.ndarray  # (hidden,)
    c0: np.ndarray  # (hidden,)


@dataclass
class LstmTrace:
    xs: np.ndarray  # (T, embed)
    zs: np.ndarray  # (T, hidden) gate activations
    fs: np.ndarray
    gs: np.ndarray  # candidate cells, in (-1, 1)
    os_: np.ndarray
    cs: np.ndarray  # (T+1, hidden), cs[0] = c0
    tcs: np.ndarray  # (T, hidden) tanh(C_t), cached for backward
    hs: np.ndarray  # (T+1, hidden), hs[0] = h0
    probs: np.ndarray  # (classes,) head output
    loss: float


def init_params(spec, seed):
    rng = stream_rng(seed, STREAM_INIT)
    v, d, h, k = spec.vocab, spec.embed, spec.hidden, spec.classes

    def w(rows, cols):
        return rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols))

    return LstmParams(
        w_emb=rng.normal(0.0, 0.1, size=(v, d)),
        w_z=w(h, d),
        w_f=w(h, d),
        w_c=rng.normal(0.0, BASE_BLOCK_SCALE, size=(h, d)),
        w_o=w(h, d),
        u_z=w(h, h),
        u_f=w(h, h),
        u_c=w(h, h),
        u_o=w(h, h),
        b_z=np.zeros(h),
        b_f=np.full(h, FORGET_BIAS),
        b_c=np.zeros(h),
        b_o=np.zeros(h),
        w_cls=w(k, h),
        b_cls=np.zeros(k),
        h0=np.zeros(h),
        c0=np.zeros(h),
    )


def _check_sample(params, sample):
    vocab = params.w_emb.shape[0]
    if np.any(sample.tokens < 0) or np.any(sample.tokens >= vocab):
        raise InvalidInputError(f"token index out of range [0, {vocab})")
    if not sample.is_classification:
        raise InvalidInputError("the LSTM head needs a single class label")
    if not 0 <= sample.label < params.b_cls.size:
        raise InvalidInputError(f"label out of range [0, {params.b_cls.size})")


def _check_gates(zs, fs, gs, os_):
    for name, arr in (("z", zs), ("f", fs), ("o", os_)):
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidInputError(f"{name}-gate left [0, 1]")
    if not np.all(np.isfinite(gs)) or np.any(np.abs(gs) > 1.0):
        raise InvalidInputError("candidate cell left [-1, 1]")


def _stacked(params):
    """Gate weights stacked in (z, f, c, o) order for fused products."""
    w = np.concatenate((params.w_z, params.w_f, params.w_c, params.w_o))
    u = np.concatenate((params.u_z, params.u_f, params.u_c, params.u_o))
    b = np.concatenate((params.b_z, params.b_f, params.b_c, params.b_o))
    return w, u, b


def forward(params, sample):
    _check_sample(params, sample)
    tokens = sample.tokens
    t_len = tokens.size
    hidden = params.h0.size

    xs = params.w_emb[tokens]
    zs = np.empty((t_len, hidden))
    fs = np.empty((t_len, hidden))
    gs = np.empty((t_len, hidden))
    os_ = np.empty((t_len, hidden))
    cs = np.empty((t_len + 1, hidden))
    tcs = np.empty((t_len, hidden))
    hs = np.empty((t_len + 1, hidden))
    cs[0] = params.c0
    hs[0] = params.h0

    w_all, u_all, b_all = _stacked(params)
    pre_x = xs @ w_all.T + b_all  # (T, 4*hidden), input share of every gate
    for t in range(t_len):
        acts = pre_x[t] + u_all @ hs[t]
        zs[t] = sigmoid(acts[:hidden])
        fs[t] = sigmoid(acts[hidden : 2 * hidden])
        gs[t] = np.tanh(acts[2 * hidden : 3 * hidden])
        os_[t] = sigmoid(acts[3 * hidden :])
        cs[t + 1] = zs[t] * gs[t] + fs[t] * cs[t]
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = os_[t] * tcs[t]
    _check_gates(zs, fs, gs, os_)

    pooled = hs[1:].mean(axis=0)
    logp = log_softmax(params.w_cls @ pooled + params.b_cls)
    return LstmTrace(
        xs=xs,
        zs=zs,
        fs=fs,
        gs=gs,
        os_=os_,
        cs=cs,
        tcs=tcs,
        hs=hs,
        probs=np.exp(logp),
        loss=float(-logp[sample.label]),
    )


def _check_trace(params, sample, trace):
    t_len = sample.tokens.size
    if (
        trace.hs.shape != (t_len + 1, params.h0.size)
        or trace.xs.shape != (t_len, params.w_emb.shape[1])
        or trace.probs.shape != (params.b_cls.size,)
    ):
        raise InvalidInputError("trace does not match (params, sample)")


def backward(params, sample, trace):
    """Exact gradients for all blocks, including h0/c0."""
    _check_sample(params, sample)
    _check_trace(params, sample, trace)
    tokens = sample.tokens
    t_len = tokens.size

    hidden = params.h0.size
    dlogits = trace.probs.copy()
    dlogits[sample.label] -= 1.0
    pooled = trace.hs[1:].mean(axis=0)

    dh_pool = (params.w_cls.T @ dlogits) / t_len
    dh_next = np.zeros_like(params.h0)
    dc_next = np.zeros_like(params.c0)

    w_all, u_all, _ = _stacked(params)
    da_all = np.empty((t_len, 4 * hidden))  # pre-activation grads, stacked
    g_emb = np.zeros_like(params.w_emb)
    for t in range(t_len - 1, -1, -1):
        z, f, gc, o = trace.zs[t], trace.fs[t], trace.gs[t], trace.os_[t]
        dh = dh_pool + dh_next
        do = dh * trace.tcs[t]
        dc = dh * o * (1.0 - trace.tcs[t] ** 2) + dc_next

        da = da_all[t]
        da[:hidden] = dc * gc * z * (1.0 - z)
        da[hidden : 2 * hidden] = dc * trace.cs[t] * f * (1.0 - f)
        da[2 * hidden : 3 * hidden] = dc * z * (1.0 - gc**2)
        da[3 * hidden :] = do * o * (1.0 - o)
        dc_next = dc * f

        g_emb[tokens[t]] += w_all.T @ da
        dh_next = u_all.T @ da

    g_w = da_all.T @ trace.xs  # (4*hidden, embed)
    g_u = da_all.T @ trace.hs[:-1]
    g_b = da_all.sum(axis=0)
    s = [slice(0, hidden), slice(hidden, 2 * hidden),
         slice(2 * hidden, 3 * hidden), slice(3 * hidden, 4 * hidden)]
    return LstmParams(
        w_emb=g_emb,
        w_z=g_w[s[0]], w_f=g_w[s[1]], w_c=g_w[s[2]], w_o=g_w[s[3]],
        u_z=g_u[s[0]], u_f=g_u[s[1]], u_c=g_u[s[2]], u_o=g_u[s[3]],
        b_z=g_b[s[0]], b_f=g_b[s[1]], b_c=g_b[s[2]], b_o=g_b[s[3]],
        w_cls=np.outer(dlogits, pooled),
        b_cls=dlogits,
        h0=dh_next,
        c0=dc_next,
    )


def predict(params, sample):
    return int(np.argmax(forward(params, sample).probs))


def error_count(params, sample):
    return int(predict(params, sample) != sample.label), 1
