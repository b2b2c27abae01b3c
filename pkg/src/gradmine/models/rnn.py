"""Vanilla recurrent network with hand-derived gradients.

Recurrence, per step over the embedded tokens x_t:

    h_t = tanh(W_h h_{t-1} + W_x x_t + b_h)
    y_t = softmax(W_s h_t + b_y)

The loss is mean negative log-likelihood of the per-step targets, or the
final-step negative log-likelihood when the sample carries one label.
Backward runs untruncated through the whole history; every block of the
returned gradient matches central finite differences of the loss.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .common import STREAM_INIT, stream_rng
from ..tensor import log_softmax

BASE_SELECTOR = "w_x"

# The input-weight block starts near zero so that after per-sample private
# training its norm is dominated by the accumulated updates, not by random
# initialization mass. Training escapes zero through the embeddings.
BASE_BLOCK_SCALE = 0.02


@dataclass
class RnnParams:
    w_emb: np.ndarray  # (vocab, embed)
    w_x: np.ndarray  # (hidden, embed)
    w_h: np.ndarray  # (hidden, hidden)
    w_s: np.ndarray  # (vocab, hidden)
    b_h: np.ndarray  # (hidden,)
    b_y: np.ndarray  # (vocab,)
    h0: np.ndarray  # (hidden,)


@dataclass
class RnnTrace:
    xs: np.ndarray  # (T, embed) embedded inputs
    hs: np.ndarray  # (T+1, hidden), hs[0] = h0
    ys: np.ndarray  # (T, vocab) per-step output distributions
    loss: float


def init_params(spec, seed):
    rng = stream_rng(seed, STREAM_INIT)
    v, d, h = spec.vocab, spec.embed, spec.hidden

    def w(rows, cols):
        return rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols))

    return RnnParams(
        w_emb=rng.normal(0.0, 0.1, size=(v, d)),
        w_x=rng.normal(0.0, BASE_BLOCK_SCALE, size=(h, d)),
        w_h=w(h, h),
        w_s=w(v, h),
        b_h=np.zeros(h),
        b_y=np.zeros(v),
        h0=np.zeros(h),
    )


def _check_sample(params, sample):
    vocab = params.w_emb.shape[0]
    if np.any(sample.tokens < 0) or np.any(sample.tokens >= vocab):
        raise InvalidInputError(f"token index out of range [0, {vocab})")
    if sample.is_classification:
        if not 0 <= sample.label < vocab:
            raise InvalidInputError(f"label out of range [0, {vocab})")
    elif np.any(sample.targets < 0) or np.any(sample.targets >= vocab):
        raise InvalidInputError(f"target index out of range [0, {vocab})")


def forward(params, sample):
    """Run the recurrence and return the full trace, including the loss."""
    _check_sample(params, sample)
    tokens = sample.tokens
    t_len = tokens.size
    hidden = params.h0.size

    xs = params.w_emb[tokens]
    hs = np.empty((t_len + 1, hidden))
    hs[0] = params.h0
    logits = np.empty((t_len, params.b_y.size))
    for t in range(t_len):
        hs[t + 1] = np.tanh(params.w_h @ hs[t] + params.w_x @ xs[t] + params.b_h)
        logits[t] = params.w_s @ hs[t + 1] + params.b_y

    logp = log_softmax(logits)
    if sample.is_classification:
        loss = -logp[t_len - 1, sample.label]
    else:
        loss = -np.mean(logp[np.arange(t_len), sample.targets])
    return RnnTrace(xs=xs, hs=hs, ys=np.exp(logp), loss=float(loss))


def _check_trace(params, sample, trace):
    t_len = sample.tokens.size
    if (
        trace.hs.shape != (t_len + 1, params.h0.size)
        or trace.ys.shape != (t_len, params.b_y.size)
        or trace.xs.shape != (t_len, params.w_emb.shape[1])
    ):
        raise InvalidInputError("trace does not match (params, sample)")


def backward(params, sample, trace):
    """Exact gradients of the loss for every parameter block."""
    _check_sample(params, sample)
    _check_trace(params, sample, trace)
    tokens = sample.tokens
    t_len = tokens.size

    # d loss / d logits, per step
    dz = trace.ys.copy()
    if sample.is_classification:
        dz[: t_len - 1] = 0.0
        dz[t_len - 1, sample.label] -= 1.0
    else:
        dz[np.arange(t_len), sample.targets] -= 1.0
        dz /= t_len

    g_w_emb = np.zeros_like(params.w_emb)
    g_w_x = np.zeros_like(params.w_x)
    g_w_h = np.zeros_like(params.w_h)
    g_b_h = np.zeros_like(params.b_h)

    g_w_s = dz.T @ trace.hs[1:]
    g_b_y = dz.sum(axis=0)

    carry = np.zeros_like(params.h0)  # d loss / d h_t from steps after t
    for t in range(t_len - 1, -1, -1):
        dh = params.w_s.T @ dz[t] + carry
        da = dh * (1.0 - trace.hs[t + 1] ** 2)
        g_w_h += np.outer(da, trace.hs[t])
        g_w_x += np.outer(da, trace.xs[t])
        g_b_h += da
        g_w_emb[tokens[t]] += params.w_x.T @ da
        carry = params.w_h.T @ da

    return RnnParams(
        w_emb=g_w_emb,
        w_x=g_w_x,
        w_h=g_w_h,
        w_s=g_w_s,
        b_h=g_b_h,
        b_y=g_b_y,
        h0=carry,
    )


def predict(params, sample):
    """Argmax class at the final step (classification head)."""
    trace = forward(params, sample)
    return int(np.argmax(trace.ys[-1]))


def error_count(params, sample):
    """(mistakes, opportunities) under argmax decoding."""
    trace = forward(params, sample)
    if sample.is_classification:
        return int(np.argmax(trace.ys[-1]) != sample.label), 1
    pred = np.argmax(trace.ys, axis=1)
    return int(np.sum(pred != sample.targets)), sample.tokens.size
