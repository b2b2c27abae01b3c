"""Frame-sequence generative model: an RBM conditioned per step by a
deterministic recurrence that shifts its biases.

For frames v_1..v_T (binary, width n_v):

    bv_t = b_v + W_uv u_{t-1}
    bh_t = b_h + W_uh u_{t-1}
    u_t  = tanh(b_u + W_uu u_{t-1} + W_vu v_t)

At each step a k-step Gibbs chain starts from the data frame and yields
the reconstruction used both for the contrastive weight updates and for
the monitoring cost (mean frame-wise binary cross-entropy). Gradients for
W, b_v, b_h are the usual positive/negative phase differences; gradients
for the conditioning parameters backpropagate exactly through the
recurrence with the phase statistics held fixed.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .common import STREAM_INIT, stream_rng
from ..tensor import sigmoid

BASE_SELECTOR = "w"


@dataclass
class RnnRbmParams:
    w: np.ndarray  # (n_v, n_h) shared visible-hidden weights
    b_v: np.ndarray  # (n_v,) static visible offset
    b_h: np.ndarray  # (n_h,) static hidden offset
    w_uv: np.ndarray  # (n_v, context)
    w_uh: np.ndarray  # (n_h, context)
    w_uu: np.ndarray  # (context, context)
    w_vu: np.ndarray  # (context, n_v)
    b_u: np.ndarray  # (context,)
    u0: np.ndarray  # (context,)


@dataclass
class StepStats:
    """Phase statistics of one frame's Gibbs chain."""

    v: np.ndarray  # data frame
    v_star: np.ndarray  # chain-end visible sample
    h_pos: np.ndarray  # sigmoid(W^T v + bh_t)
    h_neg: np.ndarray  # sigmoid(W^T v_star + bh_t)
    recon_prob: np.ndarray  # visible probability at the chain end


@dataclass
class RnnRbmTrace:
    us: np.ndarray  # (T+1, context), us[0] = u0
    bvs: np.ndarray  # (T, n_v) per-step visible biases
    bhs: np.ndarray  # (T, n_h)
    stats: list  # [StepStats] * T
    loss: float  # monitoring cost


def init_params(spec, seed):
    rng = stream_rng(seed, STREAM_INIT)
    n_v, n_h, d_u = spec.vocab, spec.hidden, spec.context

    def w(rows, cols, scale=None):
        return rng.normal(0.0, scale or 1.0 / np.sqrt(cols), size=(rows, cols))

    return RnnRbmParams(
        w=w(n_v, n_h, scale=0.01),
        b_v=np.zeros(n_v),
        b_h=np.zeros(n_h),
        w_uv=w(n_v, d_u, scale=0.01),
        w_uh=w(n_h, d_u, scale=0.01),
        w_uu=w(d_u, d_u),
        w_vu=w(d_u, n_v),
        b_u=np.zeros(d_u),
        u0=np.zeros(d_u),
    )


def gibbs_step(w, bv, bh, v, rng):
    """One alternating Gibbs update from visible state ``v``.

    Returns (h_sample, v_next_prob, v_next_sample). Consumes exactly one
    uniform array per layer, in h-then-v order, so chains are bitwise
    reproducible from the generator state.
    """
    h_prob = sigmoid(w.T @ v + bh)
    h = (rng.random(h_prob.size) < h_prob).astype(np.float64)
    v_prob = sigmoid(w @ h + bv)
    v_next = (rng.random(v_prob.size) < v_prob).astype(np.float64)
    return h, v_prob, v_next


def _bernoulli_cost(v, prob):
    # v is exactly 0/1; evaluate only the defined branch per entry. A
    # saturated mismatch legitimately yields inf, caught by callers'
    # divergence guards.
    on = v > 0.5
    out = np.empty_like(prob)
    with np.errstate(divide="ignore"):
        out[on] = -np.log(prob[on])
        out[~on] = -np.log1p(-prob[~on])
    return float(np.mean(out))


def _check_sample(params, sample):
    if sample.frames.shape[1] != params.b_v.size:
        raise InvalidInputError(
            f"frame width {sample.frames.shape[1]} != n_v {params.b_v.size}"
        )


def forward(params, sample, k=1, rng=None):
    """Conditioning recurrence plus one CD-k chain per frame."""
    _check_sample(params, sample)
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if rng is None:
        raise InvalidInputError("the frame model needs a random generator")
    frames = sample.frames
    t_len = frames.shape[0]

    us = np.empty((t_len + 1, params.u0.size))
    us[0] = params.u0
    bvs = np.empty((t_len, params.b_v.size))
    bhs = np.empty((t_len, params.b_h.size))
    stats = []
    cost = 0.0
    for t in range(t_len):
        v = frames[t]
        bvs[t] = params.b_v + params.w_uv @ us[t]
        bhs[t] = params.b_h + params.w_uh @ us[t]

        v_chain = v
        recon = None
        for _ in range(k):
            _, recon, v_chain = gibbs_step(params.w, bvs[t], bhs[t], v_chain, rng)
        h_pos = sigmoid(params.w.T @ v + bhs[t])
        h_neg = sigmoid(params.w.T @ v_chain + bhs[t])
        stats.append(
            StepStats(v=v, v_star=v_chain, h_pos=h_pos, h_neg=h_neg, recon_prob=recon)
        )
        cost += _bernoulli_cost(v, recon)

        us[t + 1] = np.tanh(params.b_u + params.w_uu @ us[t] + params.w_vu @ v)

    return RnnRbmTrace(us=us, bvs=bvs, bhs=bhs, stats=stats, loss=cost / t_len)


def backward(params, sample, trace):
    """CD gradients for the RBM blocks; exact recurrence backprop for the
    conditioning blocks, with the phase statistics treated as constants."""
    _check_sample(params, sample)
    t_len = sample.frames.shape[0]
    if trace.us.shape != (t_len + 1, params.u0.size) or len(trace.stats) != t_len:
        raise InvalidInputError("trace does not match (params, sample)")

    g = {name: np.zeros_like(block) for name, block in vars(params).items()}
    dbvs = np.empty((t_len, params.b_v.size))
    dbhs = np.empty((t_len, params.b_h.size))
    for t, st in enumerate(trace.stats):
        g["w"] -= np.outer(st.v, st.h_pos) - np.outer(st.v_star, st.h_neg)
        dbvs[t] = -(st.v - st.v_star)
        dbhs[t] = -(st.h_pos - st.h_neg)
        g["b_v"] += dbvs[t]
        g["b_h"] += dbhs[t]
        g["w_uv"] += np.outer(dbvs[t], trace.us[t])
        g["w_uh"] += np.outer(dbhs[t], trace.us[t])

    du = np.zeros_like(params.u0)  # d loss / d u_{t+1}, carried backwards
    for t in range(t_len - 1, -1, -1):
        da = du * (1.0 - trace.us[t + 1] ** 2)
        g["b_u"] += da
        g["w_uu"] += np.outer(da, trace.us[t])
        g["w_vu"] += np.outer(da, sample.frames[t])
        du = params.w_uu.T @ da
        du += params.w_uv.T @ dbvs[t] + params.w_uh.T @ dbhs[t]
    g["u0"] = du
    return RnnRbmParams(**g)


def cd_surrogate_loss(params, sample, stats):
    """Scalar whose exact parameter gradient is what ``backward`` returns.

    Rebuilds the conditioning recurrence from ``params`` and contracts it
    against the frozen phase statistics; used to verify the conditioning
    gradients by finite differences.
    """
    _check_sample(params, sample)
    frames = sample.frames
    u = params.u0
    total = 0.0
    for t, st in enumerate(stats):
        bv = params.b_v + params.w_uv @ u
        bh = params.b_h + params.w_uh @ u
        pos = st.h_pos @ (params.w.T @ st.v + bh) + bv @ st.v
        neg = st.h_neg @ (params.w.T @ st.v_star + bh) + bv @ st.v_star
        total -= pos - neg
        u = np.tanh(params.b_u + params.w_uu @ u + params.w_vu @ frames[t])
    return float(total)


def error_count(params, sample, k=1, rng=None):
    """Bit mismatches between frames and thresholded reconstructions."""
    trace = forward(params, sample, k=k, rng=rng)
    wrong = sum(
        int(np.sum((st.recon_prob > 0.5).astype(np.float64) != st.v))
        for st in trace.stats
    )
    return wrong, sample.frames.size
