"""Per-sample importance mining.

The miner gives every training sample its own private model, all starting
from one shared initialization, and trains each privately on its single
sample with plain SGD until the loss drops to ``epsilon`` (or a step cap
hits). The norm of a designated parameter block of the private model then
serves as the sample's importance; normalizing the norms yields the
sampling distribution used by importance-weighted training.

Why the final norm works as a proxy: with a fixed step size the private
block ends at its initialization minus the step-size-scaled sum of every
gradient it ever received, so samples that keep producing large gradients
drag the block further and end with larger norms. ``history_sum_check``
verifies that identity and its triangle-inequality bound on recorded runs.

Mining is embarrassingly parallel: each sample's work is a pure function
of (shared init, sample, config, per-sample seed), so results are
identical for any worker count.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .base import ParamsMixin, check_probs
from .errors import (
    ConfigError,
    DistributionError,
    DivergenceError,
    InvalidInputError,
    ParseError,
    UnsupportedOperationError,
)
from .models import (
    STREAM_MINE,
    copy_params,
    get_model,
    param_block,
    spec_for_dataset,
    stream_rng,
    validate_dataset,
)
from .optimizer import as_dataset, sgd_step
from .sampling import build_alias
from .tensor import frobenius_norm, matrix_norm

WORKERS_ENV = "GRADMINE_WORKERS"

IMPORTANCE_KEYS = (
    "model",
    "base_selector",
    "epsilon",
    "seed",
    "norm_kind",
    "norms",
    "probs",
    "iterations",
    "converged",
)


def default_epsilon(target_loss):
    """Private-training accuracy: two orders below the full-run target."""
    return 0.01 * target_loss


@dataclass
class FimConfig:
    epsilon: float
    lr: float = 0.1
    t_max: int = 5000
    seed: int = 0
    base_selector: str = None  # model default when unset
    norm_kind: str = "frobenius"
    record_history: bool = False
    embed_diagnostic: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if not self.lr > 0:
            raise ConfigError("lr must be > 0")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")


@dataclass
class HistoryRecord:
    """Step-level bookkeeping of one private run."""

    base_final: np.ndarray
    grad_sum: np.ndarray  # sum of base-block gradients over all steps
    norm_sum: float  # sum of per-step base-gradient norms
    losses: list  # loss before each recorded step, plus the final loss


@dataclass
class ImportanceTable:
    model: str
    base_selector: str
    epsilon: float
    seed: int
    norm_kind: str
    norms: np.ndarray
    probs: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray

    def __post_init__(self):
        self.norms = np.ascontiguousarray(self.norms, dtype=np.float64)
        self.probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        self.iterations = np.ascontiguousarray(self.iterations, dtype=np.int64)
        self.converged = np.ascontiguousarray(self.converged, dtype=bool)

    @property
    def n(self):
        return int(self.norms.size)

    def validate(self):
        sizes = {self.probs.size, self.norms.size, self.iterations.size,
                 self.converged.size}
        if len(sizes) != 1 or self.n == 0:
            raise InvalidInputError("importance table columns disagree in length")
        if np.any(self.norms < 0) or not np.all(np.isfinite(self.norms)):
            raise InvalidInputError("norms must be finite and non-negative")
        if np.any(self.iterations < 0):
            raise InvalidInputError("iterations must be non-negative")
        check_probs(self.probs, n=self.n, tol=1e-12)
        if np.any(self.probs <= 0.0):
            raise DistributionError("every mined probability must be > 0")
        return self


@dataclass
class MiningResult:
    table: ImportanceTable
    init_params: object
    histories: list = None  # [HistoryRecord], when recording was on
    embedding_spread: float = None  # mean pairwise distance of private embeddings


def _mine_one(task):
    """Train one private model; pure in (spec, sample, cfg, index, init)."""
    spec, sample, cfg, index, params0 = task
    model = get_model(spec)
    selector = cfg.base_selector or model.base_selector
    rng = stream_rng(cfg.seed, STREAM_MINE, index)

    params = copy_params(params0)
    trace = model.forward(params, sample, rng=rng)
    loss = float(trace.loss)
    grad_sum = np.zeros_like(np.atleast_1d(param_block(params, selector)))
    norm_sum = 0.0
    losses = [loss]
    steps = 0
    while loss > cfg.epsilon and steps < cfg.t_max:
        if not np.isfinite(loss):
            raise DivergenceError(
                f"private training diverged on sample {index} at step {steps}"
            )
        grads = model.backward(params, sample, trace)
        if cfg.record_history:
            base_grad = param_block(grads, selector)
            grad_sum += base_grad
            norm_sum += matrix_norm(base_grad, cfg.norm_kind)
        params = sgd_step(params, grads, cfg.lr)
        steps += 1
        trace = model.forward(params, sample, rng=rng)
        loss = float(trace.loss)
        if cfg.record_history:
            losses.append(loss)
    if not np.isfinite(loss):
        raise DivergenceError(f"private training diverged on sample {index}")

    base = param_block(params, selector)
    norm = matrix_norm(base, cfg.norm_kind)
    history = None
    if cfg.record_history:
        history = HistoryRecord(
            base_final=base.copy(),
            grad_sum=grad_sum,
            norm_sum=norm_sum,
            losses=losses,
        )
    emb = None
    if cfg.embed_diagnostic and hasattr(params, "w_emb"):
        emb = params.w_emb.copy()
    return index, norm, steps, bool(loss <= cfg.epsilon), history, emb


def resolve_workers(n_workers=None):
    """Explicit argument, else the GRADMINE_WORKERS variable, else all cores."""
    if n_workers is not None:
        return max(1, int(n_workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def mine_importance(dataset, spec, cfg, n_workers=None):
    """Run private training for every sample and build the table.

    Every private model starts from the same shared initialization (drawn
    from ``cfg.seed``); per-sample randomness is keyed by sample index, so
    the result does not depend on worker count or scheduling.
    """
    dataset = as_dataset(dataset)
    samples = list(dataset)
    if not samples:
        raise InvalidInputError("empty dataset")
    validate_dataset(spec, samples)
    model = get_model(spec)
    selector = cfg.base_selector or model.base_selector
    params0 = model.init_params(cfg.seed)
    param_block(params0, selector)  # fail fast on a bad selector

    tasks = [(spec, s, cfg, i, params0) for i, s in enumerate(samples)]
    workers = resolve_workers(n_workers)
    if workers == 1 or len(samples) == 1:
        outputs = [_mine_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(tasks) // (workers * 4))
            outputs = list(pool.map(_mine_one, tasks, chunksize=chunk))

    n = len(samples)
    norms = np.empty(n)
    iterations = np.empty(n, dtype=np.int64)
    converged = np.empty(n, dtype=bool)
    histories = [None] * n if cfg.record_history else None
    embeddings = [None] * n if cfg.embed_diagnostic else None
    for index, norm, steps, ok, history, emb in outputs:
        norms[index] = norm
        iterations[index] = steps
        converged[index] = ok
        if histories is not None:
            histories[index] = history
        if embeddings is not None:
            embeddings[index] = emb

    probs = build_distribution(norms, smoothing=0.0).probs
    table = ImportanceTable(
        model=spec.kind,
        base_selector=selector,
        epsilon=cfg.epsilon,
        seed=cfg.seed,
        norm_kind=cfg.norm_kind,
        norms=norms,
        probs=probs,
        iterations=iterations,
        converged=converged,
    ).validate()

    spread = None
    if embeddings is not None and all(e is not None for e in embeddings):
        dists = [
            frobenius_norm(embeddings[i] - embeddings[j])
            for i in range(n)
            for j in range(i + 1, n)
        ]
        spread = float(np.mean(dists)) if dists else 0.0
    return MiningResult(
        table=table, init_params=params0, histories=histories,
        embedding_spread=spread,
    )


def history_sum_check(final_base, init_base, history, lr, tol=1e-9):
    """Verify the recorded-run identities of the mined proxy.

    Checks that the final block equals the initialization minus the
    step-scaled gradient sum (within ``tol`` per entry) and that its norm
    obeys the triangle bound  ||final|| <= ||init|| + lr * sum ||g_t||.
    """
    if history is None:
        raise UnsupportedOperationError("mining ran without record_history")
    reconstructed = init_base - lr * history.grad_sum
    if np.max(np.abs(final_base - reconstructed)) > tol:
        return False
    lhs = frobenius_norm(final_base)
    rhs = frobenius_norm(init_base) + lr * history.norm_sum
    return lhs <= rhs + 1e-12 * (1.0 + rhs)


def build_distribution(norms, smoothing=0.0):
    """Sampling distribution proportional to (norm + smoothing * mean norm).

    ``smoothing`` = 0 reproduces the plain ratio of norms; larger values
    pull the distribution toward uniform and guarantee strictly positive
    probabilities when some norms are zero.
    """
    if hasattr(norms, "norms"):
        norms = norms.norms
    v = np.ascontiguousarray(norms, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DistributionError("norms must be a non-empty 1-D vector")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise DistributionError("norms must be finite and non-negative")
    if smoothing < 0:
        raise ConfigError("smoothing must be >= 0")
    shifted = v + smoothing * v.mean()
    total = shifted.sum()
    if total <= 0.0:
        raise DistributionError(
            "all norms are zero and smoothing is 0; distribution degenerate"
        )
    return build_alias(shifted / total)


def save_importance(path, table):
    table.validate()
    payload = {
        "model": table.model,
        "base_selector": table.base_selector,
        "epsilon": table.epsilon,
        "seed": int(table.seed),
        "norm_kind": table.norm_kind,
        "norms": table.norms.tolist(),
        "probs": table.probs.tolist(),
        "iterations": table.iterations.tolist(),
        "converged": [bool(c) for c in table.converged],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_importance(path):
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid importance JSON: {exc.msg}", line=exc.lineno)
    missing = [k for k in IMPORTANCE_KEYS if k not in payload]
    if missing:
        raise InvalidInputError(f"importance file missing keys: {missing}")
    return ImportanceTable(
        model=payload["model"],
        base_selector=payload["base_selector"],
        epsilon=payload["epsilon"],
        seed=payload["seed"],
        norm_kind=payload["norm_kind"],
        norms=payload["norms"],
        probs=payload["probs"],
        iterations=payload["iterations"],
        converged=payload["converged"],
    ).validate()


class ImportanceMiner(ParamsMixin):
    """Fit-style interface to the miner.

    ``fit`` mines the dataset and exposes the result as the standard
    trailing-underscore attributes; ``distribution()`` turns the table
    into alias tables ready for the training loop, with optional
    smoothing toward uniform.
    """

    def __init__(
        self,
        model="rnn",
        epsilon=0.01,
        lr=0.1,
        t_max=5000,
        seed=0,
        base_selector=None,
        norm_kind="frobenius",
        smoothing=0.0,
        n_workers=None,
        record_history=False,
        embed_diagnostic=False,
        embed_dim=8,
        hidden=8,
        classes=2,
        context=8,
        cd_k=1,
    ):
        self.model = model
        self.epsilon = epsilon
        self.lr = lr
        self.t_max = t_max
        self.seed = seed
        self.base_selector = base_selector
        self.norm_kind = norm_kind
        self.smoothing = smoothing
        self.n_workers = n_workers
        self.record_history = record_history
        self.embed_diagnostic = embed_diagnostic
        self.embed_dim = embed_dim
        self.hidden = hidden
        self.classes = classes
        self.context = context
        self.cd_k = cd_k

    def fit(self, X, y=None):
        dataset = as_dataset(X)
        spec = spec_for_dataset(
            dataset,
            self.model,
            embed=self.embed_dim,
            hidden=self.hidden,
            classes=self.classes,
            context=self.context,
            cd_k=self.cd_k,
        )
        cfg = FimConfig(
            epsilon=self.epsilon,
            lr=self.lr,
            t_max=self.t_max,
            seed=self.seed,
            base_selector=self.base_selector,
            norm_kind=self.norm_kind,
            record_history=self.record_history,
            embed_diagnostic=self.embed_diagnostic,
        )
        self.result_ = mine_importance(dataset, spec, cfg, n_workers=self.n_workers)
        self.spec_ = spec
        self.table_ = self.result_.table
        self.norms_ = self.table_.norms
        self.probs_ = self.table_.probs
        self.iterations_ = self.table_.iterations
        self.converged_ = self.table_.converged
        return self

    def distribution(self):
        return build_distribution(self.table_, smoothing=self.smoothing)
