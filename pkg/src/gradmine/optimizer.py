"""SGD and importance-weighted SGD training loops.

The two modes share one code path: both draw indices through the alias
sampler from a materialized sequence, so runs with the same seed consume
identical random streams and differ only in the distribution and the
per-draw step correction. An epoch is N sampled steps, which keeps the
gradient-evaluation budget of weighted and uniform runs equal.

Updates:

    uniform      w <- w - lr * g_i
    importance   w <- w - lr / (N p_i) * g_i      (unbiased reweighting)
"""

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .base import ParamsMixin, check_probs
from .data import Dataset, PIANOROLL, SEQCLASS
from .errors import ConfigError, DistributionError, DivergenceError, ParseError
from .models import (
    STREAM_DRAW,
    STREAM_EVAL,
    STREAM_MODEL,
    ModelSpec,
    copy_params,
    get_model,
    map_blocks,
    params_to_vector,
    spec_for_dataset,
    validate_dataset,
)
from .sampling import build_alias, generate_sequence

UNIFORM = "uniform"
IMPORTANCE = "importance"

METRICS_HEADER = ["epoch", "split", "loss", "error_rate", "grad_var", "wall_ms"]


def sgd_step(params, grads, lr):
    """Plain descent step; returns new parameters."""
    return map_blocks(lambda p, g: p - lr * g, params, grads)


def is_sgd_step(params, grads, lr, n, p_i, clip=None):
    """Importance-corrected step with effective size lr / (n * p_i).

    With p_i = 1/n this reproduces ``sgd_step`` bitwise. ``clip`` bounds
    the effective step at clip * lr to guard against tiny probabilities.
    """
    if not p_i > 0.0:
        raise DistributionError(f"sampling probability must be > 0, got {p_i}")
    step = lr / (n * p_i)
    if clip is not None:
        step = min(step, clip * lr)
    return map_blocks(lambda p, g: p - step * g, params, grads)


@dataclass
class TrainConfig:
    spec: ModelSpec
    lr: float
    epochs: int
    sampler: str = UNIFORM
    importance: object = None  # ImportanceTable when sampler == "importance"
    seed: int = 0
    eval_every: int = 1
    clip: float = None

    def __post_init__(self):
        if self.sampler not in (UNIFORM, IMPORTANCE):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.sampler == IMPORTANCE and self.importance is None:
            raise ConfigError("importance sampling needs an importance table")
        if not self.lr > 0:
            raise ConfigError("lr must be > 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")

    def digest(self):
        payload = {
            "spec": self.spec.to_dict(),
            "lr": self.lr,
            "epochs": self.epochs,
            "sampler": self.sampler,
            "seed": self.seed,
            "eval_every": self.eval_every,
            "clip": self.clip,
        }
        if self.importance is not None:
            payload["importance"] = hashlib.sha256(
                np.asarray(self.importance.probs, dtype=np.float64).tobytes()
            ).hexdigest()
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class MetricsRow:
    epoch: int
    split: str
    loss: float
    error_rate: float
    grad_var: float
    wall_ms: float


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)
    config_hash: str = ""
    seed: int = 0

    def split_rows(self, split):
        return [r for r in self.rows if r.split == split]

    def losses(self, split):
        return np.array([r.loss for r in self.split_rows(split)])

    def __eq__(self, other):
        if not isinstance(other, MetricsLog):
            return NotImplemented
        return self.rows == other.rows


def _evaluate(model, params, samples, probs, epoch, seed):
    """Loss, error rate, and estimator variance over a sample list."""
    rng = None
    if model.kind == "rnnrbm":
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), STREAM_EVAL, int(epoch)])
        )
    losses = np.empty(len(samples))
    wrong = total = 0
    grads = np.empty((len(samples), params_to_vector(params).size))
    for i, sample in enumerate(samples):
        trace = model.forward(params, sample, rng=rng)
        losses[i] = trace.loss
        grads[i] = params_to_vector(model.backward(params, sample, trace))
        w, t = model.trace_errors(trace, sample)
        wrong += w
        total += t
    grad_var = analysis.gradient_variance(grads, probs)
    return float(losses.mean()), wrong / total, grad_var


def train(dataset, params0, cfg, eval_dataset=None):
    """Run the sampled training loop; returns (params, metrics log).

    Fully deterministic given (dataset, params0, cfg): index draws, model
    randomness, and per-epoch evaluation each own a seeded sub-stream.
    """
    samples = list(dataset)
    n = len(samples)
    if n == 0:
        raise ConfigError("empty dataset")
    validate_dataset(cfg.spec, samples)
    model = get_model(cfg.spec)

    if cfg.sampler == IMPORTANCE:
        probs = check_probs(np.asarray(cfg.importance.probs, dtype=np.float64))
        if probs.size != n:
            raise ConfigError(
                f"importance table covers {probs.size} samples, dataset has {n}"
            )
        if np.any(probs <= 0.0):
            raise DistributionError("importance table has a zero probability")
    else:
        probs = np.full(n, 1.0 / n)

    dist = build_alias(probs)
    rng_draw = np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed), STREAM_DRAW])
    )
    rng_model = np.random.default_rng(
        np.random.SeedSequence([int(cfg.seed), STREAM_MODEL])
    )
    schedule = generate_sequence(dist, cfg.epochs * n, rng_draw)

    log = MetricsLog(config_hash=cfg.digest(), seed=cfg.seed)
    params = copy_params(params0)
    start = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        for step in range(n):
            idx = int(schedule[(epoch - 1) * n + step])
            sample = samples[idx]
            trace = model.forward(params, sample, rng=rng_model)
            if not np.isfinite(trace.loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, step {step}, sample {idx}"
                )
            grads = model.backward(params, sample, trace)
            if cfg.sampler == IMPORTANCE:
                params = is_sgd_step(
                    params, grads, cfg.lr, n, probs[idx], clip=cfg.clip
                )
            else:
                params = sgd_step(params, grads, cfg.lr)

        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            loss, err, gvar = _evaluate(model, params, samples, probs, epoch, cfg.seed)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite evaluation loss at epoch {epoch}")
            wall = (time.perf_counter() - start) * 1e3
            log.rows.append(MetricsRow(epoch, "train", loss, err, gvar, wall))
            if eval_dataset is not None:
                eloss, eerr, egvar = _evaluate(
                    model,
                    params,
                    list(eval_dataset),
                    np.full(len(eval_dataset), 1.0 / len(eval_dataset)),
                    epoch,
                    cfg.seed,
                )
                wall = (time.perf_counter() - start) * 1e3
                log.rows.append(MetricsRow(epoch, "eval", eloss, eerr, egvar, wall))
    return params, log


def save_metrics(path, log):
    """Metrics CSV: one row per (epoch, split), floats at 17 digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for r in log.rows:
            writer.writerow(
                [r.epoch, r.split]
                + [f"{v:.17g}" for v in (r.loss, r.error_rate, r.grad_var, r.wall_ms)]
            )


def load_metrics(path):
    log = MetricsLog()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader, start=1):
            if i == 1:
                if row != METRICS_HEADER:
                    raise ParseError(f"bad metrics header {row}", line=i)
                continue
            if len(row) != len(METRICS_HEADER):
                raise ParseError(f"expected {len(METRICS_HEADER)} fields", line=i)
            try:
                log.rows.append(
                    MetricsRow(
                        epoch=int(row[0]),
                        split=row[1],
                        loss=float(row[2]),
                        error_rate=float(row[3]),
                        grad_var=float(row[4]),
                        wall_ms=float(row[5]),
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), line=i) from exc
    return log


class Trainer(ParamsMixin):
    """Fit-style wrapper around :func:`train`.

    Parameters mirror the config; the model's symbol space is taken from
    the dataset at fit time. After ``fit``, the learned parameter blocks
    are in ``params_`` and the per-epoch metrics in ``log_``.
    """

    def __init__(
        self,
        model="lstm",
        lr=0.5,
        epochs=10,
        sampler=UNIFORM,
        importance=None,
        seed=0,
        eval_every=1,
        clip=None,
        embed_dim=8,
        hidden=8,
        classes=2,
        context=8,
        cd_k=1,
    ):
        self.model = model
        self.lr = lr
        self.epochs = epochs
        self.sampler = sampler
        self.importance = importance
        self.seed = seed
        self.eval_every = eval_every
        self.clip = clip
        self.embed_dim = embed_dim
        self.hidden = hidden
        self.classes = classes
        self.context = context
        self.cd_k = cd_k

    def _spec(self, dataset):
        return spec_for_dataset(
            dataset,
            self.model,
            embed=self.embed_dim,
            hidden=self.hidden,
            classes=self.classes,
            context=self.context,
            cd_k=self.cd_k,
        )

    def fit(self, X, y=None):
        dataset = as_dataset(X)
        self.spec_ = self._spec(dataset)
        cfg = TrainConfig(
            spec=self.spec_,
            lr=self.lr,
            epochs=self.epochs,
            sampler=self.sampler,
            importance=self.importance,
            seed=self.seed,
            eval_every=self.eval_every,
            clip=self.clip,
        )
        adapter = get_model(self.spec_)
        params0 = adapter.init_params(self.seed)
        self.params_, self.log_ = train(dataset, params0, cfg)
        return self

    def predict(self, X):
        adapter = get_model(self.spec_)
        return np.array([adapter.predict(self.params_, s) for s in as_dataset(X)])

    def score(self, X, y=None):
        """Mean accuracy under argmax decoding (1 - error rate)."""
        adapter = get_model(self.spec_)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, STREAM_EVAL]))
        wrong = total = 0
        for s in as_dataset(X):
            w, t = adapter.error_count(self.params_, s, rng=rng)
            wrong += w
            total += t
        return 1.0 - wrong / total


def as_dataset(X):
    """Accept a Dataset or a plain list of samples."""
    if isinstance(X, Dataset):
        return X
    samples = list(X)
    if not samples:
        raise ConfigError("empty dataset")
    first = samples[0]
    if hasattr(first, "frames"):
        return Dataset(kind=PIANOROLL, samples=samples, vocab=first.width)
    vocab = int(max(int(s.tokens.max()) for s in samples)) + 1
    return Dataset(kind=SEQCLASS, samples=samples, vocab=vocab)
