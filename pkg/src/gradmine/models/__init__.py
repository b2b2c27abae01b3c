"""Model registry: a uniform train/eval interface over the three models.

Each adapter is stateless; parameters travel explicitly through every
call, so concurrent workers can hold private copies without locks. The
frame model consumes randomness from the generator handed to ``forward``;
the token models ignore it.
"""

import numpy as np

from . import lstm, rnn, rnnrbm
from .common import (
    LSTM,
    MODEL_KINDS,
    RNN,
    RNNRBM,
    STREAM_DRAW,
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_MINE,
    STREAM_MODEL,
    ModelSpec,
    copy_params,
    grad_norm,
    map_blocks,
    param_block,
    param_blocks,
    params_allfinite,
    params_to_vector,
    stream_rng,
    zeros_like_params,
)
from ..errors import ConfigError


class _TokenModel:
    _mod = None

    def __init__(self, spec):
        self.spec = spec
        self.base_selector = self._mod.BASE_SELECTOR

    @property
    def kind(self):
        return self.spec.kind

    def init_params(self, seed):
        return self._mod.init_params(self.spec, seed)

    def forward(self, params, sample, rng=None):
        return self._mod.forward(params, sample)

    def backward(self, params, sample, trace):
        return self._mod.backward(params, sample, trace)

    def loss(self, params, sample, rng=None):
        return self._mod.forward(params, sample).loss

    def predict(self, params, sample):
        return self._mod.predict(params, sample)

    def error_count(self, params, sample, rng=None):
        return self._mod.error_count(params, sample)


class RnnModel(_TokenModel):
    _mod = rnn

    @staticmethod
    def trace_errors(trace, sample):
        if sample.is_classification:
            return int(int(np.argmax(trace.ys[-1])) != sample.label), 1
        pred = np.argmax(trace.ys, axis=1)
        return int(np.sum(pred != sample.targets)), sample.tokens.size


class LstmModel(_TokenModel):
    _mod = lstm

    @staticmethod
    def trace_errors(trace, sample):
        return int(int(np.argmax(trace.probs)) != sample.label), 1


class RnnRbmModel:
    def __init__(self, spec):
        self.spec = spec
        self.base_selector = rnnrbm.BASE_SELECTOR

    @property
    def kind(self):
        return self.spec.kind

    def init_params(self, seed):
        return rnnrbm.init_params(self.spec, seed)

    def forward(self, params, sample, rng=None):
        return rnnrbm.forward(params, sample, k=self.spec.cd_k, rng=rng)

    def backward(self, params, sample, trace):
        return rnnrbm.backward(params, sample, trace)

    def loss(self, params, sample, rng=None):
        return self.forward(params, sample, rng=rng).loss

    def predict(self, params, sample):
        return None

    def error_count(self, params, sample, rng=None):
        return rnnrbm.error_count(params, sample, k=self.spec.cd_k, rng=rng)

    @staticmethod
    def trace_errors(trace, sample):
        wrong = sum(
            int(np.sum((st.recon_prob > 0.5).astype(np.float64) != st.v))
            for st in trace.stats
        )
        return wrong, sample.frames.size


_REGISTRY = {RNN: RnnModel, LSTM: LstmModel, RNNRBM: RnnRbmModel}


def get_model(spec):
    """Adapter instance for a model spec."""
    if spec.kind not in _REGISTRY:
        raise ConfigError(f"unknown model kind {spec.kind!r}")
    return _REGISTRY[spec.kind](spec)


def spec_for_dataset(dataset, kind, **dims):
    """Build a spec whose symbol space matches the dataset."""
    return ModelSpec(kind=kind, vocab=dataset.vocab, **dims)


def validate_dataset(spec, samples):
    """Check that every sample is the kind the model consumes."""
    from ..errors import InvalidInputError

    needs_frames = spec.kind == RNNRBM
    for i, sample in enumerate(samples):
        if hasattr(sample, "frames") != needs_frames:
            have = "frame" if hasattr(sample, "frames") else "token"
            raise InvalidInputError(
                f"sample {i} is a {have} sequence, incompatible with "
                f"model kind {spec.kind!r}"
            )
