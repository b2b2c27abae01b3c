"""Estimator plumbing: scikit-learn compatible parameter handling and
input-validation helpers shared by the fit-style classes."""

import inspect

import numpy as np

from .errors import ConfigError, DistributionError

PROB_SUM_TOL = 1e-9


class ParamsMixin:
    """get_params/set_params over the ``__init__`` signature.

    Duck-compatible with scikit-learn's ``BaseEstimator`` so the estimators
    here work with ``clone``, pipelines, and grid search without importing
    sklearn.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [
            name
            for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ConfigError(
                    f"unknown parameter {name!r} for {type(self).__name__}"
                )
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def check_probs(probs, n=None, tol=PROB_SUM_TOL):
    """Validate a probability vector; returns it as a float64 array.

    Entries must be non-negative and sum to 1 within ``tol``.
    """
    p = np.ascontiguousarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DistributionError("probabilities must be a non-empty 1-D vector")
    if n is not None and p.size != n:
        raise DistributionError(f"expected {n} probabilities, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise DistributionError("probabilities contain non-finite entries")
    if np.any(p < 0):
        raise DistributionError("probabilities contain negative entries")
    total = float(p.sum())
    if total <= 0.0:
        raise DistributionError("probabilities sum to zero")
    if abs(total - 1.0) > tol:
        raise DistributionError(f"probabilities sum to {total}, not 1")
    return p


def check_positive(value, name):
    if not value > 0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    return value
