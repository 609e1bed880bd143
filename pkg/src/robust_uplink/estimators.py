"""scikit-learn style wrappers around the optimizers.

Each row of ``X`` is one operating point ``[power, alpha, C, dC, p]`` with
linear power. ``fit`` finds a single transmission strategy (power split and,
under fading, rates) maximizing the mean throughput over the rows;
``predict`` returns the throughput of that fitted strategy at each row.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DomainError
from .fading import DECODING_MODES, SampleSet, optimize_fading, optimize_shared, pack_point
from .model import SystemParams
from .nonfading import MODES, _batch_average, achievable_throughput, noises_for_mode
from .numerics import SCHEMES, maximize_on_simplex

__all__ = [
    "PARAM_COLUMNS",
    "check_system_params",
    "params_to_array",
    "LayeredBroadcastOptimizer",
    "FadingBroadcastOptimizer",
]

PARAM_COLUMNS = ("power", "alpha", "cap_low", "cap_delta", "p_low")


def check_system_params(X) -> list[SystemParams]:
    """Validate an ``(n, 5)`` array of operating points and convert it."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != len(PARAM_COLUMNS):
        raise DomainError(f"expected {len(PARAM_COLUMNS)} columns {PARAM_COLUMNS}, got {X.shape[1]}")
    return [SystemParams(*row) for row in X]


def params_to_array(params) -> np.ndarray:
    if isinstance(params, SystemParams):
        params = [params]
    return np.array([[getattr(p, c) for c in PARAM_COLUMNS] for p in params], dtype=float)


class LayeredBroadcastOptimizer(BaseEstimator):
    """Power split of the layered scheme with constant unit gains.

    Parameters
    ----------
    mode : {"separate", "joint"}
        Decompression of the coarse descriptions.
    scheme : str
        Name in :data:`numerics.SCHEMES` selecting the active layers.
    budget : int
        Refinement evaluations after the initial grid.
    """

    def __init__(self, mode="joint", scheme="five-layer", budget=4000):
        self.mode = mode
        self.scheme = scheme
        self.budget = budget

    def _validate(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}")

    def fit(self, X, y=None):
        self._validate()
        points = check_system_params(X)
        objectives = [_batch_average(p, noises_for_mode(p, self.mode)) for p in points]

        def mean_objective(lams):
            return np.mean([f(lams) for f in objectives], axis=0)

        res = maximize_on_simplex(mean_objective, SCHEMES[self.scheme], self.budget)
        self.lambda_ = res.weights
        self.training_score_ = float(res.value)
        self.n_evaluations_ = res.evaluations
        self.n_features_in_ = len(PARAM_COLUMNS)
        return self

    def predict(self, X):
        check_is_fitted(self, "lambda_")
        return np.array(
            [achievable_throughput(p, self.lambda_, self.mode).average for p in check_system_params(X)]
        )

    def score(self, X, y=None):
        """Mean throughput of the fitted power split over ``X``."""
        return float(np.mean(self.predict(X)))


class FadingBroadcastOptimizer(BaseEstimator):
    """Power split and rates of two-layer coding under Rayleigh fading.

    Parameters
    ----------
    mode : {"common", "individual"}
        Outage rule at the decoder.
    layers : {1, 2}
    n_samples : int
        Fading draws per operating point (shared by every candidate).
    seed : int
    budget : int
        Objective evaluations per fit.
    symmetric : bool
        Give both users the same rate at each layer.
    """

    def __init__(self, mode="individual", layers=2, n_samples=20000, seed=0, budget=500, symmetric=True):
        self.mode = mode
        self.layers = layers
        self.n_samples = n_samples
        self.seed = seed
        self.budget = budget
        self.symmetric = symmetric

    def _validate(self):
        if self.mode not in DECODING_MODES:
            raise DomainError(f"mode must be one of {DECODING_MODES}, got {self.mode!r}")
        if self.layers not in (1, 2):
            raise DomainError("layers must be 1 or 2")
        if int(self.n_samples) < 1:
            raise DomainError("n_samples must be >= 1")

    def _samples(self, params: SystemParams) -> SampleSet:
        return SampleSet(params, int(self.n_samples), int(self.seed))

    def fit(self, X, y=None):
        self._validate()
        points = check_system_params(X)
        if len(points) == 1:
            opt = optimize_fading(
                points[0], self.mode, self.layers, budget=self.budget,
                symmetric=self.symmetric, samples=self._samples(points[0]),
            )
            self.lambda2_, self.rates_, self.training_score_ = opt.lambda2, opt.rates, opt.estimate
        else:
            self._fit_many(points)
        self.n_features_in_ = len(PARAM_COLUMNS)
        return self

    def _fit_many(self, points):
        lam2, rates, _ = optimize_shared(
            [self._samples(p) for p in points], self.mode, self.layers, self.budget, symmetric=self.symmetric,
        )
        self.lambda2_, self.rates_ = lam2, rates
        self.training_score_ = float(np.mean(self.predict(params_to_array(points))))

    def predict(self, X):
        check_is_fitted(self, "rates_")
        return np.array(
            [self._samples(p).estimate(self.lambda2_, self.rates_, self.mode)[0] for p in check_system_params(X)]
        )

    def score(self, X, y=None):
        return float(np.mean(self.predict(X)))

    def strategy(self) -> list[float]:
        """``[lambda2, rates...]`` in the optimizer's rate layout."""
        check_is_fitted(self, "rates_")
        return pack_point(self.lambda2_, self.rates_, self.layers, self.symmetric)
