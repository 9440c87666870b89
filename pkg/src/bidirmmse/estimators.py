"""
scikit-learn style estimators wrapping the per-symbol receivers.

``fit(X, y)`` runs one pass of adaptation over a packet: ``X`` holds one
received vector per row and ``y`` the transmitted symbols of the desired
user. The first ``training_len`` entries of ``y`` drive the adaptation;
afterwards the receiver switches to decision-directed operation and the
remaining entries of ``y`` are ignored. ``transform`` applies the final
filter and ``predict`` returns differential data decisions.

Trajectories recorded during ``fit``:

``coef_path_``
    filter after processing each symbol, shape ``(n_symbols, M)``
``decisions_``
    differential decision ``a[i]`` made with ``w[i-1]`` (``nan`` at ``i = 0``)
``output_power_``
    post-update output power ``|w[i]^H r[i]|^2``
``rho_path_``
    branch weights in use at each symbol (bidirectional receivers only)
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_received, check_symbols
from .bidirectional import (
    DEFAULT_DELTA,
    DEFAULT_J_MAX,
    DEFAULT_LAMBDA,
    DEFAULT_LAMBDA_E,
    DEFAULT_LAMBDA_M,
    DEFAULT_LAMBDA_P,
    DEFAULT_MU,
    DEFAULT_NU,
    DEFAULT_WINDOW_M,
    BidirectionalCgState,
    BidirectionalNlmsState,
    WeightingState,
    bidirectional_cg_step,
    bidirectional_nlms_step,
)
from .receivers import (
    ConventionalCgState,
    ConventionalNlmsState,
    ConventionalRlsState,
    DifferentialCgState,
    DifferentialNlmsState,
    conventional_cg_step,
    conventional_nlms_step,
    conventional_rls_step,
    detect_bpsk,
    detect_dbpsk,
    differential_cg_step,
    differential_mmse_step,
)
from .signal import ReceivedWindow

__all__ = [
    "ConventionalNLMS",
    "ConventionalRLS",
    "ConventionalCG",
    "DifferentialNLMS",
    "DifferentialCG",
    "BidirectionalNLMS",
    "BidirectionalCG",
]


class _AdaptiveReceiver(BaseEstimator):
    _coherent = False
    _first_update = 0

    def _initial_filter(self, M):
        if self.init_filter is None:
            w0 = np.zeros(M, dtype=complex)
            w0[0] = 1.0
            return w0
        w0 = np.asarray(self.init_filter, dtype=complex)
        if w0.shape != (M,):
            raise ValueError(f"init_filter has shape {w0.shape}, expected {(M,)}")
        return w0.copy()

    def _make_state(self, w0):
        raise NotImplementedError

    def _step(self, state, X, b, i):
        raise NotImplementedError

    def _rho(self, state):
        return None

    def fit(self, X, y):
        """Adapt over the packet ``X`` with training symbols ``y``."""
        X = check_received(X)
        n, M = X.shape
        training_len = n if self.training_len is None else int(self.training_len)
        if training_len < 0:
            raise ValueError("training_len must be non-negative")
        y = check_symbols(np.asarray(y, dtype=float).ravel()[: min(training_len, n)], "y")
        if y.shape[0] < min(training_len, n):
            raise ValueError(f"y holds {y.shape[0]} symbols but training_len is {training_len}")

        state = self._make_state(self._initial_filter(M))
        w = state.w
        b = np.ones(n)
        decisions = np.full(n, np.nan)
        path = np.empty((n, M), dtype=complex)
        power = np.empty(n)
        rho_path = np.full((n, 3), np.nan) if self._rho(state) is not None else None

        for i in range(n):
            r = X[i]
            x_now = np.vdot(w, r)
            if i >= 1:
                decisions[i] = detect_dbpsk(x_now, np.vdot(w, X[i - 1]))
            if i < training_len:
                b[i] = y[i]
            elif self._coherent:
                b[i] = detect_bpsk(x_now)
            elif i >= 1:
                b[i] = decisions[i] * b[i - 1]
            if i >= self._first_update:
                state = self._step(state, X, b, i)
                w = state.w
            path[i] = w
            power[i] = abs(np.vdot(w, r)) ** 2
            if rho_path is not None:
                rho_path[i] = self._rho(state)

        self.coef_ = w
        self.coef_path_ = path
        self.decisions_ = decisions
        self.output_power_ = power
        self.symbols_used_ = b
        if rho_path is not None:
            self.rho_path_ = rho_path
        self.n_features_in_ = M
        self.state_ = state
        return self

    def transform(self, X):
        """Filter outputs ``w^H r`` of the adapted filter, one per row."""
        check_is_fitted(self, "coef_")
        X = check_received(X, self.n_features_in_)
        return X @ self.coef_.conj()

    def predict(self, X):
        """Differential data decisions from consecutive outputs (``nan`` first)."""
        x = self.transform(X)
        out = np.full(x.shape[0], np.nan)
        for i in range(1, x.shape[0]):
            out[i] = detect_dbpsk(x[i], x[i - 1])
        return out


def _window(X, b, i):
    return ReceivedWindow(X[i], X[i - 1], X[i - 2], b[i], b[i - 1], b[i - 2])


class ConventionalNLMS(_AdaptiveReceiver):
    """NLMS adapting directly on the transmitted symbol."""

    _coherent = True

    def __init__(self, mu=DEFAULT_MU, training_len=None, init_filter=None):
        self.mu = mu
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return ConventionalNlmsState(w0, self.mu)

    def _step(self, state, X, b, i):
        return conventional_nlms_step(state, X[i], b[i])


class ConventionalRLS(_AdaptiveReceiver):
    """Exponentially weighted RLS adapting directly on the transmitted symbol."""

    _coherent = True

    def __init__(self, lam=DEFAULT_LAMBDA, delta=DEFAULT_DELTA, training_len=None, init_filter=None):
        self.lam = lam
        self.delta = delta
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return ConventionalRlsState.initial(w0, self.lam, self.delta)

    def _step(self, state, X, b, i):
        return conventional_rls_step(state, X[i], b[i])


class ConventionalCG(_AdaptiveReceiver):
    """Exponentially weighted LS on the transmitted symbol, solved by CG."""

    _coherent = True

    def __init__(self, lam=DEFAULT_LAMBDA, delta=DEFAULT_DELTA, j_max=DEFAULT_J_MAX, training_len=None, init_filter=None):
        self.lam = lam
        self.delta = delta
        self.j_max = j_max
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return ConventionalCgState.initial(w0, self.lam, self.delta, self.j_max)

    def _step(self, state, X, b, i):
        return conventional_cg_step(state, X[i], b[i])


class DifferentialNLMS(_AdaptiveReceiver):
    """Two-instant differential MMSE receiver with NLMS adaptation."""

    _first_update = 2

    def __init__(self, mu=DEFAULT_MU, lambda_m=DEFAULT_LAMBDA_M, training_len=None, init_filter=None):
        self.mu = mu
        self.lambda_m = lambda_m
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return DifferentialNlmsState.initial(w0, self.mu, self.lambda_m)

    def _step(self, state, X, b, i):
        return differential_mmse_step(state, _window(X, b, i))


class DifferentialCG(_AdaptiveReceiver):
    """Two-instant differential LS receiver solved by CG."""

    _first_update = 2

    def __init__(
        self,
        lam=DEFAULT_LAMBDA,
        lambda_m=DEFAULT_LAMBDA_M,
        delta=DEFAULT_DELTA,
        j_max=DEFAULT_J_MAX,
        training_len=None,
        init_filter=None,
    ):
        self.lam = lam
        self.lambda_m = lambda_m
        self.delta = delta
        self.j_max = j_max
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return DifferentialCgState.initial(w0, self.lam, self.lambda_m, self.delta, j_max=self.j_max)

    def _step(self, state, X, b, i):
        return differential_cg_step(state, _window(X, b, i))


class _Weighted:
    def _weighting(self):
        return WeightingState(
            mode=self.weighting,
            rho=self.rho,
            nu=self.nu,
            lambda_p=self.lambda_p,
            window_m=self.window_m,
            lambda_e=self.lambda_e,
        )

    def _rho(self, state):
        return state.weighting.rho


class BidirectionalNLMS(_Weighted, _AdaptiveReceiver):
    """Three-instant bidirectional receiver with NLMS adaptation.

    ``weighting`` selects fixed weights (``"off"``, with ``rho`` defaulting
    to all ones), power-differential ``"switching"`` or error-driven
    ``"mixing"``.
    """

    _first_update = 2

    def __init__(
        self,
        mu=DEFAULT_MU,
        lambda_m=DEFAULT_LAMBDA_M,
        weighting="off",
        rho=None,
        nu=DEFAULT_NU,
        lambda_p=DEFAULT_LAMBDA_P,
        window_m=DEFAULT_WINDOW_M,
        lambda_e=DEFAULT_LAMBDA_E,
        training_len=None,
        init_filter=None,
    ):
        self.mu = mu
        self.lambda_m = lambda_m
        self.weighting = weighting
        self.rho = rho
        self.nu = nu
        self.lambda_p = lambda_p
        self.window_m = window_m
        self.lambda_e = lambda_e
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return BidirectionalNlmsState.initial(w0, self.mu, self.lambda_m, weighting=self._weighting())

    def _step(self, state, X, b, i):
        return bidirectional_nlms_step(state, _window(X, b, i))


class BidirectionalCG(_Weighted, _AdaptiveReceiver):
    """Three-instant bidirectional LS receiver solved by warm-started CG."""

    _first_update = 2

    def __init__(
        self,
        lam=DEFAULT_LAMBDA,
        lambda_m=DEFAULT_LAMBDA_M,
        delta=DEFAULT_DELTA,
        j_max=DEFAULT_J_MAX,
        weighting="off",
        rho=None,
        nu=DEFAULT_NU,
        lambda_p=DEFAULT_LAMBDA_P,
        window_m=DEFAULT_WINDOW_M,
        lambda_e=DEFAULT_LAMBDA_E,
        training_len=None,
        init_filter=None,
    ):
        self.lam = lam
        self.lambda_m = lambda_m
        self.delta = delta
        self.j_max = j_max
        self.weighting = weighting
        self.rho = rho
        self.nu = nu
        self.lambda_p = lambda_p
        self.window_m = window_m
        self.lambda_e = lambda_e
        self.training_len = training_len
        self.init_filter = init_filter

    def _make_state(self, w0):
        return BidirectionalCgState.initial(
            w0, self.lam, self.lambda_m, self.delta, weighting=self._weighting(), j_max=self.j_max
        )

    def _step(self, state, X, b, i):
        return bidirectional_cg_step(state, _window(X, b, i))
