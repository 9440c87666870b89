"""
Bidirectional (three-instant) adaptation.

The receive filter is adapted from the three pairwise cost terms built on
instants ``i``, ``i-1`` and ``i-2``::

    J1 = |b[i] w^H r[i-1] - b[i-1] w^H r[i]|^2
    J2 = |b[i] w^H r[i-2] - b[i-2] w^H r[i]|^2
    J3 = |b[i-1] w^H r[i-2] - b[i-2] w^H r[i-1]|^2

weighted by ``rho = (rho1, rho2, rho3)``. The two-instant differential
scheme is the ``rho = (1, 0, 0)`` special case.

Two adaptive solvers are provided: a normalized stochastic-gradient (NLMS)
update and a conjugate-gradient (CG) solve of exponentially weighted
least-squares normal equations. Weights may be fixed, switched on/off from
post-filter power differentials, or mixed convexly from the error terms.

All state objects are mutable and owned by one simulation stream. The
``*_update`` / ``*_step`` functions modify their state in place and return
it for convenience.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_square, check_unit_interval, check_vector

__all__ = [
    "ErrorTriple",
    "NlmsState",
    "CorrelationState",
    "WeightingState",
    "OutputPowerTracker",
    "CgInfo",
    "BidirectionalNlmsState",
    "BidirectionalCgState",
    "error_terms",
    "nlms_update",
    "norm_update",
    "ls_correlation_update",
    "combine_correlations",
    "cg_solve",
    "power_differentials",
    "switching_update",
    "mixing_update",
    "update_weights",
    "enforce_power_constraint",
    "bidirectional_nlms_step",
    "bidirectional_cg_step",
]

DEFAULT_MU = 0.1
DEFAULT_LAMBDA = 0.99
DEFAULT_LAMBDA_E = 0.95
DEFAULT_LAMBDA_M = 0.99
DEFAULT_J_MAX = 5
DEFAULT_NU = 2.0
DEFAULT_LAMBDA_P = 0.9
DEFAULT_WINDOW_M = 32
DEFAULT_DELTA = 0.01
EPS_DEN = 1e-8
MAX_SCALE = 10.0

WEIGHTING_MODES = ("off", "switching", "mixing")


@dataclass(frozen=True)
class ErrorTriple:
    e1: complex
    e2: complex
    e3: complex

    def magnitudes(self):
        return np.abs([self.e1, self.e2, self.e3])


@dataclass
class NlmsState:
    """Filter and step-size normalisation of the NLMS recursion.

    ``m_norm <= 0`` marks an uninitialised normaliser; the first
    :func:`norm_update` then sets it to ``||r||^2`` instead of starting the
    exponential average from zero.
    """

    w: np.ndarray
    mu: float = DEFAULT_MU
    m_norm: float = 0.0
    lambda_m: float = DEFAULT_LAMBDA_M
    eps_den: float = EPS_DEN
    n_clamped: int = 0

    def __post_init__(self):
        self.w = np.array(self.w, dtype=complex)
        check_unit_interval(self.lambda_m, "lambda_m")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")


@dataclass
class CorrelationState:
    """Exponentially weighted branch correlations of the LS formulation."""

    R: np.ndarray  # (3, M, M)
    t: np.ndarray  # (3, M)
    lam: float = DEFAULT_LAMBDA

    @classmethod
    def initial(cls, M, lam=DEFAULT_LAMBDA, delta=DEFAULT_DELTA, branches=3):
        check_unit_interval(lam, "lam", closed_low=False)
        R = np.repeat(delta * np.eye(M, dtype=complex)[None], branches, axis=0)
        return cls(R, np.zeros((branches, M), dtype=complex), lam)

    @property
    def M(self):
        return self.t.shape[1]


@dataclass
class WeightingState:
    """Branch weights and the bookkeeping of the switching and mixing rules.

    ``rho`` defaults to all ones for ``off`` and ``switching`` and to equal
    thirds for ``mixing``.
    """

    mode: str = "off"
    rho: np.ndarray = None
    nu: float = DEFAULT_NU
    lambda_p: float = DEFAULT_LAMBDA_P
    window_m: int = DEFAULT_WINDOW_M
    lambda_e: float = DEFAULT_LAMBDA_E
    power_history: deque = None
    smoothed_rms: np.ndarray = None
    n_switched: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=int))

    def __post_init__(self):
        if self.mode not in WEIGHTING_MODES:
            raise ValueError(f"mode must be one of {WEIGHTING_MODES}, got {self.mode!r}")
        if self.rho is None:
            self.rho = np.full(3, 1.0 / 3.0) if self.mode == "mixing" else np.ones(3)
        self.rho = np.array(self.rho, dtype=float)
        if self.rho.shape != (3,) or np.any(self.rho < 0):
            raise ValueError("rho must hold three non-negative weights")
        if self.nu <= 1:
            raise ValueError("nu must exceed 1")
        if self.window_m < 2:
            raise ValueError("window_m must be at least 2")
        check_unit_interval(self.lambda_p, "lambda_p")
        check_unit_interval(self.lambda_e, "lambda_e")
        if self.power_history is None:
            self.power_history = deque(maxlen=self.window_m)


class OutputPowerTracker:
    """Exponentially smoothed output power of the *current* filter.

    Keeps ``Q = (1 - lam) sum_l lam^(i-l) r[l] r[l]^H`` so that
    ``w^H Q w`` is the smoothed ``|w^H r|^2`` evaluated with ``w`` itself.
    The first updates are bias-corrected by ``1 - lam^n``.
    """

    def __init__(self, M, lam=DEFAULT_LAMBDA_M):
        self.lam = check_unit_interval(lam, "lam", closed_high=False)
        self.Q = np.zeros((M, M), dtype=complex)
        self.n = 0

    def update(self, r):
        self.Q *= self.lam
        self.Q += (1.0 - self.lam) * np.outer(r, np.conj(r))
        self.n += 1

    def power(self, w):
        if self.n == 0:
            raise ValueError("no received vectors seen yet")
        return float(np.real(np.vdot(w, self.Q @ w))) / (1.0 - self.lam**self.n)


@dataclass
class CgInfo:
    n_iter: int
    degenerate: bool
    residual_norm: float


def _outputs(w, window):
    return np.vdot(w, window.r_now), np.vdot(w, window.r_prev1), np.vdot(w, window.r_prev2)


def error_terms(w_prev, window):
    """Pairwise errors of the three cost terms, all evaluated with ``w[i-1]``."""
    w = check_vector(w_prev, "w_prev", window.M)
    x0, x1, x2 = _outputs(w, window)
    b0, b1, b2 = window.b_now, window.b_prev1, window.b_prev2
    return ErrorTriple(b0 * x1 - b1 * x0, b0 * x2 - b2 * x0, b1 * x2 - b2 * x1)


def norm_update(state, r):
    """Exponential average of the received power used to normalise the step."""
    energy = float(np.real(np.vdot(r, r)))
    if state.m_norm <= 0:
        state.m_norm = energy
    else:
        state.m_norm = state.lambda_m * state.m_norm + (1.0 - state.lambda_m) * energy
    return state


def _branch(b, r, e):
    return (b * r) * np.conj(e)


def nlms_update(state, window, errors, weights=(1.0, 1.0, 1.0)):
    """Weighted bidirectional NLMS update of ``state.w``.

    The step is ``mu / (M[i] |w^H[i-1] r[i-1]|)``; the magnitude in the
    denominator is floored at ``state.eps_den``.
    """
    rho = np.asarray(weights, dtype=float)
    if state.m_norm <= 0:
        raise ValueError("norm_update must run before nlms_update")
    mag = abs(np.vdot(state.w, window.r_prev1))
    if mag < state.eps_den:
        mag = state.eps_den
        state.n_clamped += 1
    coef = state.mu / (state.m_norm * mag)
    direction = (
        rho[0] * _branch(window.b_prev1, window.r_now, errors.e1)
        + rho[1] * _branch(window.b_prev2, window.r_now, errors.e2)
        + rho[2] * _branch(window.b_prev2, window.r_prev1, errors.e3)
    )
    state.w = state.w + coef * direction
    return state


def ls_correlation_update(state, window, w_prev):
    """Rank-one updates of the three branch correlations and cross-correlations."""
    w = check_vector(w_prev, "w_prev", state.M)
    if window.M != state.M:
        raise ValueError(f"window vectors have length {window.M}, expected {state.M}")
    lam = state.lam
    b0, b1, b2 = window.b_now, window.b_prev1, window.b_prev2
    r0, r1, r2 = window.r_now, window.r_prev1, window.r_prev2
    x1 = np.vdot(w, r1)
    x2 = np.vdot(w, r2)
    u1, u2, u3 = b1 * r0, b2 * r0, b2 * r1
    state.R *= lam
    state.R[0] += np.outer(u1, np.conj(u1))
    state.R[1] += np.outer(u2, np.conj(u2))
    state.R[2] += np.outer(u3, np.conj(u3))
    state.t *= lam
    state.t[0] += u1 * np.conj(x1) * b0
    state.t[1] += u2 * np.conj(x2) * b0
    state.t[2] += u3 * np.conj(x2) * b1
    return state


def combine_correlations(state, weights):
    """Weighted sums ``(sum rho_n R_n, sum rho_n t_n)``."""
    rho = np.asarray(weights, dtype=float)
    if rho.shape != (state.R.shape[0],) or np.any(rho < 0):
        raise ValueError("weights must be non-negative, one per branch")
    if not np.any(rho > 0):
        raise ValueError("at least one weight must be positive")
    R = rho[0] * state.R[0]
    t = rho[0] * state.t[0]
    for n in range(1, rho.shape[0]):
        R = R + rho[n] * state.R[n]
        t = t + rho[n] * state.t[n]
    return R, t


def cg_solve(R, t, w_init, j_max, tol=0.0, full_output=False):
    """Conjugate-gradient iterations for ``R w = t`` from ``w_init``.

    Runs at most ``j_max`` iterations and stops early once the gradient
    norm drops to ``tol``. A non-positive curvature ``d^H R d`` stops the
    iteration with the current iterate and sets ``degenerate`` in the
    returned :class:`CgInfo` (only with ``full_output=True``).
    """
    R = check_square(R, "R")
    M = R.shape[0]
    t = check_vector(t, "t", M)
    w = check_vector(w_init, "w_init", M).copy()
    if j_max < 1:
        raise ValueError("j_max must be positive")
    g = R @ w - t
    d = -g
    degenerate = False
    j = 0
    while j < j_max:
        if np.linalg.norm(g) <= tol:
            break
        Rd = R @ d
        curvature = np.real(np.vdot(d, Rd))
        if not curvature > 0:
            degenerate = True
            break
        alpha = -np.vdot(d, g) / curvature
        w = w + alpha * d
        g = R @ w - t
        beta = np.vdot(Rd, g) / curvature
        d = -g + beta * d
        j += 1
    if full_output:
        return w, CgInfo(j, degenerate, float(np.linalg.norm(g)))
    return w


def power_differentials(w, window):
    """Signed post-filter power differences between the three instant pairs."""
    x0, x1, x2 = _outputs(check_vector(w, "w", window.M), window)
    p0, p1, p2 = abs(x0) ** 2, abs(x1) ** 2, abs(x2) ** 2
    return np.array([p0 - p1, p0 - p2, p1 - p2])


def switching_update(state, P):
    """Binary branch gating from windowed-RMS thresholds of the power differentials.

    A branch is switched off when ``|P_n| > T_n`` with
    ``T_n = nu * S_n`` and ``S_n`` the exponentially smoothed windowed RMS.
    Until two differentials have been seen all branches stay on.
    """
    if state.mode != "switching":
        raise ValueError("switching_update needs a state in 'switching' mode")
    P = np.asarray(P, dtype=float)
    state.power_history.append(P)
    count = len(state.power_history)
    if count < 2:
        state.rho = np.ones(3)
        return state
    hist = np.asarray(state.power_history)
    rms = np.sqrt(np.sum(hist**2, axis=0) / (count - 1))
    if state.smoothed_rms is None:
        state.smoothed_rms = rms
    else:
        state.smoothed_rms = state.lambda_p * state.smoothed_rms + (1.0 - state.lambda_p) * rms
    threshold = state.nu * state.smoothed_rms
    off = np.abs(P) > threshold
    state.rho = np.where(off, 0.0, 1.0)
    state.n_switched += off
    return state


def mixing_update(state, errors):
    """Convex mixing weights driven by the relative error magnitudes.

    ``rho_n <- lambda_e rho_n + (1 - lambda_e) (e_T - |e_n|) / (2 e_T)``
    followed by renormalisation, so larger errors receive less weight and
    the weights stay a convex combination. ``e_T == 0`` leaves them as is.
    """
    if state.mode != "mixing":
        raise ValueError("mixing_update needs a state in 'mixing' mode")
    mags = errors.magnitudes()
    e_total = mags.sum()
    if not e_total > 0:
        return state
    innovation = (e_total - mags) / (2.0 * e_total)
    rho = state.lambda_e * state.rho + (1.0 - state.lambda_e) * innovation
    rho = np.maximum(rho, 0.0)
    state.rho = rho / rho.sum()
    return state


def update_weights(state, w_prev, window, errors):
    """Advance ``state`` by one symbol according to its mode and return ``rho``."""
    if state.mode == "switching":
        switching_update(state, power_differentials(w_prev, window))
    elif state.mode == "mixing":
        mixing_update(state, errors)
    return state.rho


def enforce_power_constraint(w, running_output_power, max_scale=MAX_SCALE):
    """Rescale ``w`` to unit output power given its running power estimate.

    The applied gain ``1/sqrt(running_output_power)`` is capped at
    ``max_scale`` so a vanishing estimate cannot blow the filter up.
    """
    if not running_output_power > 0:
        return np.asarray(w) * max_scale
    scale = min(1.0 / np.sqrt(running_output_power), max_scale)
    return np.asarray(w) * scale


def _constrain(w, tracker, r, max_scale):
    tracker.update(r)
    return enforce_power_constraint(w, tracker.power(w), max_scale)


@dataclass
class BidirectionalNlmsState:
    nlms: NlmsState
    weighting: WeightingState
    power: OutputPowerTracker
    max_scale: float = MAX_SCALE

    @classmethod
    def initial(cls, w0, mu=DEFAULT_MU, lambda_m=DEFAULT_LAMBDA_M, weighting=None, **kwargs):
        w0 = np.array(w0, dtype=complex)
        weighting = weighting if weighting is not None else WeightingState()
        return cls(NlmsState(w0, mu=mu, lambda_m=lambda_m), weighting, OutputPowerTracker(w0.shape[0], lambda_m), **kwargs)

    @property
    def w(self):
        return self.nlms.w


def bidirectional_nlms_step(state, window):
    """One symbol of the (weighted) bidirectional NLMS receiver."""
    nlms = state.nlms
    norm_update(nlms, window.r_now)
    errors = error_terms(nlms.w, window)
    rho = update_weights(state.weighting, nlms.w, window, errors)
    nlms_update(nlms, window, errors, rho)
    nlms.w = _constrain(nlms.w, state.power, window.r_now, state.max_scale)
    return state


@dataclass
class BidirectionalCgState:
    w: np.ndarray
    corr: CorrelationState
    weighting: WeightingState
    power: OutputPowerTracker
    j_max: int = DEFAULT_J_MAX
    tol: float = 0.0
    max_scale: float = MAX_SCALE
    n_degenerate: int = 0

    @classmethod
    def initial(cls, w0, lam=DEFAULT_LAMBDA, lambda_m=DEFAULT_LAMBDA_M, delta=DEFAULT_DELTA, weighting=None, **kwargs):
        w0 = np.array(w0, dtype=complex)
        M = w0.shape[0]
        weighting = weighting if weighting is not None else WeightingState()
        return cls(w0, CorrelationState.initial(M, lam, delta), weighting, OutputPowerTracker(M, lambda_m), **kwargs)


def bidirectional_cg_step(state, window):
    """One symbol of the (weighted) bidirectional CG receiver.

    Updates the branch correlations with ``w[i-1]``, advances the weights,
    runs ``j_max`` CG iterations warm-started at ``w[i-1]`` on the combined
    normal equations and enforces the output-power constraint.
    """
    w_prev = state.w
    ls_correlation_update(state.corr, window, w_prev)
    errors = error_terms(w_prev, window)
    rho = update_weights(state.weighting, w_prev, window, errors)
    if np.any(rho > 0):
        R, t = combine_correlations(state.corr, rho)
        w, info = cg_solve(R, t, w_prev, state.j_max, state.tol, full_output=True)
        state.n_degenerate += info.degenerate
    else:
        w = w_prev
    state.w = _constrain(w, state.power, window.r_now, state.max_scale)
    return state
