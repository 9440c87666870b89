"""
Receive filtering, differential detection, the known-channel MMSE bound and
the baseline adaptive receivers.

Baselines:

* conventional NLMS / RLS / CG adapt against the raw symbol ``b_1[i]`` and
  therefore have to track the fading coefficient themselves;
* the two-instant differential receivers (NLMS and CG) adapt on the
  ``J1`` term alone and are written independently of the bidirectional
  code so that the ``rho = (1, 0, 0)`` reduction can be checked against
  them.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_square, check_unit_interval, check_vector
from .bidirectional import (
    DEFAULT_DELTA,
    DEFAULT_J_MAX,
    DEFAULT_LAMBDA,
    DEFAULT_LAMBDA_M,
    DEFAULT_MU,
    EPS_DEN,
    MAX_SCALE,
    NlmsState,
    OutputPowerTracker,
    cg_solve,
    enforce_power_constraint,
    norm_update,
)

__all__ = [
    "MmseOracle",
    "filter_output",
    "detect_dbpsk",
    "detect_bpsk",
    "mmse_filter",
    "mmse_oracle_filter",
    "ConventionalNlmsState",
    "ConventionalRlsState",
    "ConventionalCgState",
    "conventional_nlms_step",
    "conventional_rls_step",
    "conventional_cg_step",
    "DifferentialNlmsState",
    "DifferentialCgState",
    "differential_mmse_step",
    "differential_cg_step",
    "matched_filter_init",
]


class NumericalSingularityError(np.linalg.LinAlgError):
    """Raised when the MMSE covariance cannot be solved."""


def filter_output(w, r):
    """Filter output ``x = w^H r``."""
    w = check_vector(w, "w")
    r = check_vector(r, "r", w.shape[0])
    return np.vdot(w, r)


def detect_dbpsk(x_now, x_prev):
    """Differential decision ``sign(Re(x_now conj(x_prev)))`` with ties to +1."""
    return -1.0 if np.real(x_now * np.conj(x_prev)) < 0 else 1.0


def detect_bpsk(x):
    return -1.0 if np.real(x) < 0 else 1.0


def matched_filter_init(code, M):
    """Spreading code zero-padded to the observation length ``M``."""
    w = np.zeros(M, dtype=complex)
    code = np.asarray(code)
    w[: code.shape[0]] = code
    return w


@dataclass
class MmseOracle:
    """Covariance and steering vector defining an MMSE filter ``R^-1 p``."""

    covariance: np.ndarray
    steering: np.ndarray

    def __post_init__(self):
        self.covariance = check_square(self.covariance, "covariance")
        self.steering = check_vector(self.steering, "steering", self.covariance.shape[0])
        if not np.allclose(self.covariance, self.covariance.conj().T, atol=1e-10 * max(1.0, np.abs(self.covariance).max())):
            raise ValueError("covariance must be Hermitian")


def mmse_filter(oracle):
    """Solve ``R w = p`` through a Cholesky factorisation."""
    try:
        L = np.linalg.cholesky(oracle.covariance)
    except np.linalg.LinAlgError as exc:
        raise NumericalSingularityError("MMSE covariance is not positive definite") from exc
    y = np.linalg.solve(L, oracle.steering)
    return np.linalg.solve(L.conj().T, y)


def mmse_oracle_filter(config, channels, codes, noise_power):
    """Known-channel MMSE filter for user 1 at one symbol interval.

    The covariance is assembled from every user's effective signature
    ``A_k H_k c_k`` plus white noise; the steering vector is user 1's.
    """
    codes = np.asarray(codes, dtype=float)
    sigs = np.stack([config.amplitudes[k] * (np.asarray(channels[k]) @ codes[k]) for k in range(config.K)], axis=1)
    if sigs.shape[0] != config.M:
        raise ValueError("channel matrices do not match M")
    R = sigs @ sigs.conj().T + noise_power * np.eye(config.M)
    return mmse_filter(MmseOracle(R, sigs[:, 0]))


# -- conventional baselines ---------------------------------------------------------


@dataclass
class ConventionalNlmsState:
    w: np.ndarray
    mu: float = DEFAULT_MU
    eps: float = 1e-6


@dataclass
class ConventionalRlsState:
    w: np.ndarray
    P: np.ndarray
    lam: float = DEFAULT_LAMBDA

    @classmethod
    def initial(cls, w0, lam=DEFAULT_LAMBDA, delta=DEFAULT_DELTA):
        w0 = np.array(w0, dtype=complex)
        check_unit_interval(lam, "lam", closed_low=False)
        return cls(w0, np.eye(w0.shape[0], dtype=complex) / delta, lam)


@dataclass
class ConventionalCgState:
    w: np.ndarray
    R: np.ndarray
    p: np.ndarray
    lam: float = DEFAULT_LAMBDA
    j_max: int = DEFAULT_J_MAX

    @classmethod
    def initial(cls, w0, lam=DEFAULT_LAMBDA, delta=DEFAULT_DELTA, j_max=DEFAULT_J_MAX):
        w0 = np.array(w0, dtype=complex)
        M = w0.shape[0]
        return cls(w0, delta * np.eye(M, dtype=complex), np.zeros(M, dtype=complex), lam, j_max)


def conventional_nlms_step(state, r, desired):
    """``w <- w + mu r e* / (eps + ||r||^2)`` with ``e = d - w^H r``."""
    e = desired - np.vdot(state.w, r)
    state.w = state.w + (state.mu / (state.eps + np.real(np.vdot(r, r)))) * r * np.conj(e)
    return state


def conventional_rls_step(state, r, desired):
    """Exponentially weighted RLS via the matrix inversion lemma."""
    Pr = state.P @ r
    k = Pr / (state.lam + np.real(np.vdot(r, Pr)))
    e = desired - np.vdot(state.w, r)
    state.w = state.w + k * np.conj(e)
    state.P = (state.P - np.outer(k, np.conj(Pr))) / state.lam
    # keep P Hermitian against round-off drift
    state.P = 0.5 * (state.P + state.P.conj().T)
    return state


def conventional_cg_step(state, r, desired):
    """Exponentially weighted LS solved with warm-started CG."""
    state.R = state.lam * state.R + np.outer(r, np.conj(r))
    state.p = state.lam * state.p + r * np.conj(desired)
    state.w = cg_solve(state.R, state.p, state.w, state.j_max)
    return state


# -- two-instant differential receivers ---------------------------------------------


@dataclass
class DifferentialNlmsState:
    nlms: NlmsState
    power: OutputPowerTracker
    max_scale: float = MAX_SCALE

    @classmethod
    def initial(cls, w0, mu=DEFAULT_MU, lambda_m=DEFAULT_LAMBDA_M, **kwargs):
        w0 = np.array(w0, dtype=complex)
        return cls(NlmsState(w0, mu=mu, lambda_m=lambda_m, eps_den=EPS_DEN), OutputPowerTracker(w0.shape[0], lambda_m), **kwargs)

    @property
    def w(self):
        return self.nlms.w


def differential_mmse_step(state, window):
    """One NLMS step on the two-instant differential cost ``J1`` only."""
    nlms = state.nlms
    norm_update(nlms, window.r_now)
    w = nlms.w
    x_now = np.vdot(w, window.r_now)
    x_prev = np.vdot(w, window.r_prev1)
    e = window.b_now * x_prev - window.b_prev1 * x_now
    mag = abs(x_prev)
    if mag < nlms.eps_den:
        mag = nlms.eps_den
        nlms.n_clamped += 1
    coef = nlms.mu / (nlms.m_norm * mag)
    nlms.w = w + coef * ((window.b_prev1 * window.r_now) * np.conj(e))
    state.power.update(window.r_now)
    nlms.w = enforce_power_constraint(nlms.w, state.power.power(nlms.w), state.max_scale)
    return state


@dataclass
class DifferentialCgState:
    w: np.ndarray
    R: np.ndarray
    t: np.ndarray
    power: OutputPowerTracker
    lam: float = DEFAULT_LAMBDA
    j_max: int = DEFAULT_J_MAX
    tol: float = 0.0
    max_scale: float = MAX_SCALE

    @classmethod
    def initial(cls, w0, lam=DEFAULT_LAMBDA, lambda_m=DEFAULT_LAMBDA_M, delta=DEFAULT_DELTA, **kwargs):
        w0 = np.array(w0, dtype=complex)
        M = w0.shape[0]
        return cls(w0, delta * np.eye(M, dtype=complex), np.zeros(M, dtype=complex), OutputPowerTracker(M, lambda_m), lam, **kwargs)


def differential_cg_step(state, window):
    """One symbol of the two-instant differential LS receiver solved by CG."""
    w_prev = state.w
    u = window.b_prev1 * window.r_now
    state.R = state.R * state.lam
    state.R += np.outer(u, np.conj(u))
    state.t = state.t * state.lam
    state.t += u * np.conj(np.vdot(w_prev, window.r_prev1)) * window.b_now
    w = cg_solve(state.R, state.t, w_prev, state.j_max, state.tol)
    state.power.update(window.r_now)
    state.w = enforce_power_constraint(w, state.power.power(w), state.max_scale)
    return state
