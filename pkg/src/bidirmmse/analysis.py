"""
Analytical steady-state SINR of the bidirectional NLMS receiver.

The filter is split as ``w[i] = w_o + eps[i]`` around a fixed reference
filter ``w_o``. Averaging the NLMS update over the data gives the mean
transition operator::

    A = I + mu sum_n (F_n - R_n)

with ensemble correlations (``b`` the desired user's symbols, index 0 the
current instant, 1 and 2 the two previous ones)::

    F1 = E[b0 b1 r0 r1^H]   F2 = E[b0 b2 r0 r2^H]   F3 = E[b1 b2 r1 r2^H]
    R1 = R2 = E[r0 r0^H]    R3 = E[r1 r1^H]

The weight-error correlation ``K = E[eps eps^H]`` and the cross term
``G = E[w_o eps^H]`` follow::

    K[i] = A K[i-1] A^H + mu^2 sum_n R_n J_n
    G[i] = G[i-1] mu sum_n (F_n - R_n)

where ``J_n`` is the mean square error of branch ``n`` at ``w_o``. The
analytical SINR is then the ratio of signal to interference traces.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_square
from .fading import DEFAULT_SCATTERERS, clarke_snapshots
from .metrics import DegenerateSinrError, to_db

__all__ = [
    "EnsembleMatrices",
    "SinrDecomposition",
    "AnalysisState",
    "build_ensemble_matrices",
    "k_recursion_step",
    "g_recursion_step",
    "analytical_sinr",
    "analytical_curve",
    "differential_equivalence_gap",
]


@dataclass
class EnsembleMatrices:
    """Ensemble statistics of one system configuration.

    Attributes
    ----------
    F, R : ndarray, shape (3, M, M)
        Cross- and auto-correlations of the three branches.
    R_S, R_I : ndarray, shape (M, M)
        Desired-signal and interference-plus-noise covariances.
    w_opt : ndarray, shape (M,)
        Reference filter, scaled to unit output power.
    J_min : ndarray, shape (3,)
        Branch mean square errors at ``w_opt``.
    """

    F: np.ndarray
    R: np.ndarray
    R_S: np.ndarray
    R_I: np.ndarray
    w_opt: np.ndarray
    J_min: np.ndarray
    noise_power: float

    @property
    def M(self):
        return self.R_S.shape[0]

    @property
    def R_total(self):
        return self.R_S + self.R_I

    @property
    def snr(self):
        """Average input SNR ``tr(R_S) / sigma^2`` (linear)."""
        return float(np.real(np.trace(self.R_S))) / self.noise_power if self.noise_power > 0 else np.inf

    def decomposition(self):
        return SinrDecomposition.from_filter(self.R_S, self.R_I, self.w_opt)


@dataclass
class SinrDecomposition:
    """Signal / interference split and the reference filter's powers."""

    R_S: np.ndarray
    R_I: np.ndarray
    P_S_opt: float
    P_I_opt: float

    @classmethod
    def from_filter(cls, R_S, R_I, w):
        P_S = float(np.real(np.vdot(w, R_S @ w)))
        P_I = float(np.real(np.vdot(w, R_I @ w)))
        return cls(R_S, R_I, P_S, P_I)


@dataclass
class AnalysisState:
    K_mat: np.ndarray
    G_mat: np.ndarray
    F: np.ndarray
    R: np.ndarray
    J_min: np.ndarray
    mu: float

    @classmethod
    def initial(cls, F, R, J_min, mu):
        """Start from ``K[0] = G[0] = I``."""
        F = np.asarray(F, dtype=complex)
        R = np.asarray(R, dtype=complex)
        if F.shape != R.shape or F.ndim != 3 or F.shape[0] != 3 or F.shape[1] != F.shape[2]:
            raise ValueError("F and R must both have shape (3, M, M)")
        J_min = np.asarray(J_min, dtype=float)
        if J_min.shape != (3,) or np.any(J_min < 0):
            raise ValueError("J_min must hold three non-negative values")
        check_positive(mu, "mu", allow_zero=True)
        M = F.shape[1]
        eye = np.eye(M, dtype=complex)
        return cls(eye.copy(), eye.copy(), F, R, J_min, float(mu))

    @property
    def drift(self):
        """``sum_n (F_n - R_n)``."""
        return np.sum(self.F - self.R, axis=0)


def _signatures(codes, gains, amplitudes, M):
    """Effective signatures for every draw, user and instant: (draws, T, K, M)."""
    K, N = codes.shape
    L = gains.shape[2]
    out = np.zeros((gains.shape[0], gains.shape[3], K, M), dtype=complex)
    for l in range(L):
        out[..., l : l + N] += gains[:, :, l, :].transpose(0, 2, 1)[..., None] * codes[None, None]
    return out * np.asarray(amplitudes)[None, None, :, None]


def build_ensemble_matrices(config, codes, fd_ts, n_ensemble=10_000, seed=0, n_scatterers=DEFAULT_SCATTERERS, noise_power=None):
    """Monte-Carlo ensemble matrices of the DS-CDMA uplink.

    Draws ``n_ensemble`` independent fading windows of four instants (the
    first only feeds intersymbol interference), random BPSK symbols for
    every user, and adds white noise analytically. ``fd_ts == 0`` uses
    static unit gains.

    Parameters
    ----------
    noise_power : float, optional
        Overrides ``config.noise_power``; pass 0 for a noise-free ensemble.
    """
    check_positive(n_ensemble, "n_ensemble", integer=True)
    codes = np.asarray(codes, dtype=float)
    K, N, M, L = config.K, config.N, config.M, config.L_p
    if codes.shape != (K, N):
        raise ValueError(f"codes must have shape {(K, N)}, got {codes.shape}")
    sigma2 = config.noise_power if noise_power is None else float(noise_power)
    rng = np.random.default_rng(seed)

    gains = clarke_snapshots(fd_ts, 4, n_ensemble, K * L, n_scatterers, rng).reshape(n_ensemble, K, L, 4)
    gains = gains / np.sqrt(L)
    sig = _signatures(codes, gains, config.amplitudes, M)  # (E, 4, K, M)
    b = rng.choice([-1.0, 1.0], size=(n_ensemble, 4, K))
    r = np.einsum("etk,etkm->etm", b, sig)
    if L > 1:
        tails = np.zeros_like(sig)
        tails[:, 1:, :, : L - 1] = sig[:, :-1, :, N:]
        r[:, 1:] += np.einsum("etk,etkm->etm", b[:, :-1], tails[:, 1:])
    # instants i, i-1, i-2 in that order
    r0, r1, r2 = r[:, 3], r[:, 2], r[:, 1]
    b0, b1, b2 = b[:, 3, 0], b[:, 2, 0], b[:, 1, 0]

    def corr(weights, x, y):
        return np.einsum("e,em,en->mn", weights, x, y.conj()) / n_ensemble

    ones = np.ones(n_ensemble)
    noise = sigma2 * np.eye(M)
    F = np.stack([corr(b0 * b1, r0, r1), corr(b0 * b2, r0, r2), corr(b1 * b2, r1, r2)])
    R0 = corr(ones, r0, r0) + noise
    R3 = corr(ones, r1, r1) + noise
    R = np.stack([R0, R0, R3])

    s0 = sig[:, 3, 0]
    R_S = corr(ones, s0, s0)
    R_I = R0 - R_S

    # reference filter: MMSE direction for the principal signal subspace
    _, vecs = np.linalg.eigh(R_S)
    v = vecs[:, -1]
    try:
        w = np.linalg.solve(R0, v)
    except np.linalg.LinAlgError:
        # noise-free ensembles can be rank deficient
        w = np.linalg.pinv(R0, hermitian=True) @ v
    w = w / np.sqrt(np.real(np.vdot(w, R0 @ w)))

    x0, x1, x2 = r0 @ w.conj(), r1 @ w.conj(), r2 @ w.conj()
    noise_term = 2.0 * sigma2 * np.real(np.vdot(w, w))
    J = np.array(
        [
            np.mean(np.abs(b0 * x1 - b1 * x0) ** 2),
            np.mean(np.abs(b0 * x2 - b2 * x0) ** 2),
            np.mean(np.abs(b1 * x2 - b2 * x1) ** 2),
        ]
    ) + noise_term
    return EnsembleMatrices(F, R, R_S, R_I, w, J, sigma2)


def _hermitian(a):
    return 0.5 * (a + a.conj().T)


def k_recursion_step(state, check=False):
    """``K <- A K A^H + mu^2 sum_n R_n J_n``, kept exactly Hermitian."""
    M = state.K_mat.shape[0]
    A = np.eye(M) + state.mu * state.drift
    drive = state.mu**2 * np.einsum("n,nij->ij", state.J_min, state.R)
    state.K_mat = _hermitian(A @ state.K_mat @ A.conj().T + drive)
    if check:
        low = np.linalg.eigvalsh(state.K_mat)[0]
        if low < -1e-9 * max(1.0, np.abs(state.K_mat).max()):
            raise ArithmeticError(f"K lost positive semi-definiteness (min eigenvalue {low:.3g})")
    return state


def g_recursion_step(state):
    """``G <- G mu sum_n (F_n - R_n)``."""
    state.G_mat = state.G_mat @ (state.mu * state.drift)
    return state


def analytical_sinr(state, decomp):
    """Analytical SINR in dB.

    ``tr[K R_S + G R_S + G^H R_S] + P_S_opt`` over the same expression in
    ``R_I``; the optimum-filter powers enter as scalar contributions.
    """
    K, G = state.K_mat, state.G_mat

    def part(Rx, P):
        return float(np.real(np.trace(K @ Rx + G @ Rx + G.conj().T @ Rx))) + P

    num = part(decomp.R_S, decomp.P_S_opt)
    den = part(decomp.R_I, decomp.P_I_opt)
    if not den > 0:
        raise DegenerateSinrError("analytical interference power is not positive")
    return float(to_db(num / den))


def analytical_curve(matrices, mu, n_iter, normalize_step=True):
    """Analytical SINR/SNR (dB) over ``n_iter`` recursion steps.

    With ``normalize_step`` the NLMS step is divided by ``tr(R_total)``,
    the average squared norm the adaptive update normalises by, to match
    the effective step size of the simulated receiver.
    """
    check_positive(n_iter, "n_iter", integer=True)
    mu_eff = mu / float(np.real(np.trace(matrices.R_total))) if normalize_step else mu
    state = AnalysisState.initial(matrices.F, matrices.R, matrices.J_min, mu_eff)
    decomp = matrices.decomposition()
    snr_db = to_db(matrices.snr)
    curve = np.empty(n_iter)
    for i in range(n_iter):
        k_recursion_step(state)
        g_recursion_step(state)
        curve[i] = analytical_sinr(state, decomp) - snr_db
    return curve


def differential_equivalence_gap(F, R, mu):
    """Relative Frobenius gap between ``3 (I + mu (F1 - R1))`` and the full operator."""
    F = np.asarray(F, dtype=complex)
    R = np.asarray(R, dtype=complex)
    for n in range(3):
        check_square(F[n], "F", F.shape[1])
        check_square(R[n], "R", F.shape[1])
    eye = np.eye(F.shape[1])
    single = 3.0 * (eye + mu * (F[0] - R[0]))
    full = eye + mu * np.sum(F - R, axis=0)
    return float(np.linalg.norm(single - full) / np.linalg.norm(single))
