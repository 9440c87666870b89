"""
Time-correlated Rayleigh fading via Clarke's sum-of-scatterers model.

Each gain sequence is a sum of ``n_scatterers`` unit-amplitude complex
sinusoids whose Doppler shifts are ``fd_ts * cos(theta_s)`` for uniformly
distributed angles of arrival ``theta_s``. With uniform random phases the
process is wide-sense stationary with autocorrelation ``J0(2*pi*fd_ts*lag)``
and unit average power.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive

__all__ = [
    "FadingProcess",
    "CorrelationFactors",
    "clarke_generate",
    "clarke_gains",
    "clarke_snapshots",
    "estimate_correlation_factors",
    "empirical_autocorrelation",
]

DEFAULT_SCATTERERS = 20


@dataclass(frozen=True)
class FadingProcess:
    """Complex channel-gain sequence of one link."""

    normalized_fading_rate: float
    n_scatterers: int
    gains: np.ndarray
    seed: int

    def __len__(self):
        return self.gains.shape[0]


@dataclass(frozen=True)
class CorrelationFactors:
    """Lag correlations between the three instants ``i``, ``i-1`` and ``i-2``.

    ``f1`` pairs (i, i-1), ``f2`` pairs (i, i-2) and ``f3`` pairs (i-1, i-2).
    """

    f1: complex
    f2: complex
    f3: complex


def _sum_of_sinusoids(fd_ts, times, n_scatterers, rng, size=()):
    # angles/phases drawn in one call so a given rng state maps to one realisation
    angles = rng.uniform(0.0, 2.0 * np.pi, size=size + (n_scatterers,))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=size + (n_scatterers,))
    omega = 2.0 * np.pi * fd_ts * np.cos(angles)
    arg = omega[..., :, None] * times + phases[..., :, None]
    return np.exp(1j * arg).sum(axis=-2) / np.sqrt(n_scatterers)


def clarke_gains(fd_ts, length, n_scatterers=DEFAULT_SCATTERERS, rng=None, size=()):
    """Draw Clarke-model gain sequences from an existing random generator.

    Parameters
    ----------
    fd_ts : float
        Normalized fading rate (Doppler shift times symbol period). Zero
        gives a constant gain with a random phase.
    length : int
        Number of symbol-spaced samples per sequence.
    n_scatterers : int
        Number of sinusoids in the sum.
    rng : numpy.random.Generator
    size : tuple of int
        Leading batch shape; the output has shape ``size + (length,)``.
    """
    check_positive(fd_ts, "fd_ts", allow_zero=True)
    check_positive(length, "length", integer=True)
    check_positive(n_scatterers, "n_scatterers", integer=True)
    rng = np.random.default_rng(rng)
    times = np.arange(length, dtype=float)
    return _sum_of_sinusoids(fd_ts, times, n_scatterers, rng, size=tuple(size))


def clarke_generate(fd_ts, length, n_scatterers=DEFAULT_SCATTERERS, seed=0):
    """Generate one deterministic Clarke fading sequence.

    Examples
    --------
    >>> p = clarke_generate(0.01, 1000, 20, seed=3)
    >>> p.gains.shape
    (1000,)
    """
    check_positive(fd_ts, "fd_ts")
    check_positive(length, "length", integer=True)
    check_positive(n_scatterers, "n_scatterers", integer=True)
    gains = clarke_gains(fd_ts, length, n_scatterers, np.random.default_rng(seed))
    gains.setflags(write=False)
    return FadingProcess(float(fd_ts), int(n_scatterers), gains, seed)


def clarke_snapshots(fd_ts, n_instants, n_draws, n_links, n_scatterers=DEFAULT_SCATTERERS, rng=None):
    """Independent short Clarke realisations, shape ``(n_draws, n_links, n_instants)``.

    Used for ensemble averages over a few adjacent instants. ``fd_ts == 0``
    yields static unit gains.
    """
    if fd_ts == 0:
        return np.ones((n_draws, n_links, n_instants), dtype=complex)
    return clarke_gains(fd_ts, n_instants, n_scatterers, rng, size=(n_draws, n_links))


def _gains_of(process):
    return np.asarray(process.gains if isinstance(process, FadingProcess) else process, dtype=complex)


def empirical_autocorrelation(gains, max_lag):
    """Time-averaged ``h[i] h*[i-lag]`` for ``lag = 0..max_lag``."""
    h = _gains_of(gains)
    if h.shape[0] <= max_lag:
        raise ValueError("sequence shorter than the requested lag")
    return np.array([np.vdot(h[: h.shape[0] - lag], h[lag:]) / (h.shape[0] - lag) for lag in range(max_lag + 1)])


def estimate_correlation_factors(process):
    """Estimate the three adjacent-instant correlation factors of a gain sequence."""
    h = _gains_of(process)
    if h.ndim != 1 or h.shape[0] < 3:
        raise ValueError("correlation factors need a sequence of at least 3 gains")
    # f1: h[i] h*[i-1] over i >= 1; f2: lag 2; f3: h[i-1] h*[i-2] over i >= 2
    f1 = np.mean(h[1:] * np.conj(h[:-1]))
    f2 = np.mean(h[2:] * np.conj(h[:-2]))
    f3 = np.mean(h[1:-1] * np.conj(h[:-2]))
    return CorrelationFactors(complex(f1), complex(f2), complex(f3))
