"""
SINR, SINR normalised by the instantaneous SNR, and bit-error accounting.

Simulation-side metrics are genie-aided: at every symbol the desired
signature ``s_1[i]``, the interfering signatures and the noise variance are
known, so ``R_S = s_1 s_1^H`` and ``R_I = sum_j s_j s_j^H + sigma^2 I``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_square, check_vector

__all__ = [
    "MetricSeries",
    "DegenerateSinrError",
    "sinr_inst",
    "sinr_over_snr",
    "ber_update",
    "to_db",
    "sinr_from_signatures",
    "snr_from_signatures",
    "mmse_sinr_from_signatures",
    "mmse_filters_from_signatures",
]


class DegenerateSinrError(ZeroDivisionError):
    """Interference-plus-noise power of the filter is zero."""


def to_db(x):
    return 10.0 * np.log10(x)


def sinr_inst(w, R_S, R_I):
    """Instantaneous SINR ``w^H R_S w / w^H R_I w`` in dB."""
    w = check_vector(w, "w")
    R_S = check_square(R_S, "R_S", w.shape[0])
    R_I = check_square(R_I, "R_I", w.shape[0])
    num = np.real(np.vdot(w, R_S @ w))
    den = np.real(np.vdot(w, R_I @ w))
    if not den > 0:
        raise DegenerateSinrError("interference-plus-noise power is zero")
    return float(to_db(num / den))


def sinr_over_snr(sinr_db, snr_inst_db):
    """SINR normalised by the instantaneous input SNR (both in dB)."""
    return sinr_db - snr_inst_db


def sinr_from_signatures(W, desired, interference, noise_var):
    """Linear per-symbol SINR of filters ``W`` (shape ``(n, M)``) in a packet."""
    W = np.asarray(W)
    sig = np.abs(np.einsum("nm,nm->n", W.conj(), desired)) ** 2
    mui = np.sum(np.abs(np.einsum("nm,nmj->nj", W.conj(), interference)) ** 2, axis=1)
    den = mui + noise_var * np.sum(np.abs(W) ** 2, axis=1)
    if np.any(den <= 0):
        raise DegenerateSinrError("interference-plus-noise power is zero")
    return sig / den


def snr_from_signatures(desired, noise_var):
    """Instantaneous SNR ``||s_1||^2 / sigma^2`` per symbol (linear)."""
    return np.sum(np.abs(desired) ** 2, axis=1) / noise_var


def _interference_covariances(interference, noise_var):
    M = interference.shape[1]
    return np.einsum("nmj,nkj->nmk", interference, interference.conj()) + noise_var[:, None, None] * np.eye(M)


def mmse_filters_from_signatures(desired, interference, noise_var):
    """Per-symbol MMSE filters ``R^-1 s_1`` with ``R = s_1 s_1^H + R_I``."""
    R = _interference_covariances(interference, noise_var) + np.einsum("nm,nk->nmk", desired, desired.conj())
    return np.linalg.solve(R, desired[..., None])[..., 0]


def mmse_sinr_from_signatures(desired, interference, noise_var):
    """Maximum (MMSE) SINR ``s_1^H R_I^-1 s_1`` per symbol (linear)."""
    R_I = _interference_covariances(interference, noise_var)
    z = np.linalg.solve(R_I, desired[..., None])[..., 0]
    return np.real(np.einsum("nm,nm->n", desired.conj(), z))


@dataclass
class MetricSeries:
    """Packet-accumulated per-symbol metrics of one algorithm.

    SINR/SNR ratios are summed linearly across packets; the curve reports
    the dB value of the packet mean. Bit errors are counted per symbol
    index so cumulative BER curves can be formed.
    """

    n_symbols: int
    sinr_ratio_sum: np.ndarray = None
    output_power_sum: np.ndarray = None
    error_counts: np.ndarray = None
    bit_counts: np.ndarray = None
    n_packets: int = 0
    packet_traces: list = field(default_factory=list)

    def __post_init__(self):
        n = self.n_symbols
        if self.sinr_ratio_sum is None:
            self.sinr_ratio_sum = np.zeros(n)
        if self.output_power_sum is None:
            self.output_power_sum = np.zeros(n)
        if self.error_counts is None:
            self.error_counts = np.zeros(n, dtype=int)
        if self.bit_counts is None:
            self.bit_counts = np.zeros(n, dtype=int)

    @property
    def errors(self):
        return int(self.error_counts.sum())

    @property
    def bits(self):
        return int(self.bit_counts.sum())

    @property
    def ber(self):
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def sinr_over_snr_db(self):
        return to_db(self.sinr_ratio_sum / max(self.n_packets, 1))

    @property
    def mean_output_power(self):
        return self.output_power_sum / max(self.n_packets, 1)

    @property
    def cumulative_ber(self):
        bits = np.cumsum(self.bit_counts)
        errs = np.cumsum(self.error_counts)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(bits > 0, errs / np.maximum(bits, 1), np.nan)

    def steady_state_db(self, start, stop=None):
        """dB of the time- and packet-averaged linear SINR/SNR over ``[start, stop)``."""
        return float(to_db(np.mean(self.sinr_ratio_sum[start:stop]) / max(self.n_packets, 1)))

    def record_packet(self, sinr_ratio, errors, counted, output_power=None, keep_trace=True):
        """Add one packet's per-symbol SINR/SNR ratios and error indicators."""
        sinr_ratio = np.asarray(sinr_ratio, dtype=float)
        self.sinr_ratio_sum += sinr_ratio
        self.error_counts += np.asarray(errors, dtype=bool) & np.asarray(counted, dtype=bool)
        self.bit_counts += np.asarray(counted, dtype=bool)
        if output_power is not None:
            self.output_power_sum += output_power
        self.n_packets += 1
        if keep_trace:
            self.packet_traces.append(sinr_ratio)
        return self

    def merge(self, other):
        """Combine two series; associative, traces concatenated in order."""
        if other.n_symbols != self.n_symbols:
            raise ValueError("cannot merge series of different lengths")
        return MetricSeries(
            self.n_symbols,
            self.sinr_ratio_sum + other.sinr_ratio_sum,
            self.output_power_sum + other.output_power_sum,
            self.error_counts + other.error_counts,
            self.bit_counts + other.bit_counts,
            self.n_packets + other.n_packets,
            self.packet_traces + other.packet_traces,
        )


def ber_update(series, detected, truth, index=0):
    """Count one decision at symbol ``index``."""
    if abs(detected) != 1 or abs(truth) != 1:
        raise ValueError("symbols must be +1 or -1")
    series.bit_counts[index] += 1
    series.error_counts[index] += int(detected != truth)
    return series
