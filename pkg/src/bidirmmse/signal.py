"""
Transmit-side and channel-side signal models.

Covers differential BPSK encoding, random binary spreading codes, the
synchronous multipath DS-CDMA uplink and the two-hop amplify-and-forward
(AF) cooperative uplink. Besides the per-symbol builders, :func:`generate_packet`
produces a whole packet at once together with the genie-side quantities
(desired and interfering effective signatures, effective noise variance)
that the metrics need.

Noise convention: ``noise_power`` is the variance ``E|n_j|^2`` of each
complex chip sample. The SNR is the ratio of user 1's average received
energy per symbol, ``A_1^2 E||H_1 c_1||^2 = A_1^2``, to ``noise_power``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_symbols
from .fading import DEFAULT_SCATTERERS, clarke_gains

__all__ = [
    "SystemConfig",
    "CooperativeConfig",
    "ReceivedWindow",
    "Packet",
    "dbpsk_encode",
    "dbpsk_decode",
    "make_spreading_codes",
    "channel_matrix",
    "received_vector",
    "cooperative_received_vector",
    "complex_noise",
    "generate_packet",
]


@dataclass
class SystemConfig:
    """Parameters of the synchronous DS-CDMA uplink.

    ``amplitudes`` defaults to unit amplitude for every user.
    """

    K: int = 8
    N: int = 16
    L_p: int = 1
    amplitudes: tuple = None
    snr_db: float = 15.0
    n_symbols: int = 500
    training_len: int = 150
    seed: int = 0

    def __post_init__(self):
        check_positive(self.K, "K", integer=True)
        check_positive(self.N, "N", integer=True)
        check_positive(self.L_p, "L_p", integer=True)
        if self.L_p >= self.N:
            raise ValueError(f"L_p must be smaller than N, got L_p={self.L_p}, N={self.N}")
        check_positive(self.n_symbols, "n_symbols", integer=True)
        check_positive(self.training_len, "training_len", integer=True, allow_zero=True)
        if self.amplitudes is None:
            self.amplitudes = (1.0,) * self.K
        self.amplitudes = tuple(float(a) for a in self.amplitudes)
        if len(self.amplitudes) != self.K or min(self.amplitudes) <= 0:
            raise ValueError("amplitudes must hold K positive values")

    @property
    def M(self):
        return self.N + self.L_p - 1

    @property
    def noise_power(self):
        return self.amplitudes[0] ** 2 * 10.0 ** (-self.snr_db / 10.0)


@dataclass
class CooperativeConfig:
    """Relay layer of the AF cooperative uplink (defaults to unit gains)."""

    n_relays: int = 2
    source_gains: tuple = None
    relay_gains: tuple = None

    def __post_init__(self):
        check_positive(self.n_relays, "n_relays", integer=True)
        if self.relay_gains is None:
            self.relay_gains = (1.0,) * self.n_relays
        self.relay_gains = tuple(float(a) for a in self.relay_gains)
        if len(self.relay_gains) != self.n_relays or min(self.relay_gains) <= 0:
            raise ValueError("relay_gains must hold n_relays positive values")
        if self.source_gains is not None:
            self.source_gains = tuple(float(a) for a in self.source_gains)
            if min(self.source_gains) <= 0:
                raise ValueError("source_gains must be positive")

    def source_gains_for(self, K):
        gains = self.source_gains if self.source_gains is not None else (1.0,) * K
        if len(gains) != K:
            raise ValueError(f"source_gains has {len(gains)} entries, expected {K}")
        return np.asarray(gains)


@dataclass
class ReceivedWindow:
    """The three most recent received vectors and the matching symbols."""

    r_now: np.ndarray
    r_prev1: np.ndarray
    r_prev2: np.ndarray
    b_now: float = 1.0
    b_prev1: float = 1.0
    b_prev2: float = 1.0

    def __post_init__(self):
        self.r_now = np.asarray(self.r_now, dtype=complex)
        self.r_prev1 = np.asarray(self.r_prev1, dtype=complex)
        self.r_prev2 = np.asarray(self.r_prev2, dtype=complex)
        if not (self.r_now.shape == self.r_prev1.shape == self.r_prev2.shape) or self.r_now.ndim != 1:
            raise ValueError("window vectors must be 1-D and of equal length")
        check_symbols([self.b_now, self.b_prev1, self.b_prev2], "window symbols")

    @property
    def M(self):
        return self.r_now.shape[0]


@dataclass
class Packet:
    """One simulated packet plus genie-side channel knowledge.

    Attributes
    ----------
    received : ndarray, shape (n_symbols, M)
    symbols : ndarray, shape (K, n_symbols)
        Transmitted DBPSK symbols ``b_k[i]``.
    data : ndarray, shape (K, n_symbols)
        Unmodulated data ``a_k[i]``.
    desired : ndarray, shape (n_symbols, M)
        Effective signature of user 1 at each symbol.
    interference : ndarray, shape (n_symbols, M, J)
        Effective signatures of every interfering component (other users
        and intersymbol interference), each carrying an independent symbol.
    noise_var : ndarray, shape (n_symbols,)
        Effective per-chip noise variance (relay noise included).
    gains : dict
        Raw fading gains keyed by link name, for debugging and analysis.
    """

    received: np.ndarray
    symbols: np.ndarray
    data: np.ndarray
    desired: np.ndarray
    interference: np.ndarray
    noise_var: np.ndarray
    codes: np.ndarray
    gains: dict = field(default_factory=dict)

    @property
    def n_symbols(self):
        return self.received.shape[0]

    def window(self, i, symbols=None):
        """The :class:`ReceivedWindow` ending at symbol ``i`` (``i >= 2``)."""
        if i < 2:
            raise ValueError("a full window needs i >= 2")
        b = self.symbols[0] if symbols is None else symbols
        return ReceivedWindow(self.received[i], self.received[i - 1], self.received[i - 2], b[i], b[i - 1], b[i - 2])


def dbpsk_encode(data, reference=1):
    """Differentially encode ``data`` so that ``b[i] = a[i] b[i-1]`` with ``b[-1] = reference``.

    >>> dbpsk_encode([-1, 1, -1]).tolist()
    [-1.0, -1.0, 1.0]
    """
    a = check_symbols(data, "data")
    check_symbols([reference], "reference")
    return reference * np.cumprod(a, axis=-1)


def dbpsk_decode(symbols, reference=1):
    """Invert :func:`dbpsk_encode`: ``a[i] = b[i] b[i-1]``."""
    b = check_symbols(symbols, "symbols")
    prev = np.concatenate([np.full(b.shape[:-1] + (1,), float(reference)), b[..., :-1]], axis=-1)
    return b * prev


def make_spreading_codes(K, N, seed=0):
    """Draw ``K`` distinct random binary codes of length ``N``, normalised to unit norm.

    Codes are also kept distinct from each other's negation so that no two
    users share a signature direction. Returns an array of shape ``(K, N)``.
    """
    check_positive(K, "K", integer=True)
    check_positive(N, "N", integer=True)
    if N < 2:
        raise ValueError("N must be at least 2")
    if K > 2 ** (N - 1):
        raise ValueError(f"cannot draw {K} distinct codes of length {N}")
    rng = np.random.default_rng(seed)
    codes = np.empty((K, N))
    seen = set()
    k = 0
    while k < K:
        chips = rng.choice([-1.0, 1.0], size=N)
        key = tuple(chips * chips[0])  # c and -c share a key
        if key in seen:
            continue
        seen.add(key)
        codes[k] = chips
        k += 1
    return codes / np.sqrt(N)


def channel_matrix(path_gains, N):
    """Banded ``M x N`` convolution matrix for ``L_p`` path gains."""
    g = np.asarray(path_gains, dtype=complex).ravel()
    L = g.shape[0]
    H = np.zeros((N + L - 1, N), dtype=complex)
    for j in range(N):
        H[j : j + L, j] = g
    return H


def complex_noise(rng, variance, shape):
    """Circularly-symmetric complex Gaussian samples with ``E|n|^2 = variance``."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def received_vector(config, channels, codes, symbols, isi=None, noise_power=0.0, rng=None):
    """Received vector ``sum_k A_k b_k H_k c_k + isi + noise`` for one symbol interval."""
    M, N, K = config.M, config.N, config.K
    codes = np.asarray(codes, dtype=float)
    if codes.shape != (K, N):
        raise ValueError(f"codes must have shape {(K, N)}, got {codes.shape}")
    if len(channels) != K:
        raise ValueError(f"expected {K} channel matrices, got {len(channels)}")
    b = check_symbols(symbols)
    if b.shape != (K,):
        raise ValueError(f"expected {K} symbols, got shape {b.shape}")
    r = np.zeros(M, dtype=complex)
    for k in range(K):
        H = np.asarray(channels[k], dtype=complex)
        if H.shape != (M, N):
            raise ValueError(f"channel matrix {k} has shape {H.shape}, expected {(M, N)}")
        r += config.amplitudes[k] * b[k] * (H @ codes[k])
    if isi is not None:
        isi = np.asarray(isi, dtype=complex)
        if isi.shape != (M,):
            raise ValueError(f"isi must have length {M}")
        r += isi
    if noise_power > 0:
        r += complex_noise(np.random.default_rng(rng), noise_power, M)
    return r


def _pad(codes, M):
    out = np.zeros(codes.shape[:-1] + (M,))
    out[..., : codes.shape[-1]] = codes
    return out


def cooperative_received_vector(coop, config, hop1, hop2, codes, symbols, noise_powers=(0.0, 0.0), rng=None):
    """Destination vector of the two-hop AF uplink for one symbol interval.

    Parameters
    ----------
    hop1 : array_like, shape (n_relays,) or (K, n_relays)
        Source-to-relay gains (shared by all users when 1-D).
    hop2 : array_like, shape (n_relays,)
        Relay-to-destination gains.
    noise_powers : (float, float)
        Relay and destination noise variances.
    """
    K, M, R = config.K, config.M, coop.n_relays
    codes = np.asarray(codes, dtype=float)
    if codes.shape != (K, config.N):
        raise ValueError(f"codes must have shape {(K, config.N)}, got {codes.shape}")
    h1 = np.asarray(hop1, dtype=complex)
    if h1.ndim == 1:
        h1 = np.broadcast_to(h1, (K, h1.shape[0]))
    h2 = np.asarray(hop2, dtype=complex)
    if h1.shape != (K, R) or h2.shape != (R,):
        raise ValueError("hop gains do not match the number of users and relays")
    b = check_symbols(symbols)
    if b.shape != (K,):
        raise ValueError(f"expected {K} symbols, got shape {b.shape}")
    a_s = coop.source_gains_for(K)
    a_r = np.asarray(coop.relay_gains)
    padded = _pad(codes, M)
    sigma_r, sigma_d = noise_powers
    gen = np.random.default_rng(rng)

    r = np.zeros(M, dtype=complex)
    for n in range(R):
        r_sr = (a_s * b * h1[:, n]) @ padded
        if sigma_r > 0:
            r_sr = r_sr + complex_noise(gen, sigma_r, M)
        r += a_r[n] * h2[n] * r_sr
    if sigma_d > 0:
        r += complex_noise(gen, sigma_d, M)
    return r


def _multipath_signatures(codes, path_gains, amplitudes, M):
    """Per-symbol convolutions ``A_k H_k[i] c_k``; path_gains has shape (K, L, n)."""
    K, N = codes.shape
    L, n = path_gains.shape[1:]
    full = np.zeros((n, K, M), dtype=complex)
    for l in range(L):
        full[:, :, l : l + N] += path_gains[:, l, :].T[:, :, None] * codes[None, :, :]
    return full * np.asarray(amplitudes)[None, :, None]


def generate_packet(config, fd_ts, rng, codes=None, coop=None, n_scatterers=DEFAULT_SCATTERERS):
    """Simulate one packet of ``config.n_symbols`` symbol intervals.

    Each user (and, in the cooperative case, each hop) gets an independent
    Clarke fading process. With ``coop`` set the AF two-hop model is used
    and multipath is not modelled on the hops.
    """
    rng = np.random.default_rng(rng)
    K, N, M, n = config.K, config.N, config.M, config.n_symbols
    if codes is None:
        codes = make_spreading_codes(K, N, seed=rng.integers(2**32))
    codes = np.asarray(codes, dtype=float)
    data = rng.choice([-1.0, 1.0], size=(K, n))
    symbols = dbpsk_encode(data)
    sigma2 = config.noise_power

    if coop is None:
        gains = clarke_gains(fd_ts, n, n_scatterers, rng, size=(K, config.L_p)) / np.sqrt(config.L_p)
        full = _multipath_signatures(codes, gains, config.amplitudes, M)  # (n, K, M)
        # spill-over of the previous symbol's convolution into chips 0..L_p-2
        tails = np.zeros_like(full)
        if config.L_p > 1:
            tails[1:, :, : config.L_p - 1] = full[:-1, :, N:]
        received = np.einsum("kn,nkm->nm", symbols, full)
        received[1:] += np.einsum("kn,nkm->nm", symbols[:, :-1], tails[1:])
        received += complex_noise(rng, sigma2, (n, M))
        desired = full[:, 0, :]
        interferers = [full[:, 1:, :]]
        if config.L_p > 1:
            interferers.append(tails)
        interference = np.concatenate(interferers, axis=1).transpose(0, 2, 1)
        noise_var = np.full(n, sigma2)
        gain_record = {"user": gains}
    else:
        R = coop.n_relays
        a_s = coop.source_gains_for(K) * np.asarray(config.amplitudes)
        a_r = np.asarray(coop.relay_gains)
        hop1 = clarke_gains(fd_ts, n, n_scatterers, rng, size=(K, R))
        hop2 = clarke_gains(fd_ts, n, n_scatterers, rng, size=(R,))
        padded = _pad(codes, M)
        relay_coeff = a_r[:, None] * hop2  # (R, n)
        composite = a_s[:, None] * np.einsum("krn,rn->kn", hop1, relay_coeff)  # (K, n)
        full = composite.T[:, :, None] * padded[None, :, :]  # (n, K, M)
        received = np.einsum("kn,nkm->nm", symbols, full)
        relay_noise = complex_noise(rng, sigma2, (R, n, M))
        received += np.einsum("rn,rnm->nm", relay_coeff, relay_noise)
        received += complex_noise(rng, sigma2, (n, M))
        desired = full[:, 0, :]
        interference = full[:, 1:, :].transpose(0, 2, 1)
        noise_var = sigma2 * (1.0 + np.sum(np.abs(relay_coeff) ** 2, axis=0))
        gain_record = {"source_relay": hop1, "relay_destination": hop2}

    return Packet(
        received=received,
        symbols=symbols,
        data=data,
        desired=desired,
        interference=interference,
        noise_var=noise_var,
        codes=codes,
        gains=gain_record,
    )
