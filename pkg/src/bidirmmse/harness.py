"""
Monte-Carlo experiment runner.

Every packet is drawn from its own random substream ``default_rng([seed, p])``
and all algorithms in a run adapt on the very same received data, so
comparisons between them are paired. Results are merged in packet order,
which keeps CSV output byte-identical for a given configuration and seed
regardless of ``n_jobs``.

Configuration files are flat ``key = value`` text, one key per line, ``#``
comments allowed. Recognised keys::

    K, N, L_p, snr_db, n_symbols, training_len, amplitudes
    fd_ts            comma list of normalised fading rates
    n_packets, seed, n_jobs
    algorithms       comma list of algorithm ids
    cooperative      true/false, n_relays, relay_gains
    fixed_codes      reuse one code set for every packet
    users, snr_values  sweep values for the loading and SNR sweeps
    steady_start, steady_stop   steady-state averaging window
    ber_count_training          count bit errors during training
    <algorithm id>.<parameter>  estimator parameter override

Example::

    K = 4
    fd_ts = 0.001, 0.01
    algorithms = conv-rls, bidir-cg-mix
    bidir-cg-mix.lam = 0.98
"""

import configparser
import csv
import hashlib
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .analysis import analytical_curve, build_ensemble_matrices
from .estimators import (
    BidirectionalCG,
    BidirectionalNLMS,
    ConventionalCG,
    ConventionalNLMS,
    ConventionalRLS,
    DifferentialCG,
    DifferentialNLMS,
)
from .metrics import (
    MetricSeries,
    mmse_filters_from_signatures,
    mmse_sinr_from_signatures,
    sinr_from_signatures,
    snr_from_signatures,
)
from .receivers import detect_dbpsk, matched_filter_init
from .signal import CooperativeConfig, SystemConfig, generate_packet, make_spreading_codes

__all__ = [
    "ALGORITHMS",
    "SWEEPS",
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "SweepResult",
    "make_estimator",
    "run_experiment",
    "run_sweep",
    "run_analytical",
    "load_config",
    "parse_config",
]

MMSE_ID = "mmse"

ALGORITHMS = {
    "conv-nlms": (ConventionalNLMS, {}),
    "conv-rls": (ConventionalRLS, {}),
    "conv-cg": (ConventionalCG, {}),
    "diff-nlms": (DifferentialNLMS, {}),
    "diff-cg": (DifferentialCG, {}),
    "bidir-nlms": (BidirectionalNLMS, {}),
    "bidir-nlms-switch": (BidirectionalNLMS, {"weighting": "switching"}),
    "bidir-nlms-mix": (BidirectionalNLMS, {"weighting": "mixing"}),
    "bidir-cg": (BidirectionalCG, {}),
    "bidir-cg-switch": (BidirectionalCG, {"weighting": "switching"}),
    "bidir-cg-mix": (BidirectionalCG, {"weighting": "mixing"}),
}

SWEEPS = ("vs_symbol", "vs_fading_rate", "vs_users", "vs_snr")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    system: SystemConfig = field(default_factory=SystemConfig)
    cooperative: CooperativeConfig = None
    algorithms: tuple = ("mmse", "conv-rls", "diff-cg", "bidir-cg")
    overrides: dict = field(default_factory=dict)
    fading_rates: tuple = (0.01,)
    n_packets: int = 100
    sweep: str = "vs_symbol"
    sweep_values: tuple = ()
    seed: int = 0
    fixed_codes: bool = False
    steady_start: int = 300
    steady_stop: int = None
    ber_count_training: bool = False
    n_jobs: int = 1
    output: str = None

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.fading_rates = tuple(float(f) for f in self.fading_rates)
        self.sweep_values = tuple(self.sweep_values)
        self.validate()

    def validate(self):
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        unknown = [a for a in self.algorithms if a != MMSE_ID and a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithm id(s): {', '.join(unknown)}")
        for alg in self.overrides:
            if alg not in ALGORITHMS:
                raise ConfigError(f"override for unknown algorithm {alg!r}")
            cls, preset = ALGORITHMS[alg]
            valid = set(cls().get_params())
            bad = set(self.overrides[alg]) - valid
            if bad:
                raise ConfigError(f"{alg} has no parameter(s) {sorted(bad)}")
        if not self.fading_rates or min(self.fading_rates) <= 0:
            raise ConfigError("fading rates must be positive")
        if int(self.n_packets) != self.n_packets or self.n_packets < 1:
            raise ConfigError("n_packets must be a positive integer")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be at least 1")
        if not 0 <= self.steady_start < self.system.n_symbols:
            raise ConfigError("steady_start must lie inside the packet")

    def digest(self):
        """Stable hash of the configuration (output path excluded)."""
        d = asdict(replace(self, output=None, n_jobs=1))
        return hashlib.sha256(repr(sorted(d.items())).encode()).hexdigest()[:16]


def make_estimator(alg, training_len, init_filter=None, overrides=None):
    """Instantiate a registered estimator."""
    try:
        cls, preset = ALGORITHMS[alg]
    except KeyError:
        raise ConfigError(f"unknown algorithm id {alg!r}") from None
    params = dict(preset)
    params.update((overrides or {}).get(alg, {}))
    return cls(training_len=training_len, init_filter=init_filter, **params)


def _differential_errors(outputs, data):
    dec = np.array([detect_dbpsk(outputs[i], outputs[i - 1]) for i in range(1, len(outputs))])
    return np.concatenate([[False], dec != data[1:]])


def _run_packet(cfg, fd_ts, p, codes):
    """Run every algorithm on packet ``p``; returns per-algorithm records."""
    sysc = cfg.system
    rng = np.random.default_rng([cfg.seed, p])
    pk = generate_packet(sysc, fd_ts, rng, codes=codes, coop=cfg.cooperative)
    snr = snr_from_signatures(pk.desired, pk.noise_var)
    truth = pk.data[0]
    first = 1 if cfg.ber_count_training else max(sysc.training_len, 1)
    counted = np.arange(sysc.n_symbols) >= first
    w0 = matched_filter_init(pk.codes[0], sysc.M)
    input_hash = hashlib.sha256(np.ascontiguousarray(pk.received).tobytes()).hexdigest()

    records = {}
    for alg in cfg.algorithms:
        if alg == MMSE_ID:
            ratio = mmse_sinr_from_signatures(pk.desired, pk.interference, pk.noise_var) / snr
            W = mmse_filters_from_signatures(pk.desired, pk.interference, pk.noise_var)
            x_now = np.einsum("nm,nm->n", W.conj(), pk.received)
            x_prev = np.einsum("nm,nm->n", W[1:].conj(), pk.received[:-1])
            dec = np.where(np.real(x_now[1:] * np.conj(x_prev)) < 0, -1.0, 1.0)
            errors = np.concatenate([[False], dec != truth[1:]])
            power = np.abs(x_now) ** 2
            consumed = input_hash
        else:
            X = pk.received.copy()
            consumed = hashlib.sha256(X.tobytes()).hexdigest()
            est = make_estimator(alg, sysc.training_len, w0, cfg.overrides).fit(X, pk.symbols[0])
            ratio = sinr_from_signatures(est.coef_path_, pk.desired, pk.interference, pk.noise_var) / snr
            errors = np.concatenate([[False], est.decisions_[1:] != truth[1:]])
            power = est.output_power_
        records[alg] = (ratio, errors, power, consumed)
    return records


def _run_packet_args(args):
    return _run_packet(*args)


@dataclass
class RunResult:
    """Aggregated per-symbol metrics of one run.

    ``input_hashes[alg][p]`` is the digest of the received data that
    algorithm ``alg`` consumed in packet ``p``; identical lists across
    algorithms certify a paired comparison.
    """

    series: dict
    input_hashes: dict
    seed: int
    config_hash: str
    wall_time: float
    fd_ts: float

    def rows(self):
        for alg, s in self.series.items():
            sinr = s.sinr_over_snr_db
            ber = s.cumulative_ber
            for i in range(s.n_symbols):
                yield (i, alg, float(sinr[i]), float(ber[i]))

    def to_csv(self, path=None):
        """Per-symbol CSV ``symbol_index, algorithm_id, sinr_over_snr_db, cumulative_ber``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["symbol_index", "algorithm_id", "sinr_over_snr_db", "cumulative_ber"])
        for i, alg, sinr, ber in self.rows():
            w.writerow([i, alg, f"{sinr:.6f}", f"{ber:.6g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def steady_state(self, start, stop=None):
        return {alg: s.steady_state_db(start, stop) for alg, s in self.series.items()}


def run_experiment(config, fd_ts=None):
    """Run ``config.n_packets`` packets at one fading rate."""
    config.validate()
    fd_ts = config.fading_rates[0] if fd_ts is None else fd_ts
    sysc = config.system
    codes = make_spreading_codes(sysc.K, sysc.N, seed=config.seed) if config.fixed_codes else None
    start = time.perf_counter()
    args = [(config, fd_ts, p, codes) for p in range(config.n_packets)]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(_run_packet_args, args))
    else:
        results = [_run_packet_args(a) for a in args]

    first = 1 if config.ber_count_training else max(sysc.training_len, 1)
    counted = np.arange(sysc.n_symbols) >= first
    series = {alg: MetricSeries(sysc.n_symbols) for alg in config.algorithms}
    hashes = {alg: [] for alg in config.algorithms}
    for rec in results:
        for alg, (ratio, errors, power, consumed) in rec.items():
            series[alg].record_packet(ratio, errors, counted, power)
            hashes[alg].append(consumed)
    return RunResult(series, hashes, config.seed, config.digest(), time.perf_counter() - start, fd_ts)


@dataclass
class SweepResult:
    variable: str
    values: tuple
    runs: list
    steady_start: int
    steady_stop: int = None

    def rows(self):
        for value, run in zip(self.values, self.runs):
            for alg, s in run.series.items():
                yield (self.variable, value, alg, s.steady_state_db(self.steady_start, self.steady_stop), s.ber)

    def to_csv(self, path=None):
        """CSV ``sweep_variable, sweep_value, algorithm_id, sinr_over_snr_db, ber``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sweep_variable", "sweep_value", "algorithm_id", "sinr_over_snr_db", "ber"])
        for var, value, alg, sinr, ber in self.rows():
            w.writerow([var, value, alg, f"{sinr:.6f}", f"{ber:.6g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def table(self, stat="sinr"):
        """``{alg: [value per sweep point]}`` for ``stat`` in ``{"sinr", "ber"}``."""
        out = {}
        for run in self.runs:
            for alg, s in run.series.items():
                v = s.steady_state_db(self.steady_start, self.steady_stop) if stat == "sinr" else s.ber
                out.setdefault(alg, []).append(v)
        return out


def run_sweep(config):
    """Run the sweep named by ``config.sweep`` and collect one run per point."""
    config.validate()
    if config.sweep == "vs_symbol":
        raise ConfigError("vs_symbol is not a sweep; use run_experiment")
    if config.sweep == "vs_fading_rate":
        values = config.sweep_values or config.fading_rates
        runs = [run_experiment(config, float(v)) for v in values]
        variable = "fd_ts"
    elif config.sweep == "vs_users":
        values = config.sweep_values or (2, 4, 6, 8)
        runs = [run_experiment(replace(config, system=replace(config.system, K=int(k), amplitudes=None))) for k in values]
        variable = "K"
    else:
        values = config.sweep_values or (5.0, 10.0, 15.0, 20.0)
        runs = [run_experiment(replace(config, system=replace(config.system, snr_db=float(v)))) for v in values]
        variable = "snr_db"
    return SweepResult(variable, tuple(values), runs, config.steady_start, config.steady_stop)


def run_analytical(config, fd_ts=None, mu=None, n_ensemble=10_000, simulate=True):
    """Analytical bidirectional NLMS curve, optionally with its simulated counterpart.

    The analysis needs a fixed code set, so simulation reuses the codes the
    ensemble matrices were built from. Returns ``(curve, run)`` where
    ``curve`` has one SINR/SNR value (dB) per symbol and ``run`` is the
    simulated :class:`RunResult` (or ``None``).
    """
    sysc = config.system
    fd_ts = config.fading_rates[0] if fd_ts is None else fd_ts
    if mu is None:
        mu = make_estimator("bidir-nlms", sysc.training_len, overrides=config.overrides).mu
    codes = make_spreading_codes(sysc.K, sysc.N, seed=config.seed)
    mats = build_ensemble_matrices(sysc, codes, fd_ts, n_ensemble, seed=config.seed)
    curve = analytical_curve(mats, mu, sysc.n_symbols)
    run = None
    if simulate:
        algs = tuple(a for a in config.algorithms if a in (MMSE_ID, "bidir-nlms")) or ("bidir-nlms",)
        run = run_experiment(replace(config, algorithms=algs, fixed_codes=True), fd_ts)
    return curve, run


# -- flat key/value configuration ---------------------------------------------------


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _scalar(text):
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def parse_config(text, **defaults):
    """Build an :class:`ExperimentConfig` from flat ``key = value`` text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    try:
        return _config_from_pairs(dict(parser["experiment"]), defaults)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _config_from_pairs(kv, defaults):
    sys_kwargs = {}
    for key, conv in (("K", int), ("N", int), ("L_p", int), ("n_symbols", int), ("training_len", int), ("snr_db", float)):
        if key in kv:
            sys_kwargs[key] = conv(kv.pop(key))
    if "amplitudes" in kv:
        sys_kwargs["amplitudes"] = _floats(kv.pop("amplitudes"))

    exp = dict(defaults)
    coop = kv.pop("cooperative", "false").strip().lower() == "true"
    n_relays = int(kv.pop("n_relays", 2))
    relay_gains = _floats(kv.pop("relay_gains")) if "relay_gains" in kv else None
    if coop:
        exp["cooperative"] = CooperativeConfig(n_relays=n_relays, relay_gains=relay_gains)
    if "fd_ts" in kv:
        exp["fading_rates"] = _floats(kv.pop("fd_ts"))
    if "algorithms" in kv:
        exp["algorithms"] = tuple(a.strip() for a in kv.pop("algorithms").split(",") if a.strip())
    if "users" in kv:
        exp["sweep_values"] = _ints(kv.pop("users"))
    if "snr_values" in kv:
        exp["sweep_values"] = _floats(kv.pop("snr_values"))
    for key in ("n_packets", "seed", "n_jobs", "steady_start", "steady_stop"):
        if key in kv:
            exp[key] = int(kv.pop(key))
    for key in ("fixed_codes", "ber_count_training"):
        if key in kv:
            exp[key] = bool(_scalar(kv.pop(key)))
    if "sweep" in kv:
        exp["sweep"] = kv.pop("sweep").strip()

    overrides = {}
    for key in list(kv):
        if "." in key:
            alg, param = key.split(".", 1)
            overrides.setdefault(alg.strip(), {})[param.strip()] = _scalar(kv.pop(key))
    if kv:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(kv))}")
    return ExperimentConfig(system=SystemConfig(**sys_kwargs), overrides=overrides, **exp)


def load_config(path, **defaults):
    with open(path) as fh:
        return parse_config(fh.read(), **defaults)
