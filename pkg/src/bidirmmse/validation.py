"""
Acceptance checks.

``quick_checks`` runs fast deterministic sanity checks. ``CRITERIA`` maps
criterion numbers to functions that each run one seed-averaged experiment
and return a :class:`CriterionResult`.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .analysis import analytical_curve, build_ensemble_matrices, differential_equivalence_gap
from .bidirectional import (
    DEFAULT_MU,
    WeightingState,
    cg_solve,
    enforce_power_constraint,
    error_terms,
    mixing_update,
)
from .estimators import BidirectionalCG, BidirectionalNLMS, DifferentialCG, DifferentialNLMS
from .fading import clarke_generate, empirical_autocorrelation, estimate_correlation_factors
from .harness import ExperimentConfig, run_experiment, run_sweep
from .metrics import MetricSeries, ber_update, sinr_inst
from .receivers import matched_filter_init
from .signal import CooperativeConfig, ReceivedWindow, SystemConfig, dbpsk_decode, dbpsk_encode, generate_packet, make_spreading_codes

__all__ = ["CriterionResult", "CRITERIA", "quick_checks", "run_criteria"]

BIDIR_ALGORITHMS = (
    "bidir-nlms",
    "bidir-nlms-switch",
    "bidir-nlms-mix",
    "bidir-cg",
    "bidir-cg-switch",
    "bidir-cg-mix",
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float

    @property
    def within_budget(self):
        return self.elapsed <= self.budget

    def line(self):
        status = "PASS" if self.passed and self.within_budget else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.elapsed:.1f}s / {self.budget:.0f}s)"


def _timed(number, name, budget):
    def wrap(fn):
        def run(**kwargs):
            start = time.perf_counter()
            passed, detail = fn(**kwargs)
            return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - start, budget)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


@_timed(1, "Clarke autocorrelation", 30)
def clarke_fidelity(n_seeds=100, length=100_000, fd_ts=0.01, max_lag=10, tol=0.05):
    """Seed-averaged autocorrelation against ``J0(2 pi fd l)``."""
    acc = np.zeros(max_lag + 1, dtype=complex)
    for s in range(n_seeds):
        acc += empirical_autocorrelation(clarke_generate(fd_ts, length, seed=s), max_lag)
    acc /= n_seeds
    err = np.abs(acc - j0(2 * np.pi * fd_ts * np.arange(max_lag + 1))).max()
    return err <= tol, f"max |rho_hat - J0| = {err:.4f} (tol {tol})"


@_timed(2, "correlation-factor regime", 10)
def correlation_regime(n_seeds=100, length=10_000, fd_ts=0.01):
    f = np.zeros(3, dtype=complex)
    for s in range(n_seeds):
        cf = estimate_correlation_factors(clarke_generate(fd_ts, length, seed=s))
        f += (cf.f1, cf.f2, cf.f3)
    f /= n_seeds
    rel = abs(f[0] - f[2]) / abs(f[0])
    ratio = f[1].real / f[0].real
    return rel < 0.1 and ratio > 0.5, f"|f1-f3|/|f1| = {rel:.2e}, f2/f1 = {ratio:.4f}"


@_timed(3, "CG oracle equivalence", 5)
def cg_oracle(n_systems=100, seed=0, tol=1e-6, max_cond=1e3):
    """Sample-covariance (complex Wishart) systems, rejected above ``max_cond``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_systems):
        M = int(rng.integers(1, 17))
        while True:
            G = rng.standard_normal((M, M + 2)) + 1j * rng.standard_normal((M, M + 2))
            R = G @ G.conj().T
            if np.linalg.cond(R) <= max_cond:
                break
        R = 0.5 * (R + R.conj().T)
        t = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        w = cg_solve(R, t, np.zeros(M, dtype=complex), j_max=M)
        ref = np.linalg.solve(R, t)
        worst = max(worst, np.linalg.norm(w - ref) / np.linalg.norm(ref))
    return worst <= tol, f"worst relative error {worst:.2e} over {n_systems} systems (tol {tol:g})"


@_timed(4, "mixing convexity", 5)
def mixing_convexity(fd_ts=0.02, seed=0):
    cfg = SystemConfig()
    pk = generate_packet(cfg, fd_ts, np.random.default_rng(seed))
    w0 = matched_filter_init(pk.codes[0], cfg.M)
    worst_sum, min_rho = 0.0, np.inf
    for cls in (BidirectionalNLMS, BidirectionalCG):
        est = cls(weighting="mixing", training_len=cfg.training_len, init_filter=w0).fit(pk.received, pk.symbols[0])
        rho = est.rho_path_
        min_rho = min(min_rho, rho.min())
        worst_sum = max(worst_sum, np.abs(rho.sum(axis=1) - 1.0).max())
    return min_rho >= 0 and worst_sum <= 1e-12, f"min rho = {min_rho:.3g}, max |sum rho - 1| = {worst_sum:.1e}"


@_timed(5, "differential reduction", 5)
def differential_reduction(fd_ts=0.01, seed=0, tol=1e-12):
    cfg = SystemConfig()
    pk = generate_packet(cfg, fd_ts, np.random.default_rng(seed))
    w0 = matched_filter_init(pk.codes[0], cfg.M)
    kw = dict(training_len=cfg.training_len, init_filter=w0)
    pairs = (
        (BidirectionalNLMS(rho=(1, 0, 0), **kw), DifferentialNLMS(**kw)),
        (BidirectionalCG(rho=(1, 0, 0), **kw), DifferentialCG(**kw)),
    )
    worst = 0.0
    for bi, di in pairs:
        a = bi.fit(pk.received, pk.symbols[0]).coef_path_
        b = di.fit(pk.received, pk.symbols[0]).coef_path_
        worst = max(worst, float(np.max(np.linalg.norm(a - b, axis=1) / np.linalg.norm(b, axis=1))))
    return worst <= tol, f"max relative trajectory difference {worst:.1e} (tol {tol:g})"


def _criterion6_run(n_packets, seed):
    cfg = ExperimentConfig(
        algorithms=("mmse", "conv-rls", "diff-cg") + BIDIR_ALGORITHMS,
        fading_rates=(0.01,),
        n_packets=n_packets,
        seed=seed,
    )
    return run_experiment(cfg)


_C6_CACHE = {}


def _c6(n_packets, seed):
    key = (n_packets, seed)
    if key not in _C6_CACHE:
        _C6_CACHE[key] = _criterion6_run(n_packets, seed)
    return _C6_CACHE[key]


@_timed(6, "performance ordering", 300)
def performance_ordering(n_packets=100, seed=0, start=300, stop=500):
    run = _c6(n_packets, seed)
    ss = run.steady_state(start, stop)
    bi, di, rls, mmse = ss["bidir-cg"], ss["diff-cg"], ss["conv-rls"], ss["mmse"]
    per_seed = [
        np.mean(b[start:stop]) > np.mean(c[start:stop])
        for b, c in zip(run.series["bidir-cg"].packet_traces, run.series["conv-rls"].packet_traces)
    ]
    frac = float(np.mean(per_seed))
    ok = bi >= di >= rls and mmse - bi <= 3.0 and frac >= 0.9
    return ok, (
        f"bidir-cg {bi:.2f} dB, diff-cg {di:.2f} dB, conv-rls {rls:.2f} dB, mmse {mmse:.2f} dB; "
        f"bidir-cg > conv-rls in {100 * frac:.0f}% of packets"
    )


@_timed(7, "fading-rate robustness", 900)
def fading_robustness(n_packets=100, seed=0, start=300, stop=500):
    rates = (0.001, 0.005, 0.01, 0.02)
    cfg = ExperimentConfig(
        algorithms=("conv-rls", "conv-cg", "bidir-cg", "bidir-cg-mix"),
        fading_rates=rates,
        n_packets=n_packets,
        seed=seed,
        sweep="vs_fading_rate",
        steady_start=start,
        steady_stop=stop,
    )
    table = run_sweep(cfg).table("sinr")
    drop = {a: table[a][0] - table[a][2] for a in table}
    mix_gain = table["bidir-cg-mix"][3] - table["bidir-cg"][3]
    ok = drop["conv-rls"] > 5 and drop["conv-cg"] > 5 and drop["bidir-cg"] < 3 and mix_gain >= 0
    return ok, (
        f"drop 0.001->0.01: conv-rls {drop['conv-rls']:.2f}, conv-cg {drop['conv-cg']:.2f}, "
        f"bidir-cg {drop['bidir-cg']:.2f} dB; mix - unweighted at 0.02: {mix_gain:+.2f} dB"
    )


@_timed(8, "analytical vs simulated SINR", 300)
def analytical_agreement(n_packets=100, seed=0, K=4, n_ensemble=20_000, n_iter=20_000, start=300, stop=500):
    system = SystemConfig(K=K)
    codes = make_spreading_codes(K, system.N, seed=seed)
    mats = build_ensemble_matrices(system, codes, 0.001, n_ensemble, seed=seed)
    curve = analytical_curve(mats, DEFAULT_MU, n_iter)
    tail = curve[-100:]
    converged = float(np.ptp(tail)) < 1e-3
    analytical = float(curve[-1])
    cfg = ExperimentConfig(system=system, algorithms=("bidir-nlms",), fading_rates=(0.001,), n_packets=n_packets, seed=seed, fixed_codes=True)
    simulated = run_experiment(cfg).series["bidir-nlms"].steady_state_db(start, stop)
    gap = abs(analytical - simulated)
    return converged and gap <= 2.0, (
        f"K={K}: analytical {analytical:.2f} dB ({'converged' if converged else 'not converged'}), "
        f"simulated {simulated:.2f} dB, gap {gap:.2f} dB (tol 2)"
    )


def _monotone(values, inversions=1):
    return sum(b < a for a, b in zip(values, values[1:])) <= inversions


@_timed(9, "loading trend", 600)
def loading_trend(n_packets=100, seed=0, users=(2, 4, 6, 8)):
    cfg = ExperimentConfig(
        algorithms=("diff-cg", "bidir-cg"),
        fading_rates=(0.01,),
        n_packets=n_packets,
        seed=seed,
        sweep="vs_users",
        sweep_values=users,
    )
    ber = run_sweep(cfg).table("ber")
    mono = all(_monotone(ber[a]) for a in ber)
    diff, bi = np.array(ber["diff-cg"]), np.array(ber["bidir-cg"])
    gap = diff - bi
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_gap = np.where(diff > 0, gap / diff, 0.0)
    shrinks = gap[-1] < gap[0]
    fmt = lambda xs: ", ".join(f"{x:.2e}" for x in xs)
    return mono and shrinks, (
        f"BER diff-cg [{fmt(diff)}], bidir-cg [{fmt(bi)}]; gap K={users[0]} {gap[0]:.1e} -> K={users[-1]} {gap[-1]:.1e} "
        f"(relative {rel_gap[0]:.2f} -> {rel_gap[-1]:.2f})"
    )


@_timed(10, "cooperative convergence", 600)
def cooperative_convergence(n_packets=100, seed=0, window=150):
    cfg = ExperimentConfig(
        cooperative=CooperativeConfig(n_relays=2),
        algorithms=("diff-cg", "bidir-cg"),
        fading_rates=(0.01,),
        n_packets=n_packets,
        seed=seed,
    )
    run = run_experiment(cfg)
    bi = run.series["bidir-cg"].steady_state_db(0, window)
    di = run.series["diff-cg"].steady_state_db(0, window)
    return bi >= di, f"first {window} symbols: bidir-cg {bi:.2f} dB, diff-cg {di:.2f} dB"


@_timed(11, "power-constraint health", 300)
def power_health(n_packets=100, seed=0, after=50, low=0.5, high=2.0):
    run = _c6(n_packets, seed)
    powers = {a: float(np.mean(run.series[a].mean_output_power[after:])) for a in BIDIR_ALGORITHMS}
    ok = all(low <= p <= high for p in powers.values())
    return ok, ", ".join(f"{a} {p:.3f}" for a, p in powers.items())


CRITERIA = {
    1: clarke_fidelity,
    2: correlation_regime,
    3: cg_oracle,
    4: mixing_convexity,
    5: differential_reduction,
    6: performance_ordering,
    7: fading_robustness,
    8: analytical_agreement,
    9: loading_trend,
    10: cooperative_convergence,
    11: power_health,
}


def run_criteria(numbers=None, stream=None):
    """Run the selected criteria, printing one line each; returns the results."""
    results = []
    for n in numbers or sorted(CRITERIA):
        res = CRITERIA[n]()
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    return results


def quick_checks():
    """Fast deterministic checks; returns ``[(name, passed, detail)]``."""
    out = []

    def check(name, cond, detail=""):
        out.append((name, bool(cond), detail))

    a = np.array([-1.0, 1.0, -1.0])
    check("dbpsk round trip", np.array_equal(dbpsk_decode(dbpsk_encode(a)), a))
    codes = make_spreading_codes(4, 8, seed=1)
    check("unit-norm codes", np.allclose(np.linalg.norm(codes, axis=1), 1.0))
    win = ReceivedWindow(np.ones(2), np.ones(2), np.ones(2))
    e = error_terms(np.array([1.0, 0.0]), win)
    check("zero error on identical samples", max(e.magnitudes()) == 0)
    st = WeightingState(mode="mixing")
    mixing_update(st, type(e)(1.0, 2.0, 3.0))
    check("mixing stays convex", abs(st.rho.sum() - 1) < 1e-12 and st.rho.min() >= 0)
    R = np.diag([1.0, 2.0, 4.0]).astype(complex)
    t = np.ones(3, dtype=complex)
    check("cg exact in M steps", np.allclose(cg_solve(R, t, np.zeros(3), 3), np.linalg.solve(R, t)))
    check("power constraint halves", np.isclose(np.linalg.norm(enforce_power_constraint(np.ones(4), 4.0)), 1.0))
    w = np.array([1.0, 0.5])
    check("sinr scale invariance", np.isclose(sinr_inst(w, np.eye(2), np.eye(2) * 2), sinr_inst(3 * w, np.eye(2), np.eye(2) * 2)))
    s = MetricSeries(1)
    ber_update(s, 1.0, 1.0)
    check("ber accounting", s.errors == 0 and s.bits == 1)
    F = np.stack([np.eye(3)] * 3)
    check("equivalence gap at mu=0", np.isclose(differential_equivalence_gap(F, F, 0.0), 2 / 3))
    cfg = ExperimentConfig(system=SystemConfig(n_symbols=20, training_len=10), algorithms=("mmse", "diff-cg"), n_packets=1, steady_start=0)
    run = run_experiment(cfg)
    check("paired inputs", run.input_hashes["mmse"] == run.input_hashes["diff-cg"])
    check("csv row count", run.to_csv().count("\n") == 1 + 2 * 20)
    return out
