"""The twelve acceptance criteria, each runnable on its own.

Every criterion returns (passed, detail). `run_all` prints one line per
criterion and is what `ris-multicast verify` and the pytest gate both call.
The `fast` flag shrinks Monte-Carlo trial counts for smoke runs; the gate is
the full-size version.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass

import numpy as np

from . import alternating as alt
from . import barrier, baselines, bounds, harness, special_case
from .model import RicianParams, SystemDims, sample_channels
from .objective import PhaseConfig, TransmitCovariance, all_snrs, trig_expansion
from .sdp_engine import herm_to_vec, vec_to_herm

WORKERS = 2


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_instance(rng, m_max=3, n_max=3, k_max=3, B=1.0):
    dims = SystemDims(M=int(rng.integers(1, m_max + 1)),
                      N=int(rng.integers(1, n_max + 1)),
                      K=int(rng.integers(1, k_max + 1)))
    return sample_channels(dims, RicianParams(B=B, seed=int(rng.integers(2 ** 62))))


def _random_psd(rng, M, trace):
    A = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    Q = A @ A.conj().T + 1e-3 * np.eye(M)
    return Q * (trace / np.real(np.trace(Q)))


def _pmap(fn, items, workers=WORKERS):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=1))


# -- 1: gradient fidelity ----------------------------------------------------

def criterion_1(fast=False):
    rng = np.random.default_rng(101)
    n_inst = 15 if fast else 50
    start = time.time()
    worst = 0.0
    for _ in range(n_inst):
        ch = _random_instance(rng)
        Q = _random_psd(rng, ch.M, trace=0.4)
        theta = rng.uniform(0, 2 * np.pi, ch.N)
        snrs = all_snrs(barrier._unchecked_cov(Q, 1.0),
                        PhaseConfig.from_theta(theta), ch)
        state = barrier.BarrierState(Q=Q, theta=theta, gamma=0.7 * float(snrs.min()),
                                     p_max=1.0, t=float(rng.choice([1.0, 10.0])),
                                     ch=ch)
        dQ, dth, dg = barrier.gradients(state)
        ana = np.concatenate([herm_to_vec(dQ), dth, [dg]])

        z0 = np.concatenate([herm_to_vec(Q), theta, [state.gamma]])
        h = 1e-6
        r = ch.M * ch.M
        fd = np.zeros(len(z0))
        for i in range(len(z0)):
            zp, zm = z0.copy(), z0.copy()
            zp[i] += h
            zm[i] -= h
            fd[i] = (_gamma_at(zp, r, ch, state.t) - _gamma_at(zm, r, ch, state.t)) / (2 * h)
        rel = np.linalg.norm(fd + ana) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, rel)
    elapsed = time.time() - start
    ok = worst <= 1e-5 and elapsed < 10.0
    return ok, f"worst relative error {worst:.2e} over {n_inst} instances, {elapsed:.1f}s"


def _gamma_at(z, r, ch, t):
    M = ch.M
    state = barrier.BarrierState(Q=vec_to_herm(z[:r], M), theta=z[r:r + ch.N],
                                 gamma=float(z[-1]), p_max=1.0, t=t, ch=ch)
    return barrier.barrier_value(state)


# -- 2: trig-expansion identity ----------------------------------------------

def criterion_2(fast=False):
    rng = np.random.default_rng(202)
    n_inst = 15 if fast else 50
    worst = 0.0
    for _ in range(n_inst):
        ch = _random_instance(rng, m_max=4, n_max=4)
        Q = TransmitCovariance(_random_psd(rng, ch.M, trace=0.8), 1.0)
        k = int(rng.integers(ch.K))
        te = trig_expansion(Q, ch, k)
        for _ in range(100):
            th = rng.uniform(0, 2 * np.pi, ch.N)
            direct = float(all_snrs(Q, PhaseConfig.from_theta(th), ch)[k])
            rel = abs(te.evaluate(th) - direct) / max(direct, 1e-12)
            worst = max(worst, rel)
    return worst <= 1e-9, f"worst relative reconstruction error {worst:.2e}"


# -- 3: closed-form single-user oracle ----------------------------------------

def criterion_3(fast=False):
    rng = np.random.default_rng(303)
    sizes = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
    if fast:
        sizes = [(1, 2), (2, 2)]
    worst_ao = worst_bar = worst_theta = 0.0
    for (M, N) in sizes:
        for rep in range(2):
            ch = sample_channels(SystemDims(M=M, N=N, K=1),
                                 RicianParams(B=1.0, seed=int(rng.integers(2 ** 62))))
            phase = special_case.solve_p3(ch, 0)
            cap_star, _ = special_case.miso_capacity_and_q(phase, ch, 0, 1.0)

            rep_ao = alt.solve(ch, 1.0, alt.AlternatingConfig(J=4, delta=1e-9),
                               seed=rep)
            worst_ao = max(worst_ao, abs(rep_ao.capacity_bits - cap_star))

            best_bar = -np.inf
            for s in range(4):
                rb = barrier.solve(ch, 1.0, barrier.BarrierConfig(), seed=10 * rep + s)
                best_bar = max(best_bar, rb.capacity_bits)
            worst_bar = max(worst_bar, abs(best_bar - cap_star))

            if M == 1:
                cf = special_case.closed_form_theta_m1(ch, 0)
                d = np.abs(np.mod(phase.theta - cf + np.pi, 2 * np.pi) - np.pi)
                worst_theta = max(worst_theta, float(d.max()))
    ok = worst_ao <= 1e-3 and worst_bar <= 1e-3 and worst_theta <= 1e-3
    return ok, (f"AO gap {worst_ao:.2e} bits, barrier gap {worst_bar:.2e} bits, "
                f"M=1 theta gap {worst_theta:.2e} rad")


# -- 4: brute-force equivalence ----------------------------------------------

def _c4_case(seed):
    rng = np.random.default_rng(seed)
    dims = SystemDims(M=1, N=int(rng.integers(1, 4)), K=int(rng.integers(1, 4)))
    ch = sample_channels(dims, RicianParams(B=1.0, seed=seed))
    bf = baselines.brute_force(ch, 1.0, baselines.GridSpec(phase_levels=360))
    rep = alt.solve(ch, 1.0, alt.AlternatingConfig(J=4, delta=1e-9), seed=seed)
    return rep.capacity_bits, bf.capacity_bits


def criterion_4(fast=False):
    n = 6 if fast else 20
    start = time.time()
    ratios = []
    for cap, ref in _pmap(_c4_case, [40400 + i for i in range(n)]):
        ratios.append(cap / ref if ref > 0 else 1.0)
    elapsed = time.time() - start
    ok = min(ratios) >= 0.98 and elapsed < 300.0
    return ok, f"min AO/brute ratio {min(ratios):.5f} over {n} instances, {elapsed:.0f}s"


# -- 5: monotone traces --------------------------------------------------------

def criterion_5(fast=False):
    rng = np.random.default_rng(505)
    n_inst = 4 if fast else 10
    ao_ok = bar_ok = True
    for _ in range(n_inst):
        ch = _random_instance(rng)
        rep = alt.solve(ch, 1.0, alt.AlternatingConfig(J=2, delta=1e-9), seed=1)
        diffs = np.diff(rep.trace)
        ao_ok = ao_ok and bool(np.all(diffs >= -1e-9))
        rb = barrier.solve(ch, 1.0, barrier.BarrierConfig(), seed=2)
        for stage in rb.trace:
            sd = np.diff(stage)
            bar_ok = bar_ok and bool(np.all(sd <= 1e-12))
    return ao_ok and bar_ok, f"AO non-decreasing: {ao_ok}, barrier non-increasing: {bar_ok}"


# -- 6: moment verification ----------------------------------------------------

def criterion_6(fast=False):
    trials = 3000 if fast else 10000
    combos = [(M, N, B) for M in (4, 8) for N in (4, 16) for B in (0.0, 1.0, 10.0)]
    if fast:
        combos = combos[::3]
    fails = []
    for (M, N, B) in combos:
        r = bounds.verify_moments(M, N, B, trials=trials, seed=606)
        if not (r.mean_ok and r.var_ok):
            fails.append((M, N, B))
    los = bounds.verify_moments(4, 4, math.inf, trials=2000, seed=606)
    ok = not fails and los.sample_var == 0.0 and los.mean_ok
    detail = f"{len(combos)} combos at {trials} draws"
    if fails:
        detail += f", failed: {fails}"
    detail += f", pure-LoS variance {los.sample_var}"
    return ok, detail


# -- 7: scaling trends (doubling N, doubling M) --------------------------------

_C7_CFG = alt.AlternatingConfig(J=2, delta=1e-6, delta_rel=1e-6,
                                theta_step_method="multistart",
                                multistart_restarts=4)


def _c7_trial(arg):
    (M, N, trial) = arg
    ch = sample_channels(SystemDims(M=M, N=N, K=2),
                         RicianParams(B=1.0, seed=70000 + trial))
    return alt.solve(ch, 100.0, _C7_CFG, seed=trial).capacity_bits


def criterion_7(fast=False):
    trials = 30 if fast else 200
    caps = {}
    for (tag, M, N) in [("base", 4, 8), ("dblN", 4, 16), ("dblM", 8, 8)]:
        vals = _pmap(_c7_trial, [(M, N, t) for t in range(trials)])
        caps[tag] = np.array(vals)
    gain_n = float(np.mean(caps["dblN"] - caps["base"]))
    gain_m = float(np.mean(caps["dblM"] - caps["base"]))
    ok = (1.5 <= gain_n <= 2.5) and (0.5 <= gain_m <= 1.5)
    return ok, (f"N-doubling gain {gain_n:.3f} bits (want 2.0 +/- 0.5), "
                f"M-doubling gain {gain_m:.3f} bits (want 1.0 +/- 0.5), {trials} trials")


# -- 8: capacity decay in K ------------------------------------------------------

def _c8_trial(arg):
    (K, trial) = arg
    ch = sample_channels(SystemDims(M=8, N=8, K=K),
                         RicianParams(B=1.0, seed=80000 + trial))
    return alt.solve(ch, 100.0, _C7_CFG, seed=trial).capacity_bits


def criterion_8(fast=False):
    trials = 12 if fast else 64
    ks = [2, 4, 8, 16]
    means, ses = [], []
    for K in ks:
        vals = np.array(_pmap(_c8_trial, [(K, t) for t in range(trials)]))
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / np.sqrt(trials)))
    ordered = all(means[i + 1] <= means[i] + math.hypot(ses[i], ses[i + 1])
                  for i in range(len(ks) - 1))
    curve = bounds.bound_curves("k_decay", "K", ks, M=8, N=8, B=1.0, p_max=100.0)
    above = all(m > c for m, c in zip(means, curve.values))
    ok = ordered and above
    return ok, (f"means {[f'{m:.2f}' for m in means]} bits over K={ks}, "
                f"ordered within 1 SE: {ordered}, above white-rate curve: {above}")


# -- 9: K = M ratio plateau ------------------------------------------------------

def _c9_trial(arg):
    (KM, trial) = arg
    ch = sample_channels(SystemDims(M=KM, N=8, K=KM),
                         RicianParams(B=1.0, seed=90000 + trial))
    return alt.solve(ch, 100.0, _C7_CFG, seed=trial).capacity_bits


def criterion_9(fast=False):
    trials = 6 if fast else 16
    kms = [4, 8, 16]
    means = []
    for km in kms:
        vals = np.array(_pmap(_c9_trial, [(km, t) for t in range(trials)]))
        means.append(float(vals.mean()))
    spread = (max(means) - min(means)) / min(means)
    curve = bounds.bound_curves("km_upper", "K_equals_M", kms, N=8, B=1.0,
                                p_max=100.0)
    below = all(m < 1.1 * c for m, c in zip(means, curve.values))
    ok = spread < 0.25 and below
    return ok, (f"means {[f'{m:.2f}' for m in means]} bits at K=M={kms}, "
                f"spread {spread * 100:.1f}% (< 25%), below km_upper+10%: {below}")


# -- 10: dominance ordering -------------------------------------------------------

def _c10_trial(trial):
    ch = sample_channels(SystemDims(M=4, N=4, K=4),
                         RicianParams(B=1.0, seed=100000 + trial))
    bf = baselines.beamforming(ch, 100.0, restarts=2, seed=trial)
    cfg = alt.AlternatingConfig(J=2, delta=1e-6, delta_rel=1e-6,
                                theta_step_method="multistart",
                                multistart_restarts=4)
    cap = alt.solve(ch, 100.0, cfg, seed=trial,
                    extra_theta_inits=[bf.theta]).capacity_bits
    nr = baselines.no_ris(ch, 100.0)
    return cap, bf.capacity_bits, nr.capacity_bits


def criterion_10(fast=False):
    trials = 20 if fast else 100
    rows = _pmap(_c10_trial, list(range(trials)))
    bf_ok = all(cap >= bf - 1e-9 for cap, bf, _ in rows)
    frac = np.mean([cap > nr for cap, _, nr in rows])
    ok = bf_ok and frac >= 0.95
    return ok, (f"capacity >= beamforming on {trials}/{trials}: {bf_ok}; "
                f"capacity > no-RIS in {frac * 100:.0f}% (need >= 95%)")


# -- 11: robust baseline -----------------------------------------------------------

def criterion_11(fast=False):
    seeds = [33, 7] if fast else [33, 7, 101, 55]
    rng = np.random.default_rng(111)
    R = 1.0
    all_ok = True
    details = []
    for seed in seeds:
        ch = sample_channels(SystemDims(M=2, N=2, K=2), RicianParams(B=1.0, seed=seed))
        powers = []
        prev = None
        res = None
        for eps in (0.0, 0.25, 0.5):
            unc = baselines.UncertaintyModel(C_hat=ch.cascade.copy(),
                                             eps=np.full(2, eps), R=R)
            res = baselines.robust_beamforming(unc, ch.t, init=prev)
            if res.v is None:
                details.append(f"seed {seed} eps {eps}: infeasible")
                all_ok = False
                break
            powers.append(res.power)
            prev = (res.v, res.u)
        else:
            mono = all(powers[i] <= powers[i + 1] * (1 + 1e-6) for i in range(2))
            unc = baselines.UncertaintyModel(C_hat=ch.cascade.copy(),
                                             eps=np.full(2, 0.5), R=R)
            sampled_ok = True
            for _ in range(100):
                for k in range(2):
                    D = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
                    D *= 0.5 * rng.uniform() ** (1 / 8) / np.linalg.norm(D)
                    row = res.u @ (ch.cascade[k] + D) + ch.t[k]
                    if np.log2(1 + abs(row @ res.v) ** 2) < R - 1e-6:
                        sampled_ok = False
            exact_ok = bool(res.worst_rates.min() >= R - 1e-9)
            all_ok = all_ok and mono and sampled_ok and exact_ok
            details.append(f"seed {seed}: power {['%.3f' % p for p in powers]} "
                           f"mono={mono} sampled={sampled_ok} exact={exact_ok}")
    return all_ok, "; ".join(details)


# -- 12: sweep determinism -----------------------------------------------------------

def criterion_12(fast=False):
    plan = {
        "axis": "N", "axis_values": [2, 4],
        "fixed": {"M": 2, "K": 2, "B": 1.0, "rho_dB": 10.0},
        "methods": ["alternating", "no_ris"],
        "trials": 2, "base_seed": 4242, "workers": 1,
        "solver": {"alternating": {"J": 2, "delta_rel": 1e-6,
                                   "theta_step_method": "multistart"}},
    }
    rows1, _ = harness.run(plan)
    rows2, _ = harness.run(plan)
    plan["workers"] = 2
    rows3, _ = harness.run(plan)

    def strip(rows):
        return "\n".join(",".join(r.csv_fields()[:-1]) for r in rows)

    ok = strip(rows1) == strip(rows2) == strip(rows3)
    return ok, (f"replay and 2-worker CSVs byte-identical excl. timing: {ok} "
                f"(hash {harness.dataset_hash(rows1)[:12]})")


CHECKS = [
    (1, "gradient fidelity vs finite differences", criterion_1),
    (2, "trig expansion reconstructs the SNR", criterion_2),
    (3, "single-user closed-form oracle", criterion_3),
    (4, "brute-force equivalence (M=1 grid)", criterion_4),
    (5, "monotone solver traces", criterion_5),
    (6, "aligned-phase moment verification", criterion_6),
    (7, "capacity gains from doubling N and M", criterion_7),
    (8, "capacity decay in the user count", criterion_8),
    (9, "K = M ratio plateau", criterion_9),
    (10, "dominance over beamforming and no-RIS", criterion_10),
    (11, "robust design under bounded CSI error", criterion_11),
    (12, "sweep replay determinism", criterion_12),
]


def run_all(fast=False, criteria=None, echo=print):
    results = []
    for num, name, fn in CHECKS:
        if criteria is not None and num not in criteria:
            continue
        start = time.time()
        passed, detail = fn(fast=fast)
        res = CheckResult(criterion=num, name=name, passed=passed,
                          detail=detail, seconds=time.time() - start)
        results.append(res)
        if echo is not None:
            tag = "PASS" if passed else "FAIL"
            echo(f"[{tag}] criterion {num:2d} ({name}): {detail} "
                 f"[{res.seconds:.1f}s]")
    return results
