"""Monte-Carlo experiment orchestration: sweep plans, deterministic per-trial
seeding, CSV emission, and timing reports.

A plan is a single JSON document:

    {
      "schema_version": 1,
      "axis": "N",                      # N | B | K | K_equals_M | ris_position_d0
      "axis_values": [2, 4, 8],
      "fixed": {"M": 8, "N": 8, "K": 4, "B": 1.0, "rho_dB": 20.0,
                "d_over_lambda": 1.0},
      "methods": ["alternating", "no_ris"],
      "trials": 2,
      "base_seed": 1234,
      "workers": 1,
      "solver": {"alternating": {"J": 4, "delta_rel": 1e-6}}
    }

CLI flags override seed/workers/output. Replays with the same plan and seed
produce byte-identical CSV except for the wall-time column.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import alternating as alt
from . import barrier, baselines, bounds, special_case
from .model import (ChannelRealization, Geometry, RicianParams, SystemDims,
                    derive_seed, sample_channels)
from .objective import PhaseConfig, TransmitCovariance, min_rate

AXES = ("N", "B", "K", "K_equals_M", "ris_position_d0")
METHODS = ("barrier", "alternating", "special_case", "brute_force",
           "beamforming", "robust", "no_ris", "bound_lower", "bound_upper")
CSV_HEADER = "axis,axis_value,method,trial,seed,capacity_bits,iterations,status,wall_ms"

BOUND_KINDS = {  # axis -> (lower kind, upper kind)
    "N": ("lower_MN", "upper_MN"),
    "B": ("lower_MN", "upper_MN"),
    "K": ("k_decay", "upper_MN"),
    "K_equals_M": ("km_lower", "km_upper"),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    axis: str
    axis_values: tuple
    fixed: dict
    methods: tuple
    trials: int
    base_seed: int = 0
    workers: int = 1
    solver: dict = field(default_factory=dict)
    schema_version: int = 1

    def __post_init__(self):
        if self.schema_version != 1:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        vals = tuple(float(v) for v in self.axis_values)
        if len(vals) == 0 or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("axis_values must be non-empty and strictly increasing")
        object.__setattr__(self, "axis_values", vals)
        methods = []
        for m in self.methods:
            if m == "bounds":
                methods.extend(["bound_lower", "bound_upper"])
            elif m in METHODS:
                methods.append(m)
            else:
                raise ConfigError(f"unknown method {m!r}")
        object.__setattr__(self, "methods", tuple(methods))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def load_plan(source) -> ExperimentPlan:
    """Build a plan from a dict, JSON string, or path to a JSON file."""
    if isinstance(source, ExperimentPlan):
        return source
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            with open(text) as fh:
                doc = json.load(fh)
    known = {"schema_version", "axis", "axis_values", "fixed", "methods",
             "trials", "base_seed", "workers", "solver"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown plan fields: {sorted(extra)}")
    try:
        return ExperimentPlan(
            axis=doc["axis"], axis_values=tuple(doc["axis_values"]),
            fixed=dict(doc.get("fixed", {})), methods=tuple(doc["methods"]),
            trials=int(doc["trials"]), base_seed=int(doc.get("base_seed", 0)),
            workers=int(doc.get("workers", 1)), solver=dict(doc.get("solver", {})),
            schema_version=int(doc.get("schema_version", 1)))
    except KeyError as exc:
        raise ConfigError(f"missing plan field {exc}") from exc


@dataclass
class ResultRow:
    axis: str
    axis_value: float
    method: str
    trial: int
    seed: int
    capacity_bits: float
    iterations: int
    status: str
    wall_ms: float

    def csv_fields(self):
        av = self.axis_value
        av_s = str(int(av)) if float(av).is_integer() else f"{av:.10g}"
        return [self.axis, av_s, self.method, str(self.trial), str(self.seed),
                f"{self.capacity_bits:.12g}", str(self.iterations), self.status,
                f"{self.wall_ms:.3f}"]


def _dims_and_params(plan: ExperimentPlan, axis_value: float):
    fx = dict(plan.fixed)
    M = int(fx.get("M", 8))
    N = int(fx.get("N", 8))
    K = int(fx.get("K", 4))
    B = float(fx.get("B", 1.0))
    if plan.axis == "N":
        N = int(axis_value)
    elif plan.axis == "B":
        B = axis_value
    elif plan.axis == "K":
        K = int(axis_value)
    elif plan.axis == "K_equals_M":
        K = M = int(axis_value)
    if "p_max" in fx:
        p_max = float(fx["p_max"])
    elif plan.axis == "ris_position_d0":
        p_max = 10.0 ** (float(fx.get("p_max_dBW", 10.0)) / 10.0)
    else:
        p_max = 10.0 ** (float(fx.get("rho_dB", 20.0)) / 10.0)
    return (SystemDims(M=M, N=N, K=K), B,
            float(fx.get("d_over_lambda", 1.0)), p_max)


def _make_instance(plan: ExperimentPlan, axis_value: float, seed: int):
    dims, B, d_over_lambda, p_max = _dims_and_params(plan, axis_value)
    geometry = None
    if plan.axis == "ris_position_d0":
        fx = plan.fixed
        pos_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
        radii = 50.0 * np.sqrt(pos_rng.uniform(size=dims.K))
        angs = pos_rng.uniform(0.0, 2.0 * np.pi, dims.K)
        users = np.stack([150.0 + radii * np.cos(angs), radii * np.sin(angs)], axis=-1)
        geometry = Geometry(bs_position=(0.0, 0.0),
                            ris_position=(float(axis_value), 50.0),
                            user_positions=users,
                            noise_power_dBm=float(fx.get("noise_power_dBm", -80.0)))
    params = RicianParams(B=B, d_over_lambda=d_over_lambda, seed=seed)
    ch = sample_channels(dims, params, geometry)
    return ch, p_max


def _validated_capacity(ch, p_max, Q, theta, claimed=None) -> float:
    """Min-rate recomputed from the stored (Q, theta); when the solver claims
    a capacity it must agree with the recomputation to 1e-6."""
    cov = TransmitCovariance(Q=Q, p_max=p_max)
    phase = PhaseConfig.from_theta(theta)
    value, _ = min_rate(cov, phase, ch)
    if claimed is not None and abs(claimed - value) > 1e-6:
        raise RuntimeError(
            f"capacity re-validation failed: claimed {claimed}, got {value}")
    return value


def run_trial(plan: ExperimentPlan, point_idx: int, method: str, trial: int) -> ResultRow:
    axis_value = plan.axis_values[point_idx]
    seed = derive_seed(plan.base_seed, point_idx, trial)
    opts = dict(plan.solver.get(method, {}))
    start = time.perf_counter()

    if method in ("bound_lower", "bound_upper"):
        row = _bound_row(plan, axis_value)
        row.trial = trial
        row.seed = seed
        row.wall_ms = (time.perf_counter() - start) * 1e3
        return row

    ch, p_max = _make_instance(plan, axis_value, seed)
    status = "optimal"
    iterations = 0
    capacity = 0.0
    try:
        if method == "barrier":
            rep = barrier.solve(ch, p_max, barrier.BarrierConfig(**opts), seed=seed)
            capacity = _validated_capacity(ch, p_max, rep.Q, rep.theta)
            iterations, status = rep.iterations, rep.status
        elif method == "alternating":
            cfg = alt.AlternatingConfig(**{"J": 4, "delta_rel": 1e-6, **opts})
            rep = alt.solve(ch, p_max, cfg, seed=seed)
            capacity = _validated_capacity(ch, p_max, rep.Q, rep.theta,
                                           claimed=rep.capacity_bits)
            iterations, status = rep.iterations, rep.status
        elif method == "special_case":
            res = special_case.detect_and_solve(ch, p_max, seed=seed)
            if res is None:
                status, capacity = "not_detected", 0.0
            else:
                capacity = _validated_capacity(ch, p_max, res.Q.Q, res.theta.theta)
        elif method == "brute_force":
            rep = baselines.brute_force(ch, p_max, baselines.GridSpec(**opts))
            capacity = _validated_capacity(ch, p_max, rep.Q, rep.theta,
                                           claimed=rep.capacity_bits)
            iterations = rep.iterations
        elif method == "beamforming":
            rep = baselines.beamforming(ch, p_max, seed=seed, **opts)
            capacity = _validated_capacity(ch, p_max, rep.Q, rep.theta,
                                           claimed=rep.capacity_bits)
        elif method == "no_ris":
            rep = baselines.no_ris(ch, p_max)
            # the reflected path is absent here, so re-validate against the
            # direct links instead of the combined channel
            snrs = np.real(np.einsum("km,mn,kn->k", ch.t, rep.Q, ch.t.conj()))
            capacity = float(np.log2(1.0 + max(float(snrs.min()), 0.0)))
            if abs(capacity - rep.capacity_bits) > 1e-6:
                raise RuntimeError("no_ris capacity re-validation failed")
        elif method == "robust":
            eps = float(opts.pop("eps", 0.5))
            R = float(opts.pop("R", 1.0))
            unc = baselines.UncertaintyModel(
                C_hat=ch.cascade.copy(), eps=np.full(ch.K, eps), R=R)
            res = baselines.robust_beamforming(unc, ch.t,
                                               baselines.RobustConfig(**opts))
            status = res.status
            capacity = float(res.worst_rates.min()) if res.worst_rates is not None else 0.0
        else:  # pragma: no cover
            raise ConfigError(f"unhandled method {method}")
    except (ValueError, baselines.BudgetExceededError):
        status, capacity = "skipped", 0.0

    return ResultRow(axis=plan.axis, axis_value=axis_value, method=method,
                     trial=trial, seed=seed, capacity_bits=capacity,
                     iterations=iterations, status=status,
                     wall_ms=(time.perf_counter() - start) * 1e3)


def _eval_bound(plan: ExperimentPlan, method: str, axis_value: float) -> float:
    dims, B, _, p_max = _dims_and_params(plan, axis_value)
    lower_kind, upper_kind = BOUND_KINDS[plan.axis]
    kind = lower_kind if method == "bound_lower" else upper_kind
    curve = bounds.bound_curves(kind, plan.axis, [axis_value], M=dims.M,
                                N=dims.N, K=dims.K, B=B, p_max=p_max)
    return float(curve.values[0])


def run(plan, out_path=None):
    """Execute the plan; returns (rows, summary dict). Deterministic up to the
    wall-time column for a fixed (plan, base_seed)."""
    plan = load_plan(plan)
    tasks = []
    for p_idx in range(len(plan.axis_values)):
        for method in plan.methods:
            if method in ("bound_lower", "bound_upper"):
                tasks.append((p_idx, method, 0))
            else:
                tasks.extend((p_idx, method, t) for t in range(plan.trials))

    if plan.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=plan.workers) as pool:
            rows = list(pool.map(_task_entry, [(plan, t) for t in tasks],
                                 chunksize=1))
    else:
        rows = [_task_entry((plan, t)) for t in tasks]

    order = {m: i for i, m in enumerate(plan.methods)}
    rows.sort(key=lambda r: (r.axis_value, order[r.method], r.trial))
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            fh.write(to_csv(rows))
    return rows, summarize(rows)


def _task_entry(arg):
    plan, (p_idx, method, trial) = arg
    if method in ("bound_lower", "bound_upper"):
        axis_value = plan.axis_values[p_idx]
        start = time.perf_counter()
        if plan.axis in BOUND_KINDS:
            cap, status = _eval_bound(plan, method, axis_value), "bound"
        else:
            cap, status = 0.0, "skipped"
        return ResultRow(axis=plan.axis, axis_value=axis_value, method=method,
                         trial=0, seed=0, capacity_bits=cap, iterations=0,
                         status=status,
                         wall_ms=(time.perf_counter() - start) * 1e3)
    return run_trial(plan, p_idx, method, trial)


def to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(",".join(r.csv_fields()) + "\n")
    return buf.getvalue()


def dataset_hash(rows) -> str:
    """SHA-256 of the dataset with the wall-time column removed."""
    h = hashlib.sha256()
    for r in rows:
        h.update(",".join(r.csv_fields()[:-1]).encode())
        h.update(b"\n")
    return h.hexdigest()


def summarize(rows) -> dict:
    """(axis_value, method) -> (mean, std, n) over successfully solved rows."""
    groups = {}
    for r in rows:
        if r.status in ("skipped", "not_detected"):
            continue
        groups.setdefault((r.axis_value, r.method), []).append(r.capacity_bits)
    return {k: (float(np.mean(v)), float(np.std(v)), len(v))
            for k, v in groups.items()}


def summary_table(summary) -> str:
    lines = ["axis_value  method          mean_bits   std    n"]
    for (av, m), (mean, std, n) in sorted(summary.items()):
        lines.append(f"{av:<11.6g} {m:<15} {mean:>8.4f} {std:>6.3f} {n:>4d}")
    return "\n".join(lines)


def timing_report(plan):
    """Wall-time distribution per method at the first axis point.

    Returns (rows, {method: sorted wall_ms list}); rows = trials x methods.
    """
    plan = load_plan(plan)
    single = replace(plan, axis_values=(plan.axis_values[0],),
                     methods=tuple(m for m in plan.methods
                                   if m not in ("bound_lower", "bound_upper")))
    tasks = [(0, method, t) for method in single.methods
             for t in range(single.trials)]
    rows = [_task_entry((single, t)) for t in tasks]
    cdf = {}
    for r in rows:
        cdf.setdefault(r.method, []).append(r.wall_ms)
    for v in cdf.values():
        v.sort()
    return rows, cdf
