"""Monte Carlo experiment harness: configuration, replication, summaries, CSV."""

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bandit_env import EnvBatch
from .errors import BanditError, ConfigError
from .exp_family import load_family
from .policies import POLICY_NAMES, Policy
from .regret import lower_bound_constant, profile, proxy_regret_batch, regret_estimate

CSV_HEADER = ["policy", "t", "regret_mean", "regret_stderr", "proxy_mean", "index_evals",
              "wall_time_ns", "regret_over_logt", "lower_bound_const"]


@dataclass
class PolicySpec:
    name: str
    delta: float = None
    beta: float = 1.0


@dataclass
class ExperimentConfig:
    family: object
    thetas: np.ndarray
    M: int
    T: int
    policies: list
    reps: int = 1
    master_seed: int = 0
    checkpoints: np.ndarray = None
    output_dir: str = "out"
    record_counts: bool = False
    init: object = "stationary"
    chunk: int = 256
    family_json: dict = field(default=None, repr=False)
    theta_source: dict = field(default=None, repr=False)

    @property
    def K(self):
        return self.thetas.size

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        if self.K < 2:
            raise ConfigError("thetas", "need at least two arms")
        if not 1 <= self.M <= self.K:
            raise ConfigError("M", f"must lie in [1, K={self.K}]")
        if self.T < self.K:
            raise ConfigError("T", f"must be at least K={self.K}")
        if self.reps < 1:
            raise ConfigError("reps", "must be at least 1")
        if self.chunk < 1:
            raise ConfigError("chunk", "must be at least 1")
        if not self.policies:
            raise ConfigError("policies", "at least one policy is required")
        if self.checkpoints is None:
            self.checkpoints = log_checkpoints(self.K, self.T, 50)
        cp = np.asarray(self.checkpoints, dtype=np.int64)
        if cp.size == 0 or np.any(np.diff(cp) <= 0) or cp[-1] != self.T or cp[0] < 1:
            raise ConfigError("checkpoints", "must be strictly increasing, >= 1, ending at T")
        self.checkpoints = cp


def log_checkpoints(K, T, n_points):
    pts = np.unique(np.round(np.geomspace(K, T, n_points)).astype(np.int64))
    pts = pts[(pts >= K) & (pts <= T)]
    if pts.size == 0 or pts[-1] != T:
        pts = np.append(pts, T)
    return pts


def _sample_thetas(spec):
    if "normal" in spec:
        nd = spec["normal"]
        rng = np.random.default_rng(int(nd.get("seed", 0)))
        return rng.normal(float(nd.get("mean", 0.0)), math.sqrt(float(nd["variance"])), int(spec["K"]))
    raise ConfigError("thetas", f"unknown sampler {sorted(spec)}")


def parse_config(raw, reps=None, seed=None, out=None):
    """Build an :class:`ExperimentConfig` from a parsed JSON object.

    Command-line overrides (``reps``, ``seed``, ``out``) win over the file.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    try:
        fam = load_family(raw["family"])
    except KeyError as e:
        raise ConfigError("family", f"missing key {e}") from None
    except BanditError as e:
        raise ConfigError("family", str(e)) from None

    th = raw.get("thetas")
    if th is None:
        raise ConfigError("thetas", "missing")
    if isinstance(th, dict):
        if "K" not in th and "K" in raw:
            th = {**th, "K": raw["K"]}
        if "K" not in th:
            raise ConfigError("K", "required with a theta sampler")
        thetas = _sample_thetas(th)
    else:
        thetas = np.asarray(th, dtype=float)
    if "K" in raw and int(raw["K"]) != thetas.size:
        raise ConfigError("K", f"K={raw['K']} but {thetas.size} thetas given")

    delta = raw.get("delta")
    beta = float(raw.get("beta", 1.0))
    pols = []
    for p in raw.get("policies", list(POLICY_NAMES)):
        if isinstance(p, str):
            p = {"name": p}
        name = p.get("name")
        if name not in POLICY_NAMES:
            raise ConfigError("policies", f"unknown policy {name!r}")
        pols.append(PolicySpec(name, p.get("delta", delta), float(p.get("beta", beta))))
    K = thetas.size
    for p in pols:
        if p.delta is not None and not 0 < p.delta < 1 / K:
            raise ConfigError("delta", f"{p.delta} outside (0, 1/K)")

    T = int(raw.get("T", 0))
    cp = raw.get("checkpoints", "log(50)")
    if isinstance(cp, str):
        if not (cp.startswith("log(") and cp.endswith(")")):
            raise ConfigError("checkpoints", f"expected a list or 'log(n)', got {cp!r}")
        cp = log_checkpoints(K, T, int(cp[4:-1])) if T >= K else None

    return ExperimentConfig(
        family=fam,
        thetas=thetas,
        M=int(raw.get("M", 1)),
        T=T,
        policies=pols,
        reps=int(reps if reps is not None else raw.get("reps", 1)),
        master_seed=int(seed if seed is not None else raw.get("master_seed", 0)),
        checkpoints=cp,
        output_dir=str(out if out is not None else raw.get("output_dir", "out")),
        record_counts=bool(raw.get("record_counts", False)),
        init=raw.get("init", "stationary"),
        chunk=int(raw.get("chunk", 256)),
        family_json=raw["family"],
        theta_source=th if isinstance(th, dict) else None,
    )


def load_config(path, **overrides):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("config", str(e)) from None
    return parse_config(raw, **overrides)


@dataclass
class RunRecord:
    rep_id: int
    policy: str
    checkpoints: np.ndarray
    cum_reward: np.ndarray
    counts: np.ndarray
    proxy: np.ndarray
    index_evals: np.ndarray
    wall_time_ns: np.ndarray
    min_w: int = None
    log: np.ndarray = field(default=None, repr=False)


def run_batch(fam, thetas, M, T, policy_spec, rep_ids, master_seed=0, checkpoints=None,
              init="stationary", prof=None, keep_log=False):
    """Run one policy on a batch of replications; returns a list of RunRecord."""
    thetas = np.asarray(thetas, dtype=float)
    K = thetas.size
    checkpoints = np.asarray(checkpoints if checkpoints is not None else [T], dtype=np.int64)
    prof = prof or profile(fam, thetas, M)
    policy = Policy(policy_spec.name, fam, delta=policy_spec.delta, beta=policy_spec.beta)
    rep_ids = np.asarray(rep_ids)
    R = rep_ids.size
    env = EnvBatch(fam, thetas, M, rep_ids, init=init, seed=master_seed, keep_log=keep_log)
    state = policy.new_state(K, M, R)

    C = checkpoints.size
    S = np.empty((R, C))
    N = np.empty((R, C, K), dtype=np.int64)
    ev = np.empty((R, C), dtype=np.int64)
    wall = np.empty(C, dtype=np.int64)
    c = 0
    t0 = time.perf_counter_ns()
    for s in range(1, T + 1):
        chosen = policy.select(state, s)
        rewards = env.step(chosen)
        state.observe(chosen, rewards)
        if s == checkpoints[c]:
            S[:, c] = env.cum_reward
            N[:, c] = env.counts
            ev[:, c] = state.index_evals
            wall[c] = (time.perf_counter_ns() - t0) // R
            c += 1
            if c == C:
                break
    proxy = proxy_regret_batch(prof, N, checkpoints[None, :, None].astype(float))
    min_w = state.min_w if policy.round_robin and T > K else [None] * R
    log = np.stack(env.log, axis=1) if keep_log else None
    return [
        RunRecord(int(rep_ids[r]), policy.name, checkpoints, S[r], N[r], proxy[r], ev[r], wall.copy(),
                  None if min_w[r] is None else int(min_w[r]), None if log is None else log[r])
        for r in range(R)
    ]


def _job(args):
    cfg, pidx, rep_ids = args
    return pidx, run_batch(cfg.family, cfg.thetas, cfg.M, cfg.T, cfg.policies[pidx], rep_ids,
                           cfg.master_seed, cfg.checkpoints, cfg.init)


def run_experiment(cfg, workers=1):
    """All policies x replications.

    Replications are cut into fixed chunks of ``cfg.chunk`` regardless of the
    worker count, and each replication draws only from its own streams, so
    the output does not depend on ``workers``.
    """
    reps = np.arange(cfg.reps)
    chunks = [reps[i:i + cfg.chunk] for i in range(0, cfg.reps, cfg.chunk)]
    jobs = [(cfg, p, ch) for p in range(len(cfg.policies)) for ch in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    records = []
    for _, recs in sorted(results, key=lambda x: x[0]):
        records.extend(recs)
    return records


@dataclass
class SummaryRow:
    policy: str
    t: int
    regret_mean: float
    regret_stderr: float
    proxy_mean: float
    index_evals: float
    wall_time_ns: float
    regret_over_logt: float
    lower_bound_const: float


def summarize(records, prof, fam=None, lb=None):
    """Per policy x checkpoint means; ``lb`` defaults to the lower-bound constant."""
    if not records:
        raise ValueError("no records")
    if lb is None:
        lb = lower_bound_constant(prof, fam) if fam is not None else float("nan")
    rows = []
    for name in sorted({r.policy for r in records}):
        recs = [r for r in records if r.policy == name]
        cps = recs[0].checkpoints
        for j, t in enumerate(cps):
            est = regret_estimate(prof, [r.cum_reward[j] for r in recs], int(t))
            rows.append(SummaryRow(
                policy=name,
                t=int(t),
                regret_mean=est.mean,
                regret_stderr=est.stderr,
                proxy_mean=float(np.mean([r.proxy[j] for r in recs])),
                index_evals=float(np.mean([r.index_evals[j] for r in recs])),
                wall_time_ns=float(np.mean([r.wall_time_ns[j] for r in recs])),
                regret_over_logt=est.mean / math.log(t) if t > 1 else float("nan"),
                lower_bound_const=float(lb),
            ))
    return rows


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def emit_csv(summary, path):
    """Write summary rows sorted by (policy, t); floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = sorted(summary, key=lambda r: (r.policy, r.t))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])
    return path


def read_csv(path):
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(SummaryRow(
                policy=rec["policy"], t=int(rec["t"]),
                **{k: float(rec[k]) for k in CSV_HEADER[2:]},
            ))
    return out


def write_counts(records, path):
    path = Path(path)
    K = records[0].counts.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "rep", "t", "cum_reward"] + [f"N{a}" for a in range(K)])
        for r in records:
            for j, t in enumerate(r.checkpoints):
                w.writerow([r.policy, r.rep_id, int(t), _fmt(r.cum_reward[j])]
                           + [int(x) for x in r.counts[j]])
    return path
