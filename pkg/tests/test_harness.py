import json

import numpy as np
import pytest

from markovbandit.errors import ConfigError
from markovbandit.harness import (CSV_HEADER, PolicySpec, emit_csv, log_checkpoints, parse_config,
                                  read_csv, run_batch, run_experiment, summarize)
from markovbandit.regret import profile

BASE = {
    "family": {"two_state": {"p": 0.49, "q": 0.45}},
    "thetas": [0.4, 0.1, -0.2],
    "M": 1,
    "T": 300,
    "policies": ["rr-klucb", "ucb"],
    "reps": 6,
    "master_seed": 5,
    "checkpoints": [10, 100, 300],
    "chunk": 4,
}


def cfg(**kw):
    return parse_config({**BASE, **kw})


class TestConfig:
    def test_valid(self):
        c = cfg()
        assert c.K == 3 and c.checkpoints.tolist() == [10, 100, 300]
        assert [p.name for p in c.policies] == ["rr-klucb", "ucb"]

    @pytest.mark.parametrize("field,value", [
        ("M", 4), ("T", 2), ("reps", 0), ("checkpoints", [10, 5, 300]),
        ("checkpoints", [10, 200]), ("policies", ["nope"]), ("delta", 0.5),
        ("checkpoints", "linear(4)"),
    ])
    def test_field_errors(self, field, value):
        with pytest.raises(ConfigError) as e:
            cfg(**{field: value})
        assert e.value.field == field

    def test_bad_family(self):
        with pytest.raises(ConfigError) as e:
            cfg(family={"P": [[1, 0], [0, 1]], "f": [0, 1]})
        assert e.value.field == "family"

    def test_k_mismatch(self):
        with pytest.raises(ConfigError) as e:
            cfg(K=4)
        assert e.value.field == "K"

    def test_sampler(self):
        c = cfg(thetas={"normal": {"mean": 0.0, "variance": 0.0625, "seed": 1}}, K=5)
        ref = np.random.default_rng(1).normal(0.0, 0.25, 5)
        assert c.thetas.tolist() == ref.tolist()

    def test_log_checkpoints(self):
        c = cfg(checkpoints="log(20)")
        cp = c.checkpoints
        assert cp[-1] == 300 and np.all(np.diff(cp) > 0) and cp[0] >= 3
        assert log_checkpoints(3, 3, 50).tolist() == [3]

    def test_policy_params(self):
        c = cfg(policies=[{"name": "rr-ucb", "delta": 0.2, "beta": 0.5}])
        assert c.policies[0] == PolicySpec("rr-ucb", 0.2, 0.5)

    def test_overrides(self):
        c = parse_config(BASE, reps=2, seed=9, out="x")
        assert (c.reps, c.master_seed, c.output_dir) == (2, 9, "x")


class TestRun:
    def test_init_only(self, fam2):
        recs = run_batch(fam2, [0.1, 0.2, 0.3], 2, 3, PolicySpec("klucb"), [0, 1])
        for r in recs:
            assert r.counts[-1].tolist() == [2, 2, 2]
            assert r.index_evals[-1] == 0

    def test_counts_sum(self):
        c = cfg()
        for r in run_experiment(c):
            assert r.counts.sum(axis=1).tolist() == (c.M * c.checkpoints).tolist()

    def test_deterministic(self, tmp_path):
        c = cfg()
        prof = profile(c.family, c.thetas, c.M)
        a = emit_csv(summarize(run_experiment(c), prof, c.family), tmp_path / "a.csv").read_text()
        rows = summarize(run_experiment(c), prof, c.family)
        b = emit_csv(rows, tmp_path / "b.csv").read_text()
        strip = lambda s: [",".join(l.split(",")[:6] + l.split(",")[7:]) for l in s.splitlines()]  # noqa: E731
        # wall time differs between runs; everything else is bit-identical
        assert strip(a) == strip(b)

    def test_workers_independent(self):
        c = cfg()
        one = run_experiment(c, workers=1)
        many = run_experiment(c, workers=3)
        assert [(r.policy, r.rep_id) for r in one] == [(r.policy, r.rep_id) for r in many]
        for a, b in zip(one, many):
            assert np.array_equal(a.cum_reward, b.cum_reward)
            assert np.array_equal(a.counts, b.counts)

    def test_chunking_independent(self):
        a = run_experiment(cfg(chunk=1))
        b = run_experiment(cfg(chunk=6))
        for x, y in zip(a, b):
            assert np.array_equal(x.cum_reward, y.cum_reward)

    def test_seed_isolation(self, fam2):
        spec = PolicySpec("rr-klucb")
        a = run_batch(fam2, BASE["thetas"], 1, 200, spec, [0, 1, 2], master_seed=5)
        b = run_batch(fam2, BASE["thetas"], 1, 200, spec, [0, 7, 2], master_seed=5)
        assert a[0].cum_reward.tolist() == b[0].cum_reward.tolist()
        assert a[2].cum_reward.tolist() == b[2].cum_reward.tolist()
        assert not np.array_equal(a[1].cum_reward, b[1].cum_reward)

    def test_checkpoint_prefix(self, fam2):
        cps = [5, 50, 120]
        recs = run_batch(fam2, BASE["thetas"], 2, 120, PolicySpec("klucb"), [0, 1],
                         checkpoints=cps, keep_log=True)
        for r in recs:
            prefix = np.cumsum(r.log.sum(axis=1))
            assert r.cum_reward.tolist() == pytest.approx([prefix[t - 1] for t in cps], abs=1e-12)

    def test_index_accounting(self):
        c = cfg()
        for r in run_experiment(c):
            per = 1 if r.policy.startswith("rr") else c.K
            assert r.index_evals.tolist() == (per * (c.checkpoints - c.K)).tolist()


class TestSummary:
    def test_single_rep_matches_record(self, tmp_path):
        c = cfg(reps=1, policies=["klucb"])
        prof = profile(c.family, c.thetas, c.M)
        recs = run_experiment(c)
        rows = summarize(recs, prof, c.family)
        r = recs[0]
        for j, row in enumerate(rows):
            assert row.t == c.checkpoints[j]
            assert row.regret_mean == row.t * prof.top_sum - r.cum_reward[j]
            assert row.regret_stderr == 0.0
            assert row.proxy_mean == r.proxy[j]
            assert row.index_evals == r.index_evals[j]

    def test_csv_roundtrip(self, tmp_path):
        c = cfg()
        prof = profile(c.family, c.thetas, c.M)
        rows = summarize(run_experiment(c), prof, c.family)
        path = emit_csv(rows[::-1], tmp_path / "s.csv")
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.decode().splitlines()[0] == ",".join(CSV_HEADER)
        back = read_csv(path)
        assert back == sorted(rows, key=lambda r: (r.policy, r.t))

    def test_empty_csv(self, tmp_path):
        path = emit_csv([], tmp_path / "e.csv")
        assert path.read_text() == ",".join(CSV_HEADER) + "\n"

    def test_lower_bound_column(self):
        c = cfg()
        prof = profile(c.family, c.thetas, c.M)
        rows = summarize(run_experiment(c), prof, c.family)
        from markovbandit.regret import lower_bound_constant
        assert {r.lower_bound_const for r in rows} == {lower_bound_constant(prof, c.family)}
        assert all(r.regret_over_logt == pytest.approx(r.regret_mean / np.log(r.t)) for r in rows)
