"""Rested Markovian bandit environments.

Every arm is a chain from the same exponential family.  Only played arms
advance.  Randomness is organized per arm: arm ``a`` of replication ``rep``
owns the stream ``SeedSequence([seed, rep, a])``.  Its first uniform draws
the initial state and its n-th next uniform drives the n-th transition, so an
arm's reward sequence does not depend on which policy plays it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadPlayCount, DuplicateArm, NeverPlayed, WrongSetSize
from .exp_family import member

BLOCK = 4096


def arm_rng(seed, rep, arm):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, rep, arm])))


def initial_distribution(fam, theta, init="stationary"):
    """Distribution of X_0 for one arm.

    ``init`` is "stationary", "uniform", ``("point", s)`` or ``{"point": s}``.
    """
    n = fam.size
    if isinstance(init, dict):
        init = ("point", init["point"])
    if init == "stationary":
        return member(fam, theta).pi
    if init == "uniform":
        return np.full(n, 1.0 / n)
    if isinstance(init, (tuple, list)) and len(init) == 2 and init[0] == "point":
        q = np.zeros(n)
        q[int(init[1])] = 1.0
        return q
    raise ValueError(f"unknown initial distribution {init!r}")


def _cdf(p):
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


def transition_cdfs(fam, thetas):
    """(K, S, S) cumulative rows of P_theta for each arm."""
    return np.stack([_cdf(member(fam, th).P_theta) for th in thetas])


def _draw(cdf_rows, u):
    # inverse CDF: number of cumulative entries <= u
    return (np.asarray(u)[..., None] >= cdf_rows).sum(axis=-1)


@dataclass
class StepOutcome:
    rewards: dict
    round: int


class BanditEnv:
    """One replication of the rested bandit; use :func:`new_env` to build it."""

    def __init__(self, fam, thetas, M, init="stationary", seed=0, rep=0, keep_log=False):
        thetas = np.asarray(thetas, dtype=float)
        K = thetas.size
        if K < 2:
            raise BadPlayCount("need at least two arms")
        if not 1 <= M <= K:
            raise BadPlayCount(f"M={M} outside [1, {K}]")
        self.fam = fam
        self.thetas = thetas
        self.K, self.M = K, M
        self.init = init
        self.cdfs = transition_cdfs(fam, thetas)
        self._rngs = [arm_rng(seed, rep, a) for a in range(K)]
        self.arm_states = np.array([
            int(_draw(_cdf(initial_distribution(fam, th, init)), self._rngs[a].random()))
            for a, th in enumerate(thetas)
        ])
        self.counts = np.zeros(K, dtype=np.int64)
        self.sums = np.zeros(K)
        self.cum_reward = 0.0
        self.t = 0
        self.log = [] if keep_log else None

    def step(self, chosen):
        chosen = sorted(int(a) for a in chosen)
        if len(set(chosen)) != len(chosen):
            raise DuplicateArm(f"arm repeated in {chosen}")
        if len(chosen) != self.M:
            raise WrongSetSize(f"expected {self.M} arms, got {len(chosen)}")
        if chosen[0] < 0 or chosen[-1] >= self.K:
            raise WrongSetSize(f"arm ids must lie in [0, {self.K})")
        rewards = {}
        for a in chosen:
            s = int(_draw(self.cdfs[a, self.arm_states[a]], self._rngs[a].random()))
            self.arm_states[a] = s
            r = float(self.fam.f[s])
            self.counts[a] += 1
            self.sums[a] += r
            self.cum_reward += r
            rewards[a] = r
        self.t += 1
        if self.log is not None:
            self.log.append(rewards)
        return StepOutcome(rewards, self.t)

    def sample_mean(self, a):
        if self.counts[a] == 0:
            raise NeverPlayed(f"arm {a} has not been played")
        return self.sums[a] / self.counts[a]


def new_env(fam, thetas, M, init="stationary", seed=0, rep=0, keep_log=False):
    return BanditEnv(fam, thetas, M, init=init, seed=seed, rep=rep, keep_log=keep_log)


class EnvBatch:
    """R independent replications advanced in lockstep.

    Replication ``rep_ids[r]`` consumes exactly the same per-arm streams as
    ``BanditEnv(..., seed=seed, rep=rep_ids[r])`` and so follows the same
    trajectory under the same choices.
    """

    def __init__(self, fam, thetas, M, rep_ids, init="stationary", seed=0,
                 block=BLOCK, keep_log=False):
        thetas = np.asarray(thetas, dtype=float)
        K = thetas.size
        if K < 2:
            raise BadPlayCount("need at least two arms")
        if not 1 <= M <= K:
            raise BadPlayCount(f"M={M} outside [1, {K}]")
        self.fam = fam
        self.f = np.asarray(fam.f)
        self.thetas = thetas
        self.K, self.M = K, M
        self.rep_ids = np.asarray(rep_ids)
        R = self.rep_ids.size
        self.R = R
        self.block = block
        self.cdfs = transition_cdfs(fam, thetas)
        self._rngs = [[arm_rng(seed, int(rep), a) for a in range(K)] for rep in self.rep_ids]
        self._buf = np.empty((R, K, block))
        self._pos = np.zeros((R, K), dtype=np.int64)
        for r in range(R):
            for a in range(K):
                self._buf[r, a] = self._rngs[r][a].random(block)
        init_cdf = np.stack([_cdf(initial_distribution(fam, th, init)) for th in thetas])
        u0 = self._buf[:, :, 0]
        self._pos[:] = 1
        self.arm_states = _draw(init_cdf[None, :, :], u0)
        self.counts = np.zeros((R, K), dtype=np.int64)
        self.sums = np.zeros((R, K))
        self.cum_reward = np.zeros(R)
        self.t = 0
        self._rows = np.arange(R)[:, None]
        self.log = [] if keep_log else None

    def _refill(self, chosen):
        pos = self._pos[self._rows, chosen]
        if pos.max() < self.block:
            return
        for r, j in zip(*np.nonzero(pos >= self.block)):
            a = chosen[r, j]
            self._buf[r, a] = self._rngs[r][a].random(self.block)
            self._pos[r, a] = 0

    def step(self, chosen):
        """Advance the arms in ``chosen`` (R, M), sorted ascending per row; returns rewards (R, M)."""
        rows = self._rows
        self._refill(chosen)
        pos = self._pos[rows, chosen]
        u = self._buf[rows, chosen, pos]
        self._pos[rows, chosen] = pos + 1
        s = self.arm_states[rows, chosen]
        nxt = _draw(self.cdfs[chosen, s], u)
        self.arm_states[rows, chosen] = nxt
        rewards = self.f[nxt]
        self.counts[rows, chosen] += 1
        self.sums[rows, chosen] += rewards
        # same summation order as BanditEnv, for bit-identical totals
        for j in range(self.M):
            self.cum_reward += rewards[:, j]
        self.t += 1
        if self.log is not None:
            self.log.append(rewards.copy())
        return rewards
