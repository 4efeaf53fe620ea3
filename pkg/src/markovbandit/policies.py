"""Allocation rules: round-robin KL-UCB, full KL-UCB, UCB and round-robin UCB.

Arms are numbered ``0..K-1``.  All step functions work on a batch of R
independent replications at once (R may be 1); ties are always broken in
favour of the lowest arm id.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientArms
from .exp_family import clamp_mean, kl_rate_mean, mean_space

POLICY_NAMES = ("rr-klucb", "klucb", "ucb", "rr-ucb")


def g(t):
    """Exploration budget ``log t + 3 log log t``, guarded so it is defined for t < e."""
    if t < 1:
        raise ValueError("g(t) needs t >= 1")
    lt = math.log(t)
    return lt + 3 * math.log(max(lt, 1.0))


def klucb_index(fam, mean, n, g_val, tol=1e-8):
    """Reference KL-UCB index by bisection over the mean space.

    Slow (every KL evaluation inverts the mean map) but a literal rendering
    of ``sup{nu in M : KL(mean || nu) <= g_val / n}``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    ms = mean_space(fam)
    mean = clamp_mean(fam, mean)
    budget = g_val / n
    if budget <= 0:
        return mean
    if kl_rate_mean(fam, mean, ms.hi) <= budget:
        return ms.hi
    a, b = mean, ms.hi
    while b - a > tol:
        c = 0.5 * (a + b)
        if kl_rate_mean(fam, mean, c) <= budget:
            a = c
        else:
            b = c
    return a


def ucb_index(mean, n, t, beta):
    return mean + beta * np.sqrt(2 * math.log(t) / n)


def init_schedule(K, M, t):
    """Arms played in initialization round ``t`` (1 <= t <= K): a cyclic window of M arms."""
    return sorted((t - 1 + j) % K for j in range(M))


def delta_threshold(delta, t):
    # ceil(delta * t), with rounding noise in the product removed first
    return math.ceil(round(delta * t, 9))


@dataclass
class PolicyState:
    """Sufficient statistics of R replications of one policy."""

    K: int
    M: int
    R: int = 1
    delta: float = None
    beta: float = 1.0
    t: int = 0
    counts: np.ndarray = field(default=None, repr=False)
    sums: np.ndarray = field(default=None, repr=False)
    index_evals: np.ndarray = field(default=None, repr=False)
    min_w: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.delta is None:
            self.delta = 1.0 / (2 * self.K)
        if not 0 < self.delta < 1.0 / self.K:
            raise ValueError(f"delta must lie in (0, 1/K), got {self.delta}")
        if not 1 <= self.M <= self.K:
            raise ValueError(f"M={self.M} outside [1, {self.K}]")
        shape = (self.R, self.K)
        if self.counts is None:
            self.counts = np.zeros(shape, dtype=np.int64)
        if self.sums is None:
            self.sums = np.zeros(shape)
        self.index_evals = np.zeros(self.R, dtype=np.int64)
        self.min_w = np.full(self.R, self.K, dtype=np.int64)

    @property
    def means(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts

    def observe(self, chosen, rewards):
        """Record rewards (R, M) of the arms ``chosen`` (R, M)."""
        rows = np.arange(self.R)[:, None]
        self.counts[rows, chosen] += 1
        self.sums[rows, chosen] += rewards
        self.t += 1


class KLUCBIndex:
    """Batched KL-UCB index ``U_a(t)`` with budget ``g(t) / N_a(t)``.

    ``engine="table"`` uses the tabulated evaluator; ``engine="exact"``
    calls :func:`klucb_index` entry by entry.
    """

    def __init__(self, fam, engine="table"):
        self.fam = fam
        self.engine = engine
        if engine == "table":
            self.table = fam.table()
            self.lo, self.hi = self.table.lo, self.table.hi
        elif engine == "exact":
            ms = mean_space(fam)
            self.lo, self.hi = ms.lo, ms.hi
        else:
            raise ValueError(f"unknown engine {engine!r}")
        self.clamped = 0

    def __call__(self, means, counts, t):
        gt = g(t)
        means = np.asarray(means, dtype=float)
        self.clamped += int(np.count_nonzero((means < self.lo) | (means > self.hi)))
        if self.engine == "table":
            return self.table.klucb(means, gt / counts)
        flat = [klucb_index(self.fam, m, int(n), gt) for m, n in zip(means.ravel(), np.ravel(counts))]
        return np.reshape(flat, means.shape)


class UCBIndex:
    def __init__(self, beta=1.0):
        self.beta = beta

    def __call__(self, means, counts, t):
        return ucb_index(means, counts, t, self.beta)


def _sorted(arms):
    return np.sort(arms, axis=1)


def round_robin_step(state, t, index):
    """One round-robin decision at time ``t >= K``: returns the arms for round t+1, shape (R, M)."""
    K, M = state.K, state.M
    counts, means = state.counts, state.means
    W = counts >= delta_threshold(state.delta, t)
    wsize = W.sum(axis=1)
    if np.any(wsize < M):
        raise InsufficientArms(f"|W_t| < M at t={t}")
    np.minimum(state.min_w, wsize, out=state.min_w)

    masked = np.where(W, means, -np.inf)
    L = np.argsort(-masked, axis=1, kind="stable")[:, :M]
    Lmeans = np.take_along_axis(means, L, axis=1)
    minL = Lmeans.min(axis=1)

    b = t % K
    Ub = index(means[:, b], counts[:, b], t)
    state.index_evals += 1

    keep = (L == b).any(axis=1) | (minL >= Ub)
    if not keep.all():
        # swap b for the lowest-id arm among the worst of L_t
        worst = np.where(Lmeans == minL[:, None], L, K).min(axis=1)
        swap = ~keep[:, None] & (L == worst[:, None])
        L = np.where(swap, b, L)
    return _sorted(L)


def full_index_step(state, t, index):
    """Play the M arms with the largest indices at time ``t >= K``."""
    U = index(state.means, state.counts, t)
    state.index_evals += state.K
    return _sorted(np.argsort(-U, axis=1, kind="stable")[:, :state.M])


def rr_klucb_step(state, fam, t, index=None):
    return round_robin_step(state, t, index or KLUCBIndex(fam))


def klucb_full_step(state, fam, t, index=None):
    return full_index_step(state, t, index or KLUCBIndex(fam))


def rr_ucb_step(state, t):
    return round_robin_step(state, t, UCBIndex(state.beta))


def ucb_full_step(state, t):
    return full_index_step(state, t, UCBIndex(state.beta))


class Policy:
    """A named allocation rule driving a :class:`PolicyState`.

    ``select(state, s)`` returns the arms for round ``s`` (1-based), using the
    initialization schedule for ``s <= K`` and the rule afterwards.
    """

    def __init__(self, name, fam=None, delta=None, beta=1.0, engine="table"):
        if name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
        self.name = name
        self.delta = delta
        self.beta = beta
        self.round_robin = name.startswith("rr-")
        if name.endswith("klucb"):
            if fam is None:
                raise ValueError(f"{name} needs a family")
            self.index = KLUCBIndex(fam, engine)
        else:
            self.index = UCBIndex(beta)

    def new_state(self, K, M, R=1):
        return PolicyState(K=K, M=M, R=R, delta=self.delta, beta=self.beta)

    def select(self, state, s):
        K = state.K
        if s <= K:
            return np.tile(init_schedule(K, state.M, s), (state.R, 1))
        step = round_robin_step if self.round_robin else full_index_step
        return step(state, s - 1, self.index)
