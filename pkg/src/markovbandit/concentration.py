"""Concentration bounds for Markov chains and Monte Carlo checks of them.

Covers the Doeblin condition, the exponential martingale identity, the
Chernoff tail bound with its constant C+ and the maximal inequality with its
constant C-, plus an estimator that simulates the chain and reports the
empirical frequency of each event next to the analytic bound.
"""

import math
from typing import NamedTuple

import numpy as np

from .bandit_env import _cdf, _draw, initial_distribution
from .errors import EmptySet, NotDoeblin, OutOfMeanSpace
from .exp_family import THETA_CAP, kl_rate_mean, mean_space, mean_to_natural, member
from .perron import is_irreducible

GRID_STEP = 0.05
CHUNK = 8192


class DoeblinQuery(NamedTuple):
    A: tuple


class MartingaleCheck(NamedTuple):
    theta: float
    residual: float


class BoundReport(NamedTuple):
    event: str
    n: int
    level: float
    constant: float
    bound_value: float
    empirical: float
    stderr: float
    replications: int


def _matrix(fam_or_P):
    return np.asarray(getattr(fam_or_P, "P", fam_or_P), dtype=float)


def is_doeblin(fam_or_P, A):
    """True iff P restricted to A x A is irreducible and every state outside
    A reaches A in one step."""
    P = _matrix(fam_or_P)
    A = sorted({int(x) for x in np.atleast_1d(A)})
    if not A:
        raise EmptySet("A must be nonempty")
    n = P.shape[0]
    if A[0] < 0 or A[-1] >= n:
        raise ValueError(f"A must be a subset of range({n})")
    if not is_irreducible(P[np.ix_(A, A)]):
        return False
    out = np.setdiff1d(np.arange(n), A)
    return bool(np.all((P[np.ix_(out, A)] > 0).any(axis=1))) if out.size else True


def doeblin_set(fam):
    """``argmin_x f(x)``, the set the maximal inequality needs."""
    return DoeblinQuery(tuple(int(x) for x in np.flatnonzero(fam.f == fam.f.min())))


def martingale_residual(fam, theta):
    """Max over x of |sum_y P(x,y) e^{theta f(y)} v(y) - e^{log_pf} v(x)|."""
    m = member(fam, theta)
    lhs = (fam.P * np.exp(theta * fam.f)[None, :]) @ m.v
    return MartingaleCheck(float(theta), float(np.max(np.abs(lhs - math.exp(m.log_pf) * m.v))))


def _ratio(v):
    return float(v.max() / v.min())


def chernoff_constant(fam, mu, theta0=0.0):
    """C+ at ``mu``: spread of the eigenvector tilting the chain from theta0 to mu.

    At ``theta0 = 0`` this is ``max v / min v`` of the member with mean mu.
    """
    v0 = member(fam, theta0).v
    return _ratio(member(fam, mean_to_natural(fam, mu)).v / v0)


def chernoff_bound(fam, mu, n, theta0=0.0):
    """Upper bound on P(mean of n rewards >= mu) for the chain at theta0."""
    ms = mean_space(fam)
    mu0 = member(fam, theta0).mean
    if not mu0 <= mu <= ms.hi:
        raise OutOfMeanSpace(f"mu={mu} outside [{mu0}, {ms.hi}]")
    if n < 1:
        raise ValueError("n must be at least 1")
    c = chernoff_constant(fam, mu, theta0)
    return c * math.exp(-n * kl_rate_mean(fam, mu, mu0))


def minus_constant(fam, theta_cap=THETA_CAP, theta0=0.0, step=GRID_STEP):
    """C- as the largest eigenvector spread over a theta grid on [-theta_cap, theta0]."""
    v0 = member(fam, theta0).v
    grid = np.arange(theta0, -theta_cap - 1e-12, -step)
    return max(_ratio(member(fam, th).v / v0) for th in grid)


def maximal_bound(fam, eps, n, theta_cap=THETA_CAP, theta0=0.0):
    """Upper bound on P(exists k <= n: mean_k <= mu0 and k KL(mean_k || mu0) >= eps)."""
    if not eps > 1:
        raise ValueError("eps must exceed 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not is_doeblin(fam, doeblin_set(fam).A):
        raise NotDoeblin("the chain is not Doeblin on argmin f")
    c = minus_constant(fam, theta_cap, theta0)
    return c * math.e * math.ceil(eps * math.log(n)) * math.exp(-eps)


def sample_paths(fam, theta0, n, rep_ids, seed=0, init="stationary"):
    """Rewards f(X_1..X_n) of the chain at theta0, one row per replication.

    Replication ``r`` draws from ``SeedSequence([seed, r])``: one uniform for
    X_0 followed by one per transition.
    """
    m = member(fam, theta0)
    cdf = _cdf(m.P_theta)
    init_cdf = _cdf(initial_distribution(fam, theta0, init))
    rep_ids = np.asarray(rep_ids)
    u = np.empty((rep_ids.size, n + 1))
    for i, r in enumerate(rep_ids):
        u[i] = np.random.default_rng(np.random.SeedSequence([seed, int(r)])).random(n + 1)
    x = _draw(init_cdf, u[:, 0])
    out = np.empty((rep_ids.size, n))
    for k in range(n):
        x = _draw(cdf[x], u[:, k + 1])
        out[:, k] = fam.f[x]
    return out


def _maximal_thresholds(fam, mu0, eps, n):
    """thr[k-1] = largest y <= mu0 with KL(y || mu0) >= eps / k, or -inf if none.

    KL(y || mu0) decreases in y below mu0, so the event at time k is
    exactly ``mean_k <= thr[k-1]``.
    """
    tab = fam.table()
    target = eps / np.arange(1, n + 1)
    lo = np.full(n, tab.lo)
    hi = np.full(n, mu0)
    ok = tab.kl_mean(lo, mu0) >= target
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        big = tab.kl_mean(mid, mu0) >= target
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    return np.where(ok, lo, -np.inf)


def maximal_event(fam, paths, mu0, eps):
    """Literal event check: any k with mean_k <= mu0 and k KL(mean_k || mu0) >= eps."""
    tab = fam.table()
    k = np.arange(1, paths.shape[1] + 1)
    means = np.cumsum(paths, axis=1) / k
    kl = tab.kl_mean(means, mu0)
    return ((means <= mu0) & (k * kl >= eps)).any(axis=1)


def empirical_tail(fam, theta0, event, level, n, reps, seed=0, init="stationary",
                   theta_cap=THETA_CAP):
    """Estimate the probability of a Chernoff or maximal event and pair it with its bound.

    ``event`` is "chernoff" (``level`` is mu, event: mean_n >= mu) or
    "maximal" (``level`` is eps).
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    mu0 = member(fam, theta0).mean
    if event == "chernoff":
        bound = chernoff_bound(fam, level, n, theta0)
        const = chernoff_constant(fam, level, theta0)
    elif event == "maximal":
        bound = maximal_bound(fam, level, n, theta_cap, theta0)
        const = minus_constant(fam, theta_cap, theta0)
        thr = _maximal_thresholds(fam, mu0, level, n)
        k = np.arange(1, n + 1)
    else:
        raise ValueError(f"unknown event {event!r}")
    hits = 0
    for start in range(0, reps, CHUNK):
        ids = np.arange(start, min(start + CHUNK, reps))
        paths = sample_paths(fam, theta0, n, ids, seed, init)
        if event == "chernoff":
            hits += int(np.count_nonzero(paths.mean(axis=1) >= level))
        else:
            means = np.cumsum(paths, axis=1) / k
            hits += int(np.count_nonzero((means <= thr).any(axis=1)))
    p = hits / reps
    return BoundReport(event, int(n), float(level), const, bound, p,
                       math.sqrt(p * (1 - p) / reps), int(reps))
