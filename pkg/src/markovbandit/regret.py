"""Regret accounting: true regret estimates, the count-based proxy, its gap
bound, return times and the asymptotic lower-bound constant."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bandit_env import initial_distribution
from .errors import CountMismatch, MismatchedHorizon
from .exp_family import kl_rate, member


@dataclass(frozen=True)
class InstanceProfile:
    """Arms sorted by stationary mean (descending, ties by arm id).

    ``N`` counts arms strictly better than the M-th best and ``L`` is the
    last position tied with it (1-based, as in the usual ordering display).
    """

    order: np.ndarray
    mus: np.ndarray
    thetas: np.ndarray
    M: int
    N: int
    L: int
    top_sum: float
    tie_tol: float

    @property
    def K(self):
        return self.mus.size

    @property
    def mu_M(self):
        return self.mus[self.M - 1]


def profile(fam, thetas, M, tie_tol=1e-12):
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size < 2:
        raise ValueError("need K >= 2 arms")
    means = np.array([member(fam, th).mean for th in thetas])
    order = np.argsort(-means, kind="stable")
    mus = means[order]
    mu_M = mus[M - 1]
    N = int(np.count_nonzero(mus > mu_M + tie_tol))
    L = int(np.count_nonzero(mus >= mu_M - tie_tol))
    return InstanceProfile(order, mus, thetas[order], M, N, L, float(mus[:M].sum()), tie_tol)


class RegretEstimate(NamedTuple):
    mean: float
    stderr: float
    single_run: bool


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        return float(x[0]), 0.0, True
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)), False


def regret_estimate(prof, runs, T):
    """Monte Carlo estimate of ``T * top_sum - E[S_T]``.

    ``runs`` holds RunRecords (their last checkpoint must be T) or plain
    cumulative rewards S_T.  With a single run the stderr is reported as 0
    and ``single_run`` is set.
    """
    finals = []
    for r in runs:
        if hasattr(r, "checkpoints"):
            if r.checkpoints[-1] != T:
                raise MismatchedHorizon(f"run ends at {r.checkpoints[-1]}, expected {T}")
            finals.append(r.cum_reward[-1])
        else:
            finals.append(float(r))
    if not finals:
        raise ValueError("no runs")
    return RegretEstimate(*_mean_stderr(T * prof.top_sum - np.asarray(finals)))


def proxy_regret(prof, counts, T):
    """Count-weighted regret proxy for one run; ``counts`` in original arm order."""
    counts = np.asarray(counts)
    if counts.sum() != prof.M * T:
        raise CountMismatch(f"counts sum to {counts.sum()}, expected {prof.M * T}")
    c = counts[prof.order]
    mus, mu_M = prof.mus, prof.mu_M
    N, L = prof.N, prof.L
    return float(((mus[:N] - mu_M) * (T - c[:N])).sum() + ((mu_M - mus[L:]) * c[L:]).sum())


def proxy_regret_batch(prof, counts, t):
    """Vectorized :func:`proxy_regret` over leading axes of ``counts``.

    ``t`` broadcasts against ``counts`` with the arm axis kept, e.g. a
    scalar or an array of shape (..., 1).
    """
    c = np.take(np.asarray(counts), prof.order, axis=-1)
    mus, mu_M = prof.mus, prof.mu_M
    N, L = prof.N, prof.L
    return ((mus[:N] - mu_M) * (t - c[..., :N])).sum(-1) + ((mu_M - mus[L:]) * c[..., L:]).sum(-1)


def return_time(fam, theta, init="stationary"):
    """Mean time for the chain to revisit X_1, by Kac's formula over X_1's law."""
    m = member(fam, theta)
    q1 = initial_distribution(fam, theta, init) @ m.P_theta
    return float((q1 / m.pi).sum())


def proxy_gap_bound(fam, thetas, init="stationary"):
    """Upper bound on |regret - proxy|: sum_a R_a * sum_x |f(x)|."""
    fabs = np.abs(fam.f).sum()
    return float(sum(return_time(fam, th, init) for th in thetas) * fabs)


def lower_bound_constant(prof, fam):
    """Coefficient of log T in the asymptotic regret lower bound."""
    th_M = prof.thetas[prof.M - 1]
    total = 0.0
    for b in range(prof.L, prof.K):
        total += (prof.mu_M - prof.mus[b]) / kl_rate(fam, prof.thetas[b], th_M)
    return total
