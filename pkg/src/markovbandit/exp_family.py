"""One-parameter exponential families of Markov chains.

A family is generated by an irreducible stochastic matrix ``P`` and a
nonconstant reward ``f``.  The member with natural parameter ``theta`` is
obtained by tilting ``P(x, y)`` by ``exp(theta * f(y))`` and renormalizing
through the Perron-Frobenius eigensystem of the tilted matrix.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConstantReward,
    EigenFailure,
    InfiniteDivergence,
    NonStochastic,
    OutOfMeanSpace,
    OutOfRange,
    Reducible,
    ZeroMass,
)
from .perron import is_irreducible, perron

log = logging.getLogger(__name__)

THETA_CAP = 40.0
BISECTION_TOL = 1e-9
EIGEN_TOL = 1e-10
UNDERFLOW = 1e-300


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """Generator of the family: states, stochastic matrix ``P``, reward ``f``."""

    states: tuple
    P: np.ndarray
    f: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return len(self.states)

    def table(self, theta_cap=THETA_CAP, step=0.01):
        """Tabulated fast evaluator, built once per (cap, step)."""
        from .table import FamilyTable

        key = ("table", theta_cap, step)
        if key not in self._cache:
            self._cache[key] = FamilyTable(self, theta_cap=theta_cap, step=step)
        return self._cache[key]


@dataclass(frozen=True, eq=False)
class Member:
    theta: float
    P_theta: np.ndarray
    rho: float
    log_pf: float
    u: np.ndarray
    v: np.ndarray
    pi: np.ndarray
    mean: float
    residual_left: float
    residual_right: float


@dataclass(frozen=True)
class MeanSpace:
    lo: float
    hi: float
    theta_cap: float

    def clamp(self, mu):
        return min(max(mu, self.lo), self.hi)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def build_family(P, f, states=None):
    """Validate ``(P, f)`` and return a :class:`FamilySpec`.

    Raises NonStochastic, Reducible or ConstantReward.
    """
    P = np.asarray(P, dtype=float)
    f = np.asarray(f, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NonStochastic(f"P must be square, got shape {P.shape}")
    if f.shape != (P.shape[0],):
        raise ValueError(f"f has shape {f.shape}, expected ({P.shape[0]},)")
    if P.shape[0] < 2:
        raise ValueError("state space needs at least two states")
    if np.any(P < 0) or np.any(P > 1):
        raise NonStochastic("entries of P must lie in [0, 1]")
    dev = np.max(np.abs(P.sum(axis=1) - 1.0))
    if dev > 1e-9:
        raise NonStochastic(f"row sums of P deviate from 1 by {dev:.3g}")
    if not is_irreducible(P):
        raise Reducible("support graph of P is not strongly connected")
    if not f.max() > f.min():
        raise ConstantReward("reward function f is constant")
    if states is None:
        states = tuple(range(P.shape[0]))
    elif len(states) != P.shape[0]:
        raise ValueError("states and P disagree in size")
    return FamilySpec(tuple(states), _readonly(P), _readonly(f))


def two_state_family(p, q):
    """The two coin-flip chain with ``f(x) = 2x - 1`` on ``S = {0, 1}``."""
    _check_two_state(p, q)
    return build_family([[1 - p, p], [1 - q, q]], [-1.0, 1.0])


def iid_family(h, f):
    """Family whose every row of ``P`` is the carrier density ``h``.

    Members are i.i.d. processes and ``log_pf`` is the log-MGF of ``f`` under ``h``.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ZeroMass("carrier density must be strictly positive")
    if abs(h.sum() - 1.0) > 1e-9:
        raise NonStochastic("carrier density must sum to 1")
    return build_family(np.tile(h, (h.size, 1)), f)


def load_family(spec):
    """Build a family from a JSON file path or an already parsed dict.

    Accepts ``{"states": [...], "P": [[...]], "f": [...]}`` or the
    shorthand ``{"two_state": {"p": .., "q": ..}}``.
    """
    if isinstance(spec, (str, Path)):
        spec = json.loads(Path(spec).read_text())
    if "two_state" in spec:
        ts = spec["two_state"]
        return two_state_family(float(ts["p"]), float(ts["q"]))
    if "iid" in spec:
        return iid_family(spec["iid"]["h"], spec["iid"]["f"])
    return build_family(spec["P"], spec["f"], spec.get("states"))


def _check_two_state(p, q):
    if not (0 < p <= 1 and 0 <= q < 1):
        raise OutOfRange(f"need p in (0,1] and q in [0,1), got p={p}, q={q}")


def rho_two_state(p, q, theta):
    """Closed-form Perron root of the tilted two-state matrix."""
    _check_two_state(p, q)
    a = (1 - p) * math.exp(-theta)
    b = q * math.exp(theta)
    return (a + b + math.sqrt((a - b) ** 2 + 4 * p * (1 - q))) / 2


def tilted(fam, theta):
    """Tilted matrix scaled by ``exp(-theta * c)``, and the scale exponent ``theta * c``.

    ``c`` is max f for theta >= 0 and min f otherwise, so all entries are at
    most those of P and nothing overflows.
    """
    c = fam.f.max() if theta >= 0 else fam.f.min()
    A = fam.P * np.exp(theta * (fam.f - c))[None, :]
    A[A < UNDERFLOW] = 0.0
    return A, theta * c


def member(fam, theta, method="auto"):
    """All quantities attached to natural parameter ``theta``.

    Raises EigenFailure when the relative eigen residual exceeds 1e-10.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    A, shift = tilted(fam, theta)
    sysm = perron(A, method=method, tol=EIGEN_TOL)
    rel = max(sysm.residual_left, sysm.residual_right) / sysm.rho
    if rel >= EIGEN_TOL:
        raise EigenFailure(f"eigen residual {rel:.3g} at theta={theta}")
    u, v = sysm.u, sysm.v
    Pt = A * v[None, :] / (sysm.rho * v[:, None])
    Pt /= Pt.sum(axis=1, keepdims=True)
    pi = u * v
    pi /= pi.sum()
    log_pf = shift + math.log(sysm.rho)
    scale = math.exp(shift) if shift < 700 else math.inf
    with np.errstate(over="ignore"):
        rho = float(np.exp(log_pf))
    return Member(
        theta=theta,
        P_theta=Pt,
        rho=rho,
        log_pf=log_pf,
        u=u,
        v=v,
        pi=pi,
        mean=float(fam.f @ pi),
        residual_left=sysm.residual_left * scale,
        residual_right=sysm.residual_right * scale,
    )


def stationary_mean(fam, theta):
    return member(fam, theta).mean


def log_pf(fam, theta):
    return member(fam, theta).log_pf


def mean_space(fam, theta_cap=THETA_CAP):
    if not theta_cap > 0:
        raise ValueError("theta_cap must be positive")
    key = ("mean_space", theta_cap)
    if key not in fam._cache:
        lo = stationary_mean(fam, -theta_cap)
        hi = stationary_mean(fam, theta_cap)
        fam._cache[key] = MeanSpace(lo, hi, theta_cap)
    return fam._cache[key]


def mean_to_natural(fam, mu, theta_cap=THETA_CAP):
    """Invert the stationary mean map by bisection on ``[-theta_cap, theta_cap]``."""
    ms = mean_space(fam, theta_cap)
    if not ms.lo <= mu <= ms.hi:
        raise OutOfMeanSpace(f"mean {mu} outside [{ms.lo}, {ms.hi}]")
    a, b = -theta_cap, theta_cap
    while b - a > BISECTION_TOL:
        mid = 0.5 * (a + b)
        m = stationary_mean(fam, mid)
        if m == mu:
            return mid
        if m < mu:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def clamp_mean(fam, mu, theta_cap=THETA_CAP):
    """Clamp ``mu`` into the closure of the mean space, logging when it moves."""
    ms = mean_space(fam, theta_cap)
    c = ms.clamp(mu)
    if c != mu:
        log.debug("mean %r outside [%r, %r]; clamped", mu, ms.lo, ms.hi)
    return c


def kl_rate(fam, theta, lam):
    """KL divergence rate between members ``theta`` and ``lam`` (Bregman form)."""
    mt = member(fam, theta)
    val = log_pf(fam, lam) - mt.log_pf - mt.mean * (lam - theta)
    return max(val, 0.0)


def kl_rate_matrices(P1, P2, pi1=None):
    """Divergence rate between two chains given their transition matrices.

    Uses ``0 log 0 = 0 log(0/0) = 0``; raises InfiniteDivergence when P1 puts
    mass where P2 has none.
    """
    P1 = np.asarray(P1, dtype=float)
    P2 = np.asarray(P2, dtype=float)
    if pi1 is None:
        pi1 = perron(P1).u
    pos = P1 > 0
    if np.any(pos & (P2 <= 0)):
        raise InfiniteDivergence("P1 is not absolutely continuous w.r.t. P2")
    terms = np.zeros_like(P1)
    terms[pos] = np.log(P1[pos] / P2[pos]) * P1[pos]
    return float(pi1 @ terms.sum(axis=1))


def kl_rate_direct(fam, theta, lam):
    mt = member(fam, theta)
    ml = member(fam, lam)
    return kl_rate_matrices(mt.P_theta, ml.P_theta, mt.pi)


def kl_rate_mean(fam, mu, nu, theta_cap=THETA_CAP):
    """KL rate indexed by stationary means; arguments are clamped first."""
    mu = clamp_mean(fam, mu, theta_cap)
    nu = clamp_mean(fam, nu, theta_cap)
    if mu == nu:
        return 0.0
    return kl_rate(fam, mean_to_natural(fam, mu, theta_cap), mean_to_natural(fam, nu, theta_cap))


def asymptotic_variance(fam, m):
    """Second derivative of ``log_pf`` at ``m.theta``, via the fundamental matrix."""
    n = fam.size
    g = fam.f - m.mean
    Z = np.linalg.inv(np.eye(n) - m.P_theta + np.outer(np.ones(n), m.pi))
    return float(m.pi @ (g * (2 * Z @ g - g)))
