"""Perron-Frobenius eigensystems of nonnegative irreducible matrices."""

from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EigenFailure

DENSE_LIMIT = 64


class PerronSystem(NamedTuple):
    rho: float
    u: np.ndarray
    v: np.ndarray
    residual_left: float
    residual_right: float


def is_irreducible(A):
    """True iff the support graph of the square matrix `A` is strongly connected.

    A 1x1 matrix counts as irreducible only when its entry is positive,
    i.e. the single state has a path back to itself.
    """
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return False
    if n == 1:
        return bool(A[0, 0] > 0)
    ncomp, _ = connected_components(csr_matrix(A > 0), directed=True, connection="strong")
    return ncomp == 1


def _power(A, tol, max_iter, x0=None):
    n = A.shape[0]
    # the shift makes A + sI primitive without moving the eigenvectors
    shift = A.sum(axis=1).mean()
    B = A + shift * np.eye(n)
    x = np.full(n, 1.0 / n) if x0 is None else x0 / x0.sum()
    for _ in range(max_iter):
        y = B @ x
        y /= y.sum()
        Ay = A @ y
        rho = (y @ Ay) / (y @ y)
        if np.max(np.abs(Ay - rho * y)) <= tol * max(1.0, rho) * np.max(y):
            return rho, y
        x = y
    raise EigenFailure(f"power iteration did not converge in {max_iter} iterations")


def _dense(A):
    w, vr = np.linalg.eig(A)
    k = np.argmax(w.real)
    vec = np.abs(vr[:, k].real)
    return float(w[k].real), vec / vec.sum()


def perron(A, method="auto", tol=1e-10, max_iter=10**6):
    """Perron root and normalized left/right eigenvectors of `A`.

    Parameters
    ----------
    A : (n, n) ndarray
        Entrywise nonnegative, irreducible.
    method : {"auto", "power", "dense"}
        "auto" uses a dense solve for n <= 64 and power iteration otherwise.

    Returns
    -------
    PerronSystem
        ``u`` sums to one, ``u @ v == 1``; residuals are sup-norms of
        ``u A - rho u`` and ``A v - rho v``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "power"
    if method == "dense":
        rho, v = _dense(A)
        _, u = _dense(A.T)
        # underflowed components or a loose residual: polish from the dense estimate
        scale = tol * max(1.0, rho)
        if v.min() <= 0 or np.max(np.abs(A @ v - rho * v)) > 0.1 * scale * v.max():
            rho, v = _power(A, 0.1 * tol, max_iter, np.maximum(v, 1e-300))
        if u.min() <= 0 or np.max(np.abs(u @ A - rho * u)) > 0.1 * scale * u.max():
            _, u = _power(A.T, 0.1 * tol, max_iter, np.maximum(u, 1e-300))
    elif method == "power":
        rho, v = _power(A, tol, max_iter)
        _, u = _power(A.T, tol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")

    u = u / u.sum()
    v = v / (u @ v)
    res_l = float(np.max(np.abs(u @ A - rho * u)))
    res_r = float(np.max(np.abs(A @ v - rho * v)))
    if not (rho > 0 and np.all(u > 0) and np.all(v > 0)):
        raise EigenFailure("Perron vectors are not strictly positive")
    return PerronSystem(rho, u, v, res_l, res_r)
