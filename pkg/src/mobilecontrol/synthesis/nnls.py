"""Nonnegative least squares by spectral projected gradient.

Projected gradient with Barzilai-Borwein step lengths and a nonmonotone
(Grippo-Lampariello-Lucidi) backtracking safeguard.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass
class NNLSResult:
    x: np.ndarray
    rnorm: float
    iterations: int
    pg_norm: float
    converged: bool


def nnls_bb(A, b, max_iter=5000, tol=1e-10, x0=None, memory=10, scale_columns=True):
    """Solve min ||A x - b|| subject to x >= 0.

    Parameters
    ----------
    A : ndarray, shape (m, k)
    b : ndarray, shape (m,)
    max_iter : int
        Iteration cap.
    tol : float
        Stop when the projected-gradient norm falls below ``tol * ||A^T b||``.
    scale_columns : bool
        Solve in unit-norm column coordinates (positive rescaling keeps the
        constraint set unchanged).

    Returns
    -------
    NNLSResult
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    k = A.shape[1]
    if k == 0:
        return NNLSResult(np.zeros(0), float(np.linalg.norm(b)), 0, 0.0, True)
    norms = np.linalg.norm(A, axis=0)
    if scale_columns:
        s = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    else:
        s = np.ones(k)
    As = A * s
    z = np.zeros(k) if x0 is None else np.maximum(np.asarray(x0, dtype=float) / np.where(s > 0, s, 1.0), 0.0)

    def fval(r):
        return 0.5 * float(np.dot(r, r))

    r = As @ z - b
    g = As.T @ r
    f = fval(r)
    history = [f]
    scale = max(float(np.abs(As.T @ b).max()), 1e-300)
    alpha = 1.0 / max(float(np.linalg.norm(As, 2)) ** 2, 1e-300)
    pg = float(np.abs(z - np.maximum(z - g, 0.0)).max())
    it = 0
    while pg > tol * scale and it < max_iter:
        it += 1
        d = np.maximum(z - alpha * g, 0.0) - z
        gd = float(np.dot(g, d))
        fref = max(history[-memory:])
        lam = 1.0
        while True:
            z_new = z + lam * d
            r_new = As @ z_new - b
            f_new = fval(r_new)
            if f_new <= fref + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        g_new = As.T @ r_new
        sk = z_new - z
        yk = g_new - g
        sy = float(np.dot(sk, yk))
        if sy > 0:
            # alternate the two Barzilai-Borwein lengths
            alpha = float(np.dot(sk, sk)) / sy if it % 2 else sy / float(np.dot(yk, yk))
        else:
            alpha = 1e10 * alpha if alpha < 1e-10 else alpha * 2.0
        alpha = min(max(alpha, 1e-30), 1e30)
        z, r, g, f = z_new, r_new, g_new, f_new
        history.append(f)
        pg = float(np.abs(z - np.maximum(z - g, 0.0)).max())
    x = z * s
    return NNLSResult(x, float(np.linalg.norm(A @ x - b)), it, pg / scale, pg <= tol * scale)


def nnls_enumerate(A, b):
    """Exact NNLS by enumerating every support set (2^k least-squares solves).

    Only meant as a reference for small k.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    k = A.shape[1]
    best_x = np.zeros(k)
    best_r = float(np.linalg.norm(b))
    for size in range(1, k + 1):
        for support in itertools.combinations(range(k), size):
            cols = list(support)
            sol, *_ = np.linalg.lstsq(A[:, cols], b, rcond=None)
            if np.any(sol < 0):
                continue
            x = np.zeros(k)
            x[cols] = sol
            r = float(np.linalg.norm(A @ x - b))
            if r < best_r:
                best_r, best_x = r, x
    return best_x, best_r
