"""Independent oracle implementations used only by tests.

These deliberately avoid the production code paths: compound matrices are
assembled entry by entry from explicit minor index lists, derivatives come
from central differences, and word-product maxima come from exhaustive
enumeration with plainly formed products.
"""

from __future__ import annotations

import itertools

import numpy as np


def compound_matrix_oracle(M: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix built minor by minor with explicit loops."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    subsets = list(itertools.combinations(range(d), k))
    out = np.zeros((len(subsets), len(subsets)))
    for a, rows in enumerate(subsets):
        for b, cols in enumerate(subsets):
            minor = np.array([[M[r, c] for c in cols] for r in rows])
            out[a, b] = np.linalg.det(minor)
    return out


def central_difference(f, t: float, h: float = 1e-6) -> np.ndarray:
    return (np.asarray(f(t + h)) - np.asarray(f(t - h))) / (2.0 * h)


def brute_force_max_log_gap(matrices, index: int, length: int) -> tuple[float, tuple[int, ...]]:
    """Exhaustive worst log gap ratio over all words of one length.

    Plain products and plain SVD: only valid while the products stay well
    conditioned, which the call sites guarantee.
    """
    best = -np.inf
    best_word: tuple[int, ...] = ()
    for word in itertools.product(range(len(matrices)), repeat=length):
        P = np.eye(matrices[0].shape[0])
        for j in word:
            P = P @ matrices[j]
        s = np.linalg.svd(P, compute_uv=False)
        val = float(np.log(s[index] / s[index - 1]))
        if val > best:
            best = val
            best_word = word
    return best, best_word


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(dim, dim)))
    return Q * np.sign(np.diagonal(R))


def random_invertible(dim: int, rng: np.random.Generator, min_conorm: float = 0.1) -> np.ndarray:
    while True:
        M = rng.normal(size=(dim, dim))
        if np.linalg.svd(M, compute_uv=False)[-1] >= min_conorm:
            return M


def diagonal_projective_angles(top: float, bottom: float, slope: float, steps: int) -> list[float]:
    """Closed-form angles from span(e1) after iterating diag(top, bottom).

    The direction (1, s) maps to (top, bottom * s), i.e. the slope contracts
    by bottom/top each step; the angle from the first axis is arctan(slope).
    """
    out = []
    s = slope
    for _ in range(steps + 1):
        out.append(float(np.arctan(abs(s))))
        s *= bottom / top
    return out
