"""Exact-formula numerical primitives on small dense matrices.

Singular spectra, operator norms and co-norms, singular-value gap ratios,
exterior-power norms, cross-ratios on the projective line, and principal
angles between subspaces.  Everything here is a pure function of its
arguments and is safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, SingularMatrixError

# Scale-free invertibility test: a matrix is accepted iff sigma_d > RTOL * sigma_1.
INVERTIBILITY_RTOL = 1e-12


def as_square(matrix) -> np.ndarray:
    """Validate and return a finite square float matrix."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def singular_values(matrix, label: str | None = None) -> np.ndarray:
    """Singular values of a square matrix, sorted non-increasing."""
    M = as_square(matrix)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular value computation failed", label=label) from exc


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Full singular decomposition: values sorted non-increasing, orthonormal frames.

    ``left[:, j]`` / ``right[:, j]`` are the left / right singular directions
    for ``values[j]``; assembling them reproduces the matrix.
    """

    values: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.values) @ self.right.T


def singular_spectrum(matrix, label: str | None = None) -> SingularSpectrum:
    M = as_square(matrix)
    try:
        U, s, Vt = np.linalg.svd(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular value decomposition failed", label=label) from exc
    return SingularSpectrum(values=s, left=U, right=Vt.T)


def operator_norm(matrix) -> float:
    """Largest singular value (the supremum of ``|Mv|`` over unit vectors)."""
    return float(singular_values(matrix)[0])


def check_invertible(matrix, label: str | None = None) -> np.ndarray:
    """Return the matrix if it passes the scale-free invertibility test."""
    M = as_square(matrix)
    s = singular_values(M, label=label)
    if s[-1] <= INVERTIBILITY_RTOL * s[0]:
        raise SingularMatrixError(
            f"matrix is numerically singular (sigma_min/sigma_max = "
            f"{s[-1] / s[0] if s[0] > 0 else 0.0:.3e})"
            + (f" [{label}]" if label else "")
        )
    return M


def conorm(matrix, label: str | None = None) -> float:
    """Smallest singular value; equals ``1 / |M^-1|`` for invertible inputs."""
    M = check_invertible(matrix, label=label)
    return float(singular_values(M)[-1])


def gap_ratio(matrix, index: int) -> float:
    """Ratio ``sigma_{index+1} / sigma_index`` with 1-based ``index`` in ``1..d-1``.

    The value lies in ``(0, 1]``; uniform exponential decay of this ratio over
    all products of a family is the gap-based domination criterion.
    """
    s = singular_values(matrix)
    d = len(s)
    if not 1 <= index <= d - 1:
        raise ValueError(f"index must be in 1..{d - 1}, got {index}")
    if s[index - 1] <= 0.0:
        raise NumericalError(f"sigma_{index} is zero; gap ratio undefined")
    return float(s[index] / s[index - 1])


def exterior_norm(matrix, k: int) -> float:
    """Norm of the induced map on the k-th exterior power.

    Equals the product of the k largest singular values.  The equivalent
    compound-matrix operator norm costs O(d^(2k)) and is used only as a
    test oracle.
    """
    s = singular_values(matrix)
    if not 1 <= k <= len(s):
        raise ValueError(f"k must be in 1..{len(s)}, got {k}")
    return float(np.prod(s[:k]))


def _homogeneous_pair(x: float) -> tuple[float, float]:
    if math.isinf(x):
        return (1.0, 0.0)
    return (float(x), 1.0)


def _det2(u: tuple[float, float], v: tuple[float, float]) -> float:
    return u[0] * v[1] - u[1] * v[0]


def cross_ratio(a: float, b: float, c: float, d: float) -> float:
    """Cross-ratio ``(c-a)/(b-a) * (d-b)/(d-c)`` of four extended reals.

    Infinity is handled by the standard limit convention (both signed
    infinities denote the same projective point).
    """
    pts = [_homogeneous_pair(x) for x in (a, b, c, d)]
    return _cross_ratio_pairs(pts)


def _cross_ratio_pairs(pts: list[tuple[float, float]]) -> float:
    scales = [math.hypot(*p) for p in pts]
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(_det2(pts[i], pts[j])) <= 1e-14 * scales[i] * scales[j]:
                raise ValueError("cross-ratio requires four pairwise distinct points")
    a, b, c, d = pts
    num = _det2(c, a) * _det2(d, b)
    den = _det2(b, a) * _det2(d, c)
    if den == 0.0:
        return math.inf
    return num / den


def cross_ratio_directions(a, b, c, d) -> float:
    """Cross-ratio of four distinct directions lying on one projective line.

    Directions are non-zero vectors in R^d (defined up to scale).  A 2-point
    chart is fixed by picking the two coordinates of largest combined
    magnitude over the quadruple; the determinant form of the cross-ratio is
    then invariant under any other choice of non-degenerate chart.
    """
    vs = []
    for v in (a, b, c, d):
        v = np.asarray(v, dtype=float).ravel()
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValueError("zero vector is not a direction")
        vs.append(v / n)
    dim = vs[0].size
    if any(v.size != dim for v in vs):
        raise ValueError("directions must share one ambient dimension")
    weight = np.sum([v**2 for v in vs], axis=0)
    j1, j2 = np.argsort(-weight, kind="stable")[:2]
    pts = [(float(v[j1]), float(v[j2])) for v in vs]
    return _cross_ratio_pairs(pts)


def principal_angles(first, second) -> np.ndarray:
    """Principal angles between two subspaces given by orthonormal frames.

    Accepts raw ``(d, k)`` frames or objects with a ``frame`` attribute.
    Returns ``min(p, q)`` angles in ``[0, pi/2]`` sorted non-decreasing;
    cosines are clamped to ``[0, 1]`` before ``arccos`` so rounding can
    never produce NaN.
    """
    E = np.asarray(getattr(first, "frame", first), dtype=float)
    F = np.asarray(getattr(second, "frame", second), dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    if F.ndim == 1:
        F = F[:, None]
    if E.shape[0] != F.shape[0]:
        raise ValueError("frames must share the ambient dimension")
    cos = np.linalg.svd(E.T @ F, compute_uv=False)
    cos = np.clip(cos, 0.0, 1.0)
    return np.arccos(cos)
