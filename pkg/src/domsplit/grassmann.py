"""Planes in the Grassmannian: group action, metric, transversality, cones.

A plane is stored as an orthonormal frame; the metric is the largest
principal angle, which is a true metric on G(i, d) and costs one small
SVD.  Cone-like sets are finite point clouds of planes plus a radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from . import linalg
from .errors import NumericalError

FRAME_ORTHO_TOL = 1e-12

# Margin threshold for declaring two complementary planes transverse; far
# above rounding noise, far below geometric margins in shipped examples.
TRANSVERSALITY_TOL = 1e-8


def _canonical_signs(frame: np.ndarray) -> np.ndarray:
    """Flip column signs so the largest-magnitude entry of each is positive."""
    out = frame.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        if out[k, j] < 0:
            out[:, j] = -out[:, j]
    return out


@dataclass(frozen=True, eq=False)
class Plane:
    """An i-dimensional subspace of R^d held as a d-by-i orthonormal frame."""

    frame: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.frame, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        if F.ndim != 2 or F.shape[0] < F.shape[1] or F.shape[1] < 1:
            raise ValueError(f"frame must be a tall d-by-i matrix, got shape {F.shape}")
        gram = F.T @ F
        if np.max(np.abs(gram - np.eye(F.shape[1]))) > 1e-10:
            raise ValueError("frame columns are not orthonormal")
        F = np.ascontiguousarray(F)
        F.setflags(write=False)
        object.__setattr__(self, "frame", F)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @property
    def canonical(self) -> np.ndarray:
        """Projection-matrix representative (symmetric, idempotent, trace = dim)."""
        return self.frame @ self.frame.T

    @classmethod
    def from_spanning(cls, vectors) -> "Plane":
        """Orthonormalize a spanning set (columns) into a Plane.

        Raises if the columns are numerically rank-deficient.
        """
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        if s[-1] <= 1e-12 * s[0]:
            raise ValueError("spanning vectors are numerically rank-deficient")
        return cls(_canonical_signs(U))

    @classmethod
    def span(cls, *vectors) -> "Plane":
        return cls.from_spanning(np.column_stack([np.asarray(v, dtype=float) for v in vectors]))

    def coordinates(self, vector) -> np.ndarray:
        """Coefficients of the orthogonal projection of a vector onto this plane."""
        return self.frame.T @ np.asarray(vector, dtype=float)


class ProjectiveLine(Plane):
    """A 2-plane whose projectivization is a projective line."""

    def __post_init__(self):
        super().__post_init__()
        if self.dim != 2:
            raise ValueError("a projective line is the projectivization of a 2-plane")


@dataclass(frozen=True, eq=False)
class ConeSample:
    """Finite sample of a cone-like subset of G(i, d): planes plus a radius."""

    grass_index: int
    points: tuple[Plane, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if self.grass_index < 1:
            raise ValueError("grass_index must be >= 1")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")
        dims = {p.dim for p in self.points}
        ambients = {p.ambient_dim for p in self.points}
        if dims and dims != {self.grass_index}:
            raise ValueError("all points must have dimension grass_index")
        if len(ambients) > 1:
            raise ValueError("all points must share the ambient dimension")

    @property
    def ambient_dim(self) -> int | None:
        return self.points[0].ambient_dim if self.points else None

    def to_json_dict(self) -> dict:
        return {
            "grass_index": self.grass_index,
            "radius": self.radius,
            "frames": [p.frame.tolist() for p in self.points],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConeSample":
        points = tuple(Plane(np.asarray(f, dtype=float)) for f in data["frames"])
        return cls(grass_index=int(data["grass_index"]), points=points, radius=float(data["radius"]))

    def csv_rows(self) -> list[list]:
        """One row per frame column: point index, column index, then entries."""
        rows = []
        for idx, p in enumerate(self.points):
            for col in range(p.dim):
                rows.append([idx, col] + [repr(float(x)) for x in p.frame[:, col]])
        return rows


def act(matrix, plane: Plane) -> Plane:
    """Image of a plane under an invertible matrix, re-orthonormalized."""
    M = linalg.as_square(matrix)
    if M.shape[0] != plane.ambient_dim:
        raise ValueError("matrix and plane dimensions do not match")
    image = M @ plane.frame
    Q, R = np.linalg.qr(image)
    diag = np.abs(np.diagonal(R))
    if np.min(diag) <= 1e-14 * max(np.max(diag), 1e-300):
        raise NumericalError("rank collapse while acting on a plane")
    Q = Q * np.sign(np.diagonal(R))
    return Plane(_canonical_signs(Q))


def grass_distance(first: Plane, second: Plane) -> float:
    """Largest principal angle between two planes of the same dimension.

    Computed from the sine (the top singular value of one frame projected
    off the other), which stays accurate for nearly equal planes where the
    cosine formulation loses half the working precision.
    """
    if first.dim != second.dim or first.ambient_dim != second.ambient_dim:
        raise ValueError("grass_distance requires planes of identical type")
    E, F = first.frame, second.frame
    residual = E - F @ (F.T @ E)
    sin = np.linalg.svd(residual, compute_uv=False)[0]
    return float(np.arcsin(np.clip(sin, 0.0, 1.0)))


def min_cos_principal(grams: np.ndarray) -> np.ndarray:
    """Smallest singular value over a stack of k-by-k frame Gram matrices.

    Closed forms for k = 1 and k = 2 avoid millions of LAPACK calls in the
    batched distance paths.
    """
    k = grams.shape[-1]
    if k == 1:
        return np.abs(grams[..., 0, 0])
    if k == 2:
        a, b = grams[..., 0, 0], grams[..., 0, 1]
        c, d = grams[..., 1, 0], grams[..., 1, 1]
        f = 0.5 * (a * a + b * b + c * c + d * d)
        det = a * d - b * c
        low = f - np.sqrt(np.maximum(f * f - det * det, 0.0))
        return np.sqrt(np.maximum(low, 0.0))
    return np.linalg.svd(grams, compute_uv=False)[..., -1]


def pairwise_grams(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All-pairs frame Gram matrices, shaped (a, b, i, j), via one BLAS call."""
    G = np.tensordot(A, B, axes=([1], [1]))  # (a, i, b, j)
    return np.ascontiguousarray(np.transpose(G, (0, 2, 1, 3)))


def min_cos_pairs(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Smallest principal cosine for every frame pair, shaped (a, b).

    One- and two-column frames use per-column BLAS products and a closed
    form on contiguous arrays; wider frames fall back to batched SVD.
    """
    i, j = A.shape[2], B.shape[2]
    if i == j == 1:
        return np.abs(A[:, :, 0] @ B[:, :, 0].T)
    if i == j == 2:
        a1, a2 = A[:, :, 0], A[:, :, 1]
        b1, b2 = B[:, :, 0], B[:, :, 1]
        g00 = a1 @ b1.T
        g01 = a1 @ b2.T
        g10 = a2 @ b1.T
        g11 = a2 @ b2.T
        f = 0.5 * (g00 * g00 + g01 * g01 + g10 * g10 + g11 * g11)
        det = g00 * g11 - g01 * g10
        low = f - np.sqrt(np.maximum(f * f - det * det, 0.0))
        return np.sqrt(np.maximum(low, 0.0))
    return min_cos_principal(pairwise_grams(A, B))


def frame_stack_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise largest principal angles between two stacks of frames."""
    return np.arccos(np.clip(min_cos_pairs(A, B), 0.0, 1.0))


def worst_nearest_angle(A: np.ndarray, B: np.ndarray) -> float:
    """``max over A of (distance to the nearest frame of B)``.

    The angle is monotone in the cosine, so the reduction happens on the
    cosine matrix and a single arccos finishes the job.
    """
    cos = min_cos_pairs(A, B)
    return float(np.arccos(np.clip(np.min(cos.max(axis=1)), 0.0, 1.0)))


def pairwise_distances(first: list[Plane] | tuple[Plane, ...], second) -> np.ndarray:
    """Matrix of grass_distance values between two lists of planes (batched).

    Uses the cosine formulation; for nearly equal planes it is accurate to
    about sqrt(eps) only, which the margin-style callers tolerate.
    """
    if len(first) == 0 or len(second) == 0:
        return np.zeros((len(first), len(second)))
    A = np.stack([p.frame for p in first])
    B = np.stack([p.frame for p in second])
    return frame_stack_distances(A, B)


def transverse(first: Plane, second: Plane) -> tuple[bool, float]:
    """Whether two complementary-dimension planes span the ambient space.

    The margin is the smallest singular value of the concatenated frames;
    the pair is transverse iff it exceeds ``TRANSVERSALITY_TOL``.
    """
    if first.ambient_dim != second.ambient_dim:
        raise ValueError("planes must share the ambient dimension")
    if first.dim + second.dim != first.ambient_dim:
        raise ValueError("plane dimensions must sum to the ambient dimension")
    stacked = np.hstack([first.frame, second.frame])
    margin = float(np.linalg.svd(stacked, compute_uv=False)[-1])
    return margin > TRANSVERSALITY_TOL, margin


def sphere_sample(dim: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy sample of the unit sphere in R^dim."""
    if dim == 1:
        return np.ones((1, 1))
    seq = qmc.Halton(d=dim, scramble=False)
    seq.fast_forward(1)  # skip the all-zeros first point
    raw = ndtri(seq.random(count))
    norms = np.linalg.norm(raw, axis=1)
    norms[norms == 0.0] = 1.0
    out = raw / norms[:, None]
    out[norms == 0.0] = np.eye(dim)[0]
    return out


def reference_frames(ambient_dim: int, dim: int, count: int) -> list[Plane]:
    """Deterministic low-discrepancy sample of G(dim, ambient_dim)."""
    seq = qmc.Halton(d=ambient_dim * dim, scramble=False)
    seq.fast_forward(1)
    raw = ndtri(seq.random(count)).reshape(count, ambient_dim, dim)
    return [Plane.from_spanning(raw[i]) for i in range(count)]


def projectivize(cone: ConeSample, resolution: int = 64) -> ConeSample:
    """Directions contained in some plane of the cone, as a sample in G(1, d).

    Each plane's unit sphere is sampled deterministically (a uniform angular
    grid for 2-planes, a low-discrepancy sphere sample above).  The radius is
    carried over unchanged: a G(i, d) ball of radius eps around a plane
    contains, in directions, at least the eps-ball around each of its
    directions.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    directions: list[Plane] = []
    for plane in cone.points:
        i = plane.dim
        if i == 1:
            coeffs = np.ones((1, 1))
        elif i == 2:
            theta = np.arange(resolution) * math.pi / resolution
            coeffs = np.column_stack([np.cos(theta), np.sin(theta)])
        else:
            coeffs = sphere_sample(i, resolution)
        vecs = plane.frame @ coeffs.T
        for j in range(vecs.shape[1]):
            directions.append(Plane(_canonical_signs(vecs[:, j][:, None])))
    return ConeSample(grass_index=1, points=tuple(directions), radius=cone.radius)


def cone_around(base: Plane, complement: Plane, ratio_bound: float):
    """Membership predicate for the cone around ``base`` transverse to ``complement``.

    A direction v with oblique decomposition v = v_base + v_comp is a member
    iff ``|v_comp| <= ratio_bound * |v_base|``; membership is scale-invariant.
    """
    ok, _ = transverse(base, complement)
    if not ok:
        raise ValueError("cone_around requires a transverse pair of planes")
    if ratio_bound < 0:
        raise ValueError("ratio bound must be non-negative")
    basis = np.hstack([base.frame, complement.frame])
    inv = np.linalg.inv(basis)
    split = base.dim

    def contains(vector) -> bool:
        v = np.asarray(vector, dtype=float).ravel()
        if v.size != base.ambient_dim:
            raise ValueError("direction has wrong dimension")
        if np.linalg.norm(v) == 0.0:
            raise ValueError("zero vector is not a direction")
        coeff = inv @ v
        in_base = np.linalg.norm(base.frame @ coeff[:split])
        in_comp = np.linalg.norm(complement.frame @ coeff[split:])
        return bool(in_comp <= ratio_bound * in_base)

    return contains


def line_trace(
    line: Plane,
    directions: ConeSample,
    arc_resolution: int = 180,
    occupancy_tol: float | None = None,
) -> list[tuple[float, float]]:
    """Arcs of the projective line P(line) hit by a sample of directions.

    The circle P(line) is parametrized by angle in [0, pi).  A cell is
    occupied iff some sampled direction is within ``occupancy_tol`` (default
    twice the cell width) of the cell-center direction; maximal occupied
    runs are merged circularly and returned as (start, end) angle intervals.
    """
    if line.dim != 2:
        raise ValueError("line_trace requires a 2-plane")
    if directions.grass_index != 1:
        raise ValueError("line_trace requires a sample of directions (G(1, d))")
    if arc_resolution < 4:
        raise ValueError("arc_resolution must be at least 4")
    if not directions.points:
        return []
    if directions.ambient_dim != line.ambient_dim:
        raise ValueError("directions and line must share the ambient dimension")

    cell = math.pi / arc_resolution
    tol = 2.0 * cell if occupancy_tol is None else float(occupancy_tol)
    vecs = np.stack([p.frame[:, 0] for p in directions.points])
    coords = vecs @ line.frame
    centers = (np.arange(arc_resolution) + 0.5) * cell
    dots = np.abs(
        np.outer(coords[:, 0], np.cos(centers)) + np.outer(coords[:, 1], np.sin(centers))
    )
    occupied = (dots >= math.cos(min(tol, math.pi / 2))).any(axis=0)

    if not occupied.any():
        return []
    if occupied.all():
        return [(0.0, math.pi)]

    # maximal circular runs of occupied cells; scan from an unoccupied cell
    # so no run is split by the wrap-around.  A wrapped arc has end > pi.
    n = arc_resolution
    start = int(np.argmin(occupied))
    arcs = []
    idx = 0
    while idx < n:
        if occupied[(start + idx) % n]:
            first = idx
            while idx < n and occupied[(start + idx) % n]:
                idx += 1
            arcs.append(((start + first) % n, idx - first))
        else:
            idx += 1
    return sorted((c * cell, (c + length) * cell) for c, length in arcs)
