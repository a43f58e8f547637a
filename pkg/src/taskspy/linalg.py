"""Small dense linear algebra for planar problems.

Everything is closed form: the K x 2 singular value decomposition goes through
the 2 x 2 Gram matrix, the pseudoinverse through truncated SVD, and symmetric
minimum eigenvalues through the quadratic formula. No iterative solvers and no
general N x M paths; callers never hand us anything wider than two columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatchError

DEFAULT_RANK_TOL = 1e-8


class Vec2(NamedTuple):
    """Planar vector with plain-float arithmetic."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


def vec2(x: float, y: float) -> Vec2:
    """Validating constructor used at input boundaries."""
    v = Vec2(float(x), float(y))
    if not v.is_finite():
        raise DimensionMismatchError(f"non-finite vector ({x}, {y})")
    return v


def rot90(v: Vec2) -> Vec2:
    """Counterclockwise quarter turn, (x, y) -> (-y, x)."""
    return Vec2(-v.y, v.x)


@dataclass(frozen=True)
class SvdK2:
    """Thin SVD of a K x 2 matrix.

    sigma holds both singular values in descending order (sigma[1] is 0.0 when
    K = 1). u1/u2 are the first two left singular columns, length K; a column
    paired with a zero singular value is all zeros. v1/v2 are orthonormal.
    """

    sigma: tuple[float, float]
    v1: Vec2
    v2: Vec2
    u1: tuple[float, ...]
    u2: tuple[float, ...]


def svd_k2(rows: Sequence[Vec2]) -> SvdK2:
    """Closed-form SVD via the eigendecomposition of the 2 x 2 Gram matrix.

    The zero matrix maps to sigma = (0, 0) with V the identity columns;
    callers are expected to branch on sigma before trusting U.
    """
    k = len(rows)
    if k < 1:
        raise DimensionMismatchError("svd_k2 requires at least one row")
    g11 = 0.0
    g12 = 0.0
    g22 = 0.0
    for r in rows:
        g11 += r.x * r.x
        g12 += r.x * r.y
        g22 += r.y * r.y
    disc = math.hypot(g11 - g22, 2.0 * g12)
    lam1 = 0.5 * (g11 + g22 + disc)
    # The small eigenvalue via (tr - disc) / 2 cancels catastrophically near
    # rank one, misranking duplicated rows. det(Gram) as the sum of squared
    # row crosses (Cauchy-Binet) is exact for bitwise-dependent rows and has
    # no cancellation, so lam2 = det / lam1 stays trustworthy down to zero.
    det = math.fsum(
        (rows[i].x * rows[j].y - rows[i].y * rows[j].x) ** 2
        for i in range(k)
        for j in range(i + 1, k)
    )
    lam2 = det / lam1 if lam1 > 0.0 else 0.0
    sigma1 = math.sqrt(lam1) if lam1 > 0.0 else 0.0
    sigma2 = math.sqrt(lam2) if lam2 > 0.0 else 0.0

    if g12 == 0.0:
        # Already diagonal; keeps axis-aligned geometry exact.
        v1 = Vec2(1.0, 0.0) if g11 >= g22 else Vec2(0.0, 1.0)
    else:
        # Two algebraically equivalent eigenvector forms; pick the better
        # conditioned one.
        cand_a = Vec2(g12, lam1 - g11)
        cand_b = Vec2(lam1 - g22, g12)
        v1 = cand_a if cand_a.norm_sq() >= cand_b.norm_sq() else cand_b
        v1 = v1 * (1.0 / v1.norm())
    v2 = rot90(v1)

    def left_column(v: Vec2, sigma: float) -> tuple[float, ...]:
        if sigma <= 0.0:
            return (0.0,) * k
        col = [r.dot(v) for r in rows]
        nrm = math.sqrt(math.fsum(c * c for c in col))
        if nrm <= 0.0:
            return (0.0,) * k
        return tuple(c / nrm for c in col)

    return SvdK2(
        sigma=(sigma1, sigma2),
        v1=v1,
        v2=v2,
        u1=left_column(v1, sigma1),
        u2=left_column(v2, sigma2),
    )


@dataclass(frozen=True)
class PinvK2:
    """Moore-Penrose pseudoinverse of a K x 2 matrix, stored as its two rows."""

    row_x: tuple[float, ...]
    row_y: tuple[float, ...]
    rank: int

    def apply(self, b: Sequence[float]) -> Vec2:
        if len(b) != len(self.row_x):
            raise DimensionMismatchError(
                f"pinv expects {len(self.row_x)} entries, got {len(b)}"
            )
        return Vec2(
            math.fsum(r * v for r, v in zip(self.row_x, b)),
            math.fsum(r * v for r, v in zip(self.row_y, b)),
        )

    __call__ = apply


def pinv_k2(rows: Sequence[Vec2], rank_tol: float = DEFAULT_RANK_TOL) -> PinvK2:
    """Pseudoinverse with singular values below rank_tol * sigma_max dropped."""
    dec = svd_k2(rows)
    k = len(rows)
    row_x = [0.0] * k
    row_y = [0.0] * k
    rank = 0
    cutoff = rank_tol * dec.sigma[0]
    for sigma, v, u in ((dec.sigma[0], dec.v1, dec.u1), (dec.sigma[1], dec.v2, dec.u2)):
        if sigma <= 0.0 or sigma < cutoff:
            continue
        rank += 1
        inv = 1.0 / sigma
        for j in range(k):
            row_x[j] += v.x * u[j] * inv
            row_y[j] += v.y * u[j] * inv
    return PinvK2(tuple(row_x), tuple(row_y), rank)


def min_eig_sym(q: np.ndarray) -> float:
    """Smallest eigenvalue of a 1x1 or 2x2 symmetric matrix, closed form."""
    m = np.asarray(q, dtype=float)
    if m.shape == (1, 1):
        return float(m[0, 0])
    if m.shape == (2, 2):
        a = float(m[0, 0])
        c = float(m[1, 1])
        b = 0.5 * (float(m[0, 1]) + float(m[1, 0]))
        return 0.5 * ((a + c) - math.hypot(a - c, 2.0 * b))
    raise DimensionMismatchError(f"min_eig_sym supports 1x1 or 2x2, got {m.shape}")
