"""Cone geometry and logarithmically homogeneous barrier functions.

Supported cones are Cartesian products of nonnegative orthants and
second-order (Lorentz) cones.  Each block carries its canonical barrier:

* orthant of dimension d:  B(x) = -sum_i ln x_i,          parameter d
* second-order cone (t,u): B(t,u) = -ln(t^2 - ||u||^2),   parameter 2

Values, gradients, Hessians and the barrier parameter are additive across
blocks.  All local-norm computations go through the lower Cholesky factor L
of the barrier Hessian, nabla^2 B(x) = L L^T:

* primal local norm  ||v||_x  = ||L^T v||
* dual local norm    ||v||_x* = ||L^{-1} v||  (one forward substitution)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.linalg import solve_triangular

from .counters import OpCounters, bump
from .errors import BoundaryError, FactorizationError

ORTHANT = "orthant"
SOC = "soc"


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    dim: int

    def __post_init__(self) -> None:
        if self.kind not in (ORTHANT, SOC):
            raise ValueError(f"unknown cone block kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("cone block dimension must be positive")
        if self.kind == SOC and self.dim < 2:
            raise ValueError("second-order cone blocks need dimension >= 2")

    @property
    def barrier_parameter(self) -> float:
        return float(self.dim) if self.kind == ORTHANT else 2.0


@dataclass(frozen=True)
class Cone:
    """Ordered product of orthant and second-order cone blocks."""

    blocks: tuple[ConeBlock, ...]

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ValueError("a cone needs at least one block")

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def theta(self) -> float:
        """Barrier parameter of the product barrier (>= 1)."""
        return sum(b.barrier_parameter for b in self.blocks)

    def slices(self) -> Iterator[tuple[ConeBlock, slice]]:
        start = 0
        for block in self.blocks:
            yield block, slice(start, start + block.dim)
            start += block.dim

    def describe(self) -> list[dict]:
        """JSON-ready block list, the wire format used in problem files."""
        return [{"type": b.kind, "dim": b.dim} for b in self.blocks]


def orthant(dim: int) -> Cone:
    return Cone((ConeBlock(ORTHANT, dim),))


def second_order(dim: int) -> Cone:
    return Cone((ConeBlock(SOC, dim),))


def product(*blocks: ConeBlock) -> Cone:
    return Cone(tuple(blocks))


def cone_from_description(desc: list[dict]) -> Cone:
    return Cone(tuple(ConeBlock(d["type"], int(d["dim"])) for d in desc))


def _check_dim(cone: Cone, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (cone.total_dim,):
        raise ValueError(f"expected vector of length {cone.total_dim}, got shape {x.shape}")
    return x


def _soc_gap(xb: np.ndarray) -> float:
    """t^2 - ||u||^2 for a second-order cone block (t, u)."""
    t = xb[0]
    return float(t * t - np.dot(xb[1:], xb[1:]))


def interior_membership(cone: Cone, x: np.ndarray, margin: float = 0.0) -> bool:
    """True iff x is interior with slack: orthant entries > margin, SOC gaps t - ||u|| > margin."""
    x = _check_dim(cone, x)
    for block, sl in cone.slices():
        xb = x[sl]
        if block.kind == ORTHANT:
            if not np.all(xb > margin):
                return False
        else:
            if xb[0] - np.linalg.norm(xb[1:]) <= margin:
                return False
    return True


def dual_membership(cone: Cone, s: np.ndarray, tol: float = 0.0) -> bool:
    """Dual-cone membership up to tol per block; both block types are self-dual."""
    s = _check_dim(cone, s)
    for block, sl in cone.slices():
        sb = s[sl]
        if block.kind == ORTHANT:
            if np.any(sb < -tol):
                return False
        else:
            if sb[0] + tol < np.linalg.norm(sb[1:]):
                return False
    return True


def barrier_value(cone: Cone, x: np.ndarray) -> float:
    x = _check_dim(cone, x)
    total = 0.0
    for block, sl in cone.slices():
        xb = x[sl]
        if block.kind == ORTHANT:
            if np.any(xb <= 0.0):
                raise BoundaryError("orthant component not strictly positive")
            total -= float(np.sum(np.log(xb)))
        else:
            gap = _soc_gap(xb)
            if xb[0] <= 0.0 or gap <= 0.0:
                raise BoundaryError("point not interior to second-order cone block")
            total -= float(np.log(gap))
    return total


def barrier_gradient(cone: Cone, x: np.ndarray) -> np.ndarray:
    x = _check_dim(cone, x)
    grad = np.empty_like(x)
    for block, sl in cone.slices():
        xb = x[sl]
        if block.kind == ORTHANT:
            if np.any(xb <= 0.0):
                raise BoundaryError("orthant component not strictly positive")
            grad[sl] = -1.0 / xb
        else:
            gap = _soc_gap(xb)
            if xb[0] <= 0.0 or gap <= 0.0:
                raise BoundaryError("point not interior to second-order cone block")
            gb = np.empty(block.dim)
            gb[0] = -2.0 * xb[0] / gap
            gb[1:] = 2.0 * xb[1:] / gap
            grad[sl] = gb
    return grad


def _soc_hessian(xb: np.ndarray) -> np.ndarray:
    # (2/gap) * diag(-1, 1, ..., 1) + (4/gap^2) * w w^T with w = (t, -u)
    gap = _soc_gap(xb)
    d = xb.shape[0]
    w = xb.copy()
    w[1:] *= -1.0
    hess = (4.0 / gap**2) * np.outer(w, w)
    hess[np.arange(d), np.arange(d)] += 2.0 / gap
    hess[0, 0] -= 4.0 / gap
    return hess


def barrier_hessian(cone: Cone, x: np.ndarray) -> np.ndarray:
    """Dense barrier Hessian; block diagonal with small dense SOC blocks."""
    x = _check_dim(cone, x)
    n = cone.total_dim
    hess = np.zeros((n, n))
    for block, sl in cone.slices():
        xb = x[sl]
        if block.kind == ORTHANT:
            if np.any(xb <= 0.0):
                raise BoundaryError("orthant component not strictly positive")
            idx = np.arange(sl.start, sl.stop)
            hess[idx, idx] = 1.0 / xb**2
        else:
            gap = _soc_gap(xb)
            if xb[0] <= 0.0 or gap <= 0.0:
                raise BoundaryError("point not interior to second-order cone block")
            hess[sl, sl] = _soc_hessian(xb)
    return hess


@dataclass(frozen=True)
class BarrierFactor:
    """Point x with the lower Cholesky factor of the barrier Hessian at x.

    ``diag`` holds the factor's diagonal when L is purely diagonal (cones
    built from orthant blocks only), letting solves run as divisions.
    Immutable after construction and safe to share between threads.
    """

    cone: Cone
    point: np.ndarray
    lower: np.ndarray  # L with L L^T = nabla^2 B(point)
    diag: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.point.shape[0]


def barrier_factor(cone: Cone, x: np.ndarray, counters: OpCounters | None = None) -> BarrierFactor:
    """Factor the barrier Hessian at an interior point; counts one Cholesky."""
    x = _check_dim(cone, x)
    n = cone.total_dim
    all_orthant = all(block.kind == ORTHANT for block in cone.blocks)
    lower = np.zeros((n, n))
    for block, sl in cone.slices():
        xb = x[sl]
        if block.kind == ORTHANT:
            if np.any(xb <= 0.0):
                raise BoundaryError("orthant component not strictly positive")
            idx = np.arange(sl.start, sl.stop)
            lower[idx, idx] = 1.0 / xb
        else:
            gap = _soc_gap(xb)
            if xb[0] <= 0.0 or gap <= 0.0:
                raise BoundaryError("point not interior to second-order cone block")
            try:
                lower[sl, sl] = np.linalg.cholesky(_soc_hessian(xb))
            except np.linalg.LinAlgError as exc:
                raise FactorizationError(
                    "barrier Hessian block numerically indefinite (point near boundary)"
                ) from exc
    bump(counters, "cholesky")
    diag = np.diagonal(lower).copy() if all_orthant else None
    return BarrierFactor(cone=cone, point=x.copy(), lower=lower, diag=diag)


def local_norm_primal(factor: BarrierFactor, v: np.ndarray) -> float:
    """||v||_x = ||L^T v||; zero iff v = 0."""
    return float(np.linalg.norm(factor.lower.T @ v))


def local_norm_dual(factor: BarrierFactor, v: np.ndarray, counters: OpCounters | None = None) -> float:
    """||v||_x* = ||L^{-1} v||; one forward substitution."""
    if factor.diag is not None:
        w = v / factor.diag
    else:
        w = solve_triangular(factor.lower, v, lower=True, check_finite=False)
    bump(counters, "tri_solve")
    return float(np.linalg.norm(w))
