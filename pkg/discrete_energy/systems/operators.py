"""Structure operators ``G`` and their conservation laws.

Every operator is applied matrix-free with recorded tensor ops, so a
discrete gradient pushed through ``apply_G`` stays differentiable with
respect to model parameters and a learnable friction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from discrete_energy.tensor import Precision, ShapeMismatchError, Tensor, no_record
from discrete_energy.tensor import ops as F

logger = logging.getLogger(__name__)


class NegativeFrictionError(ValueError):
    """A friction coefficient is negative."""


class GKind(str, Enum):
    SYMPLECTIC = "symplectic"
    DAMPED = "damped"
    CENTRAL_DIFF = "central_diff"
    LAPLACIAN = "laplacian"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LawFlags:
    skew: bool = False
    neg_semidef: bool = False
    mass_kernel: bool = False

    @property
    def dissipative(self) -> bool:
        """``x^T G x <= 0`` for every ``x``; skew operators qualify trivially."""
        return self.skew or self.neg_semidef


@dataclass(frozen=True)
class GSpec:
    """A structure operator plus the laws it is declared to satisfy."""

    kind: GKind
    dim: int
    laws: LawFlags
    dx: Optional[float] = None
    friction: Optional[Tensor] = None
    learnable: bool = False
    matrix: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def half(self) -> int:
        return self.dim // 2

    def parameters(self) -> List[Tensor]:
        return [self.friction] if self.learnable and self.friction is not None else []

    def project(self) -> None:
        """Clip a learnable friction back onto ``g >= 0``."""
        if self.learnable and self.friction is not None:
            self.friction.assign(np.maximum(self.friction.data, 0.0))

    def friction_values(self) -> np.ndarray:
        if self.friction is None:
            return np.zeros(self.half)
        return np.array(self.friction.data, dtype=np.float64)

    def descriptor(self) -> Dict[str, object]:
        out: Dict[str, object] = {"kind": self.kind.value, "dim": self.dim, "learnable": self.learnable}
        if self.dx is not None:
            out["dx"] = self.dx
        if self.friction is not None:
            out["friction"] = self.friction_values().tolist()
        if self.matrix is not None:
            out["matrix"] = np.asarray(self.matrix).tolist()
            out["laws"] = {"skew": self.laws.skew, "neg_semidef": self.laws.neg_semidef, "mass_kernel": self.laws.mass_kernel}
        return out


def build_S(n: int) -> GSpec:
    """Canonical symplectic operator on ``(q, p)`` with ``n`` degrees of freedom."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return GSpec(GKind.SYMPLECTIC, 2 * n, LawFlags(skew=True))


def build_SminusR(
    n: int,
    g: Union[float, Sequence[float], np.ndarray, None] = None,
    *,
    learnable: bool = False,
    precision: Union[str, Precision] = Precision.DOUBLE,
) -> GSpec:
    """``S - R`` with ``R = diag(0, g)`` damping the momenta."""
    if n < 1:
        raise ValueError("n must be >= 1")
    values = np.zeros(n) if g is None else np.broadcast_to(np.asarray(g, dtype=np.float64), (n,)).copy()
    if np.any(values < 0):
        raise NegativeFrictionError(f"friction must be >= 0, got {values.tolist()}")
    friction = Tensor(values, precision, requires_grad=learnable, name="friction")
    skew = not learnable and not np.any(values > 0)
    return GSpec(GKind.DAMPED, 2 * n, LawFlags(skew=skew, neg_semidef=True), friction=friction, learnable=learnable)


def build_D(n_points: int, dx: float) -> GSpec:
    """Periodic central difference ``(u[k+1] - u[k-1]) / (2 dx)``."""
    _check_grid(n_points, dx)
    return GSpec(GKind.CENTRAL_DIFF, n_points, LawFlags(skew=True, mass_kernel=True), dx=float(dx))


def build_D2(n_points: int, dx: float) -> GSpec:
    """Periodic second difference ``(u[k+1] - 2 u[k] + u[k-1]) / dx**2``."""
    _check_grid(n_points, dx)
    return GSpec(GKind.LAPLACIAN, n_points, LawFlags(neg_semidef=True, mass_kernel=True), dx=float(dx))


def build_custom(matrix: np.ndarray, laws: LawFlags) -> GSpec:
    dense_matrix = np.array(matrix, dtype=np.float64)
    if dense_matrix.ndim != 2 or dense_matrix.shape[0] != dense_matrix.shape[1]:
        raise ShapeMismatchError(f"custom G must be square, got shape {dense_matrix.shape}")
    dense_matrix.flags.writeable = False
    return GSpec(GKind.CUSTOM, dense_matrix.shape[0], laws, matrix=dense_matrix)


def _check_grid(n_points: int, dx: float) -> None:
    if n_points < 1:
        raise ValueError("N must be >= 1")
    if dx <= 0:
        raise ValueError("dx must be positive")


def periodic_stencil(x: Tensor, weights: Dict[int, float]) -> Tensor:
    """``sum_j w_j * x[k + j]`` along the last axis with periodic wrap."""
    total: Optional[Tensor] = None
    for offset in sorted(weights):
        term = x if offset == 0 else F.roll(x, -offset)
        term = F.scale(term, weights[offset])
        total = term if total is None else F.add(total, term)
    if total is None:
        return F.zeros_like(x)
    return total


def central_difference(x: Tensor, dx: float) -> Tensor:
    return periodic_stencil(x, {-1: -0.5 / dx, 1: 0.5 / dx})


def forward_difference(x: Tensor, dx: float) -> Tensor:
    return F.scale(F.sub(F.roll(x, -1), x), 1.0 / dx)


def second_difference(x: Tensor, dx: float) -> Tensor:
    inv = 1.0 / (dx * dx)
    return periodic_stencil(x, {-1: inv, 0: -2.0 * inv, 1: inv})


def _split_indices(half: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.arange(half), np.arange(half, 2 * half)


def apply_G(g: GSpec, x: Tensor) -> Tensor:
    """Apply ``G`` to the last axis of ``x`` without forming a matrix."""
    if x.ndim == 0 or x.shape[-1] != g.dim:
        raise ShapeMismatchError(f"G acts on dimension {g.dim}, got state shape {x.shape}")
    if g.kind is GKind.CENTRAL_DIFF:
        return central_difference(x, g.dx)
    if g.kind is GKind.LAPLACIAN:
        return second_difference(x, g.dx)
    if g.kind is GKind.CUSTOM:
        matrix = Tensor(g.matrix, x.precision)
        if x.ndim == 1:
            return F.matmul(matrix, x)
        flat = F.reshape(x, (int(np.prod(x.shape[:-1])), g.dim))
        return F.reshape(F.matmul(flat, F.transpose(matrix)), x.shape)

    q_idx, p_idx = _split_indices(g.half)
    q = F.take(x, q_idx)
    p = F.take(x, p_idx)
    q_dot = F.scatter(p, q_idx, g.dim)
    p_dot = F.neg(q)
    if g.kind is GKind.DAMPED and g.friction is not None:
        friction = g.friction if g.friction.precision is x.precision else Tensor(g.friction.data, x.precision)
        p_dot = F.sub(p_dot, F.mul(F.expand(friction, p.shape), p))
    return F.add(q_dot, F.scatter(p_dot, p_idx, g.dim))


def dense(g: GSpec, precision: Union[str, Precision] = Precision.DOUBLE) -> np.ndarray:
    """Materialize ``G``; intended for tests and small law checks."""
    with no_record():
        columns = apply_G(g, Tensor(np.eye(g.dim), precision))
    return np.array(columns.data, dtype=np.float64).T


def split_operator(ds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric and skew parts ``((Ds + Ds^T) / 2, (Ds - Ds^T) / 2)``."""
    matrix = np.asarray(ds, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatchError(f"split_operator needs a square matrix, got {matrix.shape}")
    return 0.5 * (matrix + matrix.T), 0.5 * (matrix - matrix.T)


@dataclass(frozen=True)
class LawReport:
    declared: LawFlags
    trials: int
    skew_violation: float
    neg_semidef_violation: float
    mass_kernel_violation: float
    skew_tol: float = 1e-12
    neg_semidef_tol: float = 1e-12
    mass_kernel_tol: float = 1e-13

    @property
    def skew_holds(self) -> bool:
        return self.skew_violation <= self.skew_tol

    @property
    def neg_semidef_holds(self) -> bool:
        return self.neg_semidef_violation <= self.neg_semidef_tol

    @property
    def mass_kernel_holds(self) -> bool:
        return self.mass_kernel_violation <= self.mass_kernel_tol

    @property
    def ok(self) -> bool:
        """Every declared law holds empirically."""
        return (
            (not self.declared.skew or self.skew_holds)
            and (not self.declared.neg_semidef or self.neg_semidef_holds)
            and (not self.declared.mass_kernel or self.mass_kernel_holds)
        )


def check_laws(g: GSpec, trials: int = 1000, *, seed: int = 0) -> LawReport:
    """Sample random vectors and measure how far ``G`` is from each law.

    Skew and semidefinite violations are ``x^T G x`` scaled by ``|G| |x|^2``;
    the mass violation is the max entry of ``1^T G`` relative to ``|G|``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    matrix = dense(g)
    norm = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((trials, g.dim))
    quad = np.einsum("ti,ij,tj->t", samples, matrix, samples) / (np.sum(samples**2, axis=1) * norm)
    report = LawReport(
        declared=g.laws,
        trials=trials,
        skew_violation=float(np.max(np.abs(quad))),
        neg_semidef_violation=float(max(0.0, np.max(quad))),
        mass_kernel_violation=float(np.max(np.abs(matrix.sum(axis=0)))) / norm,
    )
    if not report.ok:
        logger.warning("Operator %s violates a declared law: %s", g.kind.value, report)
    return report


def gspec_from_descriptor(descriptor: Dict[str, object], precision: Union[str, Precision] = Precision.DOUBLE) -> GSpec:
    """Inverse of ``GSpec.descriptor``."""
    kind = GKind(str(descriptor["kind"]))
    dim = int(descriptor["dim"])  # type: ignore[arg-type]
    if kind is GKind.SYMPLECTIC:
        return build_S(dim // 2)
    if kind is GKind.DAMPED:
        return build_SminusR(
            dim // 2,
            descriptor.get("friction"),  # type: ignore[arg-type]
            learnable=bool(descriptor.get("learnable", False)),
            precision=precision,
        )
    if kind is GKind.CENTRAL_DIFF:
        return build_D(dim, float(descriptor["dx"]))  # type: ignore[arg-type]
    if kind is GKind.LAPLACIAN:
        return build_D2(dim, float(descriptor["dx"]))  # type: ignore[arg-type]
    laws = descriptor.get("laws") or {}
    return build_custom(np.asarray(descriptor["matrix"]), LawFlags(**laws))  # type: ignore[arg-type]
