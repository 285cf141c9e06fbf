"""
Nystrom
Discretize kernels against a quadrature rule and do operator algebra on the
resulting matrices: apply, adjoint, composition, Hilbert-Schmidt norm and
diagonal trace.

A DiscreteOperator with samples A[i, j] = K(x_i, x_j) acts on node samples as
u -> A (w * u). Composition reuses the operands' rule for the inner integral.
Galerkin operators carry projected kernel values in the same layout.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, TextIO, Union

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError
from .kernels import KernelSpec, Tabulated, load_tabulated, save_tabulated
from .quadrature import (
    Interval,
    QuadratureRule,
    barycentric_weights,
    build_rule,
    lagrange_basis,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
DISCRETIZATIONS = ("sampled", "galerkin")


def _symmetry_residual(samples: np.ndarray) -> float:
    scale = float(np.max(np.abs(samples))) if samples.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(samples - samples.T))) / scale


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """
    Kernel samples on the nodes of a rule.

    `source` is the kernel the samples came from, when there is one; spectral
    extension evaluates it off the nodes.
    """

    rule: QuadratureRule
    samples: np.ndarray = field(repr=False)
    symmetric: bool = False
    source: Optional[KernelSpec] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        n = len(self.rule)
        if samples.shape != (n, n):
            raise InvalidArgumentError(
                f"Operator samples must be {n}x{n}, got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise NumericalFailureError("Operator samples contain non-finite values")
        if self.symmetric and _symmetry_residual(samples) > SYMMETRY_TOL:
            raise InvalidArgumentError(
                "Operator flagged symmetric but residual is "
                f"{_symmetry_residual(samples):.3e}"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def dimension(self) -> int:
        return len(self.rule)


@dataclass(frozen=True, eq=False)
class SymmetrizedMatrix:
    """B = W^(1/2) A W^(1/2), similar to A W and symmetric when A is."""

    B: np.ndarray = field(repr=False)

    @classmethod
    def from_operator(cls, op: DiscreteOperator) -> "SymmetrizedMatrix":
        root = op.rule.sqrt_weights
        matrix = root[:, None] * op.samples * root[None, :]
        if op.symmetric:
            matrix = 0.5 * (matrix + matrix.T)
        return cls(matrix)


def _check_global(spec: KernelSpec, rule: QuadratureRule) -> None:
    if not rule.interval.same_as(spec.interval):
        raise InvalidArgumentError(
            f"Rule interval [{rule.interval.a}, {rule.interval.b}] does not match "
            f"{spec.kind} interval [{spec.interval.a}, {spec.interval.b}]"
        )
    if len(rule) < spec.min_global_nodes:
        raise InvalidArgumentError(
            f"{spec.kind} kernel needs at least {spec.min_global_nodes} nodes for a "
            f"global rule, got {len(rule)}; use localized evaluation "
            f"(row_l2_norm, product_kernel_eval)"
        )


def discretize(spec: KernelSpec, rule: QuadratureRule) -> DiscreteOperator:
    """
    Fill samples[i, j] = K(x_i, x_j) on the nodes of `rule`.

    Raises:
        InvalidArgumentError: If the rule interval differs from the kernel's,
            or the rule is too coarse to resolve the kernel globally
    """
    _check_global(spec, rule)
    samples = spec.matrix(rule.nodes)
    logger.debug(f"Discretized {spec.kind} kernel on {len(rule)} {rule.kind} nodes")
    return DiscreteOperator(rule, samples, symmetric=spec.symmetric, source=spec)


def discretize_galerkin(spec: KernelSpec, rule: QuadratureRule) -> DiscreteOperator:
    """
    Galerkin discretization in the Lagrange basis of a Gauss-Legendre rule.

    G[i, j] is the double integral of l_i(x) K(x, y) l_j(y). The inner integral
    over y is split at y = x and the outer integral uses the (n+1)-point Gauss
    rule, so a kernel that is linear in y on either side of the diagonal (the
    Brownian bridge) is integrated exactly. The Gauss mass matrix is diag(w),
    hence samples[i, j] = G[i, j] / (w_i w_j) and the result works with apply,
    compose and eigendecompose like a sampled operator. With exact integrals
    the positive eigenvalues are Rayleigh-Ritz values and never exceed the
    operator's.

    Raises:
        InvalidArgumentError: If the rule is not Gauss-Legendre, its interval
            differs from the kernel's, or it is too coarse for the kernel
    """
    if rule.kind != "gauss-legendre":
        raise InvalidArgumentError(
            f"Galerkin discretization needs a gauss-legendre rule, got {rule.kind}"
        )
    _check_global(spec, rule)
    n = len(rule)
    a, b = rule.interval.a, rule.interval.b
    outer = build_rule("gauss-legendre", n + 1, rule.interval)
    inner = build_rule("gauss-legendre", n // 2 + 2, Interval(0.0, 1.0))
    weights = barycentric_weights(rule.nodes)

    # projected[p, j] = integral of K(x_p, y) l_j(y) dy at the outer nodes x_p
    projected = np.empty((n + 1, n))
    for p, x in enumerate(outer.nodes):
        halves = [(a, x - a), (x, b - x)]
        row = np.zeros(n)
        for start, length in halves:
            ys = start + length * inner.nodes
            values = spec.matrix([x], ys)[0] * (length * inner.weights)
            row += values @ lagrange_basis(rule.nodes, ys, weights)
        projected[p] = row

    at_outer = lagrange_basis(rule.nodes, outer.nodes, weights)
    gram = at_outer.T @ (outer.weights[:, None] * projected)
    samples = gram / np.outer(rule.weights, rule.weights)
    if spec.symmetric:
        samples = 0.5 * (samples + samples.T)
    logger.debug(f"Galerkin discretization of {spec.kind} kernel on {n} Gauss nodes")
    return DiscreteOperator(rule, samples, symmetric=spec.symmetric, source=spec)


def discretize_with(
    spec: KernelSpec, rule: QuadratureRule, method: str = "sampled"
) -> DiscreteOperator:
    """
    Discretize by name: 'sampled' (kernel values at the nodes) or 'galerkin'.

    Raises:
        InvalidArgumentError: If the method is unknown
    """
    if method not in DISCRETIZATIONS:
        raise InvalidArgumentError(
            f"Unknown discretization {method!r}. "
            f"Must be one of: {list(DISCRETIZATIONS)}"
        )
    if method == "galerkin":
        return discretize_galerkin(spec, rule)
    return discretize(spec, rule)


def _check_vector(
    op: DiscreteOperator, u: Union[Sequence[float], np.ndarray]
) -> np.ndarray:
    vector = np.asarray(u, dtype=float)
    if vector.shape != (op.dimension,):
        raise InvalidArgumentError(
            f"Vector length {vector.shape} does not match {op.dimension} nodes"
        )
    return vector


def apply(op: DiscreteOperator, u: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """(T u)(x_i) = sum_j w_j K(x_i, x_j) u_j."""
    vector = _check_vector(op, u)
    return op.samples @ (op.rule.weights * vector)


def same_rule(first: QuadratureRule, second: QuadratureRule) -> bool:
    if first is second:
        return True
    return (
        first.interval.same_as(second.interval)
        and np.array_equal(first.nodes, second.nodes)
        and np.array_equal(first.weights, second.weights)
    )


def compose(op2: DiscreteOperator, op1: DiscreteOperator) -> DiscreteOperator:
    """
    Kernel of T2 T1: samples[i, k] = sum_j w_j K2(x_i, z_j) K1(z_j, x_k).

    The result is flagged symmetric only when both operands are the same
    symmetric operator.

    Raises:
        InvalidArgumentError: If the operands live on different rules
    """
    if not same_rule(op2.rule, op1.rule):
        raise InvalidArgumentError(
            "compose needs both operators on the same quadrature rule"
        )
    samples = op2.samples @ (op2.rule.weights[:, None] * op1.samples)
    equal = op2 is op1 or np.array_equal(op2.samples, op1.samples)
    symmetric = bool(equal and op1.symmetric)
    if symmetric:
        samples = 0.5 * (samples + samples.T)
    return DiscreteOperator(op2.rule, samples, symmetric=symmetric)


def adjoint(op: DiscreteOperator) -> DiscreteOperator:
    """Kernel transpose; symmetric operators keep their source."""
    source = op.source if op.symmetric else None
    return DiscreteOperator(
        op.rule, op.samples.T, symmetric=op.symmetric, source=source
    )


def scale(op: DiscreteOperator, factor: float) -> DiscreteOperator:
    return DiscreteOperator(op.rule, factor * op.samples, symmetric=op.symmetric)


def hs_norm(op: DiscreteOperator) -> float:
    """sqrt(sum_ij w_i w_j K(x_i, x_j)^2), the discrete Hilbert-Schmidt norm."""
    w = op.rule.weights
    return float(np.sqrt(np.sum(np.outer(w, w) * op.samples * op.samples)))


def trace_diag(op: DiscreteOperator) -> float:
    """sum_i w_i K(x_i, x_i), the quadrature of the diagonal."""
    return float(np.dot(op.rule.weights, np.diag(op.samples)))


def row_l2_norm(spec: KernelSpec, x: float, rule: QuadratureRule) -> float:
    """
    ||k_x|| = sqrt(integral of |K(x, y)|^2 dy), x anywhere in the closed interval.

    The pathological fixture integrates over its localized support panels, so
    any rule (even a coarse one) gives the exact row norm there.
    """
    spec.interval.check(x, "x")
    nodes, weights = spec.quadrature_for(x, x, rule)
    if nodes.size == 0:
        return 0.0
    row = spec.matrix([x], nodes)[0]
    return float(np.sqrt(np.dot(weights, row * row)))


def to_spec(op: DiscreteOperator) -> Tabulated:
    """Wrap the samples as a Tabulated kernel (bilinear off the nodes)."""
    return Tabulated(op.rule, op.samples)


def save_operator(op: DiscreteOperator, target: Union[str, Path, TextIO]) -> None:
    """Export in the tabulated kernel CSV layout."""
    save_tabulated(to_spec(op), target)


def load_operator(source: Union[str, Path, TextIO]) -> DiscreteOperator:
    spec = load_tabulated(source)
    return discretize(spec, spec.rule)
