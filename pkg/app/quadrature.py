"""
Quadrature
Intervals, quadrature rules and evaluation grids.

Every integral in the package is a weighted sum over a QuadratureRule. Rules
are immutable; their node and weight arrays are read-only.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidArgumentError, NumericalFailureError

logger = logging.getLogger(__name__)

RULE_KINDS = ("gauss-legendre", "trapezoid", "midpoint")

NEWTON_TOL = 1e-14
NEWTON_MAX_ITER = 100


def _frozen(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Interval:
    """A finite interval [a, b] with a < b."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidArgumentError(
                f"Interval endpoints must be finite, got [{self.a}, {self.b}]"
            )
        if not self.a < self.b:
            raise InvalidArgumentError(
                f"Interval needs a < b, got [{self.a}, {self.b}]"
            )
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)

    def slack(self) -> float:
        """Tolerance used when testing membership of the closed interval."""
        return 1e-12 * max(self.length, abs(self.a), abs(self.b))

    def contains(self, x: float) -> bool:
        return self.a - self.slack() <= x <= self.b + self.slack()

    def check(
        self, points: Union[np.ndarray, Sequence[float], float], what: str = "point"
    ) -> np.ndarray:
        """
        Validate that all points lie in the closed interval.

        Args:
            points: Scalar or array of abscissae
            what: Name used in the error message

        Returns:
            The points as a float array (same shape)

        Raises:
            InvalidArgumentError: If a point is non-finite or outside [a, b]
        """
        array = np.asarray(points, dtype=float)
        if not np.all(np.isfinite(array)):
            raise InvalidArgumentError(
                f"Non-finite {what} for interval [{self.a}, {self.b}]"
            )
        slack = self.slack()
        outside = (array < self.a - slack) | (array > self.b + slack)
        if np.any(outside):
            bad = array[outside].ravel()[0]
            raise InvalidArgumentError(
                f"{what} {bad!r} lies outside [{self.a}, {self.b}]"
            )
        return array

    def same_as(self, other: "Interval") -> bool:
        slack = max(self.slack(), other.slack())
        return abs(self.a - other.a) <= slack and abs(self.b - other.b) <= slack


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Nodes and positive weights on an interval.

    The weights sum to the interval length; nodes are strictly increasing and
    lie in the closed interval.
    """

    interval: Interval
    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "tabulated"

    def __post_init__(self) -> None:
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise InvalidArgumentError(
                "Rule needs matching 1-d node/weight arrays, "
                f"got {nodes.shape} and {weights.shape}"
            )
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise InvalidArgumentError("Rule nodes and weights must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgumentError("Rule nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise InvalidArgumentError("Rule weights must be positive")
        self.interval.check(nodes, "node")
        length = self.interval.length
        if abs(weights.sum() - length) > 1e-12 * length:
            raise InvalidArgumentError(
                f"Rule weights sum to {weights.sum()!r}, "
                f"expected interval length {length!r}"
            )

    def __len__(self) -> int:
        return int(self.nodes.size)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """Ordered evaluation points in the closed interval, endpoints included."""

    interval: Interval
    points: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        points = _frozen(self.points)
        object.__setattr__(self, "points", points)
        if points.ndim != 1 or points.size < 2:
            raise InvalidArgumentError("EvalGrid needs at least the two endpoints")
        if np.any(np.diff(points) <= 0):
            raise InvalidArgumentError("EvalGrid points must be strictly increasing")
        self.interval.check(points, "grid point")
        if points[0] != self.interval.a or points[-1] != self.interval.b:
            raise InvalidArgumentError("EvalGrid must include both interval endpoints")

    def __len__(self) -> int:
        return int(self.points.size)

    @classmethod
    def from_points(cls, interval: Interval, points: Iterable[float]) -> "EvalGrid":
        """Sort, de-duplicate and close a point set with the interval endpoints."""
        array = interval.check(np.asarray(list(points), dtype=float), "grid point")
        array = np.clip(array, interval.a, interval.b)
        merged = np.unique(np.concatenate([array, [interval.a, interval.b]]))
        return cls(interval, merged)


def uniform_grid(interval: Interval, size: int) -> EvalGrid:
    """Equispaced grid of `size` points including both endpoints."""
    if size < 2:
        raise InvalidArgumentError(f"Grid size must be at least 2, got {size}")
    points = np.linspace(interval.a, interval.b, int(size))
    return EvalGrid(interval, points)


def _legendre_with_derivative(n: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p_prev = np.ones_like(x)
    p_curr = x.copy()
    for k in range(1, n):
        p_prev, p_curr = p_curr, ((2 * k + 1) * x * p_curr - k * p_prev) / (k + 1)
    derivative = n * (x * p_curr - p_prev) / (x * x - 1.0)
    return p_curr, derivative


def _gauss_legendre_reference(
    n: int, tol: float, max_iter: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1] by Newton iteration on P_n."""
    index = np.arange(1, n + 1)
    x = np.cos(np.pi * (index - 0.25) / (n + 0.5))

    for iteration in range(1, max_iter + 1):
        p_n, dp_n = _legendre_with_derivative(n, x)
        step = p_n / dp_n
        x = x - step
        if np.max(np.abs(step)) <= tol:
            logger.debug(
                f"Gauss-Legendre n={n} converged after {iteration} Newton steps"
            )
            break
    else:
        raise NumericalFailureError(
            f"Gauss-Legendre Newton iteration for n={n} did not reach {tol:g} "
            f"in {max_iter} steps"
        )

    _, dp_n = _legendre_with_derivative(n, x)
    weights = 2.0 / ((1.0 - x * x) * dp_n * dp_n)
    return x[::-1].copy(), weights[::-1].copy()


def build_rule(
    kind: str,
    n: int,
    interval: Interval,
    newton_tol: float = NEWTON_TOL,
    newton_max_iter: int = NEWTON_MAX_ITER,
) -> QuadratureRule:
    """
    Build a quadrature rule with n nodes.

    Args:
        kind: One of 'gauss-legendre', 'trapezoid', 'midpoint'
        n: Number of nodes (at least 2)
        interval: Integration interval
        newton_tol: Newton step tolerance for Gauss-Legendre nodes
        newton_max_iter: Newton iteration cap

    Returns:
        The QuadratureRule

    Raises:
        InvalidArgumentError: If n < 2 or the kind is unknown
        NumericalFailureError: If the Newton iteration fails to converge
    """
    if kind not in RULE_KINDS:
        raise InvalidArgumentError(
            f"Unknown rule kind {kind!r}. Must be one of: {list(RULE_KINDS)}"
        )
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"Rule needs n >= 2 nodes, got {n}")
    n = int(n)
    a, b = interval.a, interval.b

    if kind == "gauss-legendre":
        reference, reference_weights = _gauss_legendre_reference(
            n, newton_tol, newton_max_iter
        )
        half = 0.5 * interval.length
        nodes = interval.midpoint + half * reference
        weights = half * reference_weights
    elif kind == "trapezoid":
        h = interval.length / (n - 1)
        nodes = np.linspace(a, b, n)
        weights = np.full(n, h)
        weights[0] = weights[-1] = 0.5 * h
    else:
        h = interval.length / n
        nodes = a + h * (np.arange(n) + 0.5)
        weights = np.full(n, h)

    return QuadratureRule(interval, nodes, weights, kind=kind)


def composite_rule(
    breakpoints: Sequence[float], nodes_per_panel: int
) -> QuadratureRule:
    """Gauss-Legendre on every panel between consecutive breakpoints."""
    edges = np.asarray(breakpoints, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise InvalidArgumentError(
            "Composite rule needs strictly increasing breakpoints"
        )
    reference, reference_weights = _gauss_legendre_reference(
        int(nodes_per_panel), NEWTON_TOL, NEWTON_MAX_ITER
    )
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = (0.5 * (left + right) + half * reference).ravel()
    weights = (half * reference_weights).ravel()
    interval = Interval(edges[0], edges[-1])
    # Summation error over many panels can exceed the single-rule tolerance.
    weights *= interval.length / weights.sum()
    return QuadratureRule(interval, nodes, weights, kind="composite")


def refine(rule: QuadratureRule) -> QuadratureRule:
    """Same rule family with twice the nodes."""
    kind = rule.kind if rule.kind in RULE_KINDS else "gauss-legendre"
    return build_rule(kind, 2 * len(rule), rule.interval)


def barycentric_weights(nodes: Union[np.ndarray, Sequence[float]]) -> np.ndarray:
    """
    1 / prod_{k != j} (x_j - x_k), scaled to a maximum magnitude of 1.

    The products are accumulated in log space, which stays finite for several
    hundred nodes.
    """
    x = np.asarray(nodes, dtype=float)
    gaps = np.subtract.outer(x, x)
    np.fill_diagonal(gaps, 1.0)
    log_weights = -np.sum(np.log(np.abs(gaps)), axis=1)
    return np.prod(np.sign(gaps), axis=1) * np.exp(log_weights - log_weights.max())


def lagrange_basis(
    nodes: Union[np.ndarray, Sequence[float]],
    points: Union[np.ndarray, Sequence[float]],
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Lagrange basis polynomials of `nodes` evaluated at `points`.

    Args:
        nodes: Distinct interpolation nodes
        points: Evaluation points
        weights: Precomputed barycentric_weights(nodes)

    Returns:
        Array of shape (len(points), len(nodes)) with entry [p, j] = l_j(points[p])
    """
    x = np.asarray(nodes, dtype=float)
    p = np.atleast_1d(np.asarray(points, dtype=float))
    if weights is None:
        weights = barycentric_weights(x)

    offsets = np.subtract.outer(p, x)
    hits = offsets == 0.0
    offsets[hits] = 1.0
    terms = weights / offsets
    basis = terms / terms.sum(axis=1, keepdims=True)
    on_node = hits.any(axis=1)
    basis[on_node] = hits[on_node].astype(float)
    return basis


def integrate(
    f: Callable[[np.ndarray], Union[np.ndarray, float]], rule: QuadratureRule
) -> float:
    """
    Integrate f over the rule's interval: sum_i w_i f(x_i).

    Raises:
        NumericalFailureError: If f is non-finite at a node
    """
    values = np.broadcast_to(np.asarray(f(rule.nodes), dtype=float), rule.nodes.shape)
    if not np.all(np.isfinite(values)):
        bad = rule.nodes[~np.isfinite(values)][0]
        raise NumericalFailureError(f"Integrand is not finite at node {bad!r}")
    return float(np.dot(rule.weights, values))
