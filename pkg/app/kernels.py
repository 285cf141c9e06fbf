"""
Kernels
Declarative kernel specifications with pointwise evaluators.

A KernelSpec knows its interval, whether it is symmetric, and how to fill a
matrix K(x_i, y_j) for arbitrary abscissae. The fixtures are:

- BrownianBridge: min(x, y) - xy on (0, 1)
- PathologicalProduct: sum_n 3^n tau(10^n (x - 2^-n), 9^n (z - 3^-n)) on (-1, 1),
  whose product kernel is discontinuous at (0, 0)
- LegendreDecay: sum_n n^-2 (2n+1)/2 P_n(x) P_n(y) on (-1, 1), unbounded diagonal
- SlowTraceDecay: (1/pi) sum_n lambda_n cos(n (x - y)) on (0, 2 pi)
- HeatKernel: Dirichlet/Neumann heat kernel on (0, pi)
- Tabulated: samples of an arbitrary kernel on a quadrature rule
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import (
    Any,
    Callable,
    ClassVar,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    TextIO,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError
from .quadrature import Interval, QuadratureRule, composite_rule, integrate

logger = logging.getLogger(__name__)

Panel = Tuple[float, float]

DEFAULT_N_MAX = 6
DEFAULT_TERMS = 100
MIN_PANEL_NODES = 16


def _as_points(values: Union[Sequence[float], np.ndarray, float]) -> np.ndarray:
    return np.atleast_1d(np.asarray(values, dtype=float)).ravel()


class BumpFunction:
    """
    The fixed smooth bump beta and tau(s, t) = beta(s) beta(t).

    beta is 1 on [-1/2, 1/2], exp(1 - 1/(1 - (2|s| - 1)^2)) for 1/2 < |s| < 1
    and 0 elsewhere, so 0 <= tau <= 1 and tau vanishes outside (-1, 1)^2.
    """

    def beta(self, s: Union[np.ndarray, float]) -> np.ndarray:
        magnitude = np.abs(np.asarray(s, dtype=float))
        values = np.zeros_like(magnitude)
        values[magnitude <= 0.5] = 1.0
        ramp = (magnitude > 0.5) & (magnitude < 1.0)
        r = 2.0 * magnitude[ramp] - 1.0
        values[ramp] = np.exp(1.0 - 1.0 / (1.0 - r * r))
        return values

    def tau(
        self, s: Union[np.ndarray, float], t: Union[np.ndarray, float]
    ) -> np.ndarray:
        return self.beta(s) * self.beta(t)

    @property
    def mass(self) -> float:
        """c_beta = integral of beta^2 over (-1, 1)."""
        return bump_mass()


BUMP = BumpFunction()


@lru_cache(maxsize=None)
def bump_mass(nodes_per_panel: int = 64) -> float:
    """
    c_beta, computed once by composite Gauss-Legendre quadrature.

    The flat part contributes exactly 1; the two ramps contribute
    integral_0^1 exp(2 - 2/(1 - r^2)) dr after the substitution r = 2|s| - 1.
    """
    rule = composite_rule(np.linspace(0.0, 1.0, 9), nodes_per_panel)
    ramps = integrate(lambda r: np.exp(2.0 - 2.0 / (1.0 - r * r)), rule)
    logger.debug(f"Bump mass c_beta = {1.0 + ramps!r}")
    return 1.0 + ramps


def legendre_table(degree: int, x: Union[np.ndarray, float]) -> np.ndarray:
    """Columns P_0(x), ..., P_degree(x) by the three-term recurrence."""
    points = _as_points(x)
    table = np.empty((points.size, degree + 1))
    table[:, 0] = 1.0
    if degree >= 1:
        table[:, 1] = points
    for n in range(1, degree):
        table[:, n + 1] = (
            (2 * n + 1) * points * table[:, n] - n * table[:, n - 1]
        ) / (n + 1)
    return table


def legendre_poly(n: int, x: Union[np.ndarray, float]) -> Union[np.ndarray, float]:
    """
    Legendre polynomial P_n(x) via (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}.

    Returns a float for scalar x and an array otherwise.
    """
    values = legendre_table(n, x)[:, n]
    if np.ndim(x) == 0:
        return float(values[0])
    return values.reshape(np.shape(x))


def _block_index(
    x: np.ndarray, centre_base: float, width_base: float, n_max: int
) -> np.ndarray:
    """Index n <= n_max with |x - centre_base^-n| <= width_base^-n, else 0."""
    blocks = np.zeros(x.shape, dtype=int)
    for n in range(1, n_max + 1):
        half_width = width_base ** (-n)
        inside = np.abs(x - centre_base ** (-n)) <= half_width * (1.0 + 1e-12)
        blocks[inside & (blocks == 0)] = n
    return blocks


def pathological_block(x: float, n_max: int) -> Optional[int]:
    """
    The unique n <= n_max with x in [2^-n - 10^-n, 2^-n + 10^-n], or None.

    The x-blocks are pairwise disjoint, so the pathological kernel reduces to a
    single bump term on every row.
    """
    block = int(_block_index(np.array([float(x)]), 2.0, 10.0, n_max)[0])
    return block or None


def pathological_z_block(z: float, n_max: int) -> Optional[int]:
    """The unique n <= n_max with z in [3^-n - 9^-n, 3^-n + 9^-n], or None."""
    block = int(_block_index(np.array([float(z)]), 3.0, 9.0, n_max)[0])
    return block or None


class KernelSpec(ABC):
    """Base class for kernel fixtures."""

    kind: ClassVar[str] = "kernel"

    @property
    @abstractmethod
    def interval(self) -> Interval:
        """The closed interval on which the kernel lives."""

    @property
    def symmetric(self) -> bool:
        return True

    @property
    def truncation(self) -> Optional[int]:
        """Truncation parameter (terms, modes, depth), if the fixture has one."""
        return None

    def with_truncation(self, terms: int) -> "KernelSpec":
        return self

    @property
    def min_global_nodes(self) -> int:
        """Smallest node count a global rule needs to resolve the kernel."""
        return 1

    @abstractmethod
    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """K(x_i, y_j) for validated 1-d arrays."""

    def _diagonal(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self._matrix(np.array([x]), np.array([x]))[0, 0] for x in xs])

    def matrix(
        self,
        xs: Union[Sequence[float], np.ndarray],
        ys: Optional[Union[Sequence[float], np.ndarray]] = None,
    ) -> np.ndarray:
        """
        Evaluate the kernel on the tensor grid xs x ys.

        Symmetric kernels evaluated on xs x xs return an exactly symmetric matrix.
        """
        rows = self.interval.check(_as_points(xs))
        if ys is None:
            values = self._matrix(rows, rows)
            if self.symmetric:
                values = 0.5 * (values + values.T)
            return values
        cols = self.interval.check(_as_points(ys))
        return self._matrix(rows, cols)

    def eval(self, x: float, y: float) -> float:
        """K(x, y); symmetric kernels evaluate the canonical ordering x <= y."""
        self.interval.check(np.array([x, y]))
        if self.symmetric and y < x:
            x, y = y, x
        return float(self._matrix(np.array([float(x)]), np.array([float(y)]))[0, 0])

    def diagonal(self, xs: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        """K(x, x) for every x."""
        return self._diagonal(self.interval.check(_as_points(xs)))

    def quadrature_for(
        self, x: float, y: float, rule: QuadratureRule
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Nodes and weights for integrals of K(x, z) K(y, z) over z.

        Smooth fixtures use the rule as given.
        """
        if not rule.interval.same_as(self.interval):
            raise InvalidArgumentError(
                f"Rule interval [{rule.interval.a}, {rule.interval.b}] does not match "
                f"{self.kind} interval [{self.interval.a}, {self.interval.b}]"
            )
        return rule.nodes, rule.weights

    def exact_spectrum(self, count: Optional[int] = None) -> Optional[np.ndarray]:
        """Closed-form eigenvalues in descending order with multiplicity, if known."""
        return None

    @abstractmethod
    def to_mapping(self) -> Dict[str, Any]:
        """JSON-ready description, inverse of kernel_from_mapping."""


@dataclass(frozen=True)
class BrownianBridge(KernelSpec):
    """K(x, y) = min(x, y) - xy on (0, 1)."""

    kind: ClassVar[str] = "brownian-bridge"

    @property
    def interval(self) -> Interval:
        return Interval(0.0, 1.0)

    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return np.minimum.outer(xs, ys) - np.multiply.outer(xs, ys)

    def _diagonal(self, xs: np.ndarray) -> np.ndarray:
        return xs - xs * xs

    def quadrature_for(
        self, x: float, y: float, rule: QuadratureRule
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Gauss panels split at the kinks z = x and z = y.

        K(x, z) K(y, z) is a quadratic in z on every panel, so two nodes per
        panel integrate it exactly whatever rule is passed.
        """
        super().quadrature_for(x, y, rule)
        lo, hi = self.interval.a, self.interval.b
        edges = np.unique(np.clip([lo, float(x), float(y), hi], lo, hi))
        local = composite_rule(edges, 2)
        return local.nodes, local.weights

    def exact_spectrum(self, count: Optional[int] = None) -> Optional[np.ndarray]:
        k = np.arange(1, (count or DEFAULT_TERMS) + 1, dtype=float)
        return 1.0 / (k * k * np.pi ** 2)

    def to_mapping(self) -> Dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class PathologicalProduct(KernelSpec):
    """
    K(x, z) = sum_{n <= n_max} 3^n tau(10^n (x - 2^-n), 9^n (z - 3^-n)) on (-1, 1).

    The x-supports [2^-n +- 10^-n] and z-supports [3^-n +- 9^-n] are tiny, so
    integrals over z are localized to the blocks where a row can be nonzero.
    With symmetrized=True the kernel is K(x, z) + K(z, x).
    """

    n_max: int = DEFAULT_N_MAX
    symmetrized: bool = False

    kind: ClassVar[str] = "pathological"

    def __post_init__(self) -> None:
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise InvalidArgumentError(
                f"n_max must be a positive integer, got {self.n_max}"
            )

    @property
    def interval(self) -> Interval:
        return Interval(-1.0, 1.0)

    @property
    def symmetric(self) -> bool:
        return self.symmetrized

    @property
    def truncation(self) -> Optional[int]:
        return self.n_max

    def with_truncation(self, terms: int) -> "KernelSpec":
        return replace(self, n_max=int(terms))

    @property
    def min_global_nodes(self) -> int:
        return 10 ** self.n_max

    def _base(self, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
        blocks = _block_index(xs, 2.0, 10.0, self.n_max)
        values = np.zeros((xs.size, zs.size))
        for n in np.unique(blocks[blocks > 0]):
            rows = blocks == n
            x_factor = BUMP.beta(10.0 ** n * (xs[rows] - 2.0 ** (-n)))
            z_factor = BUMP.beta(9.0 ** n * (zs - 3.0 ** (-n)))
            values[rows] = 3.0 ** n * np.multiply.outer(x_factor, z_factor)
        return values

    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        values = self._base(xs, ys)
        if self.symmetrized:
            values = values + self._base(ys, xs).T
        return values

    def support_panels(self, x: float) -> List[Panel]:
        """(centre, half-width) of every z-interval on which K(x, .) may be nonzero."""
        panels: List[Panel] = []
        block = pathological_block(x, self.n_max)
        if block is not None:
            panels.append((3.0 ** (-block), 9.0 ** (-block)))
        if self.symmetrized:
            z_block = pathological_z_block(x, self.n_max)
            if z_block is not None:
                panels.append((2.0 ** (-z_block), 10.0 ** (-z_block)))
        return panels

    def quadrature_for(
        self, x: float, y: float, rule: QuadratureRule
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Block-localized nodes and weights for integrals of K(x, z) K(y, z).

        Integration runs over the intersection of the two rows' supports; each
        panel is split at the bump's ramp points and gets as many Gauss nodes
        as the passed rule has (at least MIN_PANEL_NODES).
        """
        nodes_per_panel = max(MIN_PANEL_NODES, len(rule))
        x_panels, y_panels = self.support_panels(x), self.support_panels(y)
        region = _intersect(_union(x_panels), _union(y_panels))
        if not region:
            return np.empty(0), np.empty(0)

        cuts = sorted(
            {c + f * h for c, h in x_panels + y_panels for f in (-1.0, -0.5, 0.5, 1.0)}
        )
        nodes, weights = [], []
        for lo, hi in region:
            edges = [lo] + [c for c in cuts if lo < c < hi] + [hi]
            local = composite_rule(edges, nodes_per_panel)
            nodes.append(local.nodes)
            weights.append(local.weights)
        return np.concatenate(nodes), np.concatenate(weights)

    def to_mapping(self) -> Dict[str, Any]:
        return {"kind": self.kind, "n_max": self.n_max, "symmetrized": self.symmetrized}


def _union(panels: Sequence[Panel]) -> List[Tuple[float, float]]:
    spans = sorted((c - h, c + h) for c, h in panels)
    merged: List[Tuple[float, float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _intersect(
    first: Sequence[Tuple[float, float]], second: Sequence[Tuple[float, float]]
) -> List[Tuple[float, float]]:
    overlap = []
    for lo1, hi1 in first:
        for lo2, hi2 in second:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if lo < hi:
                overlap.append((lo, hi))
    return sorted(overlap)


@dataclass(frozen=True)
class LegendreDecay(KernelSpec):
    """K(x, y) = sum_{n=1}^{terms} n^-2 (2n+1)/2 P_n(x) P_n(y) on (-1, 1)."""

    terms: int = DEFAULT_TERMS

    kind: ClassVar[str] = "legendre"

    def __post_init__(self) -> None:
        if int(self.terms) != self.terms or self.terms < 1:
            raise InvalidArgumentError(
                f"terms must be a positive integer, got {self.terms}"
            )

    @property
    def interval(self) -> Interval:
        return Interval(-1.0, 1.0)

    @property
    def truncation(self) -> Optional[int]:
        return self.terms

    def with_truncation(self, terms: int) -> "KernelSpec":
        return replace(self, terms=int(terms))

    @property
    def coefficients(self) -> np.ndarray:
        n = np.arange(1, self.terms + 1, dtype=float)
        return (2.0 * n + 1.0) / (2.0 * n * n)

    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        px = legendre_table(self.terms, xs)[:, 1:]
        py = legendre_table(self.terms, ys)[:, 1:]
        return (px * self.coefficients) @ py.T

    def _diagonal(self, xs: np.ndarray) -> np.ndarray:
        table = legendre_table(self.terms, xs)[:, 1:]
        return (table * table) @ self.coefficients

    def exact_spectrum(self, count: Optional[int] = None) -> Optional[np.ndarray]:
        n = np.arange(1, self.terms + 1, dtype=float)
        return 1.0 / (n * n)

    def to_mapping(self) -> Dict[str, Any]:
        return {"kind": self.kind, "terms": self.terms}


@dataclass(frozen=True)
class SlowTraceDecay(KernelSpec):
    """
    K(x, y) = (1/pi) sum_{n=1}^{terms} lambda_n cos(n (x - y)) on (0, 2 pi).

    lambda_n = 1 / (n ln(n+1)^2) is summable while sum lambda_n^alpha diverges
    for every alpha < 1. Each lambda_n is an eigenvalue of multiplicity two.
    """

    terms: int = DEFAULT_TERMS

    kind: ClassVar[str] = "slow-trace"

    def __post_init__(self) -> None:
        if int(self.terms) != self.terms or self.terms < 1:
            raise InvalidArgumentError(
                f"terms must be a positive integer, got {self.terms}"
            )

    @property
    def interval(self) -> Interval:
        return Interval(0.0, 2.0 * np.pi)

    @property
    def truncation(self) -> Optional[int]:
        return self.terms

    def with_truncation(self, terms: int) -> "KernelSpec":
        return replace(self, terms=int(terms))

    @property
    def sequence(self) -> np.ndarray:
        n = np.arange(1, self.terms + 1, dtype=float)
        return 1.0 / (n * np.log(n + 1.0) ** 2)

    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        n = np.arange(1, self.terms + 1, dtype=float)
        weights = self.sequence / np.pi
        cx, sx = np.cos(np.multiply.outer(xs, n)), np.sin(np.multiply.outer(xs, n))
        cy, sy = np.cos(np.multiply.outer(ys, n)), np.sin(np.multiply.outer(ys, n))
        return (cx * weights) @ cy.T + (sx * weights) @ sy.T

    def _diagonal(self, xs: np.ndarray) -> np.ndarray:
        return np.full(xs.shape, self.sequence.sum() / np.pi)

    def exact_spectrum(self, count: Optional[int] = None) -> Optional[np.ndarray]:
        return np.repeat(self.sequence, 2)

    def to_mapping(self) -> Dict[str, Any]:
        return {"kind": self.kind, "terms": self.terms}


def default_heat_modes(t: float) -> int:
    """
    max(100, ceil(8 / sqrt(t))): the dropped tail stays below e^-64.

    Raises:
        InvalidArgumentError: If t is not positive
    """
    if not (np.isfinite(t) and t > 0):
        raise InvalidArgumentError(f"Heat time t must be positive, got {t}")
    return max(100, int(math.ceil(8.0 / math.sqrt(t))))


@dataclass(frozen=True)
class HeatKernel(KernelSpec):
    """
    Heat kernel of the Dirichlet or Neumann Laplacian on (0, pi).

    Dirichlet: e_n = sqrt(2/pi) sin(n x), n >= 1. Neumann: e_0 = 1/sqrt(pi),
    e_n = sqrt(2/pi) cos(n x), n >= 1. In both cases lambda_n = n^2 and
    K_t = sum exp(-n^2 t) e_n(x) e_n(y) over n <= modes.
    """

    boundary: str = "dirichlet"
    t: float = 1.0
    modes: Optional[int] = None

    kind: ClassVar[str] = "heat"

    def __post_init__(self) -> None:
        if self.boundary not in ("dirichlet", "neumann"):
            raise InvalidArgumentError(
                "Heat boundary must be 'dirichlet' or 'neumann', "
                f"got {self.boundary!r}"
            )
        if not (np.isfinite(self.t) and self.t > 0):
            raise InvalidArgumentError(f"Heat time t must be positive, got {self.t}")
        if self.modes is None:
            object.__setattr__(self, "modes", default_heat_modes(self.t))
        elif int(self.modes) != self.modes or self.modes < 1:
            raise InvalidArgumentError(
                f"Heat modes must be a positive integer, got {self.modes}"
            )

    @property
    def interval(self) -> Interval:
        return Interval(0.0, np.pi)

    @property
    def truncation(self) -> Optional[int]:
        return self.modes

    def with_truncation(self, terms: int) -> "KernelSpec":
        return replace(self, modes=int(terms))

    def at_time(self, t: float) -> "HeatKernel":
        return replace(self, t=float(t))

    @property
    def mode_numbers(self) -> np.ndarray:
        start = 1 if self.boundary == "dirichlet" else 0
        return np.arange(start, int(self.modes) + 1, dtype=float)

    @property
    def decay(self) -> np.ndarray:
        """exp(-lambda_n t) for every retained mode."""
        n = self.mode_numbers
        return np.exp(-n * n * self.t)

    def eigenfunctions(self, xs: np.ndarray) -> np.ndarray:
        """Matrix with column n equal to e_n at the points."""
        angles = np.multiply.outer(xs, self.mode_numbers)
        if self.boundary == "dirichlet":
            return math.sqrt(2.0 / np.pi) * np.sin(angles)
        table = math.sqrt(2.0 / np.pi) * np.cos(angles)
        table[:, 0] = 1.0 / math.sqrt(np.pi)
        return table

    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return (self.eigenfunctions(xs) * self.decay) @ self.eigenfunctions(ys).T

    def _diagonal(self, xs: np.ndarray) -> np.ndarray:
        table = self.eigenfunctions(xs)
        return (table * table) @ self.decay

    def exact_spectrum(self, count: Optional[int] = None) -> Optional[np.ndarray]:
        return self.decay

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "boundary": self.boundary,
            "t": self.t,
            "modes": self.modes,
        }


@dataclass(frozen=True, eq=False)
class Tabulated(KernelSpec):
    """
    Samples K(x_i, x_j) on a quadrature rule.

    Off the nodes the kernel is the bilinear interpolant of the samples,
    clamped to the end values outside the node range.
    """

    rule: QuadratureRule
    samples: np.ndarray = field(repr=False)

    kind: ClassVar[str] = "tabulated"

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        n = len(self.rule)
        if samples.shape != (n, n):
            raise InvalidArgumentError(
                f"Tabulated matrix must be {n}x{n}, got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError("Tabulated matrix contains non-finite entries")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def interval(self) -> Interval:
        return self.rule.interval

    @property
    def symmetric(self) -> bool:
        scale = np.max(np.abs(self.samples)) if self.samples.size else 0.0
        return bool(np.max(np.abs(self.samples - self.samples.T)) <= 1e-12 * scale)

    def _interpolation(self, points: np.ndarray) -> np.ndarray:
        nodes = self.rule.nodes
        n = nodes.size
        if n == 1:
            return np.ones((points.size, 1))
        left = np.clip(np.searchsorted(nodes, points, side="right") - 1, 0, n - 2)
        span = nodes[left + 1] - nodes[left]
        fraction = np.clip((points - nodes[left]) / span, 0.0, 1.0)
        matrix = np.zeros((points.size, n))
        rows = np.arange(points.size)
        matrix[rows, left] = 1.0 - fraction
        matrix[rows, left + 1] += fraction
        return matrix

    def _matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self._interpolation(xs) @ self.samples @ self._interpolation(ys).T

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "nodes": self.rule.nodes.tolist(),
            "weights": self.rule.weights.tolist(),
            "samples": self.samples.tolist(),
        }


def evaluate(spec: KernelSpec, x: float, y: float) -> float:
    """Module-level form of KernelSpec.eval."""
    return spec.eval(x, y)


def product_kernel_eval(
    spec: KernelSpec, x: float, y: float, rule: QuadratureRule
) -> float:
    """
    K2(x, y) = integral of K(x, z) K(y, z) dz, the kernel of T T*.

    PathologicalProduct integrates only over the z-blocks where both rows
    can be nonzero.
    """
    spec.interval.check(np.array([x, y]))
    nodes, weights = spec.quadrature_for(x, y, rule)
    if nodes.size == 0:
        return 0.0
    rows = spec.matrix([x, y], nodes)
    return float(np.dot(weights, rows[0] * rows[1]))


def _interval_from_rule_data(nodes: np.ndarray, weights: np.ndarray) -> Interval:
    gap = weights.sum() - (nodes[-1] - nodes[0])
    if gap < -1e-12 * weights.sum():
        raise InvalidArgumentError("Tabulated weights sum to less than the node span")
    gap = max(gap, 0.0)
    return Interval(nodes[0] - 0.5 * gap, nodes[-1] + 0.5 * gap)


def tabulated_from_arrays(
    nodes: Sequence[float],
    weights: Sequence[float],
    samples: Sequence[Sequence[float]],
    interval: Optional[Interval] = None,
) -> Tabulated:
    """Build a Tabulated spec, inferring the interval from symmetric end gaps."""
    node_array = np.asarray(nodes, dtype=float)
    weight_array = np.asarray(weights, dtype=float)
    if (
        node_array.ndim != 1
        or node_array.size == 0
        or node_array.shape != weight_array.shape
    ):
        raise InvalidArgumentError(
            "Tabulated nodes and weights must be matching non-empty lists"
        )
    if not (np.all(np.isfinite(node_array)) and np.all(np.isfinite(weight_array))):
        raise InvalidArgumentError("Tabulated nodes and weights must be finite")
    interval = interval or _interval_from_rule_data(node_array, weight_array)
    rule = QuadratureRule(interval, node_array, weight_array, kind="tabulated")
    return Tabulated(rule, np.asarray(samples, dtype=float))


def load_tabulated(
    source: Union[str, Path, TextIO], interval: Optional[Interval] = None
) -> Tabulated:
    """
    Load a tabulated kernel from CSV.

    Row 1 holds the nodes, row 2 the weights, the following n rows the matrix.

    Raises:
        InvalidArgumentError: If the file is unreadable, non-square or has NaNs
    """
    try:
        frame = pd.read_csv(
            source, header=None, dtype=float, float_precision="round_trip"
        )
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidArgumentError(f"Cannot read tabulated kernel CSV: {e}") from e
    except OSError as e:
        raise InvalidArgumentError(f"Cannot open tabulated kernel CSV: {e}") from e

    values = frame.to_numpy()
    n = values.shape[1]
    if values.shape[0] != n + 2:
        raise InvalidArgumentError(
            "Tabulated CSV must have n+2 rows for n columns, "
            f"got {values.shape[0]} rows and {n} columns"
        )
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("Tabulated CSV contains NaN or missing entries")
    spec = tabulated_from_arrays(values[0], values[1], values[2:], interval)
    logger.info(
        f"Loaded {n}x{n} tabulated kernel on [{spec.interval.a}, {spec.interval.b}]"
    )
    return spec


def save_tabulated(spec: Tabulated, target: Union[str, Path, TextIO]) -> None:
    """Write a tabulated kernel in the CSV layout read by load_tabulated."""
    rows = np.vstack([spec.rule.nodes, spec.rule.weights, spec.samples])
    pd.DataFrame(rows).to_csv(target, header=False, index=False, float_format="%.17g")


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise InvalidArgumentError(f"Expected a boolean, got {value!r}")


def _to_int(value: Any) -> int:
    number = float(value)
    if number != int(number):
        raise InvalidArgumentError(f"Expected an integer, got {value!r}")
    return int(number)


_FIELDS: Dict[str, Dict[str, Callable[[Any], Any]]] = {
    "brownian-bridge": {},
    "pathological": {"n_max": _to_int, "symmetrized": _to_bool},
    "legendre": {"terms": _to_int},
    "slow-trace": {"terms": _to_int},
    "heat": {"boundary": str, "t": float, "modes": _to_int},
    "tabulated": {"path": str},
}

_POSITIONAL = {"heat": "boundary", "tabulated": "path"}
_TABLE_FIELDS = ("nodes", "weights", "samples")


def kernel_from_mapping(mapping: Mapping[str, Any]) -> KernelSpec:
    """
    Build a KernelSpec from a JSON-style mapping with a 'kind' key.

    Raises:
        InvalidArgumentError: On unknown kinds, unknown keys or bad values
    """
    options = dict(mapping)
    kind = options.pop("kind", None)
    if kind == "tabulated" and "samples" in options:
        unknown = sorted(set(options) - set(_TABLE_FIELDS))
        if unknown:
            raise InvalidArgumentError(f"Unknown keys for tabulated kernel: {unknown}")
        missing = [key for key in _TABLE_FIELDS if key not in options]
        if missing:
            raise InvalidArgumentError(f"Tabulated mapping is missing {missing}")
        return tabulated_from_arrays(
            options["nodes"], options["weights"], options["samples"]
        )
    if kind not in _FIELDS:
        raise InvalidArgumentError(
            f"Unknown kernel kind {kind!r}. Must be one of: {sorted(_FIELDS)}"
        )

    allowed = _FIELDS[kind]
    unknown = sorted(set(options) - set(allowed))
    if unknown:
        raise InvalidArgumentError(f"Unknown keys for kernel {kind!r}: {unknown}")
    try:
        values = {key: allowed[key](value) for key, value in options.items()}
    except (TypeError, ValueError) as e:
        raise InvalidArgumentError(f"Bad parameter for kernel {kind!r}: {e}") from e

    if kind == "brownian-bridge":
        return BrownianBridge()
    if kind == "pathological":
        return PathologicalProduct(**values)
    if kind == "legendre":
        return LegendreDecay(**values)
    if kind == "slow-trace":
        return SlowTraceDecay(**values)
    if kind == "heat":
        return HeatKernel(**values)
    if "path" not in values:
        raise InvalidArgumentError("Tabulated kernel needs a CSV path")
    return load_tabulated(values["path"])


def _defaults_for(
    kind: str, defaults: Optional[Mapping[str, Mapping[str, Any]]]
) -> Dict[str, Any]:
    if not defaults:
        return {}
    for key, values in defaults.items():
        if key.replace("_", "-") == kind:
            return dict(values or {})
    return {}


def parse_kernel(
    text: str, defaults: Optional[Mapping[str, Mapping[str, Any]]] = None
) -> KernelSpec:
    """
    Parse an inline kernel description or a JSON file path.

    `defaults` maps a kernel kind (hyphens or underscores) to parameter values
    used when the description does not set them.

    Inline grammar: name[:token,key=value,...], e.g. 'brownian-bridge',
    'heat:dirichlet,t=1', 'pathological:n_max=6,symmetrized=true',
    'tabulated:kernel.csv'. Bare tokens fill the kernel's positional field.
    """
    text = text.strip()
    if text.endswith(".json"):
        try:
            mapping = json.loads(Path(text).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidArgumentError(f"Cannot read kernel file {text}: {e}") from e
        if not isinstance(mapping, dict):
            raise InvalidArgumentError(f"Kernel file {text} must hold a JSON object")
        return kernel_from_mapping(mapping)

    name, _, rest = text.partition(":")
    mapping: Dict[str, Any] = {"kind": name.strip()}
    for token in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = token.partition("=")
        if sep:
            mapping[key.strip()] = value.strip()
        elif name in _POSITIONAL and _POSITIONAL[name] not in mapping:
            mapping[_POSITIONAL[name]] = token
        else:
            raise InvalidArgumentError(f"Unexpected token {token!r} in kernel {text!r}")
    for key, value in _defaults_for(mapping["kind"], defaults).items():
        mapping.setdefault(key, value)
    return kernel_from_mapping(mapping)
