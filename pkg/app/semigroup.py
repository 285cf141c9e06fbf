"""
Semigroup
Heat semigroups of the Dirichlet and Neumann Laplacian on (0, pi): pointwise
kernels, the semigroup identity K_2t = K_t o K_t, traces and Gaussian bounds.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .kernels import HeatKernel
from .quadrature import EvalGrid, Interval, QuadratureRule

logger = logging.getLogger(__name__)

HEAT_INTERVAL = Interval(0.0, math.pi)
GAUSSIAN_B = 0.125
GAUSSIAN_OMEGA = 0.0


@dataclass(frozen=True)
class HeatSemigroupSpec:
    """Boundary condition, time t > 0 and number of retained modes."""

    boundary: str = "dirichlet"
    t: float = 1.0
    modes: Optional[int] = None

    def __post_init__(self) -> None:
        kernel = HeatKernel(self.boundary, self.t, self.modes)
        object.__setattr__(self, "modes", kernel.modes)

    def kernel(self) -> HeatKernel:
        return HeatKernel(self.boundary, self.t, self.modes)

    def at_time(self, t: float) -> "HeatSemigroupSpec":
        return replace(self, t=float(t))


@dataclass(frozen=True)
class GaussianBoundParams:
    """|K_t(x, y)| <= c t^(-1/2) exp(-b |x - y|^2 / t) exp(omega t)."""

    b: float
    omega: float
    c: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(value) for value in (self.b, self.omega, self.c)):
            raise InvalidArgumentError("Gaussian bound parameters must be finite")
        if self.b <= 0:
            raise InvalidArgumentError(f"Gaussian bound needs b > 0, got {self.b}")
        if self.omega < 0:
            raise InvalidArgumentError(
                f"Gaussian bound needs omega >= 0, got {self.omega}"
            )


def heat_eval(spec: HeatSemigroupSpec, x: float, y: float) -> float:
    """K_t(x, y); exactly symmetric in x and y."""
    return spec.kernel().eval(x, y)


def _check_heat_interval(interval: Interval, what: str) -> None:
    if not interval.same_as(HEAT_INTERVAL):
        raise InvalidArgumentError(
            f"{what} must live on (0, pi), got [{interval.a}, {interval.b}]"
        )


def semigroup_check(
    spec: HeatSemigroupSpec, rule: QuadratureRule, grid: EvalGrid
) -> float:
    """sup over grid x grid of |K_2t - quadrature composition of K_t with itself|."""
    _check_heat_interval(rule.interval, "Rule")
    _check_heat_interval(grid.interval, "Grid")
    rows = spec.kernel().matrix(grid.points, rule.nodes)
    composed = rows @ (rule.weights[:, None] * rows.T)
    exact = spec.at_time(2.0 * spec.t).kernel().matrix(grid.points)
    residual = float(np.max(np.abs(exact - composed)))
    logger.info(
        f"Semigroup residual ({spec.boundary}, t={spec.t}, {len(rule)} nodes): "
        f"{residual:.3e}"
    )
    return residual


def gaussian_bound_fit(
    spec: HeatSemigroupSpec,
    times: Sequence[float],
    grid: EvalGrid,
    b: float = GAUSSIAN_B,
    omega: float = GAUSSIAN_OMEGA,
) -> GaussianBoundParams:
    """
    Smallest c with |K_t(x, y)| <= c t^(-1/2) exp(-b |x - y|^2 / t) exp(omega t)
    over all grid pairs and the listed times.

    Raises:
        InvalidArgumentError: If a time is not positive, b <= 0 or omega < 0
    """
    if not times:
        raise InvalidArgumentError("gaussian_bound_fit needs at least one time")
    if any(not t > 0 for t in times):
        raise InvalidArgumentError(f"All times must be positive, got {list(times)}")
    if not b > 0 or omega < 0:
        raise InvalidArgumentError(
            f"Need b > 0 and omega >= 0, got b={b}, omega={omega}"
        )
    _check_heat_interval(grid.interval, "Grid")

    distance = np.subtract.outer(grid.points, grid.points) ** 2
    c = 0.0
    for t in times:
        values = np.abs(spec.at_time(t).kernel().matrix(grid.points))
        envelope = math.sqrt(t) * np.exp(b * distance / t - omega * t)
        c = max(c, float(np.max(values * envelope)))
    logger.info(f"Gaussian bound fit ({spec.boundary}, b={b}, omega={omega}): c={c!r}")
    return GaussianBoundParams(b=b, omega=omega, c=c)


def heat_trace(spec: HeatSemigroupSpec) -> float:
    """sum of exp(-n^2 t) over the retained modes (n = 0 included for Neumann)."""
    return float(np.sum(spec.kernel().decay))
