"""
Diagnostics
Probes that turn qualitative kernel properties into recorded numbers and a
verdict: continuity of the product kernel, growth of the diagonal, the row-L2
criterion for mapping into continuous functions, positive semi-definiteness
of Gram matrices, growth of partial traces of powers and sampled moduli of
continuity of x -> k_x.

Every ProbeReport stores its points, details and thresholds so the verdict
can be recomputed from the report alone.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .kernels import KernelSpec, product_kernel_eval
from .nystrom import row_l2_norm
from .quadrature import EvalGrid, QuadratureRule, build_rule, refine, uniform_grid
from .reporting import canonical_json
from .spectral import power_trace, symmetric_eigen

logger = logging.getLogger(__name__)

VERDICTS = (
    "jump-detected",
    "continuous",
    "bounded",
    "unbounded-growth",
    "psd",
    "indefinite",
    "criterion-satisfied",
    "criterion-violated",
)

JUMP_THRESHOLD = 0.5
GROWTH_PER_DECADE = 0.5
REFINEMENT_RATIO = 1.1
PSD_RELATIVE_TOL = 1e-10
ROW_JUMP_THRESHOLD = 0.5
DEFAULT_GRID_SIZE = 101
DEFAULT_RULE_NODES = 200


@dataclass
class ProbeReport:
    """
    Outcome of a probe: (point, value) pairs, a limit, a verdict and the
    thresholds used.
    """

    probe: str
    points: List[Tuple[float, float]]
    limit: Optional[float]
    verdict: str
    thresholds: Dict[str, float]
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "probe": self.probe,
            "points": [[point, value] for point, value in self.points],
            "limit": self.limit,
            "verdict": self.verdict,
            "thresholds": dict(self.thresholds),
            "details": dict(self.details),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def recompute_verdict(self) -> str:
        """Re-derive the verdict from the recorded values and thresholds."""
        if self.probe not in _VERDICT_RULES:
            raise InvalidArgumentError(f"Unknown probe {self.probe!r}")
        return _VERDICT_RULES[self.probe](self)


def _growth_verdict(pairs: Sequence[Tuple[float, float]], per_decade: float) -> str:
    """
    unbounded-growth when every step of the schedule grows by more than
    per_decade per decade.
    """
    if len(pairs) < 2:
        return "bounded"
    for (n0, v0), (n1, v1) in zip(pairs, pairs[1:]):
        if (v1 - v0) / math.log10(n1 / n0) <= per_decade:
            return "bounded"
    return "unbounded-growth"


def _check_schedule(schedule: Sequence[int]) -> List[int]:
    terms = [int(n) for n in schedule]
    increasing = all(b > a for a, b in zip(terms, terms[1:]))
    if not terms or any(n < 1 for n in terms) or not increasing:
        raise InvalidArgumentError(
            "Schedule must be strictly increasing positive counts, "
            f"got {list(schedule)}"
        )
    if any(int(n) != n for n in schedule):
        raise InvalidArgumentError(
            f"Schedule entries must be integers, got {list(schedule)}"
        )
    return terms


def _continuity_verdict(report: ProbeReport) -> str:
    center = report.details["center"]
    limits = []
    for side in (1.0, -1.0):
        branch = [
            (abs(x - center), value)
            for x, value in report.points
            if side * (x - center) > 0
        ]
        if branch:
            limits.append(min(branch)[1])
    limits.extend(value for x, value in report.points if x == center)
    spread = max(limits) - min(limits) if limits else 0.0
    return "jump-detected" if spread > report.thresholds["jump"] else "continuous"


def _default_rule(spec: KernelSpec, rule: Optional[QuadratureRule]) -> QuadratureRule:
    if rule is not None:
        return rule
    return build_rule("gauss-legendre", DEFAULT_RULE_NODES, spec.interval)


def continuity_probe_product(
    spec: KernelSpec,
    depth: int,
    rule: Optional[QuadratureRule] = None,
    center: Optional[float] = None,
    threshold: float = JUMP_THRESHOLD,
) -> ProbeReport:
    """
    Evaluate K2(x, x) = integral of K(x, z)^2 dz along x = p + 2^-n and x = p - 2^-n,
    n = 1..depth, and at p itself (p = 0 when it lies in the interval, else the
    midpoint). Points outside the interval are skipped.

    Verdict jump-detected when the sequence limits and K2(p, p) spread by more
    than `threshold`.

    Raises:
        InvalidArgumentError: If depth < 1 or depth exceeds the kernel's n_max
    """
    if int(depth) != depth or depth < 1:
        raise InvalidArgumentError(
            f"Probe depth must be a positive integer, got {depth}"
        )
    truncation = spec.truncation
    if spec.kind == "pathological" and truncation is not None and depth > truncation:
        raise InvalidArgumentError(f"Probe depth {depth} exceeds n_max={truncation}")
    rule = _default_rule(spec, rule)
    interval = spec.interval
    if center is None:
        center = 0.0 if interval.contains(0.0) else interval.midpoint
    interval.check(center, "probe centre")

    points: List[Tuple[float, float]] = []
    for sign in (1.0, -1.0):
        for n in range(1, int(depth) + 1):
            x = center + sign * 2.0 ** (-n)
            if interval.contains(x):
                x = min(max(x, interval.a), interval.b)
                points.append((x, product_kernel_eval(spec, x, x, rule)))
    center_value = product_kernel_eval(spec, center, center, rule)
    points.append((center, center_value))

    report = ProbeReport(
        probe="continuity",
        points=points,
        limit=center_value,
        verdict="",
        thresholds={"jump": threshold},
        details={"center": center, "depth": int(depth)},
    )
    report.verdict = _continuity_verdict(report)
    logger.info(f"Continuity probe on {spec.kind}: {report.verdict}")
    return report


def _growth_report_verdict(report: ProbeReport) -> str:
    return _growth_verdict(report.points, report.thresholds["growth_per_decade"])


def diagonal_growth_probe(
    spec: KernelSpec,
    term_schedule: Sequence[int],
    grid: Optional[EvalGrid] = None,
    threshold: float = GROWTH_PER_DECADE,
) -> ProbeReport:
    """
    sup_x K_N(x, x) over a fixed grid (endpoints included) for each truncation N.

    Verdict unbounded-growth when the sup grows by more than `threshold` per
    decade of N at every step of the schedule.
    """
    schedule = _check_schedule(term_schedule)
    grid = grid or uniform_grid(spec.interval, DEFAULT_GRID_SIZE)
    points: List[Tuple[float, float]] = []
    argmax: List[float] = []
    for terms in schedule:
        diagonal = spec.with_truncation(terms).diagonal(grid.points)
        index = int(np.argmax(diagonal))
        points.append((float(terms), float(diagonal[index])))
        argmax.append(float(grid.points[index]))
        logger.debug(
            f"Diagonal sup for N={terms}: {diagonal[index]!r} "
            f"at x={grid.points[index]!r}"
        )

    report = ProbeReport(
        probe="diag-growth",
        points=points,
        limit=points[-1][1],
        verdict="",
        thresholds={"growth_per_decade": threshold},
        details={"argmax": argmax},
    )
    report.verdict = _growth_report_verdict(report)
    logger.info(f"Diagonal growth probe on {spec.kind}: {report.verdict}")
    return report


def _c_criterion_verdict(report: ProbeReport) -> str:
    sup = max(value for _, value in report.points)
    refined = report.details["refined_sup"]
    ratio = report.thresholds["refinement_ratio"]
    if not (math.isfinite(sup) and math.isfinite(refined)):
        return "criterion-violated"
    if sup == 0.0 or refined == 0.0:
        stable = sup == refined
    else:
        stable = 1.0 / ratio <= refined / sup <= ratio
    schedule = report.details.get("schedule")
    growth = report.thresholds["growth_per_decade"]
    if schedule and _growth_verdict(schedule, growth) != "bounded":
        return "criterion-violated"
    return "criterion-satisfied" if stable else "criterion-violated"


def c_criterion_probe(
    spec: KernelSpec,
    F: EvalGrid,
    rule: QuadratureRule,
    term_schedule: Optional[Sequence[int]] = None,
    ratio: float = REFINEMENT_RATIO,
    growth_per_decade: float = GROWTH_PER_DECADE,
) -> ProbeReport:
    """
    Row norms ||k_x|| over F and their sup.

    The criterion is satisfied when the sup is finite and changes by at most
    a factor `ratio` under refinement of the rule. With a term schedule the sup
    is also recorded per truncation and must not grow like a divergent series.
    The diagonal sup over F is kept in the details alongside.
    """
    spec.interval.check(F.points, "F point")
    points = [(float(x), row_l2_norm(spec, float(x), rule)) for x in F.points]
    finer = refine(rule)
    refined_sup = max(row_l2_norm(spec, float(x), finer) for x in F.points)
    details: Dict[str, Any] = {
        "refined_sup": refined_sup,
        "diagonal_sup": float(np.max(spec.diagonal(F.points))),
    }
    if term_schedule is not None:
        details["schedule"] = []
        for n in _check_schedule(term_schedule):
            truncated = spec.with_truncation(n)
            sup_n = max(row_l2_norm(truncated, float(x), rule) for x in F.points)
            details["schedule"].append((float(n), sup_n))

    sup = max(value for _, value in points)
    report = ProbeReport(
        probe="c-criterion",
        points=points,
        limit=sup,
        verdict="",
        thresholds={"refinement_ratio": ratio, "growth_per_decade": growth_per_decade},
        details=details,
    )
    report.verdict = _c_criterion_verdict(report)
    logger.info(
        f"C-criterion probe on {spec.kind}: sup row norm {sup!r}, {report.verdict}"
    )
    return report


def _psd_verdict(report: ProbeReport) -> str:
    tolerance = report.thresholds["relative_tol"] * report.details["max_entry"]
    return "psd" if report.details["min_eigenvalue"] >= -tolerance else "indefinite"


def psd_probe(
    spec: KernelSpec, points: Sequence[float], tol: float = PSD_RELATIVE_TOL
) -> ProbeReport:
    """
    Smallest eigenvalue of the Gram matrix K(x_k, x_l).

    Non-symmetric kernels are tested through the symmetric part of the Gram
    matrix, which carries the same quadratic form.

    Raises:
        InvalidArgumentError: On empty input, duplicate points or points outside
            the interval
    """
    xs = spec.interval.check(np.asarray(list(points), dtype=float).ravel(), "point")
    if xs.size == 0:
        raise InvalidArgumentError("psd_probe needs at least one point")
    if np.unique(xs).size != xs.size:
        raise InvalidArgumentError("psd_probe points must be pairwise distinct")

    gram = spec.matrix(xs, xs)
    gram = 0.5 * (gram + gram.T)
    eigenvalues, _ = symmetric_eigen(gram)
    report = ProbeReport(
        probe="psd",
        points=[(float(x), float(gram[k, k])) for k, x in enumerate(xs)],
        limit=float(eigenvalues[-1]),
        verdict="",
        thresholds={"relative_tol": tol},
        details={
            "min_eigenvalue": float(eigenvalues[-1]),
            "max_entry": float(np.max(np.abs(gram))),
        },
    )
    report.verdict = _psd_verdict(report)
    logger.info(f"PSD probe on {spec.kind} with {xs.size} points: {report.verdict}")
    return report


def trace_power_probe(
    spec: KernelSpec,
    alpha: float,
    term_schedule: Sequence[int],
    threshold: float = GROWTH_PER_DECADE,
) -> ProbeReport:
    """
    Partial traces sum lambda_n^alpha of the N-term truncations, from the
    kernel's closed-form spectrum; same growth rule as diagonal_growth_probe.

    Raises:
        InvalidArgumentError: If alpha <= 0 or the kernel has no closed-form spectrum
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise InvalidArgumentError(f"Power alpha must be positive, got {alpha}")
    points: List[Tuple[float, float]] = []
    for terms in _check_schedule(term_schedule):
        spectrum = spec.with_truncation(terms).exact_spectrum(terms)
        if spectrum is None:
            raise InvalidArgumentError(
                f"{spec.kind} kernel has no closed-form spectrum"
            )
        points.append((float(terms), power_trace(spectrum, alpha)))

    report = ProbeReport(
        probe="trace-power",
        points=points,
        limit=points[-1][1],
        verdict="",
        thresholds={"growth_per_decade": threshold},
        details={"alpha": float(alpha)},
    )
    report.verdict = _growth_report_verdict(report)
    logger.info(f"Trace power probe on {spec.kind} (alpha={alpha}): {report.verdict}")
    return report


def _modulus_verdict(report: ProbeReport) -> str:
    jump = report.details["max_row_jump"]
    if jump <= report.thresholds["row_jump"]:
        return "criterion-satisfied"
    return "criterion-violated"


def modulus_probe(
    spec: KernelSpec,
    grid: EvalGrid,
    rule: QuadratureRule,
    threshold: float = ROW_JUMP_THRESHOLD,
) -> ProbeReport:
    """
    Sampled moduli of continuity of x -> ||k_x|| and x -> k_x between adjacent
    grid points. A finite sample, not a proof of continuity.
    """
    xs = [float(x) for x in grid.points]
    norms = [row_l2_norm(spec, x, rule) for x in xs]
    norm_jumps, row_jumps = [], []
    for (x0, n0), (x1, n1) in zip(zip(xs, norms), zip(xs[1:], norms[1:])):
        cross = product_kernel_eval(spec, x0, x1, rule)
        row_jumps.append(math.sqrt(max(n0 * n0 + n1 * n1 - 2.0 * cross, 0.0)))
        norm_jumps.append(abs(n1 - n0))

    report = ProbeReport(
        probe="modulus",
        points=list(zip(xs, norms)),
        limit=max(norms),
        verdict="",
        thresholds={"row_jump": threshold},
        details={"max_norm_jump": max(norm_jumps), "max_row_jump": max(row_jumps)},
    )
    report.verdict = _modulus_verdict(report)
    jump = report.details["max_row_jump"]
    logger.info(f"Modulus probe on {spec.kind}: max row jump {jump!r}")
    return report


_VERDICT_RULES: Dict[str, Callable[[ProbeReport], str]] = {
    "continuity": _continuity_verdict,
    "diag-growth": _growth_report_verdict,
    "c-criterion": _c_criterion_verdict,
    "psd": _psd_verdict,
    "trace-power": _growth_report_verdict,
    "modulus": _modulus_verdict,
}
