"""
Spectral
Symmetric eigendecomposition of discrete operators and everything built on
it: Nystrom extension, Mercer reconstruction, fractional powers, coefficient
tails and trace identities.

Eigenvalues are sorted in descending order and indexed from 1 in the public
functions (lambda_1 >= lambda_2 >= ...).
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from .errors import (
    DegenerateEigenvalueError,
    InvalidArgumentError,
    NotPositiveError,
    NumericalFailureError,
)
from .kernels import KernelSpec
from .nystrom import (
    DiscreteOperator,
    SymmetrizedMatrix,
    adjoint,
    compose,
    same_rule,
    to_spec,
    trace_diag,
)
from .quadrature import EvalGrid, QuadratureRule
from .reporting import canonical_json, frame_to_csv

logger = logging.getLogger(__name__)

JACOBI_ORDERINGS = ("cyclic", "parallel")
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
CLIP_TOL = 1e-12


def _off_diagonal_norm(matrix: np.ndarray) -> float:
    off = matrix.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _rotation(
    app: np.ndarray, aqq: np.ndarray, apq: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Cosines and sines of the rotations that zero each a_pq."""
    active = apq != 0.0
    with np.errstate(over="ignore"):
        tau = (aqq - app) / (2.0 * np.where(active, apq, 1.0))
        sign = np.where(tau >= 0.0, 1.0, -1.0)
        t = np.where(active, sign / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, t * c


def _rotate(
    matrix: np.ndarray, vectors: np.ndarray, p: np.ndarray, q: np.ndarray
) -> None:
    """Apply the rotations for a round of disjoint pairs at once."""
    c, s = _rotation(matrix[p, p], matrix[q, q], matrix[p, q])

    col_p, col_q = matrix[:, p].copy(), matrix[:, q].copy()
    matrix[:, p] = c * col_p - s * col_q
    matrix[:, q] = s * col_p + c * col_q

    row_p, row_q = matrix[p, :].copy(), matrix[q, :].copy()
    matrix[p, :] = c[:, None] * row_p - s[:, None] * row_q
    matrix[q, :] = s[:, None] * row_p + c[:, None] * row_q
    matrix[p, q] = 0.0
    matrix[q, p] = 0.0

    vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
    vectors[:, p] = c * vec_p - s * vec_q
    vectors[:, q] = s * vec_p + c * vec_q


def _rotate_pair(matrix: np.ndarray, vectors: np.ndarray, p: int, q: int) -> None:
    """Scalar form of _rotate for a single pair with a_pq != 0."""
    tau = (matrix[q, q] - matrix[p, p]) / (2.0 * matrix[p, q])
    t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + math.hypot(1.0, tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    s = t * c

    cols = matrix[:, [p, q]]
    matrix[:, p] = c * cols[:, 0] - s * cols[:, 1]
    matrix[:, q] = s * cols[:, 0] + c * cols[:, 1]

    rows = matrix[[p, q], :]
    matrix[p, :] = c * rows[0] - s * rows[1]
    matrix[q, :] = s * rows[0] + c * rows[1]
    matrix[p, q] = matrix[q, p] = 0.0

    vecs = vectors[:, [p, q]]
    vectors[:, p] = c * vecs[:, 0] - s * vecs[:, 1]
    vectors[:, q] = s * vecs[:, 0] + c * vecs[:, 1]


def _cyclic_pairs(n: int) -> List[Tuple[int, int]]:
    return [(p, q) for p in range(n - 1) for q in range(p + 1, n)]


def _round_robin_pairs(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Rounds of disjoint pairs covering every (p, q) exactly once."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            first = np.array([a for a, _ in pairs])
            second = np.array([b for _, b in pairs])
            rounds.append((first, second))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _cyclic_sweep(work: np.ndarray, vectors: np.ndarray, skip: float) -> None:
    for p, q in _cyclic_pairs(work.shape[0]):
        if abs(work[p, q]) > skip:
            _rotate_pair(work, vectors, p, q)


def _parallel_sweep(work: np.ndarray, vectors: np.ndarray, skip: float) -> None:
    for p, q in _round_robin_pairs(work.shape[0]):
        active = np.abs(work[p, q]) > skip
        if active.any():
            _rotate(work, vectors, p[active], q[active])


def symmetric_eigen(
    matrix: np.ndarray,
    ordering: str = "cyclic",
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Jacobi eigenvalue iteration for a real symmetric matrix.

    Each sweep visits every off-diagonal pair once, either cyclic by rows or
    in round-robin rounds of disjoint pairs, and rotates it away unless
    |a_pq| <= tol * ||A||_F / n. Iteration stops when the off-diagonal
    Frobenius norm is at most tol * ||A||_F.

    Args:
        matrix: Square symmetric matrix
        ordering: 'cyclic' (by rows) or 'parallel' (round-robin)
        tol: Relative off-diagonal tolerance
        max_sweeps: Sweep limit

    Returns:
        (eigenvalues descending, orthonormal eigenvectors as columns); ties keep
        their diagonal order and each eigenvector's largest component is positive

    Raises:
        InvalidArgumentError: If the matrix is not square and symmetric
        NumericalFailureError: If the sweep limit is reached
    """
    work = np.array(matrix, dtype=float)
    if work.ndim != 2 or work.shape[0] != work.shape[1] or work.shape[0] == 0:
        raise InvalidArgumentError(
            f"Expected a non-empty square matrix, got shape {work.shape}"
        )
    if not np.all(np.isfinite(work)):
        raise NumericalFailureError("Matrix contains non-finite entries")
    if ordering not in JACOBI_ORDERINGS:
        raise InvalidArgumentError(
            f"Unknown Jacobi ordering {ordering!r}. "
            f"Must be one of: {list(JACOBI_ORDERINGS)}"
        )
    n = work.shape[0]
    scale = float(np.linalg.norm(work))
    asymmetry = float(np.max(np.abs(work - work.T)))
    if scale > 0 and asymmetry > 1e-12 * float(np.max(np.abs(work))):
        raise InvalidArgumentError("symmetric_eigen needs a symmetric matrix")

    vectors = np.eye(n)
    sweep = _parallel_sweep if ordering == "parallel" else _cyclic_sweep
    skip = tol * scale / n
    sweeps = 0
    while True:
        residual = _off_diagonal_norm(work)
        logger.debug(f"Jacobi sweep {sweeps}: off-diagonal norm {residual:.3e}")
        if residual <= tol * scale:
            break
        if sweeps == max_sweeps:
            raise NumericalFailureError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps "
                f"(off-diagonal {residual:.3e})"
            )
        sweep(work, vectors, skip)
        sweeps += 1
    logger.info(f"Jacobi ({ordering}) converged for n={n} after {sweeps} sweeps")

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    largest = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[largest, np.arange(n)] < 0, -1.0, 1.0)
    return values, vectors * signs


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """
    Eigenvalues (descending) and weight-orthonormal eigenfunctions at the nodes:
    sum_i w_i e_n(x_i) e_m(x_i) = delta_nm.
    """

    rule: QuadratureRule
    eigenvalues: np.ndarray
    eigfn_at_nodes: np.ndarray = field(repr=False)
    source: KernelSpec = field(repr=False)
    operator: DiscreteOperator = field(repr=False)

    @property
    def dimension(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def tol_clip(self) -> float:
        """Eigenvalues with |lambda| at or below this are treated as zero."""
        return CLIP_TOL * max(float(np.max(np.abs(self.eigenvalues))), 1.0)

    @property
    def kept(self) -> np.ndarray:
        return np.abs(self.eigenvalues) > self.tol_clip

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass
class MercerReport:
    """Truncated Mercer expansion diagnostics."""

    terms: int
    sup_error: float
    diag_tail: float
    trace_gap: float
    min_eigenvalue: float
    product_error: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "terms": self.terms,
            "sup_error": self.sup_error,
            "diag_tail": self.diag_tail,
            "trace_gap": self.trace_gap,
            "min_eigenvalue": self.min_eigenvalue,
        }
        if self.product_error is not None:
            payload["product_error"] = self.product_error
        return payload

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def eigendecompose(
    op: DiscreteOperator,
    ordering: str = "cyclic",
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> SpectralDecomposition:
    """
    Solve the weighted eigenproblem A W e = lambda e.

    The symmetric similarity transform B = W^(1/2) A W^(1/2) is diagonalized
    by Jacobi iteration and e_n = v_n / sqrt(w).

    Raises:
        InvalidArgumentError: If the operator is not flagged symmetric
        NumericalFailureError: If Jacobi iteration fails to converge
    """
    if not op.symmetric:
        raise InvalidArgumentError("eigendecompose needs a symmetric operator")
    values, vectors = symmetric_eigen(
        SymmetrizedMatrix.from_operator(op).B, ordering, tol, max_sweeps
    )
    eigfn = vectors / op.rule.sqrt_weights[:, None]
    for array in (values, eigfn):
        array.setflags(write=False)
    source = op.source if op.source is not None else to_spec(op)
    dec = SpectralDecomposition(op.rule, values, eigfn, source, op)
    clipped = int(np.count_nonzero(~dec.kept))
    if clipped:
        logger.warning(
            f"{clipped} of {dec.dimension} eigenvalues are below "
            f"tol_clip={dec.tol_clip:.3e}"
        )
    return dec


def _check_terms(dec: SpectralDecomposition, terms: int, lowest: int = 0) -> int:
    if int(terms) != terms or not lowest <= terms <= dec.dimension:
        raise InvalidArgumentError(
            f"Term count must be in [{lowest}, {dec.dimension}], got {terms}"
        )
    return int(terms)


def _coefficients(dec: SpectralDecomposition, points: np.ndarray) -> np.ndarray:
    """c_n(x) = sum_j w_j K(x, x_j) e_n(x_j) for every point and every n."""
    rows = dec.source.matrix(points, dec.rule.nodes)
    return rows @ (dec.rule.weights[:, None] * dec.eigfn_at_nodes)


def _extended(
    dec: SpectralDecomposition, points: np.ndarray, terms: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Kept eigenvalues among the first `terms` and their extensions at the points."""
    index = np.flatnonzero(dec.kept[:terms])
    values = dec.eigenvalues[index]
    if index.size == 0:
        return values, np.zeros((points.size, 0))
    return values, _coefficients(dec, points)[:, index] / values


def nystrom_extend(dec: SpectralDecomposition, n: int, x: float) -> float:
    """
    e_n(x) = (1/lambda_n) sum_j w_j K(x, x_j) e_n(x_j), for any x in the closed
    interval.

    Raises:
        InvalidArgumentError: If n is out of range or x is outside the interval
        DegenerateEigenvalueError: If |lambda_n| <= tol_clip
    """
    _check_terms(dec, n, lowest=1)
    value = dec.eigenvalues[n - 1]
    if abs(value) <= dec.tol_clip:
        raise DegenerateEigenvalueError(
            f"Eigenvalue lambda_{n} = {value:.3e} is below tol_clip={dec.tol_clip:.3e}"
        )
    point = dec.rule.interval.check(np.array([x]), "x")
    return float(_coefficients(dec, point)[0, n - 1] / value)


def mercer_reconstruct(
    dec: SpectralDecomposition, terms: int, x: float, y: float
) -> float:
    """
    sum_{n <= terms} lambda_n e_n(x) e_n(y) with extended eigenfunctions.

    Clipped terms are skipped.
    """
    terms = _check_terms(dec, terms)
    points = dec.rule.interval.check(np.array([x, y], dtype=float))
    values, ext = _extended(dec, points, terms)
    return float(np.sum(values * ext[0] * ext[1]))


def reconstruct_product(
    basis: SpectralDecomposition,
    op2: DiscreteOperator,
    op1: DiscreteOperator,
    terms: Optional[int] = None,
) -> float:
    """
    Sup error of sum_{n <= terms} u_n(x_i) v_n(x_k) against the samples of T2 T1*,
    with u_n = T2 e_n and v_n = T1 e_n for the basis eigenfunctions e_n.

    Raises:
        InvalidArgumentError: If the operators do not share the basis rule
    """
    if not (same_rule(basis.rule, op2.rule) and same_rule(basis.rule, op1.rule)):
        raise InvalidArgumentError(
            "Product operators must share the basis quadrature rule"
        )
    terms = basis.dimension if terms is None else _check_terms(basis, terms)
    weighted = basis.rule.weights[:, None] * basis.eigfn_at_nodes[:, :terms]
    u = op2.samples @ weighted
    v = op1.samples @ weighted
    target = compose(op2, adjoint(op1)).samples
    return float(np.max(np.abs(u @ v.T - target)))


def mercer_report(
    dec: SpectralDecomposition,
    terms: int,
    grid: EvalGrid,
    product: Optional[Tuple[DiscreteOperator, DiscreteOperator]] = None,
) -> MercerReport:
    """
    Sup-norm reconstruction error of the `terms`-term expansion over grid x grid,
    the diagonal tail sup_x sum_{n > terms} |lambda_n| e_n(x)^2, the trace gap
    |sum lambda_n - trace_diag| and the smallest eigenvalue.

    With product=(op2, op1) the report also carries the series error of the
    nonsymmetric kernel of T2 T1* in this basis.
    """
    terms = _check_terms(dec, terms)
    if not grid.interval.same_as(dec.rule.interval):
        raise InvalidArgumentError(
            "Evaluation grid interval does not match the decomposition"
        )
    points = grid.points
    values, ext = _extended(dec, points, dec.dimension)
    kept_index = np.flatnonzero(dec.kept)
    head = kept_index < terms

    approximation = (ext[:, head] * values[head]) @ ext[:, head].T
    exact = dec.source.matrix(points, points)
    sup_error = float(np.max(np.abs(approximation - exact)))
    diag_tail = 0.0
    if np.any(~head):
        diag_tail = float(np.max((ext[:, ~head] ** 2) @ np.abs(values[~head])))
    trace_gap = abs(float(np.sum(dec.eigenvalues)) - trace_diag(dec.operator))

    product_error = None
    if product is not None:
        product_error = reconstruct_product(dec, product[0], product[1], terms)

    report = MercerReport(
        terms, sup_error, diag_tail, trace_gap, dec.min_eigenvalue, product_error
    )
    logger.info(
        f"Mercer report N={terms}: sup_error={sup_error:.3e}, trace_gap={trace_gap:.3e}"
    )
    return report


def _check_positive(dec: SpectralDecomposition) -> None:
    if dec.min_eigenvalue < -dec.tol_clip:
        raise NotPositiveError(
            f"Operator is not positive: min eigenvalue {dec.min_eigenvalue:.3e} "
            f"< -{dec.tol_clip:.3e}"
        )


def _spectral_operator(
    dec: SpectralDecomposition, values: np.ndarray
) -> DiscreteOperator:
    samples = (dec.eigfn_at_nodes * values) @ dec.eigfn_at_nodes.T
    return DiscreteOperator(dec.rule, 0.5 * (samples + samples.T), symmetric=True)


def fractional_power(dec: SpectralDecomposition, alpha: float) -> DiscreteOperator:
    """
    Kernel samples of T^alpha = sum lambda_n^alpha e_n (x) e_n.

    Eigenvalues at or below tol_clip (including negative noise) are set to 0.

    Raises:
        InvalidArgumentError: If alpha <= 0
        NotPositiveError: If the operator has an eigenvalue below -tol_clip
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise InvalidArgumentError(f"Power alpha must be positive, got {alpha}")
    _check_positive(dec)
    values = np.where(dec.eigenvalues > dec.tol_clip, dec.eigenvalues, 0.0)
    return _spectral_operator(dec, values ** alpha)


def absolute_value(dec: SpectralDecomposition) -> DiscreteOperator:
    """|T| = sum |lambda_n| e_n (x) e_n, a positive operator for any symmetric T."""
    return _spectral_operator(dec, np.where(dec.kept, np.abs(dec.eigenvalues), 0.0))


def coefficient_tail(dec: SpectralDecomposition, terms: int, grid: EvalGrid) -> float:
    """sup over the grid of sum_{n >= terms} c_n(x)^2 with c_n(x) = (k_x, e_n)."""
    terms = _check_terms(dec, terms, lowest=1)
    coefficients = _coefficients(dec, grid.points)[:, terms - 1 :]
    return float(np.max(np.sum(coefficients * coefficients, axis=1)))


def power_trace(eigenvalues: Iterable[float], alpha: float) -> float:
    """sum lambda^alpha over eigenvalues above the clip tolerance."""
    values = np.asarray(list(eigenvalues), dtype=float)
    if values.size == 0:
        return 0.0
    tol = CLIP_TOL * max(float(np.max(np.abs(values))), 1.0)
    kept = values[values > tol]
    return float(np.sum(kept ** alpha))


def export_eigenvalues(
    dec: SpectralDecomposition,
    target: Union[str, Path, TextIO, None] = None,
    top: Optional[int] = None,
) -> str:
    """(index, eigenvalue) rows in descending order, as CSV."""
    count = dec.dimension if top is None else _check_terms(dec, top, lowest=1)
    frame = pd.DataFrame(
        {"index": np.arange(1, count + 1), "eigenvalue": dec.eigenvalues[:count]}
    )
    return frame_to_csv(frame, target)
