"""Tests for the Jacobi eigensolver and the spectral operations built on it."""

import inspect
import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import (
    DegenerateEigenvalueError,
    InvalidArgumentError,
    NotPositiveError,
    NumericalFailureError,
)
from app.kernels import HeatKernel, SlowTraceDecay, tabulated_from_arrays
from app.nystrom import (
    DiscreteOperator,
    SymmetrizedMatrix,
    compose,
    discretize,
    row_l2_norm,
    trace_diag,
)
from app.quadrature import Interval, build_rule, uniform_grid
from app.spectral import (
    absolute_value,
    coefficient_tail,
    eigendecompose,
    export_eigenvalues,
    fractional_power,
    mercer_reconstruct,
    mercer_report,
    nystrom_extend,
    power_trace,
    reconstruct_product,
    symmetric_eigen,
)

from .conftest import HEAT, UNIT


def _weighted_gram(dec):
    w = dec.rule.weights
    return dec.eigfn_at_nodes.T @ (w[:, None] * dec.eigfn_at_nodes)


def _largest_gap(rule):
    edges = np.concatenate([[rule.interval.a], rule.nodes, [rule.interval.b]])
    return float(np.max(np.diff(edges)))


class TestSymmetricEigen:
    """Test cases for the Jacobi iteration."""

    @pytest.mark.parametrize("ordering", ["parallel", "cyclic"])
    def test_second_difference_matrix(self, ordering):
        """tridiag(-1, 2, -1) has eigenvalues 2 - 2 cos(k pi / (n + 1))."""
        n = 6
        matrix = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        values, vectors = symmetric_eigen(matrix, ordering=ordering)
        expected = np.sort(2.0 - 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))[::-1]
        assert_allclose(values, expected, atol=1e-10)
        assert_allclose(vectors.T @ vectors, np.eye(n), atol=1e-10)
        assert_allclose(matrix @ vectors, vectors * values, atol=1e-10)

    def test_characteristic_polynomial_oracle(self, bridge):
        """Weighted bridge eigenvalues on 5 nodes match the roots of det(B - lambda I)."""
        op = discretize(bridge, build_rule("gauss-legendre", 5, UNIT))
        dec = eigendecompose(op)
        roots = np.sort(np.real(np.roots(np.poly(SymmetrizedMatrix.from_operator(op).B))))[::-1]
        assert_allclose(dec.eigenvalues, roots, atol=1e-8)

    def test_orderings_agree(self, bridge_dec_64):
        matrix = SymmetrizedMatrix.from_operator(bridge_dec_64.operator).B
        parallel, parallel_vectors = symmetric_eigen(matrix, ordering="parallel")
        cyclic, cyclic_vectors = symmetric_eigen(matrix, ordering="cyclic")
        assert_allclose(parallel, cyclic, rtol=0.0, atol=1e-13)
        # bridge eigenvalues are simple, so the sign-normalized vectors agree too
        assert_allclose(parallel_vectors[:, :5], cyclic_vectors[:, :5], atol=1e-8)

    def test_orderings_agree_on_heat_spectrum(self):
        op = discretize(
            HeatKernel("neumann", t=0.3, modes=40),
            build_rule("gauss-legendre", 48, HEAT),
        )
        cyclic = eigendecompose(op, ordering="cyclic")
        parallel = eigendecompose(op, ordering="parallel")
        assert_allclose(cyclic.eigenvalues, parallel.eigenvalues, rtol=0.0, atol=1e-13)

    def test_cyclic_is_default(self):
        for function in (symmetric_eigen, eigendecompose):
            default = inspect.signature(function).parameters["ordering"].default
            assert default == "cyclic"

    def test_ties_keep_diagonal_order(self):
        values, vectors = symmetric_eigen(np.diag([1.0, 3.0, 3.0, 2.0]))
        assert_allclose(values, [3.0, 3.0, 2.0, 1.0])
        assert_allclose(vectors[:, 0], [0.0, 1.0, 0.0, 0.0])
        assert_allclose(vectors[:, 1], [0.0, 0.0, 1.0, 0.0])

    def test_largest_component_positive(self):
        matrix = np.array([[1.0, -2.0, 0.0], [-2.0, 3.0, 0.5], [0.0, 0.5, -1.0]])
        _, vectors = symmetric_eigen(matrix)
        for column in vectors.T:
            assert column[np.argmax(np.abs(column))] > 0

    def test_rejects_nonsymmetric(self):
        with pytest.raises(InvalidArgumentError):
            symmetric_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_unknown_ordering(self):
        with pytest.raises(InvalidArgumentError):
            symmetric_eigen(np.eye(2), ordering="random")

    def test_sweep_limit(self):
        with pytest.raises(NumericalFailureError):
            symmetric_eigen(np.array([[1.0, 0.5], [0.5, 2.0]]), max_sweeps=0)


class TestEigendecompose:
    """Test cases for eigendecompose."""

    @pytest.mark.slow
    def test_bridge_eigenvalues(self, bridge_dec_400):
        k = np.arange(1, 6)
        exact = 1.0 / (k * k * math.pi**2)
        assert_allclose(bridge_dec_400.eigenvalues[:5], exact, rtol=1e-6)
        assert bridge_dec_400.eigenvalues[0] == pytest.approx(0.1013212, rel=1e-6)
        assert bridge_dec_400.eigenvalues[1] == pytest.approx(0.0253303, rel=1e-6)

    def test_sampled_bridge_eigenvalues(self, bridge_dec_200):
        """Sampled kernels converge at second order in the node spacing."""
        k = np.arange(1, 6)
        assert_allclose(
            bridge_dec_200.eigenvalues[:5], 1.0 / (k * k * math.pi**2), rtol=1e-3
        )

    def test_heat_eigenvalues(self, heat_dec):
        k = np.arange(1, 6)
        assert_allclose(heat_dec.eigenvalues[:5], np.exp(-k * k), atol=1e-8)

    @pytest.mark.parametrize("name", ["bridge_dec_64", "heat_dec"])
    def test_weight_orthonormality(self, name, request):
        dec = request.getfixturevalue(name)
        assert np.max(np.abs(_weighted_gram(dec) - np.eye(dec.dimension))) <= 1e-10

    def test_trace_identity(self, bridge_dec_400, bridge_dec_200, heat_dec):
        for dec in (bridge_dec_400, bridge_dec_200, heat_dec):
            gap = abs(np.sum(dec.eigenvalues) - trace_diag(dec.operator))
            assert gap <= 1e-10 * trace_diag(dec.operator)

    def test_rejects_nonsymmetric_operator(self):
        spec = tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(InvalidArgumentError):
            eigendecompose(discretize(spec, spec.rule))

    def test_clipped_eigenvalues_are_not_kept(self, heat_dec):
        assert heat_dec.kept[:5].all()
        assert not heat_dec.kept[-1]

    def test_slow_trace_spectrum_has_pairs(self):
        """On a midpoint rule with 256 nodes every lambda_n appears twice."""
        spec = SlowTraceDecay(terms=100)
        rule = build_rule("midpoint", 256, Interval(0.0, 2.0 * math.pi))
        dec = eigendecompose(discretize(spec, rule), ordering="parallel")
        assert_allclose(dec.eigenvalues[:20], spec.exact_spectrum()[:20], atol=1e-12)
        assert trace_diag(fractional_power(dec, 1.0)) == pytest.approx(
            spec.sequence.sum() * 2, rel=1e-10
        )
        assert trace_diag(fractional_power(dec, 0.5)) == pytest.approx(
            power_trace(spec.exact_spectrum(), 0.5), rel=1e-8
        )


class TestExtension:
    """Test cases for nystrom_extend and mercer_reconstruct."""

    def test_bridge_vanishes_at_endpoints(self, bridge_dec_400):
        assert nystrom_extend(bridge_dec_400, 1, 0.0) == pytest.approx(0.0, abs=1e-8)
        assert nystrom_extend(bridge_dec_400, 1, 1.0) == pytest.approx(0.0, abs=1e-8)

    def test_bridge_first_eigenfunction(self, bridge_dec_400):
        """e_1(x) = sqrt(2) sin(pi x)."""
        value = nystrom_extend(bridge_dec_400, 1, 0.5)
        assert value == pytest.approx(math.sqrt(2.0), rel=1e-4)

    def test_heat_first_eigenfunction(self, heat_dec):
        value = nystrom_extend(heat_dec, 1, math.pi / 2)
        assert value == pytest.approx(math.sqrt(2.0 / math.pi), abs=1e-7)

    def test_extension_matches_nodes(self, bridge_dec_64):
        node = float(bridge_dec_64.rule.nodes[17])
        assert nystrom_extend(bridge_dec_64, 3, node) == pytest.approx(
            bridge_dec_64.eigfn_at_nodes[17, 2], rel=1e-8
        )

    def test_degenerate_eigenvalue(self, heat_dec):
        with pytest.raises(DegenerateEigenvalueError):
            nystrom_extend(heat_dec, 150, 1.0)

    def test_index_out_of_range(self, bridge_dec_64):
        with pytest.raises(InvalidArgumentError):
            nystrom_extend(bridge_dec_64, 0, 0.5)
        with pytest.raises(InvalidArgumentError):
            nystrom_extend(bridge_dec_64, 65, 0.5)

    def test_outside_interval(self, bridge_dec_64):
        with pytest.raises(InvalidArgumentError):
            nystrom_extend(bridge_dec_64, 1, 1.5)

    def test_one_term_reconstruction(self, bridge_dec_400):
        """lambda_1 e_1(1/2)^2 = 2 / pi^2."""
        value = mercer_reconstruct(bridge_dec_400, 1, 0.5, 0.5)
        assert value == pytest.approx(2.0 / math.pi**2, rel=1e-4)

    def test_zero_terms(self, bridge_dec_64):
        assert mercer_reconstruct(bridge_dec_64, 0, 0.3, 0.6) == 0.0


class TestMercerReport:
    """Test cases for mercer_report."""

    @pytest.mark.slow
    def test_bridge_full_expansion(self, bridge_dec_200):
        """Off the nodes the full expansion differs from K by at most gap / 4."""
        grid = uniform_grid(UNIT, 101)
        report = mercer_report(bridge_dec_200, bridge_dec_200.dimension, grid)
        assert report.trace_gap <= 1e-8
        assert report.sup_error <= 1.01 * _largest_gap(bridge_dec_200.rule) / 4.0
        assert report.diag_tail == 0.0

    def test_zero_terms_error_is_kernel_sup(self, bridge_dec_64):
        report = mercer_report(bridge_dec_64, 0, uniform_grid(UNIT, 101))
        assert report.sup_error == pytest.approx(0.25)

    @pytest.mark.slow
    def test_bridge_diagonal_tail(self, bridge_dec_200):
        grid = uniform_grid(UNIT, 101)
        tails = [
            mercer_report(bridge_dec_200, terms, grid).diag_tail
            for terms in (9, 10, 11)
        ]
        assert tails[1] <= 0.0194
        assert tails[1] <= tails[0] + 1e-12
        assert tails[2] <= tails[1] + 1e-12

    def test_heat_full_expansion(self, heat_dec):
        report = mercer_report(heat_dec, heat_dec.dimension, uniform_grid(HEAT, 101))
        assert report.sup_error <= 1e-7
        assert report.min_eigenvalue == heat_dec.min_eigenvalue

    def test_product_error(self, bridge_dec_64):
        op = bridge_dec_64.operator
        grid = uniform_grid(UNIT, 11)
        report = mercer_report(bridge_dec_64, 64, grid, product=(op, op))
        assert report.product_error <= 1e-10
        assert set(report.to_dict()) == {
            "terms",
            "sup_error",
            "diag_tail",
            "trace_gap",
            "min_eigenvalue",
            "product_error",
        }

    def test_grid_interval_mismatch(self, bridge_dec_64):
        with pytest.raises(InvalidArgumentError):
            mercer_report(bridge_dec_64, 3, uniform_grid(HEAT, 11))

    def test_terms_out_of_range(self, bridge_dec_64):
        with pytest.raises(InvalidArgumentError):
            mercer_report(bridge_dec_64, 65, uniform_grid(UNIT, 11))

    def test_json_is_canonical(self, bridge_dec_64):
        text = mercer_report(bridge_dec_64, 3, uniform_grid(UNIT, 11)).to_json()
        assert text.endswith("\n")
        assert text.index('"diag_tail"') < text.index('"terms"')
        assert "product_error" not in text


class TestReconstructProduct:
    """Test cases for reconstruct_product."""

    def test_full_basis_is_exact(self, bridge_dec_64):
        """In the full basis sum u_n v_n reproduces T2 T1* for a nonsymmetric T1."""
        rule = bridge_dec_64.rule
        samples = np.exp(np.subtract.outer(rule.nodes, 2.0 * rule.nodes))
        other = DiscreteOperator(rule, samples)
        op = bridge_dec_64.operator
        assert reconstruct_product(bridge_dec_64, op, other) <= 1e-12
        assert reconstruct_product(bridge_dec_64, op, other, terms=3) > 1e-6

    def test_rule_mismatch(self, bridge_dec_64, bridge_op_200):
        with pytest.raises(InvalidArgumentError):
            reconstruct_product(bridge_dec_64, bridge_op_200, bridge_op_200)


class TestFunctionalCalculus:
    """Test cases for fractional_power, absolute_value and coefficient_tail."""

    def test_power_one_round_trip(self, bridge_dec_64):
        samples = fractional_power(bridge_dec_64, 1.0).samples
        original = bridge_dec_64.operator.samples
        assert np.max(np.abs(samples - original)) <= 1e-9 * np.max(np.abs(original))

    def test_square_root_squares_back(self, bridge_dec_64):
        root = fractional_power(bridge_dec_64, 0.5)
        squared = compose(root, root).samples
        original = bridge_dec_64.operator.samples
        assert np.max(np.abs(squared - original)) <= 1e-9 * np.max(np.abs(original))

    def test_rejects_non_positive_alpha(self, bridge_dec_64):
        with pytest.raises(InvalidArgumentError):
            fractional_power(bridge_dec_64, 0.0)

    def test_indefinite_operator(self):
        """x + y on two trapezoid nodes has eigenvalues (1 +- sqrt 2) / 2."""
        spec = tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[0.0, 1.0], [1.0, 2.0]])
        dec = eigendecompose(discretize(spec, spec.rule))
        root = math.sqrt(2.0)
        assert_allclose(dec.eigenvalues, [(1 + root) / 2, (1 - root) / 2], atol=1e-14)
        with pytest.raises(NotPositiveError):
            fractional_power(dec, 0.5)
        positive = eigendecompose(absolute_value(dec))
        assert_allclose(
            positive.eigenvalues, [(1 + root) / 2, (root - 1) / 2], atol=1e-14
        )

    def test_heat_coefficient_tail(self, heat_dec):
        grid = uniform_grid(HEAT, 101)
        tails = [coefficient_tail(heat_dec, terms, grid) for terms in range(1, 6)]
        assert all(later <= earlier + 1e-15 for earlier, later in zip(tails, tails[1:]))
        assert tails[3] <= 1e-13

    def test_full_tail_is_row_norm(self):
        """From the first term on, the tail sums every coefficient (Parseval)."""
        spec = HeatKernel("dirichlet", t=0.5, modes=20)
        rule = build_rule("gauss-legendre", 48, HEAT)
        dec = eigendecompose(discretize(spec, rule))
        grid = uniform_grid(HEAT, 41)
        row_norms = [row_l2_norm(spec, float(x), rule) ** 2 for x in grid.points]
        assert coefficient_tail(dec, 1, grid) == pytest.approx(
            max(row_norms), abs=1e-8
        )

    def test_bridge_coefficient_tail_at_dimension(self, bridge_dec_64):
        grid = uniform_grid(UNIT, 101)
        assert coefficient_tail(bridge_dec_64, bridge_dec_64.dimension, grid) <= 1e-6

    def test_power_trace(self):
        assert power_trace([1.0, 0.25, 1e-20], 0.5) == pytest.approx(1.5)
        assert power_trace([], 0.5) == 0.0


class TestExport:
    """Test cases for export_eigenvalues."""

    def test_top_rows(self, heat_dec):
        buffer = io.StringIO()
        text = export_eigenvalues(heat_dec, buffer, top=3)
        lines = text.splitlines()
        assert lines[0] == "index,eigenvalue"
        assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3"]
        assert float(lines[1].split(",")[1]) == pytest.approx(math.exp(-1.0), abs=1e-8)
        assert buffer.getvalue() == text
