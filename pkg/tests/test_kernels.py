"""Tests for kernel fixtures, tabulated kernels and kernel parsing."""

import json
import math
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import InvalidArgumentError
from app.kernels import (
    BUMP,
    BrownianBridge,
    HeatKernel,
    LegendreDecay,
    PathologicalProduct,
    SlowTraceDecay,
    bump_mass,
    default_heat_modes,
    evaluate,
    kernel_from_mapping,
    legendre_poly,
    load_tabulated,
    parse_kernel,
    pathological_block,
    pathological_z_block,
    product_kernel_eval,
    save_tabulated,
    tabulated_from_arrays,
)
from app.quadrature import Interval, build_rule, composite_rule, integrate


class TestBump:
    """Test cases for the bump function and its mass."""

    def test_flat_part_and_support(self):
        assert_allclose(BUMP.beta([-0.5, 0.0, 0.5]), [1.0, 1.0, 1.0])
        assert_allclose(BUMP.beta([-1.0, 1.0, 1.5]), [0.0, 0.0, 0.0])

    def test_ramp_value(self):
        """At s = 3/4 the ramp is exp(1 - 1/(1 - 1/4))."""
        assert BUMP.beta(0.75) == pytest.approx(math.exp(1.0 - 4.0 / 3.0))

    def test_tau_is_product(self):
        assert BUMP.tau(0.75, 0.0) == pytest.approx(BUMP.beta(0.75))

    def test_mass_matches_direct_integral(self):
        """c_beta agrees with a direct composite integral of beta^2."""
        rule = composite_rule(np.linspace(-1.0, 1.0, 41), 32)
        direct = integrate(lambda s: BUMP.beta(s) ** 2, rule)
        assert bump_mass() == pytest.approx(direct, rel=1e-10)
        assert 1.3 < BUMP.mass < 1.6


class TestBrownianBridge:
    """Test cases for the Brownian bridge kernel."""

    def test_values(self, bridge):
        assert bridge.eval(0.3, 0.6) == pytest.approx(0.12)
        assert evaluate(bridge, 0.6, 0.3) == pytest.approx(0.12)
        assert bridge.eval(0.0, 0.7) == 0.0

    def test_matrix_is_symmetric(self, bridge):
        xs = np.linspace(0.0, 1.0, 7)
        matrix = bridge.matrix(xs)
        assert np.array_equal(matrix, matrix.T)

    def test_diagonal(self, bridge):
        assert_allclose(bridge.diagonal([0.25, 0.5]), [0.1875, 0.25])

    def test_outside_interval(self, bridge):
        with pytest.raises(InvalidArgumentError):
            bridge.eval(1.2, 0.5)

    def test_exact_spectrum(self, bridge):
        expected = [1.0 / (k * k * math.pi**2) for k in (1, 2, 3)]
        assert_allclose(bridge.exact_spectrum(3), expected)

    def test_product_kernel_is_exact(self, bridge):
        """Splitting at both kinks integrates K(x, z) K(y, z) exactly."""
        x, y = 0.2, 0.7
        expected = (
            (1 - x) * (1 - y) * x**3 / 3
            + x * (1 - y) * ((y * y - x * x) / 2 - (y**3 - x**3) / 3)
            + x * y * (1 - y) ** 3 / 3
        )
        rule = build_rule("midpoint", 4, Interval(0.0, 1.0))
        assert product_kernel_eval(bridge, x, y, rule) == pytest.approx(
            expected, rel=1e-13
        )
        assert product_kernel_eval(bridge, y, x, rule) == pytest.approx(
            expected, rel=1e-13
        )

    def test_quadrature_checks_interval(self, bridge):
        with pytest.raises(InvalidArgumentError):
            bridge.quadrature_for(0.2, 0.4, build_rule("midpoint", 4, Interval(0.0, 2.0)))


class TestPathological:
    """Test cases for the pathological product kernel."""

    def test_blocks(self):
        assert pathological_block(0.5, 6) == 1
        assert pathological_block(0.26, 6) == 2
        assert pathological_block(0.3, 6) is None
        assert pathological_block(0.0, 6) is None
        assert pathological_z_block(1.0 / 9.0, 6) == 2

    def test_block_beyond_depth(self):
        """2^-7 is a block centre only when n_max >= 7."""
        assert pathological_block(2.0 ** -7, 6) is None
        assert pathological_block(2.0 ** -7, 7) == 7

    def test_values_at_block_centres(self, pathological):
        assert pathological.eval(0.5, 1.0 / 3.0) == pytest.approx(3.0)
        assert pathological.eval(0.25, 1.0 / 9.0) == pytest.approx(9.0)
        assert pathological.eval(0.5, 0.5) == 0.0
        assert pathological.eval(0.0, 0.0) == 0.0

    def test_not_symmetric(self, pathological):
        assert not pathological.symmetric
        assert pathological.eval(1.0 / 3.0, 0.5) == 0.0

    def test_symmetrized_variant(self):
        spec = PathologicalProduct(n_max=4, symmetrized=True)
        assert spec.symmetric
        assert spec.eval(1.0 / 3.0, 0.5) == pytest.approx(3.0)
        xs = np.linspace(-1.0, 1.0, 33)
        matrix = spec.matrix(xs)
        assert np.array_equal(matrix, matrix.T)

    def test_min_global_nodes(self, pathological):
        assert pathological.min_global_nodes == 10 ** 6

    def test_product_kernel_diagonal_at_centres(self, pathological):
        """K2(2^-n, 2^-n) = c_beta at every block centre."""
        rule = build_rule("gauss-legendre", 64, Interval(-1.0, 1.0))
        for n in (1, 3, 6):
            centre = 2.0 ** -n
            value = product_kernel_eval(pathological, centre, centre, rule)
            assert value == pytest.approx(bump_mass(), rel=1e-6)

    def test_product_kernel_vanishes_across_blocks(self, pathological):
        rule = build_rule("gauss-legendre", 64, Interval(-1.0, 1.0))
        assert product_kernel_eval(pathological, 0.5, 0.25, rule) == 0.0
        assert product_kernel_eval(pathological, 0.0, 0.0, rule) == 0.0

    def test_rejects_bad_depth(self):
        with pytest.raises(InvalidArgumentError):
            PathologicalProduct(n_max=0)


class TestLegendre:
    """Test cases for Legendre polynomials and the Legendre decay kernel."""

    def test_legendre_poly(self):
        assert legendre_poly(0, 0.3) == 1.0
        assert legendre_poly(2, 0.5) == pytest.approx(-0.125)
        x = np.linspace(-1.0, 1.0, 9)
        assert_allclose(legendre_poly(3, x), 0.5 * (5 * x ** 3 - 3 * x), atol=1e-14)

    def test_three_term_kernel(self):
        spec = LegendreDecay(terms=3)
        x, y = 0.2, 0.7
        expected = sum(
            (2 * n + 1) / (2 * n * n) * legendre_poly(n, x) * legendre_poly(n, y) for n in (1, 2, 3)
        )
        assert spec.eval(x, y) == pytest.approx(expected)

    def test_diagonal_at_endpoint(self, legendre):
        """P_n(1) = 1, so K(1, 1) is the coefficient sum."""
        assert legendre.diagonal([1.0])[0] == pytest.approx(legendre.coefficients.sum())

    def test_exact_spectrum(self, legendre):
        spectrum = legendre.exact_spectrum()
        assert spectrum.size == 100
        assert spectrum[1] == pytest.approx(0.25)

    def test_with_truncation(self, legendre):
        assert legendre.with_truncation(10).terms == 10


class TestSlowTrace:
    """Test cases for the slowly decaying trace kernel."""

    def test_spectrum_has_multiplicity_two(self):
        spec = SlowTraceDecay(terms=5)
        spectrum = spec.exact_spectrum()
        assert spectrum.size == 10
        assert spectrum[0] == spectrum[1] == pytest.approx(1.0 / math.log(2.0) ** 2)

    def test_constant_diagonal(self):
        spec = SlowTraceDecay(terms=10)
        assert_allclose(spec.diagonal([0.0, 1.0, 2.0 * math.pi]), spec.sequence.sum() / math.pi)

    def test_translation_invariant(self):
        spec = SlowTraceDecay(terms=10)
        assert spec.eval(0.5, 1.5) == pytest.approx(spec.eval(2.0, 3.0))


class TestHeat:
    """Test cases for the heat kernel."""

    def test_dirichlet_series(self, heat_dirichlet):
        x, y = 0.7, 2.1
        expected = 2.0 / math.pi * sum(math.exp(-n * n) * math.sin(n * x) * math.sin(n * y) for n in range(1, 12))
        assert heat_dirichlet.eval(x, y) == pytest.approx(expected, rel=1e-12)

    def test_neumann_series(self, heat_neumann):
        x, y = 0.4, 1.3
        expected = 1.0 / math.pi + 2.0 / math.pi * sum(
            math.exp(-n * n) * math.cos(n * x) * math.cos(n * y) for n in range(1, 12)
        )
        assert heat_neumann.eval(x, y) == pytest.approx(expected, rel=1e-12)

    def test_dirichlet_vanishes_on_boundary(self, heat_dirichlet):
        assert heat_dirichlet.eval(0.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_default_modes(self):
        assert HeatKernel(t=0.01).modes == 100
        assert HeatKernel(t=0.001).modes == 253
        assert default_heat_modes(0.001) == 253

    @pytest.mark.parametrize("t", [0.0, -1.0, math.inf, math.nan])
    def test_default_modes_need_positive_time(self, t):
        with pytest.raises(InvalidArgumentError):
            default_heat_modes(t)

    def test_rejects_bad_parameters(self):
        with pytest.raises(InvalidArgumentError):
            HeatKernel("periodic")
        with pytest.raises(InvalidArgumentError):
            HeatKernel(t=0.0)
        with pytest.raises(InvalidArgumentError):
            HeatKernel(modes=0)

    def test_at_time(self, heat_dirichlet):
        later = heat_dirichlet.at_time(2.0)
        assert later.t == 2.0
        assert later.modes == heat_dirichlet.modes


class TestTabulated:
    """Test cases for tabulated kernels and their CSV layout."""

    def _sum_kernel(self):
        return tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[0.0, 1.0], [1.0, 2.0]])

    def test_interval_inferred(self):
        spec = self._sum_kernel()
        assert spec.interval.a == 0.0 and spec.interval.b == 1.0
        assert spec.symmetric

    def test_bilinear_interpolation(self):
        spec = self._sum_kernel()
        assert spec.eval(0.5, 0.5) == pytest.approx(1.0)
        assert spec.eval(0.25, 1.0) == pytest.approx(1.25)

    def test_rejects_non_square(self):
        with pytest.raises(InvalidArgumentError):
            tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[0.0, 1.0]])

    def test_csv_file(self, temp_dir):
        """A saved kernel loads back with the same rule and samples."""
        rule = build_rule("gauss-legendre", 5, Interval(0.0, 1.0))
        spec = tabulated_from_arrays(rule.nodes, rule.weights, BrownianBridge().matrix(rule.nodes))
        path = os.path.join(temp_dir, "bridge.csv")
        save_tabulated(spec, path)

        loaded = load_tabulated(path)
        assert np.array_equal(loaded.rule.nodes, rule.nodes)
        assert np.array_equal(loaded.samples, spec.samples)
        assert loaded.interval.same_as(rule.interval)

    def test_csv_wrong_row_count(self, temp_dir):
        path = os.path.join(temp_dir, "bad.csv")
        with open(path, "w") as f:
            f.write("0.25,0.75\n0.5,0.5\n1,2\n")
        with pytest.raises(InvalidArgumentError):
            load_tabulated(path)

    def test_csv_missing_entry(self, temp_dir):
        path = os.path.join(temp_dir, "nan.csv")
        with open(path, "w") as f:
            f.write("0.25,0.75\n0.5,0.5\n1,2\n2,\n")
        with pytest.raises(InvalidArgumentError):
            load_tabulated(path)

    def test_csv_missing_file(self, temp_dir):
        with pytest.raises(InvalidArgumentError):
            load_tabulated(os.path.join(temp_dir, "absent.csv"))


class TestParseKernel:
    """Test cases for kernel descriptions."""

    def test_plain_name(self):
        assert isinstance(parse_kernel("brownian-bridge"), BrownianBridge)

    def test_positional_and_keyword(self):
        spec = parse_kernel("heat:neumann,t=0.5")
        assert spec == HeatKernel("neumann", t=0.5)

    def test_boolean_parameter(self):
        spec = parse_kernel("pathological:n_max=3,symmetrized=true")
        assert spec == PathologicalProduct(n_max=3, symmetrized=True)

    def test_defaults_fill_missing_values(self):
        defaults = {"legendre": {"terms": 20}, "slow_trace": {"terms": 7}}
        assert parse_kernel("legendre", defaults).terms == 20
        assert parse_kernel("legendre:terms=5", defaults).terms == 5
        assert parse_kernel("slow-trace", defaults).terms == 7

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError):
            parse_kernel("gaussian")

    def test_unknown_key(self):
        with pytest.raises(InvalidArgumentError):
            parse_kernel("legendre:width=2")

    def test_unexpected_token(self):
        with pytest.raises(InvalidArgumentError):
            parse_kernel("brownian-bridge:extra")

    def test_bad_value(self):
        with pytest.raises(InvalidArgumentError):
            parse_kernel("legendre:terms=2.5")

    def test_json_file(self, temp_dir):
        path = os.path.join(temp_dir, "kernel.json")
        with open(path, "w") as f:
            json.dump({"kind": "heat", "boundary": "dirichlet", "t": 2}, f)
        assert parse_kernel(path) == HeatKernel("dirichlet", t=2.0)

    def test_tabulated_path(self, temp_dir):
        path = os.path.join(temp_dir, "k.csv")
        save_tabulated(tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[0.0, 1.0], [1.0, 2.0]]), path)
        spec = parse_kernel(f"tabulated:{path}")
        assert spec.samples[1, 1] == 2.0

    def test_mapping_round_trip(self):
        spec = HeatKernel("neumann", t=0.25, modes=40)
        assert kernel_from_mapping(spec.to_mapping()) == spec

    def test_tabulated_mapping(self):
        spec = tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[0.0, 1.0], [1.0, 2.0]])
        loaded = kernel_from_mapping(spec.to_mapping())
        assert np.array_equal(loaded.samples, spec.samples)
        assert np.array_equal(loaded.rule.nodes, spec.rule.nodes)

    def test_tabulated_mapping_rejects_unknown_keys(self):
        mapping = tabulated_from_arrays([0.0, 1.0], [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
        mapping = {**mapping.to_mapping(), "path": "k.csv"}
        with pytest.raises(InvalidArgumentError, match="Unknown keys"):
            kernel_from_mapping(mapping)

    def test_tabulated_mapping_needs_every_array(self):
        mapping = {"kind": "tabulated", "nodes": [0.0, 1.0], "samples": [[1.0]]}
        with pytest.raises(InvalidArgumentError, match="missing"):
            kernel_from_mapping(mapping)
