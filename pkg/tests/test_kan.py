import numpy as np
import pytest

from kanflow.diffcore import grad_check
from kanflow.errors import ParameterError, ShapeError
from kanflow.kan import (
    KanEdgeFunction,
    SplineGrid,
    bspline_basis,
    kan_apply,
    kan_edge_eval,
    kan_layer_forward,
    kan_layer_init,
)


class TestSplineGrid:
    def test_knot_vector_layout(self):
        grid = SplineGrid(4, 2, -1.0, 1.0)
        assert grid.basis_count == 6
        assert len(grid.knots) == 4 + 2 * 2 + 1
        steps = np.diff(grid.knots)
        np.testing.assert_allclose(steps, steps[0])
        assert grid.knots[grid.order] == -1.0
        assert grid.knots[grid.order + grid.grid_size] == 1.0

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            SplineGrid(0, 2)
        with pytest.raises(ParameterError):
            SplineGrid(2, -1)
        with pytest.raises(ParameterError):
            SplineGrid(2, 2, 1.0, -1.0)


class TestBasis:
    def test_degree_zero_single_interval_is_indicator(self):
        grid = SplineGrid(1, 0, 0.0, 1.0)
        np.testing.assert_array_equal(bspline_basis(0.5, grid), [1.0])

    def test_partition_of_unity(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for order in range(4):
            for g in range(1, 9):
                grid = SplineGrid(g, order)
                xs = rng.uniform(-1.0, 1.0, 1000)
                sums = np.array([bspline_basis(x, grid).sum() for x in xs])
                worst = max(worst, float(np.abs(sums - 1.0).max()))
        assert worst < 1e-9

    def test_partition_of_unity_holds_at_both_endpoints(self):
        for order in range(4):
            grid = SplineGrid(3, order)
            for x in (-1.0, 1.0):
                assert bspline_basis(x, grid).sum() == pytest.approx(1.0, abs=1e-12)

    def test_degree_one_interior_knot_is_one_hot(self):
        grid = SplineGrid(4, 1)
        values = bspline_basis(grid.knots[2], grid)  # an interior knot
        assert np.count_nonzero(values) == 1
        assert values.max() == pytest.approx(1.0)

    def test_values_non_negative_and_locally_supported(self):
        rng = np.random.default_rng(2)
        grid = SplineGrid(5, 3)
        support = grid.order + 1  # intervals per basis function
        for x in rng.uniform(-1.0, 1.0, 200):
            values = bspline_basis(float(x), grid)
            assert (values >= 0).all()
            for i, v in enumerate(values):
                lo = grid.knots[i]
                hi = grid.knots[i + support]
                if not lo <= x <= hi:
                    assert v == 0.0

    def test_out_of_domain_clamps(self):
        grid = SplineGrid(2, 2)
        np.testing.assert_array_equal(bspline_basis(5.0, grid), bspline_basis(1.0, grid))
        np.testing.assert_array_equal(bspline_basis(-5.0, grid), bspline_basis(-1.0, grid))


class TestEdgeFunction:
    def test_zero_everything_is_zero(self):
        grid = SplineGrid(2, 2)
        fn = KanEdgeFunction(np.zeros(grid.basis_count), base_weight=0.0)
        for x in (-0.7, 0.0, 0.3, 2.0):
            assert kan_edge_eval(fn, grid, x) == 0.0

    def test_silu_at_zero_is_zero(self):
        grid = SplineGrid(1, 1)
        fn = KanEdgeFunction(np.zeros(grid.basis_count), base_weight=1.0, spline_weight=0.0)
        assert kan_edge_eval(fn, grid, 0.0) == 0.0

    def test_linear_splines_reproduce_linear_functions(self):
        # degree-1 coefficients at the Greville points (interior knots)
        grid = SplineGrid(4, 1)
        greville = grid.knots[1 : 1 + grid.basis_count]
        fn = KanEdgeFunction(2.0 * greville, base_weight=0.0, spline_weight=1.0)
        for x in np.linspace(-1.0, 1.0, 33):
            assert kan_edge_eval(fn, grid, float(x)) == pytest.approx(2.0 * x, abs=1e-12)

    def test_affine_reproduction_any_grid(self):
        grid = SplineGrid(7, 1)
        greville = grid.knots[1 : 1 + grid.basis_count]
        fn = KanEdgeFunction(-0.5 * greville + 3.0, base_weight=0.0)
        xs = np.random.default_rng(0).uniform(-1, 1, 100)
        for x in xs:
            assert kan_edge_eval(fn, grid, float(x)) == pytest.approx(-0.5 * x + 3.0, abs=1e-12)

    def test_coefficient_count_enforced(self):
        grid = SplineGrid(3, 2)
        fn = KanEdgeFunction(np.zeros(2))
        with pytest.raises(ShapeError):
            kan_edge_eval(fn, grid, 0.0)


class TestLayer:
    def test_init_is_deterministic(self):
        a = kan_layer_init(3, 4, 2, 2, seed=9)
        b = kan_layer_init(3, 4, 2, 2, seed=9)
        assert np.array_equal(a.coeffs, b.coeffs)
        assert np.array_equal(a.base_weight, b.base_weight)

    def test_init_shapes(self):
        layer = kan_layer_init(3, 4, 1, 2, seed=0)
        assert layer.coeffs.shape == (4, 3, 3)  # G + k = 3 coefficients per edge
        assert layer.base_weight.shape == (4, 3)
        piecewise_constant = kan_layer_init(2, 2, 1, 0, seed=0)
        assert piecewise_constant.coeffs.shape == (2, 2, 1)

    def test_zero_spline_zero_base_gives_zero_output(self):
        layer = kan_layer_init(3, 2, 2, 2, seed=1)
        layer.coeffs[:] = 0.0
        layer.base_weight[:] = 0.0
        x = np.random.default_rng(0).uniform(-1, 1, (5, 3))
        assert np.array_equal(kan_layer_forward(layer, x), np.zeros((5, 2)))

    def test_single_edge_layer_matches_edge_eval(self):
        layer = kan_layer_init(1, 1, 2, 2, seed=4)
        fn = layer.edge_function(0, 0)
        xs = np.random.default_rng(1).uniform(-1.5, 1.5, 7)
        batch = kan_layer_forward(layer, xs.reshape(-1, 1))
        for x, row in zip(xs, batch):
            assert row[0] == pytest.approx(kan_edge_eval(fn, layer.grid, float(x)), abs=1e-12)

    def test_layer_output_sums_edge_functions(self):
        layer = kan_layer_init(3, 2, 1, 2, seed=5)
        x = np.array([[0.2, -0.4, 0.9]])
        out = kan_layer_forward(layer, x)
        for q in range(2):
            manual = sum(
                kan_edge_eval(layer.edge_function(q, p), layer.grid, float(x[0, p]))
                for p in range(3)
            )
            assert out[0, q] == pytest.approx(manual, abs=1e-12)

    def test_shape_mismatch_raises(self):
        layer = kan_layer_init(3, 2, 1, 1, seed=0)
        with pytest.raises(ShapeError):
            kan_layer_forward(layer, np.zeros((4, 5)))


class TestGradients:
    def _loss_fn(self, layer, x_val):
        m = layer.grid.basis_count

        def f(tape, tensors):
            names = ["coeffs", "base_weight", "spline_weight"]
            out = kan_apply(tape, tape.constant(x_val), layer, dict(zip(names, tensors)))
            return tape.sum(tape.mul(out, out))

        params = [layer.coeffs.reshape(-1, m), layer.base_weight, layer.spline_weight]
        return f, params

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_parameters_match_central_differences(self, order):
        layer = kan_layer_init(4, 3, 3, order, seed=order)
        x = np.random.default_rng(order).uniform(-1.3, 1.3, (6, 4))
        f, params = self._loss_fn(layer, x)
        assert grad_check(f, params, h=1e-5) < 1e-4

    def test_hundred_random_points_single_edge(self):
        layer = kan_layer_init(1, 1, 4, 2, seed=3)
        x = np.random.default_rng(8).uniform(-1.0, 1.0, (100, 1))
        f, params = self._loss_fn(layer, x)
        assert grad_check(f, params, h=1e-5) < 1e-4

    def test_input_gradient_through_two_layers(self):
        l1 = kan_layer_init(3, 4, 2, 2, seed=1)
        l2 = kan_layer_init(4, 2, 1, 3, seed=2)
        x = np.random.default_rng(7).uniform(-1, 1, (5, 3))

        def f(tape, tensors):
            t1 = dict(zip(["coeffs", "base_weight", "spline_weight"], tensors[:3]))
            t2 = dict(zip(["coeffs", "base_weight", "spline_weight"], tensors[3:]))
            h = kan_apply(tape, tape.constant(x), l1, t1)
            return tape.mean(tape.mul(kan_apply(tape, h, l2, t2), kan_apply(tape, h, l2, t2)))

        params = [l1.coeffs.reshape(-1, l1.grid.basis_count), l1.base_weight, l1.spline_weight,
                  l2.coeffs.reshape(-1, l2.grid.basis_count), l2.base_weight, l2.spline_weight]
        assert grad_check(f, params, h=1e-5) < 1e-4


class TestInitValidation:
    def test_positive_dims_required(self):
        with pytest.raises(ParameterError):
            kan_layer_init(0, 2, 1, 1, seed=0)
