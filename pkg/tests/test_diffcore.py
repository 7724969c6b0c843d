import numpy as np
import pytest

from kanflow.diffcore import DiffTensor, Tape, grad_check
from kanflow.errors import NumericError, ParameterError, ShapeError

from conftest import finite_difference


class TestConstruction:
    def test_rejects_non_finite_external_values(self):
        with pytest.raises(NumericError):
            DiffTensor.from_values([[1.0, np.nan]])
        with pytest.raises(NumericError):
            Tape().constant([[np.inf]])

    def test_values_are_read_only(self):
        t = DiffTensor.from_values([[1.0, 2.0]])
        with pytest.raises(ValueError):
            t.values[0, 0] = 5.0

    def test_vector_input_becomes_column(self):
        t = DiffTensor.from_values([1.0, 2.0, 3.0])
        assert t.shape == (3, 1)


class TestMatmul:
    def test_identity(self):
        tape = Tape()
        m = tape.constant([[2.0, 3.0], [4.0, 5.0]])
        eye = tape.constant(np.eye(2))
        assert np.array_equal(tape.matmul(eye, m).values, m.values)

    def test_hand_product(self):
        tape = Tape()
        a = tape.constant([[1.0, 2.0], [3.0, 4.0]])
        b = tape.constant([[5.0], [6.0]])
        assert np.array_equal(tape.matmul(a, b).values, [[17.0], [39.0]])

    def test_shape_error_names_both_shapes(self):
        tape = Tape()
        a = tape.constant(np.ones((2, 3)))
        b = tape.constant(np.ones((2, 3)))
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            tape.matmul(a, b)


class TestBackward:
    def test_square_gradient(self):
        tape = Tape()
        x = tape.param([[3.0]])
        grads = tape.backward(tape.mul(x, x))
        assert grads[x.node_id][0, 0] == pytest.approx(6.0)

    def test_bilinear_gradients_are_counterparts(self):
        rng = np.random.default_rng(0)
        a_val, b_val = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        tape = Tape()
        a, b = tape.param(a_val), tape.param(b_val)
        loss = tape.sum(tape.mul(a, b))
        grads = tape.backward(loss)
        np.testing.assert_allclose(grads[a.node_id], b_val, rtol=0, atol=0)
        np.testing.assert_allclose(grads[b.node_id], a_val, rtol=0, atol=0)

    def test_two_layer_composite_matches_central_differences(self):
        rng = np.random.default_rng(1)
        w1 = rng.standard_normal((4, 5))
        w2 = rng.standard_normal((5, 1))
        x = rng.standard_normal((6, 4))

        tape = Tape()
        t1, t2 = tape.param(w1), tape.param(w2)
        h = tape.relu(tape.matmul(tape.constant(x), t1))
        loss = tape.mean(tape.mul(tape.matmul(h, t2), tape.matmul(h, t2)))
        grads = tape.backward(loss)

        def value(params):
            u1, u2 = params
            hh = np.maximum(x @ u1, 0.0)
            out = hh @ u2
            return float(np.mean(out * out))

        fd = finite_difference(value, [w1, w2], h=1e-5)
        for got, want in zip([grads[t1.node_id], grads[t2.node_id]], fd):
            denom = np.maximum(np.abs(want), 1e-8)
            assert (np.abs(got - want) / denom).max() < 1e-4

    def test_loss_must_be_scalar(self):
        tape = Tape()
        x = tape.param(np.ones((2, 2)))
        with pytest.raises(ShapeError):
            tape.backward(x)

    def test_unreachable_parameter_gets_zero_gradient(self):
        tape = Tape()
        x = tape.param([[2.0]])
        unused = tape.param([[7.0]])
        grads = tape.backward(tape.mul(x, x))
        assert np.array_equal(grads[unused.node_id], [[0.0]])

    def test_gradient_accumulates_over_multiple_consumers(self):
        tape = Tape()
        x = tape.param([[2.0]])
        y = tape.add(tape.mul(x, x), tape.mul(x, x))
        grads = tape.backward(y)
        assert grads[x.node_id][0, 0] == pytest.approx(8.0)

    def test_backward_linearity_on_random_compositions(self):
        # backward(u + v) equals backward(u) + backward(v) elementwise
        rng = np.random.default_rng(7)
        for _ in range(10):
            a_val = rng.standard_normal((4, 4))
            b_val = rng.standard_normal((4, 4))

            def grads_of(which):
                tape = Tape()
                a, b = tape.param(a_val), tape.param(b_val)
                u = tape.sum(tape.matmul(a, b))
                v = tape.sum(tape.mul(a, b))
                loss = {"u": u, "v": v, "sum": tape.add(u, v)}[which]
                g = tape.backward(loss)
                return g[a.node_id], g[b.node_id]

            ga_sum, gb_sum = grads_of("sum")
            ga_u, gb_u = grads_of("u")
            ga_v, gb_v = grads_of("v")
            np.testing.assert_allclose(ga_sum, ga_u + ga_v, atol=1e-12)
            np.testing.assert_allclose(gb_sum, gb_u + gb_v, atol=1e-12)


class TestOps:
    def test_bias_broadcast_add(self):
        tape = Tape()
        a = tape.param(np.ones((3, 2)))
        bias = tape.param([[1.0, 2.0]])
        out = tape.add(a, bias)
        grads = tape.backward(tape.sum(out))
        assert np.array_equal(grads[bias.node_id], [[3.0, 3.0]])

    def test_gather_rows_scatters_gradient(self):
        tape = Tape()
        a = tape.param(np.arange(8.0).reshape(4, 2))
        picked = tape.gather_rows(a, [1, 1, 3])
        grads = tape.backward(tape.sum(picked))
        assert np.array_equal(grads[a.node_id], [[0, 0], [2, 2], [0, 0], [1, 1]])

    def test_relu_and_silu_values(self):
        tape = Tape()
        x = tape.constant([[-1.0, 0.0, 2.0]])
        assert np.array_equal(tape.relu(x).values, [[0.0, 0.0, 2.0]])
        assert tape.silu(x).values[0, 1] == 0.0

    def test_mean_and_sum(self):
        tape = Tape()
        x = tape.constant([[1.0, 2.0], [3.0, 4.0]])
        assert tape.sum(x).item() == 10.0
        assert tape.mean(x).item() == 2.5

    def test_foreign_tensor_rejected(self):
        tape, other = Tape(), Tape()
        a = tape.constant([[1.0]])
        b = other.constant([[1.0]])
        with pytest.raises(ParameterError):
            tape.add(a, b)


class TestDeterminism:
    def test_forward_values_bit_identical_across_runs(self):
        rng = np.random.default_rng(3)
        x_val = rng.standard_normal((5, 5))
        results = []
        for _ in range(2):
            tape = Tape()
            x = tape.param(x_val)
            out = tape.mean(tape.relu(tape.matmul(x, x)))
            results.append(out.item())
        assert results[0] == results[1]


class TestGradCheck:
    def test_quadratic_is_nearly_exact(self):
        rng = np.random.default_rng(5)
        p = rng.standard_normal((5, 1))

        def f(tape, tensors):
            (t,) = tensors
            return tape.sum(tape.mul(t, t))

        assert grad_check(f, [p], h=1e-4) < 1e-8

    def test_rejects_non_positive_step(self):
        with pytest.raises(ParameterError):
            grad_check(lambda tape, ts: tape.sum(ts[0]), [np.ones((1, 1))], h=0.0)

    def test_names_parameter_on_non_finite(self):
        # squaring 1e200 overflows during the perturbed evaluations
        def f(tape, tensors):
            (t,) = tensors
            return tape.sum(tape.mul(t, t))

        with pytest.raises(NumericError, match="parameter 0"):
            grad_check(f, [np.array([[1e200]])], h=1e-5)
