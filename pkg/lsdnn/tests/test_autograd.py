import gc
import weakref

import numpy as np
from django.test import SimpleTestCase

from lsdnn.services.autograd import (
    Tensor,
    add,
    concat,
    conv2d,
    leaky_relu,
    npcc_loss,
    transposed_conv2d,
)
from lsdnn.services.gradcheck import check_gradients
from optics.exceptions import NonFiniteError, ShapeMismatchError

TOLERANCE = 1e-6


def param(rng, *shape, name=None):
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


class GradientCheckTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(21)

    def assertGradientsMatch(self, build, inputs):
        errors = check_gradients(build, inputs, seed=3)
        self.assertTrue(errors)
        for name, error in errors.items():
            self.assertLess(error, TOLERANCE, msg=f"gradient of {name}")

    def test_conv2d_stride1(self):
        inputs = [param(self.rng, 2, 3, 5, 5, name="x"),
                  param(self.rng, 4, 3, 3, 3, name="w"),
                  param(self.rng, 4, name="b")]
        self.assertGradientsMatch(lambda t: conv2d(t[0], t[1], t[2], stride=1), inputs)

    def test_conv2d_stride2(self):
        inputs = [param(self.rng, 2, 2, 6, 6, name="x"),
                  param(self.rng, 3, 2, 3, 3, name="w"),
                  param(self.rng, 3, name="b")]
        self.assertGradientsMatch(lambda t: conv2d(t[0], t[1], t[2], stride=2), inputs)

    def test_transposed_conv2d(self):
        inputs = [param(self.rng, 2, 3, 3, 3, name="x"),
                  param(self.rng, 3, 2, 3, 3, name="w"),
                  param(self.rng, 2, name="b")]
        self.assertGradientsMatch(lambda t: transposed_conv2d(t[0], t[1], t[2], stride=2), inputs)

    def test_transposed_conv2d_pointwise(self):
        inputs = [param(self.rng, 1, 2, 4, 4, name="x"),
                  param(self.rng, 2, 3, 1, 1, name="w")]
        self.assertGradientsMatch(lambda t: transposed_conv2d(t[0], t[1], stride=2), inputs)

    def test_leaky_relu(self):
        # значения вдали от излома в нуле
        magnitude = self.rng.uniform(0.1, 1.0, (2, 2, 3, 3))
        sign = np.where(self.rng.uniform(size=magnitude.shape) < 0.5, -1.0, 1.0)
        x = Tensor(magnitude * sign, requires_grad=True, name="x")
        self.assertGradientsMatch(lambda t: leaky_relu(t[0], 0.1), [x])

    def test_add_and_concat(self):
        inputs = [param(self.rng, 1, 2, 3, 3, name="a"),
                  param(self.rng, 1, 2, 3, 3, name="b"),
                  param(self.rng, 1, 1, 3, 3, name="c")]
        self.assertGradientsMatch(lambda t: concat([add(t[0], t[1]), t[2]], axis=1), inputs)

    def test_npcc_loss(self):
        target = self.rng.standard_normal((3, 1, 4, 4))
        pred = param(self.rng, 3, 1, 4, 4, name="pred")
        self.assertGradientsMatch(lambda t: npcc_loss(t[0], target), [pred])

    def test_shared_node_accumulates(self):
        x = param(self.rng, 1, 1, 3, 3, name="x")
        self.assertGradientsMatch(lambda t: add(t[0], leaky_relu(t[0], 1.0)), [x])


class ConvolutionShapeTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(2)

    def test_identity_kernel(self):
        x = Tensor(self.rng.standard_normal((2, 3, 5, 5)))
        w = np.zeros((3, 3, 3, 3))
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        out = conv2d(x, Tensor(w))
        np.testing.assert_array_equal(out.data, x.data)

    def test_stride2_output_size(self):
        out = conv2d(Tensor(np.zeros((1, 1, 7, 7))), Tensor(np.zeros((2, 1, 3, 3))), stride=2)
        self.assertEqual(out.shape, (1, 2, 4, 4))
        up = transposed_conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((2, 5, 3, 3))))
        self.assertEqual(up.shape, (1, 5, 8, 8))

    def test_transposed_is_adjoint_of_strided_conv(self):
        w = self.rng.standard_normal((3, 2, 3, 3))
        x = self.rng.standard_normal((1, 2, 8, 8))
        y = self.rng.standard_normal((1, 3, 4, 4))
        forward = np.sum(conv2d(Tensor(x), Tensor(w), stride=2).data * y)
        adjoint = np.sum(x * transposed_conv2d(Tensor(y), Tensor(w), stride=2).data)
        self.assertAlmostEqual(forward, adjoint, places=10)

    def test_channel_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))
        with self.assertRaises(ShapeMismatchError):
            add(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 3))))
        with self.assertRaises(ShapeMismatchError):
            concat([Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 3)))])

    def test_non_finite_output(self):
        x = Tensor(np.full((1, 1, 2, 2), np.inf))
        with self.assertRaises(NonFiniteError):
            leaky_relu(x)

    def test_no_graph_without_grad(self):
        out = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))))
        self.assertFalse(out.requires_grad)
        self.assertEqual(out._prev, ())

    def test_graph_released_without_cycle_collector(self):
        x = param(self.rng, 2, 1, 6, 6)
        w = param(self.rng, 2, 1, 3, 3)
        hidden = leaky_relu(conv2d(x, w))
        watched = weakref.ref(hidden)
        loss = npcc_loss(hidden, self.rng.standard_normal((2, 2, 6, 6)))
        del hidden
        gc.disable()
        try:
            loss.backward()
            self.assertIsNone(watched())
        finally:
            gc.enable()
        self.assertEqual(loss._prev, ())
        self.assertIsNotNone(w.grad)
        self.assertIsNotNone(x.grad)
