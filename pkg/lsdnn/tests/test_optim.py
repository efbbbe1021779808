from collections import OrderedDict

import numpy as np
from django.test import SimpleTestCase

from lsdnn.exceptions import TrainingDivergedError
from lsdnn.services.autograd import Tensor
from lsdnn.services.optim import Adam, AdamState, adam_step


class AdamStepTests(SimpleTestCase):

    def setUp(self):
        self.params = OrderedDict(w=np.array([1.0, -2.0, 3.0]), b=np.array([0.5]))

    def test_zero_gradient_keeps_params(self):
        grads = {name: np.zeros_like(value) for name, value in self.params.items()}
        updated, state = adam_step(self.params, grads, AdamState())
        for name in self.params:
            np.testing.assert_array_equal(updated[name], self.params[name])
        self.assertEqual(state.step, 1)

    def test_first_step_moves_by_lr(self):
        lr, eps = 1e-3, 1e-8
        grads = {"w": np.array([1.0, 1.0, 1.0]), "b": np.array([-1.0])}
        updated, _ = adam_step(self.params, grads, AdamState(), lr=lr, eps=eps)
        np.testing.assert_allclose(updated["w"] - self.params["w"], -lr / (1 + eps), rtol=1e-12)
        np.testing.assert_allclose(updated["b"] - self.params["b"], lr / (1 + eps), rtol=1e-12)

    def test_inputs_not_mutated(self):
        before = {name: value.copy() for name, value in self.params.items()}
        grads = {"w": np.ones(3), "b": np.ones(1)}
        _, state = adam_step(self.params, grads, AdamState())
        adam_step(self.params, grads, state)
        for name in self.params:
            np.testing.assert_array_equal(self.params[name], before[name])
        self.assertEqual(state.step, 1)

    def test_deterministic(self):
        grads = {"w": np.array([0.3, -0.1, 2.0]), "b": np.array([5.0])}
        a, sa = adam_step(self.params, grads, AdamState())
        b, sb = adam_step(self.params, grads, AdamState())
        a2, _ = adam_step(a, grads, sa)
        b2, _ = adam_step(b, grads, sb)
        for name in self.params:
            np.testing.assert_array_equal(a2[name], b2[name])

    def test_missing_gradient_treated_as_zero(self):
        updated, _ = adam_step(self.params, {"w": np.ones(3)}, AdamState())
        np.testing.assert_array_equal(updated["b"], self.params["b"])

    def test_nan_gradient_names_layer(self):
        grads = {"w": np.ones(3), "b": np.array([np.nan])}
        with self.assertRaises(TrainingDivergedError) as ctx:
            adam_step(self.params, grads, AdamState())
        self.assertEqual(ctx.exception.layer, "b")
        self.assertEqual(ctx.exception.step, 1)
        self.assertIn("layer=b", str(ctx.exception))


class AdamOptimizerTests(SimpleTestCase):

    def test_minimizes_quadratic(self):
        w = Tensor(np.array([3.0, -4.0]), requires_grad=True, name="w")
        optimizer = Adam({"w": w}, lr=0.1)
        for _ in range(300):
            optimizer.zero_grad()
            w.grad = 2 * w.data
            optimizer.step()
        self.assertLess(np.max(np.abs(w.data)), 0.05)
        self.assertEqual(optimizer.state.step, 300)

    def test_rejects_bad_lr(self):
        with self.assertRaises(ValueError):
            Adam({}, lr=0.0)
