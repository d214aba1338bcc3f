import numpy as np
import pytest

from helpers import worst_gradient_error
from marsit.errors import ParameterError
from marsit.models import Mlp, Model, grad_logistic, loss_logistic


@pytest.mark.parametrize("name", ["least_squares", "logistic", "mlp"])
def test_gradients_match_finite_differences(name):
    assert worst_gradient_error(Model(name, 5, hidden=4), 10, seed=1) < 1e-6


def test_logistic_is_stable_for_large_margins():
    A = np.array([[1.0], [1.0]])
    y = np.array([1.0, 0.0])
    x = np.array([800.0])
    assert np.isfinite(loss_logistic(x, A, y))
    np.testing.assert_allclose(grad_logistic(x, A, y), [0.5])


def test_empty_batch_and_shape_errors():
    m = Model("least_squares", 3)
    with pytest.raises(ParameterError):
        m.grad(np.zeros(3), np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ParameterError):
        m.grad(np.zeros(4), np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ParameterError):
        Model("resnet", 3)


def test_mlp_layout_and_init():
    net = Mlp(3, 4)
    assert net.dim == 4 * 3 + 4 + 4 + 1
    x = net.init(0)
    np.testing.assert_array_equal(x, net.init(0))
    W1, b1, w2, b2 = net.unflatten(x)
    assert W1.shape == (4, 3) and np.all(b1 == 0) and b2 == 0
    assert Model("least_squares", 3).init(0).tolist() == [0.0, 0.0, 0.0]
