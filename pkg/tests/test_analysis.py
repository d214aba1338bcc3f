import math

import numpy as np
import pytest

from marsit.analysis import (DeviationConfig, avg_bits_per_element, cascading_aggregate, deviation_bound,
                             deviation_experiment, matching_rate, ps_aggregate, sample_gradients)
from marsit.errors import ParameterError, ProtocolError
from marsit.vectorcore import PackedSignVector


def test_matching_rate():
    assert matching_rate(PackedSignVector.from_bits([1, 0, 1, 1]), [1.0, -1.0, -2.0, 0.0]) == 0.75
    with pytest.raises(ProtocolError):
        matching_rate(PackedSignVector.from_bits([1]), [1.0, 2.0])


def test_avg_bits_formula():
    assert avg_bits_per_element(1) == 32
    assert avg_bits_per_element(math.inf) == 1
    assert avg_bits_per_element(4, 32, 1) == 8 + 0.75
    with pytest.raises(ParameterError):
        avg_bits_per_element(0)


def test_sample_gradients_have_norm_g():
    g = sample_gradients(np.random.default_rng(0), (10, 3, 7), 2.5)
    np.testing.assert_allclose(np.linalg.norm(g, axis=-1), 2.5)


def test_single_worker_cascade_equals_ps():
    s = sample_gradients(np.random.default_rng(0), (100, 1, 5), 1.0)
    a = ps_aggregate(s, np.random.default_rng(1))
    b = cascading_aggregate(s, np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)


def test_deviation_bound_overflow_flag():
    assert deviation_bound(DeviationConfig(2, 16, 1.0, 1, "cascading")) == (32 ** 2 / 2, False)
    assert deviation_bound(DeviationConfig(400, 1024, 1.0, 1, "cascading")) == (math.inf, True)
    assert deviation_bound(DeviationConfig(400, 16, 2.0, 1, "ps")) == (64.0, False)


def test_single_worker_deviation_closed_form():
    # for one worker E||Q(s) - s||^2 = D G^2 - G^2 exactly
    r = deviation_experiment(DeviationConfig(1, 16, 1.0, 20_000))
    assert abs(r.estimate - 15.0) < 4 * r.stderr


def test_deviation_config_validation():
    for kw in (dict(M=0), dict(trials=0), dict(G=0.0), dict(mode="tree")):
        with pytest.raises(ParameterError):
            DeviationConfig(**(dict(M=2, D=4, G=1.0, trials=10) | kw))
