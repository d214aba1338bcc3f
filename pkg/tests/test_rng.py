import numpy as np
from hypothesis import given, strategies as st

from marsit.rng import RngStream


def test_same_key_same_stream():
    a = RngStream(7, worker_id=2, round_index=5, segment_index=1)
    b = RngStream(7, worker_id=2, round_index=5, segment_index=1)
    np.testing.assert_array_equal(a.uniforms(100), b.uniforms(100))
    np.testing.assert_array_equal(a.generator().random(10), b.generator().random(10))


def test_every_field_changes_the_stream():
    base = RngStream(1, worker_id=1, round_index=1, segment_index=1, stage=1)
    ref = base.uniforms(64)
    for field in ("global_seed", "worker_id", "round_index", "segment_index", "stage"):
        other = base.child(**{field: getattr(base, field) + 1})
        assert not np.array_equal(ref, other.uniforms(64)), field


def test_counter_access_is_random_access():
    s = RngStream(3)
    full = s.uniforms(1000)
    idx = np.array([999, 0, 500, 17])
    np.testing.assert_array_equal(s.uniforms_at(idx), full[idx])


def test_uniforms_look_uniform():
    u = RngStream(11).uniforms(200_000)
    assert np.all((u >= 0) & (u < 1))
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))
    hist, _ = np.histogram(u, bins=20, range=(0, 1))
    expected = len(u) / 20
    chi2 = np.sum((hist - expected) ** 2 / expected)
    assert chi2 < 50  # 19 dof, p ~ 1e-4


@given(st.integers(0, 2**63), st.integers(0, 1000), st.integers(-5, 1000))
def test_keys_are_deterministic(seed, w, t):
    a = RngStream(seed, worker_id=w, round_index=t)
    assert a.key == RngStream(seed, worker_id=w, round_index=t).key
