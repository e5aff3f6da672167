import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgbo.errors import ConfigError
from ecgbo.model import HyperParams
from ecgbo.space import Dimension, SearchSpace, default_space, space_bounds

SPACE = default_space()


def test_encode_examples():
    lr = SPACE.dimensions[3]
    assert lr.to_unit(1e-3) == 0.0
    assert lr.to_unit(1e-2) == pytest.approx(0.5, abs=1e-15)
    assert SPACE.dimensions[2].to_unit(6) == 1.0


def test_decode_zero_is_lower_bounds():
    d = SPACE.decode(np.zeros(5))
    assert d == {"drop_rate": 1e-2, "n_dense": 1, "n_conv": 1,
                 "learning_rate": 1e-3, "adam_decay": 1e-6}


def test_integer_rounding():
    assert SPACE.dimensions[1].from_unit(0.49) == 3
    assert SPACE.dimensions[1].from_unit(0.5) == 4  # 3.5 rounds half up


def test_out_of_bounds_encode():
    with pytest.raises(ConfigError):
        SPACE.encode({"drop_rate": 0.5, "n_dense": 1, "n_conv": 1,
                      "learning_rate": 1e-3, "adam_decay": 1e-6})


def test_bad_dimensions():
    with pytest.raises(ConfigError):
        Dimension("x", "real_log", 0.0, 1.0)
    with pytest.raises(ConfigError):
        SearchSpace([Dimension("x", "real", 0, 1), Dimension("x", "real", 0, 1)])


hyper = st.builds(
    HyperParams,
    drop_rate=st.floats(1e-2, 1e-1), n_dense=st.integers(1, 6), n_conv=st.integers(1, 6),
    learning_rate=st.floats(1e-3, 1e-1), adam_decay=st.floats(1e-6, 1e-5))


@given(hyper)
@settings(max_examples=200, deadline=None)
def test_decode_encode_round_trip(h):
    back = SPACE.decode(SPACE.encode(h))
    for name, v in h.as_dict().items():
        if isinstance(v, int):
            assert back[name] == v
        else:
            assert back[name] == pytest.approx(v, rel=1e-12)


@given(st.lists(st.floats(0, 1), min_size=5, max_size=5))
@settings(max_examples=200, deadline=None)
def test_decoded_points_in_bounds(u):
    h = HyperParams.from_dict(SPACE.decode(u))
    h.validate(space_bounds(SPACE))
    snapped = SPACE.snap(u)
    np.testing.assert_allclose(SPACE.snap(snapped), snapped, atol=1e-15)


def test_lhs_strata_and_determinism():
    pts = SPACE.sample(10, np.random.default_rng(3))
    assert pts.shape == (10, 5)
    for j in range(5):
        assert sorted(np.floor(pts[:, j] * 10).astype(int)) == list(range(10))
    np.testing.assert_array_equal(pts, SPACE.sample(10, np.random.default_rng(3)))
    one = SPACE.sample(1, np.random.default_rng(0))
    assert one.shape == (1, 5) and np.all((one >= 0) & (one <= 1))


def test_config_round_trip():
    again = SearchSpace.from_config(SPACE.to_config())
    assert again.to_config() == SPACE.to_config()
