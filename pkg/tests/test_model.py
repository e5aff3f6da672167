import itertools

import numpy as np
import pytest

from ecgbo.errors import ConfigError
from ecgbo.model import (DEFAULT_HYPERPARAMS, HYPERPARAM_BOUNDS, MITBIH_OPTIMUM, ArchConfig,
                         HyperParams, ModelSpec, build_model, count_params, describe_model,
                         zeros_forward)

SMALL = ArchConfig(base_filters=2, max_filters=4)


def test_paper_optimum_builds():
    spec = build_model(MITBIH_OPTIMUM, 250, 5, SMALL)
    assert spec.layers[-2] == {"kind": "Dense", "in_features": 64, "out_features": 5}
    assert spec.layers[-1]["kind"] == "Softmax"


@pytest.mark.parametrize("n_conv,n_dense", [(1, 1), (3, 2), (6, 6)])
def test_trainable_layer_count(n_conv, n_dense):
    h = HyperParams(0.05, n_dense, n_conv, 1e-3, 1e-6)
    spec = build_model(h, 256, 5, SMALL)
    # 7 blocks of n convs, D hidden dense, one classifier, plus the shortcut projection
    assert spec.trainable_count == 7 * n_conv + n_dense + 1 + 1


def test_minimal_count_without_projection():
    arch = ArchConfig(base_filters=4, max_filters=4)
    spec = build_model(HyperParams(0.05, 1, 1, 1e-3, 1e-6), 128, 5, arch)
    assert spec.trainable_count == 9


def test_exactly_one_residual_and_pure():
    a = build_model(DEFAULT_HYPERPARAMS, 250, 5, SMALL)
    b = build_model(DEFAULT_HYPERPARAMS, 250, 5, SMALL)
    assert a.to_json() == b.to_json()
    assert sum(c["kind"] == "ResidualAdd" for c in a.layers) == 1
    assert describe_model(a) == describe_model(b)


def test_describe_one_line_per_layer():
    spec = build_model(HyperParams(0.05, 1, 1, 1e-3, 1e-6), 128, 5, SMALL)
    text = describe_model(spec).split("\n")
    assert len(text) == len(spec.layers) + 2  # header and total


def test_param_count_hand_tally():
    # two conv layers per block would be heavy to count; use n = 1, D = 1
    arch = ArchConfig(n_blocks=7, base_filters=2, max_filters=2, kernel_size=5, dense_units=3)
    spec = build_model(HyperParams(0.05, 1, 1, 1e-3, 1e-6), 128, 5, arch)
    convs = (5 * 1 * 2 + 2) + 6 * (5 * 2 * 2 + 2)
    dense = (1 * 2) * 3 + 3 + 3 * 5 + 5
    assert count_params(spec) == convs + dense  # no projection: block 1 keeps 2 channels


def test_too_short_input_rejected():
    with pytest.raises(ConfigError, match="too short"):
        build_model(DEFAULT_HYPERPARAMS, 100, 5, SMALL)


def test_out_of_bounds_hyperparams_rejected():
    with pytest.raises(ConfigError):
        build_model(HyperParams(0.5, 1, 1, 1e-3, 1e-6), 250)


def test_spec_round_trip():
    spec = build_model(DEFAULT_HYPERPARAMS, 250, 5, SMALL)
    again = ModelSpec.from_dict(spec.to_dict())
    assert again.to_json() == spec.to_json()


def test_lattice_corners_give_finite_logits():
    names = list(HYPERPARAM_BOUNDS)
    for corner in itertools.product(*[HYPERPARAM_BOUNDS[n] for n in names]):
        h = HyperParams(**dict(zip(names, corner)))
        out = zeros_forward(build_model(h, 128, 5, SMALL), seed=1)
        assert out.shape == (1, 5) and np.all(np.isfinite(out))
