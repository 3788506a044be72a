import numpy as np
import pytest

from rsnnsim.model import (
    DEFAULT_LIF,
    LifParams,
    Model,
    ModelConfig,
    QuantizedMatrix,
    gen_random_model,
)


def small_config(rnn=16, inp=8, fc=128, ts=2, lif=None):
    return ModelConfig(
        rnn_dim=rnn,
        input_dim=inp,
        fc_dim=fc,
        time_steps=ts,
        lif=lif or (DEFAULT_LIF, DEFAULT_LIF),
        weight_scale_shift=(0, 0, 0, 0, 0),
    )


def random_model(seed, config=None, thresholds=(4, 4), decay=(1, 2)):
    """Uncalibrated random model with explicit LIF settings (for unit tests)."""
    config = config or small_config()
    config = ModelConfig(
        rnn_dim=config.rnn_dim,
        input_dim=config.input_dim,
        fc_dim=config.fc_dim,
        time_steps=config.time_steps,
        lif=(
            LifParams(decay[0], thresholds[0]),
            LifParams(decay[1], thresholds[1]),
        ),
        weight_scale_shift=config.weight_scale_shift,
    )
    rng = np.random.default_rng(seed)
    mats = tuple(
        QuantizedMatrix.from_values(rng.integers(-8, 8, size=shape), 0)
        for shape in config.layer_shapes()
    )
    return Model(config, mats)


def pruned_shape_model(seed, density_hint=0.30):
    """Calibrated accelerator-shaped fixture (width 128)."""
    config = small_config(rnn=128, inp=40, fc=1920)
    return gen_random_model(seed, config, spike_density_hint=density_hint)


def random_frames(seed, n, dim=40):
    return np.random.default_rng(seed).integers(0, 256, size=(n, dim), dtype=np.uint8)


@pytest.fixture(scope="session")
def accel_model():
    return pruned_shape_model(7)


@pytest.fixture(scope="session")
def dense_model():
    """Every neuron fires at every step: all-ones weights, threshold 1."""
    config = small_config(rnn=128, inp=40, fc=1920, lif=(LifParams(0, 1), LifParams(0, 1)))
    mats = tuple(
        QuantizedMatrix.from_values(np.ones(shape, dtype=np.int64), 0)
        for shape in config.layer_shapes()
    )
    return Model(config, mats)
