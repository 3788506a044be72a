"""Network topology, weight containers, quantization, and pruning.

Single source of truth for layer dimensions and parameter layout. All
inference arithmetic downstream is integer-only: weights are 4-bit
two's-complement values with a power-of-2 scale, input features are unsigned
bytes, and hidden activations are single-bit spikes. The five weight matrices
are kept in a fixed order (see LAYERS) everywhere: files, buffers, reports.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# 12-bit signed accumulator domain used by every post-saturation value.
ACC_MIN = -2048
ACC_MAX = 2047

# 4-bit two's-complement weight domain.
WEIGHT_MIN = -8
WEIGHT_MAX = 7

# Matrix order: first-layer input, first-layer recurrent, second-layer
# feedforward, second-layer recurrent, output fully-connected.
LAYERS = ("l0_input", "l0_recurrent", "l1_feedforward", "l1_recurrent", "fc")

MAX_SHIFT = 11  # decay shifts and threshold exponents fit the accumulator width


class CalibrationError(RuntimeError):
    """Requested spike density is unreachable with power-of-2 thresholds."""


@dataclass(frozen=True)
class LifParams:
    """Leaky integrate-and-fire constants for one recurrent layer.

    The decay factor is realized as an arithmetic right shift by
    ``decay_shift`` (decay = 2**-decay_shift). The firing threshold must be a
    power of two; 2**11 = 2048 sits one above the accumulator maximum and
    therefore acts as a never-fire setting.
    """

    decay_shift: int
    threshold: int

    def __post_init__(self):
        if not (0 <= self.decay_shift <= MAX_SHIFT):
            raise ValueError(f"decay_shift {self.decay_shift} outside [0, {MAX_SHIFT}]")
        if self.threshold <= 0 or (self.threshold & (self.threshold - 1)) != 0:
            raise ValueError(f"threshold {self.threshold} is not a positive power of 2")
        if self.threshold_log2 > MAX_SHIFT:
            raise ValueError(f"threshold {self.threshold} exceeds 2**{MAX_SHIFT}")

    @property
    def threshold_log2(self) -> int:
        return self.threshold.bit_length() - 1


@dataclass(frozen=True)
class ModelConfig:
    """Layer dimensions, time-step count, and fixed-point parameters."""

    rnn_dim: int
    input_dim: int
    fc_dim: int
    time_steps: int
    lif: tuple[LifParams, LifParams]
    weight_scale_shift: tuple[int, int, int, int, int]

    def __post_init__(self):
        for name in ("rnn_dim", "input_dim", "fc_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.time_steps not in (1, 2):
            raise ValueError("time_steps must be 1 or 2")
        if len(self.lif) != 2:
            raise ValueError("exactly two recurrent layers carry LIF parameters")
        if len(self.weight_scale_shift) != len(LAYERS):
            raise ValueError(f"need {len(LAYERS)} per-layer scale shifts")
        for s in self.weight_scale_shift:
            if not (-128 <= s <= 127):
                raise ValueError("scale shifts must fit a signed byte")
        if self.rnn_dim == 128 and self.fc_dim % self.rnn_dim != 0:
            raise ValueError("fc_dim must be a multiple of rnn_dim at width 128")

    def layer_shapes(self) -> tuple[tuple[int, int], ...]:
        r = self.rnn_dim
        return (
            (self.input_dim, r),
            (r, r),
            (r, r),
            (r, r),
            (r, self.fc_dim),
        )

    def param_count(self) -> int:
        return sum(rows * cols for rows, cols in self.layer_shapes())


DEFAULT_LIF = LifParams(decay_shift=1, threshold=64)


def build_baseline_config(time_steps: int = 2) -> ModelConfig:
    """Uncompressed topology: 256-wide recurrent layers, 1920-wide output."""
    return ModelConfig(
        rnn_dim=256,
        input_dim=40,
        fc_dim=1920,
        time_steps=time_steps,
        lif=(DEFAULT_LIF, DEFAULT_LIF),
        weight_scale_shift=(0, 0, 0, 0, 0),
    )


# ---------------------------------------------------------------------------
# 4-bit packing


def pack_int4(values: np.ndarray) -> bytes:
    """Pack signed 4-bit integers two per byte, low nibble first."""
    flat = np.asarray(values).reshape(-1).astype(np.int64)
    if flat.size and (flat.min() < WEIGHT_MIN or flat.max() > WEIGHT_MAX):
        raise ValueError("values outside the 4-bit signed range")
    nib = (flat & 0xF).astype(np.uint8)
    if nib.size % 2:
        nib = np.concatenate([nib, np.zeros(1, dtype=np.uint8)])
    return (nib[0::2] | (nib[1::2] << 4)).tobytes()


def unpack_int4(data: bytes, count: int) -> np.ndarray:
    """Inverse of pack_int4; returns int8 values in [-8, 7]."""
    raw = np.frombuffer(data, dtype=np.uint8)
    if raw.size != (count + 1) // 2:
        raise ValueError("packed length does not match element count")
    nib = np.empty(raw.size * 2, dtype=np.uint8)
    nib[0::2] = raw & 0xF
    nib[1::2] = raw >> 4
    nib = nib[:count].astype(np.int8)
    nib[nib >= 8] -= 16
    return nib


@dataclass(frozen=True)
class QuantizedMatrix:
    """Row-major packed 4-bit weight matrix with a power-of-2 scale.

    Real value = stored integer * 2**-scale_shift. The packed payload is the
    exact byte string written to model files.
    """

    rows: int
    cols: int
    data: bytes
    scale_shift: int

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("matrix must be non-empty")
        expect = (self.rows * self.cols + 1) // 2
        if len(self.data) != expect:
            raise ValueError(f"packed payload is {len(self.data)} B, expected {expect}")

    @classmethod
    def from_values(cls, values: np.ndarray, scale_shift: int = 0) -> "QuantizedMatrix":
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        return cls(arr.shape[0], arr.shape[1], pack_int4(arr), scale_shift)

    def to_values(self) -> np.ndarray:
        return unpack_int4(self.data, self.rows * self.cols).reshape(self.rows, self.cols)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def dequantize(self) -> np.ndarray:
        return self.to_values().astype(np.float64) * 2.0 ** -self.scale_shift


@dataclass(frozen=True)
class Model:
    """A config plus its five quantized matrices, ordered per LAYERS."""

    config: ModelConfig
    matrices: tuple[QuantizedMatrix, ...]

    def __post_init__(self):
        if len(self.matrices) != len(LAYERS):
            raise ValueError(f"expected {len(LAYERS)} matrices")
        for mat, shape, name in zip(self.matrices, self.config.layer_shapes(), LAYERS):
            if mat.shape != shape:
                raise ValueError(f"{name} has shape {mat.shape}, config says {shape}")
        scales = tuple(m.scale_shift for m in self.matrices)
        if scales != self.config.weight_scale_shift:
            raise ValueError("matrix scale shifts disagree with the config")

    def int_weights(self) -> list[np.ndarray]:
        return [m.to_values() for m in self.matrices]

    def nonzero_params(self) -> int:
        return int(sum(np.count_nonzero(m.to_values()) for m in self.matrices))


# ---------------------------------------------------------------------------
# Quantization


def _fits(weights: np.ndarray, shift: int, lo: int, hi: int) -> bool:
    q = np.floor(weights * 2.0**shift + 0.5)
    return bool(q.min() >= lo and q.max() <= hi)


def quantize_values(weights: np.ndarray, bits: int = 4) -> tuple[np.ndarray, int]:
    """Project real weights onto signed ``bits``-wide integers.

    Returns (integer matrix, scale_shift) where value = int * 2**-scale_shift
    and scale_shift is the largest shift keeping every rounded weight inside
    [-(2**(bits-1)), 2**(bits-1)-1]. Rounding is half-up, so the dequantized
    error is at most 2**-(scale_shift+1) away from clamp boundaries.
    """
    if not (2 <= bits <= 8):
        raise ValueError("bits must be in [2, 8]")
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("matrix must be non-empty")
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    max_abs = float(np.abs(w).max())
    if max_abs == 0.0:
        return np.zeros_like(w, dtype=np.int64), 0
    # Analytic guess, then settle the boundary numerically; shifts are clamped
    # to the signed-byte range the file header can store.
    shift = min(int(np.floor(np.log2((hi + 0.5) / max_abs))) + 2, 127)
    while shift > -128 and not _fits(w, shift, lo, hi):
        shift -= 1
    q = np.floor(w * 2.0**shift + 0.5).astype(np.int64)
    np.clip(q, lo, hi, out=q)
    return q, shift


def quantize_matrix(weights: np.ndarray, bits: int = 4) -> QuantizedMatrix:
    """Quantize to a packed 4-bit container (bits <= 4; values always fit)."""
    if not (2 <= bits <= 4):
        raise ValueError("the packed container holds at most 4-bit values")
    q, shift = quantize_values(weights, bits)
    return QuantizedMatrix.from_values(q, shift)


# ---------------------------------------------------------------------------
# Pruning


def channel_l1_norms(weights: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel L1 importance for both recurrent layers.

    A channel's norm sums the absolute weights on every edge touching it:
    its incoming column in the feeding matrix, its column and row in the
    layer's recurrent matrix, and its outgoing row toward the next layer.
    """
    w_in, w_r0, w_ff, w_r1, w_fc = [np.abs(np.asarray(w, dtype=np.float64)) for w in weights]
    l0 = w_in.sum(axis=0) + w_r0.sum(axis=0) + w_r0.sum(axis=1) + w_ff.sum(axis=1)
    l1 = w_ff.sum(axis=0) + w_r1.sum(axis=0) + w_r1.sum(axis=1) + w_fc.sum(axis=1)
    return l0, l1


def _top_channels(norms: np.ndarray, keep: int) -> np.ndarray:
    # Highest norm first, ties broken by the lower channel index; the kept
    # set is returned in ascending order to preserve relative layout.
    order = np.lexsort((np.arange(norms.size), -norms))
    return np.sort(order[:keep])


def prune_structured(
    config: ModelConfig, target_rnn_dim: int, weights: list[np.ndarray]
) -> tuple[ModelConfig, list[np.ndarray]]:
    """Shrink both recurrent layers to ``target_rnn_dim`` channels.

    Keeps the channels with the largest L1 norm per layer; the FC output
    width is untouched. Works on real or integer matrices.
    """
    if target_rnn_dim >= config.rnn_dim:
        raise ValueError("target width must be smaller than the current width")
    if target_rnn_dim <= 0:
        raise ValueError("target width must be positive")
    norms0, norms1 = channel_l1_norms(weights)
    keep0 = _top_channels(norms0, target_rnn_dim)
    keep1 = _top_channels(norms1, target_rnn_dim)
    w_in, w_r0, w_ff, w_r1, w_fc = [np.asarray(w) for w in weights]
    pruned = [
        w_in[:, keep0],
        w_r0[np.ix_(keep0, keep0)],
        w_ff[np.ix_(keep0, keep1)],
        w_r1[np.ix_(keep1, keep1)],
        w_fc[keep1, :],
    ]
    new_config = replace(config, rnn_dim=target_rnn_dim)
    return new_config, pruned


def prune_unstructured(weights, target_sparsity: float):
    """Zero the floor(sparsity * size) smallest-magnitude elements.

    Ties break toward the lower flat index. Accepts a QuantizedMatrix or a
    plain array and returns the same kind.
    """
    if not (0.0 <= target_sparsity < 1.0):
        raise ValueError("target_sparsity must be in [0, 1)")
    if isinstance(weights, QuantizedMatrix):
        vals = weights.to_values()
        zeroed = prune_unstructured(vals, target_sparsity)
        return QuantizedMatrix.from_values(zeroed, weights.scale_shift)
    arr = np.array(weights)
    n_zero = int(np.floor(target_sparsity * arr.size))
    if n_zero == 0:
        return arr
    flat = arr.reshape(-1)
    order = np.argsort(np.abs(flat), kind="stable")
    flat[order[:n_zero]] = 0
    return arr


def pruned_param_count(config: ModelConfig, fc_sparsity: float = 0.0) -> int:
    """Structural parameter count after zeroing an FC fraction."""
    rows, cols = config.layer_shapes()[-1]
    return config.param_count() - int(np.floor(fc_sparsity * rows * cols))


# ---------------------------------------------------------------------------
# Random fixtures


def _sat12(x: np.ndarray) -> np.ndarray:
    return np.clip(x, ACC_MIN, ACC_MAX)


def calibrate_thresholds(
    int_weights: list[np.ndarray],
    density_hint: float,
    features: np.ndarray,
    tolerance: float = 0.15,
) -> tuple[int, int]:
    """Pick per-layer power-of-2 firing thresholds hitting a spike density.

    Measures the time-step-1 firing rate of each recurrent layer on the given
    feature frames with zero carried state, i.e. every calibration frame is
    evaluated as an utterance start (stimulus = saturated input product,
    membrane starts at zero — exactly the reference first-frame arithmetic).
    Raises CalibrationError when no threshold lands within ``tolerance`` of
    the hint.
    """
    w_in, _, w_ff = int_weights[0], int_weights[1], int_weights[2]
    feats = np.asarray(features, dtype=np.int64)
    candidates = np.array([1 << k for k in range(MAX_SHIFT + 1)])

    def best(stim: np.ndarray) -> tuple[int, float]:
        rates = [(float((stim >= v).mean()), v) for v in candidates]
        rate, v = min(rates, key=lambda rv: (abs(rv[0] - density_hint), rv[1]))
        return int(v), rate

    stim0 = _sat12(feats @ w_in.astype(np.int64))
    v0, rate0 = best(stim0)
    spikes0 = (stim0 >= v0).astype(np.int64)
    stim1 = _sat12(spikes0 @ w_ff.astype(np.int64))
    v1, rate1 = best(stim1)
    err = max(abs(rate0 - density_hint), abs(rate1 - density_hint))
    if err > tolerance:
        raise CalibrationError(
            f"best thresholds reach densities ({rate0:.3f}, {rate1:.3f}), "
            f"hint {density_hint} misses by {err:.3f} (> {tolerance})"
        )
    return v0, v1


def gen_random_model(
    seed: int,
    config: ModelConfig,
    spike_density_hint: float = 0.35,
    fc_sparsity: float = 0.0,
    calibration_frames: int = 64,
) -> Model:
    """Deterministic random model with LIF thresholds calibrated to a density.

    Weights are uniform over the full 4-bit range; thresholds come from
    calibrate_thresholds against uniform random byte features. Optional
    magnitude pruning of the FC matrix mimics the compressed deployment.
    """
    rng = np.random.default_rng(seed)
    ints = [
        rng.integers(WEIGHT_MIN, WEIGHT_MAX + 1, size=shape, dtype=np.int64)
        for shape in config.layer_shapes()
    ]
    if fc_sparsity > 0.0:
        ints[-1] = prune_unstructured(ints[-1], fc_sparsity)
    feats = rng.integers(0, 256, size=(calibration_frames, config.input_dim), dtype=np.int64)
    v0, v1 = calibrate_thresholds(ints, spike_density_hint, feats)
    decay = (int(rng.integers(0, 4)), int(rng.integers(0, 4)))
    lif = (
        LifParams(decay_shift=decay[0], threshold=v0),
        LifParams(decay_shift=decay[1], threshold=v1),
    )
    scale = 3  # dequantized weights span [-1, 0.875]; bookkeeping only
    cfg = replace(
        config,
        lif=lif,
        weight_scale_shift=(scale,) * 5,
    )
    mats = tuple(QuantizedMatrix.from_values(w, scale) for w in ints)
    return Model(cfg, mats)
