"""Binary model and feature files.

Model file layout (all integers little-endian):

    "RSNN" | u16 version=1 | u16 rnn_dim | u16 input_dim | u16 fc_dim |
    u8 time_steps | i8 scale_shift x5 | (u8 decay_shift, u8 threshold_log2) x2 |
    weight payload

The payload is the five matrices in LAYERS order, each row-major packed
4-bit, low nibble first. Feature files:

    "FEAT" | u16 version=1 | u16 input_dim | u32 n_frames | raw u8 rows
"""

from __future__ import annotations

import struct

import numpy as np

from .model import LifParams, Model, ModelConfig, QuantizedMatrix

MODEL_MAGIC = b"RSNN"
FEATURE_MAGIC = b"FEAT"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHHHHB5b4B")


class FormatError(ValueError):
    """Model/feature stream rejected; ``code`` names the failure."""

    BAD_MAGIC = "bad_magic"
    BAD_VERSION = "bad_version"
    TRUNCATED = "truncated"
    SIZE_MISMATCH = "size_mismatch"
    BAD_FIELD = "bad_field"

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def serialize_model(model: Model) -> bytes:
    cfg = model.config
    header = _HEADER.pack(
        MODEL_MAGIC,
        FORMAT_VERSION,
        cfg.rnn_dim,
        cfg.input_dim,
        cfg.fc_dim,
        cfg.time_steps,
        *cfg.weight_scale_shift,
        cfg.lif[0].decay_shift,
        cfg.lif[0].threshold_log2,
        cfg.lif[1].decay_shift,
        cfg.lif[1].threshold_log2,
    )
    return header + b"".join(m.data for m in model.matrices)


def deserialize_model(data: bytes) -> Model:
    if len(data) < 4 or data[:4] != MODEL_MAGIC:
        raise FormatError(FormatError.BAD_MAGIC, "not a model stream")
    if len(data) < _HEADER.size:
        raise FormatError(FormatError.TRUNCATED, "header incomplete")
    (
        _,
        version,
        rnn_dim,
        input_dim,
        fc_dim,
        time_steps,
        s0,
        s1,
        s2,
        s3,
        s4,
        d0,
        t0,
        d1,
        t1,
    ) = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise FormatError(FormatError.BAD_VERSION, f"version {version} unsupported")
    try:
        cfg = ModelConfig(
            rnn_dim=rnn_dim,
            input_dim=input_dim,
            fc_dim=fc_dim,
            time_steps=time_steps,
            lif=(
                LifParams(decay_shift=d0, threshold=1 << t0),
                LifParams(decay_shift=d1, threshold=1 << t1),
            ),
            weight_scale_shift=(s0, s1, s2, s3, s4),
        )
    except ValueError as exc:
        raise FormatError(FormatError.BAD_FIELD, str(exc)) from exc
    sizes = [(rows * cols + 1) // 2 for rows, cols in cfg.layer_shapes()]
    expect = _HEADER.size + sum(sizes)
    if len(data) < expect:
        raise FormatError(
            FormatError.TRUNCATED,
            f"payload is {len(data) - _HEADER.size} B, header implies {sum(sizes)}",
        )
    if len(data) > expect:
        raise FormatError(
            FormatError.SIZE_MISMATCH,
            f"{len(data) - expect} trailing bytes after the weight payload",
        )
    mats = []
    offset = _HEADER.size
    for (rows, cols), size, scale in zip(cfg.layer_shapes(), sizes, cfg.weight_scale_shift):
        mats.append(QuantizedMatrix(rows, cols, data[offset : offset + size], scale))
        offset += size
    return Model(cfg, tuple(mats))


def save_model(path, model: Model) -> int:
    blob = serialize_model(model)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_model_file(path) -> Model:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())


# ---------------------------------------------------------------------------
# Feature files

_FEAT_HEADER = struct.Struct("<4sHHI")


def serialize_features(frames: np.ndarray) -> bytes:
    arr = np.asarray(frames)
    if arr.ndim != 2:
        raise ValueError("expected frames as a (n_frames, input_dim) array")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("feature values must be unsigned bytes")
    arr = arr.astype(np.uint8)
    header = _FEAT_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, arr.shape[1], arr.shape[0])
    return header + arr.tobytes()


def deserialize_features(data: bytes) -> np.ndarray:
    if len(data) < 4 or data[:4] != FEATURE_MAGIC:
        raise FormatError(FormatError.BAD_MAGIC, "not a feature stream")
    if len(data) < _FEAT_HEADER.size:
        raise FormatError(FormatError.TRUNCATED, "header incomplete")
    _, version, input_dim, n_frames = _FEAT_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise FormatError(FormatError.BAD_VERSION, f"version {version} unsupported")
    expect = _FEAT_HEADER.size + input_dim * n_frames
    if len(data) != expect:
        raise FormatError(
            FormatError.SIZE_MISMATCH,
            f"body is {len(data) - _FEAT_HEADER.size} B, header implies {input_dim * n_frames}",
        )
    body = np.frombuffer(data, dtype=np.uint8, offset=_FEAT_HEADER.size)
    return body.reshape(n_frames, input_dim).copy()


def save_features(path, frames: np.ndarray) -> int:
    blob = serialize_features(frames)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return deserialize_features(fh.read())


# ---------------------------------------------------------------------------
# Logit files (simulator/reference outputs, 12-bit values as i16)

LOGIT_MAGIC = b"LOGI"
_LOGIT_HEADER = struct.Struct("<4sHHI")


def serialize_logits(logits: np.ndarray) -> bytes:
    arr = np.asarray(logits, dtype=np.int16)
    if arr.ndim != 2:
        raise ValueError("expected logits as a (n_frames, fc_dim) array")
    header = _LOGIT_HEADER.pack(LOGIT_MAGIC, FORMAT_VERSION, arr.shape[1], arr.shape[0])
    return header + arr.astype("<i2").tobytes()


def deserialize_logits(data: bytes) -> np.ndarray:
    if len(data) < 4 or data[:4] != LOGIT_MAGIC:
        raise FormatError(FormatError.BAD_MAGIC, "not a logit stream")
    if len(data) < _LOGIT_HEADER.size:
        raise FormatError(FormatError.TRUNCATED, "header incomplete")
    _, version, fc_dim, n_frames = _LOGIT_HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise FormatError(FormatError.BAD_VERSION, f"version {version} unsupported")
    expect = _LOGIT_HEADER.size + 2 * fc_dim * n_frames
    if len(data) != expect:
        raise FormatError(FormatError.SIZE_MISMATCH, "payload length disagrees with header")
    body = np.frombuffer(data, dtype="<i2", offset=_LOGIT_HEADER.size)
    return body.reshape(n_frames, fc_dim).astype(np.int16)


def save_logits(path, logits: np.ndarray) -> int:
    blob = serialize_logits(logits)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_logits(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return deserialize_logits(fh.read())
