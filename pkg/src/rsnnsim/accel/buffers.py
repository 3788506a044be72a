"""Weight buffer geometry and model loading.

The accelerator keeps every weight on chip in 512-bit words of 128 packed
4-bit values:

  input buffer      48 words   one word per input feature
  recurrent buffers 2 x 192    rows [0, rnn/2) of each of the three
                               rnn x rnn matrices in one buffer, the upper
                               rows in the other, so the two PE sets can
                               fetch concurrently in single-time-step mode
  fc buffers        2 x 960    word (group g, spike i) holds the 128 weights
                               from input i to outputs [g*128, g*128+128);
                               groups 0-6 plus the low half of group 14 in
                               one buffer, 7-13 plus the high half in the
                               other

Total capacity 2352 words = 150,528 bytes; the compressed model occupies
40 + 3*128 + 15*128 = 2344 words.
"""

from __future__ import annotations

import numpy as np

from ..model import LAYERS, Model, pack_int4, unpack_int4

WORD_BYTES = 64
WORD_NIBBLES = 128
INPUT_BUF_WORDS = 48
REC_BUF_WORDS = 192
FC_BUF_WORDS = 960
PE_WIDTH = 128

CAPACITY_WORDS = INPUT_BUF_WORDS + 2 * REC_BUF_WORDS + 2 * FC_BUF_WORDS
CAPACITY_BYTES = CAPACITY_WORDS * WORD_BYTES


class CapacityError(ValueError):
    """Model does not fit the fixed buffer geometry."""


def fc_group_split(n_groups: int, rnn_dim: int):
    """Static group-to-set assignment for the output layer.

    Returns (set0 groups, set1 groups, split group or None). With an odd
    group count the last group's positions are halved across the sets so the
    dense per-set event totals stay equal.
    """
    if n_groups % 2 == 0:
        return list(range(n_groups // 2)), list(range(n_groups // 2, n_groups)), None
    half = (n_groups - 1) // 2
    return list(range(half)), list(range(half, n_groups - 1)), n_groups - 1


def _pack_word(values: np.ndarray) -> np.ndarray:
    padded = np.zeros(WORD_NIBBLES, dtype=np.int64)
    padded[: values.size] = values
    return np.frombuffer(pack_int4(padded), dtype=np.uint8).copy()


class AccelState:
    """Loaded weight buffers plus the architectural registers.

    ``hidden`` are the per-layer per-time-step spike registers carried across
    frames; the remaining per-frame registers (feedforward values, the
    current frame's layer outputs) are populated as the FSM stages run.
    """

    def __init__(self, model: Model, time_steps: int | None = None):
        cfg = model.config
        self.config = cfg
        self.time_steps = time_steps or cfg.time_steps
        if self.time_steps not in (1, 2):
            raise ValueError("time_steps must be 1 or 2")
        if cfg.input_dim > INPUT_BUF_WORDS:
            raise CapacityError(
                f"input weight buffer holds {INPUT_BUF_WORDS} words, "
                f"model needs {cfg.input_dim}"
            )
        if cfg.rnn_dim > PE_WIDTH:
            raise CapacityError(
                f"recurrent weight buffers feed {PE_WIDTH}-wide PE sets, "
                f"model width is {cfg.rnn_dim}"
            )
        if cfg.fc_dim % PE_WIDTH != 0:
            raise CapacityError(f"fc width {cfg.fc_dim} is not a multiple of {PE_WIDTH}")

        weights = model.int_weights()
        rnn = cfg.rnn_dim
        half = rnn // 2
        self.n_groups = cfg.fc_dim // PE_WIDTH

        rec_words0 = 3 * half
        rec_words1 = 3 * (rnn - half)
        if max(rec_words0, rec_words1) > REC_BUF_WORDS:
            raise CapacityError(
                f"recurrent weight buffer holds {REC_BUF_WORDS} words, "
                f"model needs {max(rec_words0, rec_words1)}"
            )
        s0_groups, s1_groups, split = fc_group_split(self.n_groups, rnn)
        fc_words0 = len(s0_groups) * rnn + (half if split is not None else 0)
        fc_words1 = len(s1_groups) * rnn + ((rnn - half) if split is not None else 0)
        if max(fc_words0, fc_words1) > FC_BUF_WORDS:
            raise CapacityError(
                f"fc weight buffer holds {FC_BUF_WORDS} words, "
                f"model needs {max(fc_words0, fc_words1)}"
            )

        # Kernel-facing unpacked weights (one row per buffer word).
        self.w_input = weights[0].astype(np.int8)
        self.w_l0_rec = weights[1].astype(np.int8)
        self.w_l1_ff = weights[2].astype(np.int8)
        self.w_l1_rec = weights[3].astype(np.int8)
        w_fc = weights[4]
        self.w_fc_words = np.zeros((self.n_groups * rnn, PE_WIDTH), dtype=np.int8)
        for g in range(self.n_groups):
            for i in range(rnn):
                self.w_fc_words[g * rnn + i] = w_fc[i, g * PE_WIDTH : (g + 1) * PE_WIDTH]

        # Physical packed buffers and the (layer, logical word) -> location map.
        self.input_words = np.zeros((INPUT_BUF_WORDS, WORD_BYTES), dtype=np.uint8)
        self.rec_words = (
            np.zeros((REC_BUF_WORDS, WORD_BYTES), dtype=np.uint8),
            np.zeros((REC_BUF_WORDS, WORD_BYTES), dtype=np.uint8),
        )
        self.fc_words = (
            np.zeros((FC_BUF_WORDS, WORD_BYTES), dtype=np.uint8),
            np.zeros((FC_BUF_WORDS, WORD_BYTES), dtype=np.uint8),
        )
        self._word_map: dict[tuple[str, int], tuple[str, int, int]] = {}

        for i in range(cfg.input_dim):
            self.input_words[i] = _pack_word(weights[0][i])
            self._word_map[("l0_input", i)] = ("input", 0, i)
        offsets = [0, 0]
        for layer, mat in zip(LAYERS[1:4], weights[1:4]):
            for i in range(rnn):
                buf = 0 if i < half else 1
                self.rec_words[buf][offsets[buf]] = _pack_word(mat[i])
                self._word_map[(layer, i)] = ("rec", buf, offsets[buf])
                offsets[buf] += 1
        offsets = [0, 0]
        order0 = [(g, i) for g in s0_groups for i in range(rnn)]
        order1 = [(g, i) for g in s1_groups for i in range(rnn)]
        if split is not None:
            order0 += [(split, i) for i in range(half)]
            order1 += [(split, i) for i in range(half, rnn)]
        for buf, order in enumerate((order0, order1)):
            for g, i in order:
                self.fc_words[buf][offsets[buf]] = _pack_word(self.w_fc_words[g * rnn + i])
                self._word_map[("fc", g * rnn + i)] = ("fc", buf, offsets[buf])
                offsets[buf] += 1

        self.words_used = {
            "l0_input": cfg.input_dim,
            "l0_recurrent": rnn,
            "l1_feedforward": rnn,
            "l1_recurrent": rnn,
            "fc": self.n_groups * rnn,
        }
        self.fc_set_groups = (s0_groups, s1_groups, split)

        # Architectural registers.
        self.hidden = np.zeros((2, self.time_steps, rnn), dtype=np.uint8)
        self.in_buffer = np.zeros(INPUT_BUF_WORDS, dtype=np.uint8)
        # Per-frame registers filled by the FSM stages.
        self.ff_input: np.ndarray | None = None
        self.ff_l1: np.ndarray | None = None
        self.l0_out: np.ndarray | None = None
        self.l1_out: np.ndarray | None = None

    @property
    def total_words_used(self) -> int:
        return sum(self.words_used.values())

    def read_word_values(self, layer: str, word_index: int) -> np.ndarray:
        """Unpack a physical buffer word back to its 128 weight values."""
        kind, buf, offset = self._word_map[(layer, word_index)]
        if kind == "input":
            raw = self.input_words[offset]
        elif kind == "rec":
            raw = self.rec_words[buf][offset]
        else:
            raw = self.fc_words[buf][offset]
        return unpack_int4(raw.tobytes(), WORD_NIBBLES)

    def reset(self) -> None:
        """Zero the carried spike registers (utterance boundary)."""
        self.hidden[:] = 0
        self.ff_input = None
        self.ff_l1 = None
        self.l0_out = None
        self.l1_out = None


def load_model(model: Model, time_steps: int | None = None) -> AccelState:
    """Pack a model into the weight buffers; raises CapacityError on misfit."""
    return AccelState(model, time_steps)
