"""Versioned binary checkpoints for model, buffers, and controller state.

All integers are little-endian. Each section starts with a 4-byte magic
header so files are self-describing and version bumps are explicit:

``UTC1`` whole-checkpoint container
    magic, then model, controller-state, replay and validation sections.

``UTM1`` model parameters
    magic, u32 state_dim, u32 action_dim, u64 seed, u32 layer count,
    u32 hidden sizes; then per layer u32 rows, u32 cols, float64 weight
    entries row-major, float64 bias entries.

``UTS1`` controller state
    magic, float64 iutd_ratio, u8 has_previous_loss, float64
    previous_loss (0.0 when absent), float64 update_credit, u64 env_step.

``UTB1`` transition buffer
    magic, u64 capacity, u64 count; then per transition a u32 byte
    length followed by u32 state_dim, u32 action_dim, float64 state,
    float64 action, float64 reward, float64 next_state, u8 terminal.
    Transitions are written oldest first, so reloading replays the FIFO
    order exactly.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .buffers import ReplayBuffer, Transition, ValidationBuffer, _RingBuffer
from .controller import ControllerState
from .errors import ConfigError
from .model import MlpWorldModel

MAGIC_CHECKPOINT = b"UTC1"
MAGIC_MODEL = b"UTM1"
MAGIC_STATE = b"UTS1"
MAGIC_BUFFER = b"UTB1"


def _expect_magic(fh: BinaryIO, magic: bytes) -> None:
    got = fh.read(4)
    if got != magic:
        raise ConfigError(f"bad magic: expected {magic!r}, got {got!r}")


def _write_u32(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<I", v))


def _write_u64(fh: BinaryIO, v: int) -> None:
    fh.write(struct.pack("<Q", v))


def _write_f64(fh: BinaryIO, v: float) -> None:
    fh.write(struct.pack("<d", v))


def _read(fh: BinaryIO, fmt: str):
    size = struct.calcsize(fmt)
    raw = fh.read(size)
    if len(raw) != size:
        raise ConfigError("truncated checkpoint stream")
    return struct.unpack(fmt, raw)[0]


def _read_f64_array(fh: BinaryIO, count: int) -> np.ndarray:
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise ConfigError("truncated checkpoint stream")
    return np.frombuffer(raw, dtype="<f8").copy()


# ----------------------------------------------------------------------
# model
# ----------------------------------------------------------------------

def write_model(fh: BinaryIO, model: MlpWorldModel) -> None:
    fh.write(MAGIC_MODEL)
    _write_u32(fh, model.state_dim)
    _write_u32(fh, model.action_dim)
    _write_u64(fh, model.seed)
    _write_u32(fh, len(model.hidden_sizes))
    for h in model.hidden_sizes:
        _write_u32(fh, h)
    for w, b in zip(model.weights, model.biases):
        rows, cols = w.shape
        _write_u32(fh, rows)
        _write_u32(fh, cols)
        fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def read_model(fh: BinaryIO) -> MlpWorldModel:
    _expect_magic(fh, MAGIC_MODEL)
    state_dim = _read(fh, "<I")
    action_dim = _read(fh, "<I")
    seed = _read(fh, "<Q")
    n_hidden = _read(fh, "<I")
    hidden = tuple(_read(fh, "<I") for _ in range(n_hidden))
    model = MlpWorldModel(state_dim, action_dim, hidden, seed=seed)
    for i in range(len(model.weights)):
        rows = _read(fh, "<I")
        cols = _read(fh, "<I")
        if (rows, cols) != model.weights[i].shape:
            raise ConfigError(
                f"layer {i} shape {(rows, cols)} does not match architecture "
                f"{model.weights[i].shape}"
            )
        model.weights[i] = _read_f64_array(fh, rows * cols).reshape(rows, cols)
        model.biases[i] = _read_f64_array(fh, cols)
    return model


# ----------------------------------------------------------------------
# controller state
# ----------------------------------------------------------------------

def write_controller_state(fh: BinaryIO, state: ControllerState) -> None:
    fh.write(MAGIC_STATE)
    _write_f64(fh, state.iutd_ratio)
    fh.write(struct.pack("<B", 1 if state.previous_loss is not None else 0))
    _write_f64(fh, state.previous_loss if state.previous_loss is not None else 0.0)
    _write_f64(fh, state.update_credit)
    _write_u64(fh, state.env_step)


def read_controller_state(fh: BinaryIO) -> ControllerState:
    _expect_magic(fh, MAGIC_STATE)
    iutd = _read(fh, "<d")
    has_prev = _read(fh, "<B")
    prev = _read(fh, "<d")
    credit = _read(fh, "<d")
    env_step = _read(fh, "<Q")
    return ControllerState(
        iutd_ratio=iutd,
        previous_loss=prev if has_prev else None,
        update_credit=credit,
        env_step=env_step,
    )


# ----------------------------------------------------------------------
# buffers
# ----------------------------------------------------------------------

def _pack_transition(t: Transition) -> bytes:
    body = struct.pack("<II", t.state.shape[0], t.action.shape[0])
    body += np.ascontiguousarray(t.state, dtype="<f8").tobytes()
    body += np.ascontiguousarray(t.action, dtype="<f8").tobytes()
    body += struct.pack("<d", t.reward)
    body += np.ascontiguousarray(t.next_state, dtype="<f8").tobytes()
    body += struct.pack("<B", 1 if t.terminal else 0)
    return body


def _unpack_transition(body: bytes) -> Transition:
    state_dim, action_dim = struct.unpack_from("<II", body, 0)
    offset = 8
    state = np.frombuffer(body, dtype="<f8", count=state_dim, offset=offset).copy()
    offset += 8 * state_dim
    action = np.frombuffer(body, dtype="<f8", count=action_dim, offset=offset).copy()
    offset += 8 * action_dim
    (reward,) = struct.unpack_from("<d", body, offset)
    offset += 8
    next_state = np.frombuffer(body, dtype="<f8", count=state_dim, offset=offset).copy()
    offset += 8 * state_dim
    (terminal,) = struct.unpack_from("<B", body, offset)
    return Transition(state, action, reward, next_state, bool(terminal))


def write_buffer(fh: BinaryIO, buffer: _RingBuffer) -> None:
    fh.write(MAGIC_BUFFER)
    _write_u64(fh, buffer.capacity)
    items = buffer.in_order()
    _write_u64(fh, len(items))
    for t in items:
        body = _pack_transition(t)
        _write_u32(fh, len(body))
        fh.write(body)


def read_buffer(fh: BinaryIO, cls=ReplayBuffer):
    _expect_magic(fh, MAGIC_BUFFER)
    capacity = _read(fh, "<Q")
    count = _read(fh, "<Q")
    buffer = cls(capacity)
    for _ in range(count):
        length = _read(fh, "<I")
        body = fh.read(length)
        if len(body) != length:
            raise ConfigError("truncated checkpoint stream")
        buffer.push(_unpack_transition(body))
    return buffer


# ----------------------------------------------------------------------
# whole checkpoint
# ----------------------------------------------------------------------

def save_checkpoint(path: str, model: MlpWorldModel, replay: ReplayBuffer,
                    validation: ValidationBuffer, state: ControllerState) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC_CHECKPOINT)
        write_model(fh, model)
        write_controller_state(fh, state)
        write_buffer(fh, replay)
        write_buffer(fh, validation)


def load_checkpoint(path: str):
    """Returns (model, replay, validation, controller_state)."""
    with open(path, "rb") as fh:
        _expect_magic(fh, MAGIC_CHECKPOINT)
        model = read_model(fh)
        state = read_controller_state(fh)
        replay = read_buffer(fh, ReplayBuffer)
        validation = read_buffer(fh, ValidationBuffer)
        trailing = fh.read(1)
    if trailing:
        raise ConfigError("trailing bytes after checkpoint payload")
    return model, replay, validation, state
