"""Near-memory compute unit: PEs, input fetcher, ping-pong buffer, int8 MVM.

One macro read yields a 256-weight row feeding two 128-wide processing
elements. Matrix-vector products run as chunked 128-element MACs into a
32-bit accumulator, then requantize to int8 with per-output-channel scales.
Rounding is half-away-from-zero on the double-precision product; that
convention is normative so independent implementations agree bit for bit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, SimError

PE_WIDTH = 128
INT8_MIN, INT8_MAX = -128, 127
INT32_MAX = 2**31 - 1


def round_half_away(x):
    """Round to nearest integer, ties away from zero. Scalar or array."""
    if np.isscalar(x):
        return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5)).astype(np.int64)


def requantize(acc, scale, output_zero_point):
    """int32 accumulator -> int8 with a positive real scale and a zero point."""
    if scale <= 0:
        raise SimError("requantize scale must be positive")
    out = output_zero_point + round_half_away(float(acc) * scale)
    return max(INT8_MIN, min(INT8_MAX, out))


def pe_dot(weights, inputs, input_zero_point):
    """128-element MAC: sum of w[k] * (x[k] - zp), exact integer arithmetic."""
    w = np.asarray(weights, dtype=np.int64)
    x = np.asarray(inputs, dtype=np.int64)
    if w.shape != (PE_WIDTH,) or x.shape != (PE_WIDTH,):
        raise SimError(f"pe_dot operands must both have {PE_WIDTH} elements")
    acc = int(np.dot(w, x - int(input_zero_point)))
    if not -INT32_MAX - 1 <= acc <= INT32_MAX:
        raise SimError("accumulator overflow")
    return acc


@dataclass
class LayerDescriptor:
    in_dim: int
    out_dim: int
    bias: np.ndarray  # int32 per output channel
    requant_scale: np.ndarray  # positive real, per output channel
    input_zero_point: int = 0
    output_zero_point: int = 0
    activation: str = "none"  # none | relu
    weight_base_row: int | None = None  # macro row where this layer's weights live

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=np.int64)
        self.requant_scale = np.asarray(self.requant_scale, dtype=np.float64)
        if self.in_dim < 1 or self.out_dim < 1:
            raise ModelError("layer dimensions must be >= 1")
        if self.bias.shape != (self.out_dim,):
            raise ModelError("bias length must equal out_dim")
        if self.requant_scale.shape != (self.out_dim,):
            raise ModelError("requant_scale length must equal out_dim")
        if np.any(self.requant_scale <= 0):
            raise ModelError("requant scales must be positive")
        if self.activation not in ("none", "relu"):
            raise ModelError(f"unknown activation {self.activation!r}")
        for zp in (self.input_zero_point, self.output_zero_point):
            if not INT8_MIN <= zp <= INT8_MAX:
                raise ModelError("zero points must fit int8")
        # worst-case |acc| with |w| <= 8 and |x - zp| <= 255 must fit int32
        worst = self.in_dim * 8 * 255 + int(np.abs(self.bias).max())
        if self.in_dim > 2**16 or worst > INT32_MAX:
            raise ModelError(
                f"layer {self.in_dim}x{self.out_dim} risks accumulator overflow"
            )

    @property
    def chunks(self):
        return -(-self.in_dim // PE_WIDTH)


class PingPongBuffer:
    """Two int8 halves; one is read by the current layer while the other
    collects its outputs. swap() exchanges the roles between layers."""

    def __init__(self, capacity=1024):
        if capacity < 1:
            raise SimError("ping-pong capacity must be >= 1")
        self.capacity = capacity
        self.halves = [np.zeros(capacity, dtype=np.int8) for _ in range(2)]
        self.valid = [0, 0]
        self.write_half = 0

    @property
    def read_half(self):
        return 1 - self.write_half

    def write(self, values):
        values = np.asarray(values, dtype=np.int8)
        if values.size > self.capacity:
            raise SimError(
                f"{values.size} outputs exceed ping-pong capacity {self.capacity}"
            )
        self.halves[self.write_half][: values.size] = values
        self.valid[self.write_half] = values.size

    def read(self, offset, count, pad_value):
        if self.valid[self.read_half] == 0:
            raise SimError("ping-pong read half is empty (no layer has run)")
        data = self.halves[self.read_half][: self.valid[self.read_half]]
        out = np.full(count, pad_value, dtype=np.int8)
        if offset < data.size:
            take = data[offset : offset + count]
            out[: take.size] = take
        return out

    def swap(self):
        if self.valid[self.write_half] == 0:
            raise SimError("swap before any layer output was written")
        self.write_half = self.read_half


class Nmcu:
    """One NMCU bound to one macro; single-threaded per inference.

    ``trace`` records, per mvm call, the fetch source and the number of macro
    read events, backing the zero-data-movement and read-count assertions.
    """

    def __init__(self, macro, pingpong_capacity=1024):
        self.macro = macro
        self.pingpong = PingPongBuffer(pingpong_capacity)
        self.input_buffer = None
        self.trace = []

    def set_input(self, x):
        x = np.asarray(x, dtype=np.int8).ravel()
        if x.size == 0:
            raise SimError("input vector is empty")
        self.input_buffer = x

    def reset(self):
        self.pingpong = PingPongBuffer(self.pingpong.capacity)
        self.input_buffer = None
        self.trace = []

    def fetch_inputs(self, source, offset, count=PE_WIDTH, zero_point=0):
        """128-element slice from the input buffer or the ping-pong read half;
        the out-of-extent tail is filled with the zero point so padded terms
        contribute nothing to the MAC."""
        if source == "input_buffer":
            if self.input_buffer is None:
                raise SimError("input buffer is empty")
            data = self.input_buffer
            out = np.full(count, zero_point, dtype=np.int8)
            if offset < data.size:
                take = data[offset : offset + count]
                out[: take.size] = take
            return out
        if source == "ping_pong":
            return self.pingpong.read(offset, count, zero_point)
        raise SimError(f"unknown fetch source {source!r}")

    def _layer_weights(self, layer):
        """Read the layer's weight rows from the macro and decode to a
        (out_dim, in_dim) int matrix; output channels are contiguous row-major."""
        if layer.weight_base_row is None:
            raise SimError("layer has no weight_base_row (not deployed)")
        total = layer.out_dim * layer.in_dim
        n_rows = -(-total // self.macro.cells_per_row)
        states = np.empty(n_rows * self.macro.cells_per_row, dtype=np.int64)
        for i in range(n_rows):
            bank, row = self.macro.split_row(layer.weight_base_row + i)
            states[
                i * self.macro.cells_per_row : (i + 1) * self.macro.cells_per_row
            ] = self.macro.read_row(bank, row)
        flat = self.macro.codec.decode_array(states[:total])
        return flat.reshape(layer.out_dim, layer.in_dim), n_rows

    def mvm(self, layer: LayerDescriptor, source):
        """Run one fully-connected layer; results land in the write half."""
        weights, n_reads = self._layer_weights(layer)
        zp_in = layer.input_zero_point
        chunks = [
            self.fetch_inputs(source, c * PE_WIDTH, PE_WIDTH, zp_in)
            for c in range(layer.chunks)
        ]
        out = np.empty(layer.out_dim, dtype=np.int8)
        for j in range(layer.out_dim):
            wj = np.zeros(layer.chunks * PE_WIDTH, dtype=np.int64)
            wj[: layer.in_dim] = weights[j]
            acc = int(layer.bias[j])
            for c in range(layer.chunks):
                acc += pe_dot(wj[c * PE_WIDTH : (c + 1) * PE_WIDTH], chunks[c], zp_in)
            q = requantize(acc, float(layer.requant_scale[j]), layer.output_zero_point)
            if layer.activation == "relu":
                q = max(layer.output_zero_point, q)
            out[j] = q
        self.pingpong.write(out)
        self.trace.append(
            {
                "source": source,
                "macro_reads": n_reads,
                "chunks": layer.chunks,
                "out_dim": layer.out_dim,
            }
        )
        return out.copy()

    def swap_ping_pong(self):
        self.pingpong.swap()

    def last_output(self):
        n = self.pingpong.valid[self.pingpong.write_half]
        if n == 0:
            raise SimError("no layer output available")
        return self.pingpong.halves[self.pingpong.write_half][:n].copy()
