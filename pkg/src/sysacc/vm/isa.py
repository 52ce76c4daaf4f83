"""Instruction set and the versioned binary program format.

Addresses and counts are in vectors.  Every instruction encodes to 20 bytes:
``opcode:u8 flags:u8 subop:u8 pad:u8 a:u32 b:u32 c:u32 n:u32`` (little-endian).

========== ===================== ===================== ============ ==========
opcode     a                     b                     c            n
========== ===================== ===================== ============ ==========
CONFIG     register              value
LOAD_W     DRAM1 address         local address                      vectors
LOAD_A     DRAM0 address         local address                      vectors
SAVE_A     local address         DRAM0 address                      vectors
MATMUL     local input address   local weight tile     accumulator  vectors
SIMD       source 1              source 2              destination  vectors
========== ===================== ===================== ============ ==========
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Opcode(IntEnum):
    CONFIG = 0
    LOAD_WEIGHTS = 1
    LOAD_ACTIVATIONS = 2
    MATMUL = 3
    SIMD = 4
    SAVE_ACTIVATIONS = 5


class SimdOp(IntEnum):
    IDENTITY = 0   # local copy (a -> c)
    RELU = 1
    ADD = 2        # saturating a + b
    MAX = 3
    REQUANT = 4    # accumulators a + bias vector b -> local c
    GATHER = 5     # im2col from window a into c, geometry from config registers
    AVGPOOL = 6    # mean over n vectors per channel group


class Reg(IntEnum):
    IN_H = 0
    IN_W = 1
    IN_C = 2
    KH = 3
    KW = 4
    STRIDE = 5
    PAD = 6
    OUT_W = 7
    K = 8            # reduction vectors per output position
    M_STRIDE = 9     # group stride of im2col / output buffers
    WIN_ROW0 = 10    # first input row held in the window
    WIN_ROWS = 11    # group stride of the window, in rows
    OUT_ROW0 = 12
    GROUPS = 13      # channel groups for AVGPOOL


ACCUMULATE = 1
RELU = 2

_INSN = struct.Struct("<BBBxIIII")
INSN_BYTES = _INSN.size

MAGIC = b"SACP"
VERSION = 1
_HEADER = struct.Struct("<4sHH32sIIIIBxxx")
_IO = struct.Struct("<IIIIIIIIIII")


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    a: int = 0
    b: int = 0
    c: int = 0
    n: int = 0
    flags: int = 0
    subop: int = 0

    def encode(self) -> bytes:
        return _INSN.pack(self.opcode, self.flags, self.subop, self.a, self.b, self.c, self.n)

    @classmethod
    def decode(cls, buf, offset=0) -> "Instruction":
        op, flags, subop, a, b, c, n = _INSN.unpack_from(buf, offset)
        return cls(Opcode(op), a, b, c, n, flags, subop)

    def __str__(self):
        op = self.opcode.name.lower()
        if self.opcode is Opcode.CONFIG:
            return f"config {Reg(self.a).name.lower()}={self.b}"
        if self.opcode is Opcode.SIMD:
            fl = " relu" if self.flags & RELU else ""
            return f"simd.{SimdOp(self.subop).name.lower()} a={self.a} b={self.b} c={self.c} n={self.n}{fl}"
        fl = " acc" if self.flags & ACCUMULATE else ""
        return f"{op} a={self.a} b={self.b} c={self.c} n={self.n}{fl}"


def config(reg: Reg, value: int) -> Instruction:
    return Instruction(Opcode.CONFIG, int(reg), int(value))


def simd(op: SimdOp, a=0, b=0, c=0, n=0, relu=False) -> Instruction:
    return Instruction(Opcode.SIMD, a, b, c, n, RELU if relu else 0, int(op))


@dataclass(frozen=True)
class TensorIO:
    addr: int
    shape: tuple[int, int, int, int]


@dataclass(frozen=True)
class Marker:
    index: int      # first instruction of the layer
    layer_id: int
    name: str


@dataclass(frozen=True)
class Program:
    fingerprint: bytes
    instructions: tuple[Instruction, ...]
    markers: tuple[Marker, ...]
    input: TensorIO
    output: TensorIO
    dram0_vectors: int
    consts: np.ndarray = field(compare=False)   # DRAM1 image, shape (vectors, cols), raw ints
    cols: int = 32
    width_bytes: int = 2

    def __eq__(self, other):
        return isinstance(other, Program) and self.to_bytes() == other.to_bytes()

    def __hash__(self):
        return hash(self.to_bytes())

    def layer_ranges(self):
        """Yield ``(marker, start, stop)`` instruction ranges per layer."""
        for i, mk in enumerate(self.markers):
            stop = self.markers[i + 1].index if i + 1 < len(self.markers) else len(self.instructions)
            yield mk, mk.index, stop

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(MAGIC, VERSION, 0, self.fingerprint, len(self.instructions),
                              len(self.markers), self.consts.shape[0], self.cols, self.width_bytes)]
        parts.append(_IO.pack(self.input.addr, *self.input.shape, self.output.addr,
                              *self.output.shape, self.dram0_vectors))
        for mk in self.markers:
            name = mk.name.encode()
            parts.append(struct.pack("<IiH", mk.index, mk.layer_id, len(name)) + name)
        parts.extend(i.encode() for i in self.instructions)
        dt = np.dtype(f"<i{self.width_bytes}")
        parts.append(np.ascontiguousarray(self.consts, dtype=dt).tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Program":
        if len(buf) < _HEADER.size or buf[:4] != MAGIC:
            raise ValueError("not a program file")
        magic, ver, _, fp, n_insn, n_mark, n_const, cols, wb = _HEADER.unpack_from(buf, 0)
        if ver != VERSION:
            raise ValueError(f"unsupported program version {ver}")
        off = _HEADER.size
        io = _IO.unpack_from(buf, off)
        off += _IO.size
        markers = []
        for _ in range(n_mark):
            idx, lid, ln = struct.unpack_from("<IiH", buf, off)
            off += 10
            markers.append(Marker(idx, lid, buf[off:off + ln].decode()))
            off += ln
        insns = tuple(Instruction.decode(buf, off + i * INSN_BYTES) for i in range(n_insn))
        off += n_insn * INSN_BYTES
        dt = np.dtype(f"<i{wb}")
        need = n_const * cols * wb
        if len(buf) - off != need:
            raise ValueError(f"constant section is {len(buf) - off} bytes, expected {need}")
        consts = np.frombuffer(buf, dtype=dt, count=n_const * cols, offset=off).reshape(n_const, cols)
        return cls(fp, insns, tuple(markers), TensorIO(io[0], tuple(io[1:5])),
                   TensorIO(io[5], tuple(io[6:10])), io[10], consts.astype(np.int64), cols, wb)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Program":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())

    def listing(self) -> str:
        starts = {mk.index: mk for mk in self.markers}
        lines = []
        for i, insn in enumerate(self.instructions):
            if i in starts:
                lines.append(f"; layer {starts[i].layer_id} {starts[i].name}")
            lines.append(f"{i:6d}  {insn}")
        return "\n".join(lines) + "\n"
