"""Bit-exact functional model of the accelerator executing a :class:`Program`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from sysacc.archspec import ArchConfig, Rounding
from sysacc.fxp import (
    check_accumulator,
    from_fixed_array,
    requantize_array,
    saturate_array,
    to_fixed_array,
)
from sysacc.vm.isa import ACCUMULATE, RELU, Opcode, Program, Reg, SimdOp


class MachineError(Exception):
    """Execution fault: bad address, foreign program, unknown opcode."""


class AddressFault(MachineError):
    pass


@dataclass
class Counters:
    weight_bytes_loaded: int = 0
    input_bytes_loaded: int = 0
    output_bytes_stored: int = 0
    instructions: int = 0
    macs: int = 0


@dataclass
class MachineState:
    cfg: ArchConfig
    dram0: np.ndarray
    dram1: np.ndarray
    local: np.ndarray = None
    accum: np.ndarray = None
    regs: dict = field(default_factory=dict)
    counters: Counters = field(default_factory=Counters)

    def __post_init__(self):
        cols = self.cfg.array_cols
        if self.local is None:
            self.local = np.zeros((self.cfg.local_vectors, cols), dtype=np.int64)
        if self.accum is None:
            self.accum = np.zeros((self.cfg.accum_vectors, cols), dtype=np.int64)


def _span(mem: np.ndarray, start: int, n: int, where: str, pc: int) -> slice:
    if start < 0 or n < 0 or start + n > mem.shape[0]:
        raise AddressFault(f"pc {pc}: {where} access [{start}, {start + n}) outside "
                           f"[0, {mem.shape[0]})")
    return slice(start, start + n)


def _div_round(total: np.ndarray, n: int, rounding: Rounding) -> np.ndarray:
    q, r = np.divmod(total, n)
    if rounding is Rounding.TRUNCATE:
        return q
    twice = 2 * r
    return q + ((twice > n) | ((twice == n) & (q % 2 == 1)))


class Machine:
    def __init__(self, cfg: ArchConfig):
        self.cfg = cfg
        self.fmt = cfg.fmt
        self.vb = cfg.vector_bytes

    def reset(self, program: Program) -> MachineState:
        if program.fingerprint != self.cfg.fingerprint():
            raise MachineError("program was compiled for a different architecture")
        if program.cols != self.cfg.array_cols or program.width_bytes != self.fmt.bytes:
            raise MachineError("program vector geometry does not match the architecture")
        dram0 = np.zeros((program.dram0_vectors, self.cfg.array_cols), dtype=np.int64)
        dram1 = np.asarray(program.consts, dtype=np.int64)
        return MachineState(self.cfg, dram0, dram1)

    def execute(self, program: Program, st: MachineState) -> MachineState:
        for pc, insn in enumerate(program.instructions):
            self.step(st, insn, pc)
        return st

    def step(self, st: MachineState, insn, pc: int = 0) -> None:
        op, a, b, c, n = insn.opcode, insn.a, insn.b, insn.c, insn.n
        cnt = st.counters
        cnt.instructions += 1
        if op is Opcode.CONFIG:
            st.regs[Reg(a)] = b
        elif op is Opcode.LOAD_WEIGHTS:
            st.local[_span(st.local, b, n, "local", pc)] = st.dram1[_span(st.dram1, a, n, "DRAM1", pc)]
            cnt.weight_bytes_loaded += n * self.vb
        elif op is Opcode.LOAD_ACTIVATIONS:
            st.local[_span(st.local, b, n, "local", pc)] = st.dram0[_span(st.dram0, a, n, "DRAM0", pc)]
            cnt.input_bytes_loaded += n * self.vb
        elif op is Opcode.SAVE_ACTIVATIONS:
            st.dram0[_span(st.dram0, b, n, "DRAM0", pc)] = st.local[_span(st.local, a, n, "local", pc)]
            cnt.output_bytes_stored += n * self.vb
        elif op is Opcode.MATMUL:
            x = st.local[_span(st.local, a, n, "local", pc)]
            w = st.local[_span(st.local, b, self.cfg.array_rows, "local", pc)]
            acc = st.accum[_span(st.accum, c, n, "accumulators", pc)]
            prod = x @ w
            res = acc + prod if insn.flags & ACCUMULATE else prod
            check_accumulator(res)
            st.accum[c:c + n] = res
            cnt.macs += n * self.cfg.array_rows * self.cfg.array_cols
        elif op is Opcode.SIMD:
            self._simd(st, SimdOp(insn.subop), a, b, c, n, bool(insn.flags & RELU), pc)
        else:
            raise MachineError(f"pc {pc}: unknown opcode {op}")

    def _simd(self, st, sub, a, b, c, n, relu, pc):
        fmt, loc = self.fmt, st.local
        if sub is SimdOp.GATHER:
            self._gather(st, a, c, n, pc)
            return
        if sub is SimdOp.AVGPOOL:
            g = st.regs.get(Reg.GROUPS, 1)
            src = loc[_span(loc, a, n * g, "local", pc)].reshape(g, n, -1)
            out = _div_round(src.sum(axis=1), n, fmt.rounding)
            loc[_span(loc, c, g, "local", pc)] = saturate_array(out, fmt)
            return
        if sub is SimdOp.REQUANT:
            acc = st.accum[_span(st.accum, a, n, "accumulators", pc)]
            bias = loc[_span(loc, b, 1, "local", pc)]
            out = requantize_array(acc + (bias << fmt.binary_point), fmt)
        else:
            x = loc[_span(loc, a, n, "local", pc)]
            if sub is SimdOp.IDENTITY:
                out = x.copy()
            elif sub is SimdOp.RELU:
                out = np.maximum(x, 0)
            elif sub is SimdOp.ADD:
                out = saturate_array(x + loc[_span(loc, b, n, "local", pc)], fmt)
            elif sub is SimdOp.MAX:
                out = np.maximum(x, loc[_span(loc, b, n, "local", pc)])
            else:
                raise MachineError(f"pc {pc}: unknown SIMD op {sub}")
        if relu:
            out = np.maximum(out, 0)
        loc[_span(loc, c, n, "local", pc)] = out

    def _gather(self, st, a, c, n, pc):
        """im2col for ``n`` output positions into ``K`` vector rows spaced ``M_STRIDE`` apart."""
        r = st.regs
        ih, iw, ic = r[Reg.IN_H], r[Reg.IN_W], r[Reg.IN_C]
        kh, kw, s, pad = r[Reg.KH], r[Reg.KW], r[Reg.STRIDE], r[Reg.PAD]
        ow, k, ms = r[Reg.OUT_W], r[Reg.K], r[Reg.M_STRIDE]
        w0, wrows, o0 = r[Reg.WIN_ROW0], r[Reg.WIN_ROWS], r[Reg.OUT_ROW0]
        cols = self.cfg.array_cols
        groups = -(-ic // cols)
        win = st.local[_span(st.local, a, groups * wrows * iw, "local", pc)]
        win = win.reshape(groups, wrows, iw, cols).transpose(1, 2, 0, 3).reshape(wrows, iw, -1)[..., :ic]
        i = np.arange(n)
        oy, ox = o0 + i // ow, i % ow
        taps = np.zeros((n, kh * kw, ic), dtype=np.int64)
        for ky in range(kh):
            iy = oy * s - pad + ky
            for kx in range(kw):
                ix = ox * s - pad + kx
                ok = (iy >= 0) & (iy < ih) & (ix >= 0) & (ix < iw)
                wy = iy - w0
                if np.any(ok & ((wy < 0) | (wy >= wrows))):
                    raise AddressFault(f"pc {pc}: gather needs input rows outside the window")
                taps[ok, ky * kw + kx] = win[wy[ok], ix[ok]]
        flat = np.zeros((n, k * cols), dtype=np.int64)
        flat[:, : kh * kw * ic] = taps.reshape(n, -1)
        flat = flat.reshape(n, k, cols).transpose(1, 0, 2)
        for kk in range(k):
            st.local[_span(st.local, c + kk * ms, n, "local", pc)] = flat[kk]


# --- tensor layout helpers ---------------------------------------------------

def pack_activation(raw: np.ndarray, cols: int) -> np.ndarray:
    """NHWC (n=1) raw ints -> channel-group-major vectors."""
    _, h, w, ch = raw.shape
    g = -(-ch // cols)
    pad = np.zeros((h, w, g * cols), dtype=np.int64)
    pad[..., :ch] = raw[0]
    return pad.reshape(h, w, g, cols).transpose(2, 0, 1, 3).reshape(g * h * w, cols)


def unpack_activation(vecs: np.ndarray, shape, cols: int) -> np.ndarray:
    _, h, w, ch = shape
    g = -(-ch // cols)
    t = vecs[: g * h * w].reshape(g, h, w, cols).transpose(1, 2, 0, 3).reshape(h, w, g * cols)
    return t[None, ..., :ch]


def run(program: Program, cfg: ArchConfig, x: np.ndarray, raw_output: bool = False):
    """Quantise ``x`` (NHWC float), execute, and return the dequantised output.

    Returns ``(output, state)``.
    """
    m = Machine(cfg)
    st = m.reset(program)
    if tuple(x.shape) != tuple(program.input.shape):
        raise MachineError(f"input shape {tuple(x.shape)} != {tuple(program.input.shape)}")
    vecs = pack_activation(to_fixed_array(x, cfg.fmt), cfg.array_cols)
    st.dram0[program.input.addr:program.input.addr + len(vecs)] = vecs
    m.execute(program, st)
    shape = program.output.shape
    g = -(-shape[3] // cfg.array_cols)
    n = g * shape[1] * shape[2]
    raw = unpack_activation(st.dram0[program.output.addr:program.output.addr + n], shape, cfg.array_cols)
    return (raw if raw_output else from_fixed_array(raw, cfg.fmt)), st
