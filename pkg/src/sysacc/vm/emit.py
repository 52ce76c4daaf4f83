"""Lower layer schedules to an instruction stream plus the DRAM1 constant image."""

from __future__ import annotations

import numpy as np

from sysacc.archspec import ArchConfig
from sysacc.fxp import to_fixed_array
from sysacc.nnir.graph import Graph
from sysacc.nnir.io import weight_array
from sysacc.scheduler import LayerSchedule, Lowering, Strategy, schedule_graph
from sysacc.vm.isa import (
    ACCUMULATE,
    Instruction,
    Marker,
    Opcode,
    Program,
    Reg,
    SimdOp,
    TensorIO,
    config,
    simd,
)


class EmitError(Exception):
    """An address or layout violation; indicates a scheduling bug."""


def _cg(c, cols):
    return -(-c // cols)


def pack_weights(low: Lowering, w: np.ndarray, b: np.ndarray | None, cfg: ArchConfig) -> np.ndarray:
    """Quantised weight block: per output group, ``k`` tiles of ``rows`` vectors then the bias."""
    cols = cfg.array_cols
    mat = np.zeros((low.k * cols, low.out_groups * cols))
    flat = w.reshape(-1, low.n)
    mat[: flat.shape[0], : low.n] = flat
    bias = np.zeros(low.out_groups * cols)
    if b is not None:
        bias[: low.n] = b
    blocks = []
    for j in range(low.out_groups):
        blocks.append(mat[:, j * cols:(j + 1) * cols])
        blocks.append(bias[None, j * cols:(j + 1) * cols])
    return to_fixed_array(np.concatenate(blocks), cfg.fmt)


class _Emitter:
    def __init__(self, g: Graph, blob: bytes, cfg: ArchConfig, schedules: list[LayerSchedule]):
        self.g, self.blob, self.cfg = g, blob, cfg
        self.cols = cfg.array_cols
        self.insns: list[Instruction] = []
        self.markers: list[Marker] = []
        self.resident = bool(schedules) and schedules[0].strategy is Strategy.LOCAL_RESIDENT
        # DRAM0 activation map
        self.dram0: dict[int, int] = {}
        top = 0
        tensors = [g.input_id]
        if self.resident:
            tensors.append(g.output_id)
        else:
            tensors += [s.layer.output for s in schedules]
        for t in tensors:
            if t not in self.dram0:
                self.dram0[t] = top
                top += self.tvec(t)
        self.dram0_vectors = top
        # DRAM1 constant map
        consts, self.dram1, top = [], {}, 0
        for s in schedules:
            if s.lowering is None:
                continue
            n = s.layer.primary
            b = weight_array(blob, n.bias) if n.bias is not None else None
            block = pack_weights(s.lowering, weight_array(blob, n.weights), b, cfg)
            self.dram1[s.layer_id] = top
            consts.append(block)
            top += block.shape[0]
        self.consts = (np.concatenate(consts) if consts
                       else np.zeros((0, self.cols), dtype=np.int64))

    def tvec(self, t) -> int:
        s = self.g.node(t).out_shape
        return _cg(s.c, self.cols) * s.h * s.w

    def hw(self, t) -> int:
        s = self.g.node(t).out_shape
        return s.h * s.w

    def emit(self, insn: Instruction):
        if insn.opcode is not Opcode.CONFIG and min(insn.a, insn.b, insn.c, insn.n) < 0:
            raise EmitError(f"negative operand in {insn}")
        self.insns.append(insn)

    def load_a(self, dram, local, n):
        if n:
            self.emit(Instruction(Opcode.LOAD_ACTIVATIONS, dram, local, 0, n))

    def save_a(self, local, dram, n):
        if n:
            self.emit(Instruction(Opcode.SAVE_ACTIVATIONS, local, dram, 0, n))

    # -- matmul layers --------------------------------------------------------

    def geometry(self, low: Lowering):
        for reg, v in ((Reg.IN_H, low.in_h), (Reg.IN_W, low.in_w), (Reg.IN_C, low.in_c),
                       (Reg.KH, low.kh), (Reg.KW, low.kw), (Reg.STRIDE, low.stride),
                       (Reg.PAD, low.pad), (Reg.OUT_W, low.out_w), (Reg.K, low.k)):
            self.emit(config(reg, v))

    def compute_block(self, s: LayerSchedule, st, m: int, y0: int, win, groups, wt_first: int):
        """Matmuls + epilogue for ``groups`` over output rows starting at ``y0``."""
        low, fl, bufs = s.lowering, s.layer, st.buffers
        M, S, W = st.m_stride, st.window_rows, low.in_w
        wg = low.group_weight_vectors
        relu = fl.relu is not None
        for j, gi in enumerate(groups):
            wbase = bufs["weights"] + (gi - wt_first) * wg
            acc = j * M
            for kk in range(low.k):
                if low.needs_gather:
                    src = bufs["im2col"] + kk * M
                else:
                    src = bufs["window"] + kk * S * W + (y0 - win.start) * W
                self.emit(Instruction(Opcode.MATMUL, src, wbase + kk * low.rows, acc, m,
                                      ACCUMULATE if kk else 0))
            out = bufs["out"] + j * M
            self.emit(simd(SimdOp.REQUANT, acc, wbase + low.k * low.rows, out, m,
                           relu=relu and fl.add is None))
            if fl.add is not None:
                self.emit(simd(SimdOp.ADD, out, bufs["skip"] + j * M, out, m, relu=relu))

    def matmul_partitioned(self, s: LayerSchedule):
        low, fl = s.lowering, s.layer
        in_base, out_base = self.dram0[fl.input], self.dram0[fl.output]
        hw_in, hw_out = low.in_h * low.in_w, low.m
        W, OW = low.in_w, low.out_w
        self.geometry(low)
        prev = None     # window of the previous block; halo rows move from it
        for st in s.stages:
            bufs, S, M = st.buffers, st.window_rows, st.m_stride
            self.emit(config(Reg.M_STRIDE, M))
            self.emit(config(Reg.WIN_ROWS, S))
            resident_first = None
            if st.weight_slice is not None:
                self.emit(Instruction(Opcode.LOAD_WEIGHTS, self.dram1[s.layer_id] + st.weight_slice.start,
                                      bufs["weights"], 0, len(st.weight_slice)))
                resident_first = st.groups.start
            for p in st.partitions:
                win, load, rows = p.input_window, p.input_load, p.output_window
                m = len(rows) * OW
                if p.weight_window is not None:
                    self.emit(Instruction(Opcode.LOAD_WEIGHTS, self.dram1[s.layer_id] + p.weight_window.start,
                                          bufs["weights"], 0, len(p.weight_window)))
                    wt_first = p.groups.start
                else:
                    wt_first = resident_first
                halo = len(p.halo)
                shift = win.start - prev.start if halo else 0
                if shift:
                    for gi in range(low.in_groups):
                        base = bufs["window"] + gi * S * W
                        self.emit(simd(SimdOp.IDENTITY, base + shift * W, 0, base, halo * W))
                for gi in range(low.in_groups):
                    self.load_a(in_base + gi * hw_in + load.start * W,
                                bufs["window"] + gi * S * W + (load.start - win.start) * W,
                                len(load) * W)
                prev = win
                if fl.skip is not None:
                    sk = self.dram0[fl.skip]
                    for j, gi in enumerate(p.groups):
                        self.load_a(sk + gi * hw_out + rows.start * OW, bufs["skip"] + j * M, m)
                if low.needs_gather and (p.weight_window is None or p.groups.start == 0):
                    self.emit(config(Reg.WIN_ROW0, win.start))
                    self.emit(config(Reg.OUT_ROW0, rows.start))
                    self.emit(simd(SimdOp.GATHER, bufs["window"], 0, bufs["im2col"], m))
                self.compute_block(s, st, m, rows.start, win, p.groups, wt_first)
                for j, gi in enumerate(p.groups):
                    self.save_a(bufs["out"] + j * M, out_base + gi * hw_out + rows.start * OW, m)

    def matmul_resident(self, s: LayerSchedule):
        low, fl = s.lowering, s.layer
        st = s.stages[0]
        bufs = st.buffers
        self.geometry(low)
        self.emit(config(Reg.M_STRIDE, low.m))
        self.emit(config(Reg.WIN_ROWS, low.in_h))
        self.emit(Instruction(Opcode.LOAD_WEIGHTS, self.dram1[s.layer_id], bufs["weights"], 0,
                              low.weight_vectors))
        if s.loads_input:
            self.load_a(self.dram0[fl.input], bufs["window"], self.tvec(fl.input))
        if low.needs_gather:
            self.emit(config(Reg.WIN_ROW0, 0))
            self.emit(config(Reg.OUT_ROW0, 0))
            self.emit(simd(SimdOp.GATHER, bufs["window"], 0, bufs["im2col"], low.m))
        self.compute_block(s, st, low.m, 0, st.partitions[0].input_window,
                           range(low.out_groups), 0)
        if s.stores_output:
            self.save_a(bufs["out"], self.dram0[fl.output], self.tvec(fl.output))

    # -- SIMD-only layers -------------------------------------------------------

    def avgpool(self, s: LayerSchedule):
        fl, st = s.layer, s.stages[0]
        bufs = st.buffers
        x = self.g.node(fl.input).out_shape
        cg = _cg(x.c, self.cols)
        if not self.resident or s.loads_input:
            self.load_a(self.dram0[fl.input], bufs["window"], self.tvec(fl.input))
        self.emit(config(Reg.GROUPS, cg))
        self.emit(simd(SimdOp.AVGPOOL, bufs["window"], 0, bufs["out"], x.h * x.w))
        if not self.resident or s.stores_output:
            self.save_a(bufs["out"], self.dram0[fl.output], cg)

    def eltwise(self, s: LayerSchedule):
        fl = s.layer
        n = fl.primary
        relu = n.op == "relu" or fl.relu is not None
        y = n.out_shape
        cg = _cg(y.c, self.cols)
        st = s.stages[0]
        bufs = st.buffers
        if self.resident:
            if s.loads_input:
                self.load_a(self.dram0[fl.input], bufs["window"], self.tvec(fl.input))
            self._elt_op(n.op, bufs, 0, 0, cg * y.h * y.w, relu)
            if s.stores_output:
                self.save_a(bufs["out"], self.dram0[fl.output], self.tvec(fl.output))
            return
        M, hw = st.m_stride, y.h * y.w
        for p in st.partitions:
            rows = p.output_window
            m = len(rows) * y.w
            for gi in range(cg):
                d = gi * hw + rows.start * y.w
                self.load_a(self.dram0[fl.input] + d, bufs["window"] + gi * M, m)
                if fl.skip is not None:
                    self.load_a(self.dram0[fl.skip] + d, bufs["skip"] + gi * M, m)
                self._elt_op(n.op, bufs, gi * M, gi * M, m, relu)
                self.save_a(bufs["out"] + gi * M, self.dram0[fl.output] + d, m)

    def _elt_op(self, op, bufs, off_in, off_out, n, relu):
        if op == "add":
            self.emit(simd(SimdOp.ADD, bufs["window"] + off_in, bufs["skip"] + off_in,
                           bufs["out"] + off_out, n, relu=relu))
        else:
            self.emit(simd(SimdOp.RELU, bufs["window"] + off_in, 0, bufs["out"] + off_out, n))

    def run(self, schedules) -> Program:
        for s in schedules:
            self.markers.append(Marker(len(self.insns), s.layer_id, s.name))
            if s.kind == "matmul":
                if s.strategy is Strategy.LOCAL_RESIDENT:
                    self.matmul_resident(s)
                else:
                    self.matmul_partitioned(s)
            elif s.kind == "avgpool":
                self.avgpool(s)
            else:
                self.eltwise(s)
        self._check_bounds()
        g = self.g
        return Program(
            self.cfg.fingerprint(), tuple(self.insns), tuple(self.markers),
            TensorIO(self.dram0.get(g.input_id, 0), g.input_shape.as_tuple()),
            TensorIO(self.dram0.get(g.output_id, 0), g.output_shape.as_tuple()),
            self.dram0_vectors, self.consts, self.cols, self.cfg.fmt.bytes,
        )

    def _check_bounds(self):
        lv, av = self.cfg.local_vectors, self.cfg.accum_vectors
        d1 = self.consts.shape[0]
        for i, insn in enumerate(self.insns):
            op = insn.opcode
            checks = []
            if op is Opcode.LOAD_WEIGHTS:
                checks = [(insn.a, insn.n, d1, "DRAM1"), (insn.b, insn.n, lv, "local")]
            elif op is Opcode.LOAD_ACTIVATIONS:
                checks = [(insn.a, insn.n, self.dram0_vectors, "DRAM0"), (insn.b, insn.n, lv, "local")]
            elif op is Opcode.SAVE_ACTIVATIONS:
                checks = [(insn.a, insn.n, lv, "local"), (insn.b, insn.n, self.dram0_vectors, "DRAM0")]
            elif op is Opcode.MATMUL:
                checks = [(insn.a, insn.n, lv, "local"), (insn.b, self.cfg.array_rows, lv, "local"),
                          (insn.c, insn.n, av, "accumulators")]
            for start, n, size, where in checks:
                if start + n > size:
                    raise EmitError(f"instruction {i} ({insn}) overflows {where} ({size} vectors)")


def emit(schedules: list[LayerSchedule], g: Graph, blob: bytes, cfg: ArchConfig) -> Program:
    return _Emitter(g, blob, cfg, schedules).run(schedules)


def compile_model(g: Graph, blob: bytes, cfg: ArchConfig, strategy=Strategy.PARTITIONED_WEIGHT_STATIONARY):
    """Schedule and emit; returns ``(schedules, program)``."""
    schedules = schedule_graph(g, cfg, strategy)
    return schedules, emit(schedules, g, blob, cfg)
