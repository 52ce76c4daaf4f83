"""Cycle-approximate performance model over an instruction stream.

Phases run back to back: an instruction costs its transfer or compute cycles
plus a fixed dispatch overhead.  All arithmetic is rational so
``fps * total_cycles == accel_clock_hz`` holds exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from sysacc.archspec import ArchConfig
from sysacc.vm.isa import Marker, Opcode, Program, Reg, SimdOp
from sysacc.vm.machine import run


@dataclass(frozen=True)
class CostModel:
    bytes_per_accel_cycle: Fraction
    accel_clock_hz: int
    array_rows: int
    array_cols: int
    overhead_cycles: int = 4
    port_parallel: bool = False   # overlap DRAM0 and DRAM1 transfers within a layer

    def __post_init__(self):
        if self.bytes_per_accel_cycle <= 0 or self.overhead_cycles < 0 or self.accel_clock_hz <= 0:
            raise ValueError("cost model components must be positive")

    @classmethod
    def from_arch(cls, cfg: ArchConfig, overhead_cycles: int = 4, port_parallel: bool = False):
        host = Fraction(cfg.host_port_bits * cfg.host_clock_hz, cfg.accel_clock_hz)
        bpc = min(Fraction(cfg.accel_port_bits), host) / 8
        return cls(bpc, cfg.accel_clock_hz, cfg.array_rows, cfg.array_cols, overhead_cycles,
                   port_parallel)

    def transfer_cycles(self, nbytes: int) -> int:
        return math.ceil(Fraction(nbytes) / self.bytes_per_accel_cycle)

    def matmul_cycles(self, m_vectors: int) -> int:
        # weight tile shift-in + streamed vectors + pipeline fill/drain
        return self.array_rows + m_vectors + self.array_rows + self.array_cols


@dataclass
class LayerCost:
    layer_id: int
    name: str
    compute_cycles: int = 0
    transfer_cycles: int = 0
    overhead_cycles: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    instructions: int = 0

    @property
    def total_cycles(self) -> int:
        return self.compute_cycles + self.transfer_cycles + self.overhead_cycles


@dataclass
class SimReport:
    accel_clock_hz: int
    layers: list[LayerCost] = field(default_factory=list)

    def _sum(self, attr):
        return sum(getattr(lc, attr) for lc in self.layers)

    @property
    def compute_cycles(self) -> int:
        return self._sum("compute_cycles")

    @property
    def transfer_cycles(self) -> int:
        return self._sum("transfer_cycles")

    @property
    def overhead_cycles(self) -> int:
        return self._sum("overhead_cycles")

    @property
    def total_cycles(self) -> int:
        return self.compute_cycles + self.transfer_cycles + self.overhead_cycles

    @property
    def bytes_in(self) -> int:
        return self._sum("bytes_in")

    @property
    def bytes_out(self) -> int:
        return self._sum("bytes_out")

    @property
    def fps(self) -> Fraction:
        return Fraction(self.accel_clock_hz, self.total_cycles)

    @property
    def latency_ms(self) -> Fraction:
        return Fraction(1000 * self.total_cycles, self.accel_clock_hz)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "name", "compute_cycles", "transfer_cycles", "overhead_cycles",
                    "total_cycles", "bytes_in", "bytes_out"])
        for lc in self.layers:
            w.writerow([lc.layer_id, lc.name, lc.compute_cycles, lc.transfer_cycles,
                        lc.overhead_cycles, lc.total_cycles, lc.bytes_in, lc.bytes_out])
        w.writerow(["total", "", self.compute_cycles, self.transfer_cycles, self.overhead_cycles,
                    self.total_cycles, self.bytes_in, self.bytes_out])
        w.writerow(["fps", "", f"{float(self.fps):.4f}", "latency_ms", f"{float(self.latency_ms):.4f}",
                    "", "", ""])
        return buf.getvalue()


def _simd_vectors(subop: SimdOp, n: int, regs: dict) -> int:
    if subop is SimdOp.GATHER:
        return n * regs.get(Reg.K, 1)
    if subop is SimdOp.AVGPOOL:
        return n * regs.get(Reg.GROUPS, 1)
    return n


def simulate_cost(program: Program, cost: CostModel) -> SimReport:
    vb = program.cols * program.width_bytes
    rep = SimReport(cost.accel_clock_hz)
    regs: dict = {}
    ranges = list(program.layer_ranges())
    if not ranges and program.instructions:
        ranges = [(Marker(0, -1, ""), 0, len(program.instructions))]
    for mk, start, stop in ranges:
        lc = LayerCost(mk.layer_id, mk.name)
        port = [0, 0]   # transfer cycles on DRAM0, DRAM1
        for insn in program.instructions[start:stop]:
            op = insn.opcode
            lc.instructions += 1
            lc.overhead_cycles += cost.overhead_cycles
            if op is Opcode.CONFIG:
                regs[Reg(insn.a)] = insn.b
            elif op in (Opcode.LOAD_WEIGHTS, Opcode.LOAD_ACTIVATIONS, Opcode.SAVE_ACTIVATIONS):
                nbytes = insn.n * vb
                port[op is Opcode.LOAD_WEIGHTS] += cost.transfer_cycles(nbytes)
                if op is Opcode.SAVE_ACTIVATIONS:
                    lc.bytes_out += nbytes
                else:
                    lc.bytes_in += nbytes
            elif op is Opcode.MATMUL:
                lc.compute_cycles += cost.matmul_cycles(insn.n)
            elif op is Opcode.SIMD:
                lc.compute_cycles += _simd_vectors(SimdOp(insn.subop), insn.n, regs)
        lc.transfer_cycles = max(port) if cost.port_parallel else sum(port)
        rep.layers.append(lc)
    return rep


@dataclass
class LoopResult:
    images: int
    correct: int
    mean_fps: Fraction

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct, self.images)


def run_inference_loop(program: Program, cfg: ArchConfig, dataset: Iterable,
                       cost: CostModel | None = None, log_every: int = 100,
                       log: Callable[[str], None] | None = None) -> LoopResult:
    """Stream ``(image, label)`` pairs through the functional model.

    FPS is simulated; the program is data-independent so every frame costs the
    same cycles, and the mean is the harmonic mean over frames.
    """
    cost = cost or CostModel.from_arch(cfg)
    frame_cycles = simulate_cost(program, cost).total_cycles
    images = correct = cycles = 0
    for image, label in dataset:
        y, _ = run(program, cfg, np.asarray(image, dtype=np.float32))
        pred = int(np.argmax(y))
        images += 1
        correct += pred == int(label)
        cycles += frame_cycles
        if log is not None and images % log_every == 0:
            fps = Fraction(images * cost.accel_clock_hz, cycles)
            log(f"image {images}: predicted {pred} label {int(label)} "
                f"accuracy {correct / images:.4f} fps {float(fps):.2f}")
    if images == 0:
        raise ValueError("empty dataset")
    return LoopResult(images, correct, Fraction(images * cost.accel_clock_hz, cycles))
