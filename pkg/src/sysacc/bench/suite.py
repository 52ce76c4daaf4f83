"""Four-preset experiment harness, GOP accounting and chart output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from sysacc.archspec import PRESETS, XCZU7EV, DeviceProfile, preset
from sysacc.bench.resources import estimate_resources
from sysacc.nnir.graph import Graph, total_macs
from sysacc.scheduler import ScheduleError, Strategy, traffic_totals
from sysacc.vm.cost import CostModel, simulate_cost
from sysacc.vm.emit import compile_model

SUITE = ("baseline", "dualclock", "uram", "uram_strategy")

STRATEGY_FOR = {
    "baseline": Strategy.PARTITIONED_WEIGHT_STATIONARY,
    "dualclock": Strategy.PARTITIONED_WEIGHT_STATIONARY,
    "uram": Strategy.PARTITIONED_WEIGHT_STATIONARY,
    "uram_strategy": Strategy.LOCAL_RESIDENT,
}

# Measured on hardware by the original authors; kept for side-by-side comparison only.
REFERENCE_FPS = {"baseline": 133.54, "dualclock": 152.04, "uram": 170.16, "uram_strategy": 293.58}
REFERENCE_GOPS = 21.12
REFERENCE_WATTS = 5.21


def count_gops(g: Graph) -> Fraction:
    """GOP per frame, multiply and add counted separately."""
    return Fraction(2 * total_macs(g), 10**9)


def efficiency(throughput_gops, watts) -> Fraction:
    """GOP/s/W.  Power is an input; there is no power model."""
    if watts is None:
        raise ValueError("efficiency needs an explicitly supplied power in watts")
    w = Fraction(str(watts)) if isinstance(watts, float) else Fraction(watts)
    if w <= 0:
        raise ValueError("power must be positive")
    t = Fraction(str(throughput_gops)) if isinstance(throughput_gops, float) else Fraction(throughput_gops)
    return t / w


@dataclass(frozen=True)
class ExperimentResult:
    preset: str
    strategy: str
    fps: Fraction | None = None
    total_cycles: int = 0
    compute_cycles: int = 0
    transfer_cycles: int = 0
    overhead_cycles: int = 0
    bytes_moved: int = 0
    weight_bytes: int = 0
    activation_bytes: int = 0
    gops_per_frame: Fraction = Fraction(0)
    stages: int = 0
    partitions: int = 0
    fits_device: bool = True
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def throughput(self) -> Fraction | None:
        """GOP/s."""
        return None if self.fps is None else self.fps * self.gops_per_frame

    @property
    def latency_ms(self) -> Fraction | None:
        return None if self.fps is None else 1000 / self.fps


def run_experiment(name: str, g: Graph, blob: bytes, device: DeviceProfile = XCZU7EV,
                   strategy: Strategy | None = None) -> ExperimentResult:
    cfg = preset(name)
    strategy = Strategy(strategy or STRATEGY_FOR[name])
    try:
        schedules, program = compile_model(g, blob, cfg, strategy)
    except ScheduleError as e:
        return ExperimentResult(name, strategy.value, error=str(e))
    rep = simulate_cost(program, CostModel.from_arch(cfg))
    t = traffic_totals(schedules)
    return ExperimentResult(
        name, strategy.value, rep.fps, rep.total_cycles, rep.compute_cycles, rep.transfer_cycles,
        rep.overhead_cycles, t.total_bytes, t.weight_bytes_loaded, t.activation_bytes,
        count_gops(g), t.stage_count, t.partition_count, estimate_resources(cfg, device).fits,
    )


def run_suite(g: Graph, blob: bytes, device: DeviceProfile = XCZU7EV,
              presets=SUITE) -> list[ExperimentResult]:
    """One row per preset, in enumeration order; an infeasible preset yields an error row."""
    for p in presets:
        if p not in PRESETS:
            raise ValueError(f"unknown preset {p!r}")
    return [run_experiment(p, g, blob, device) for p in presets]


def ordering_failures(rows: list[ExperimentResult]) -> list[str]:
    """Violations of strictly increasing FPS across the rows, plus the dual-clock decomposition."""
    out = [f"{r.preset}: {r.error}" for r in rows if not r.ok]
    good = [r for r in rows if r.ok]
    for a, b in zip(good, good[1:]):
        if not a.fps < b.fps:
            out.append(f"fps not increasing: {a.preset} {float(a.fps):.2f} >= {b.preset} {float(b.fps):.2f}")
    by = {r.preset: r for r in good}
    if "baseline" in by and "dualclock" in by:
        base, dual = by["baseline"], by["dualclock"]
        if base.compute_cycles != dual.compute_cycles:
            out.append("dualclock changed compute_cycles")
        if not dual.transfer_cycles < base.transfer_cycles:
            out.append("dualclock did not reduce transfer_cycles")
    return out


COLUMNS = ("preset", "strategy", "fps", "reference_fps", "latency_ms", "total_cycles",
           "compute_cycles", "transfer_cycles", "overhead_cycles", "bytes_moved", "weight_bytes",
           "activation_bytes", "gops_per_frame", "throughput_gops", "efficiency_gops_per_w",
           "stages", "partitions", "fits_device", "error")


def to_csv(rows: list[ExperimentResult], watts=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        ref = REFERENCE_FPS.get(r.preset, "")
        if not r.ok:
            w.writerow([r.preset, r.strategy, "", ref] + [""] * (len(COLUMNS) - 5) + [r.error])
            continue
        eff = f"{float(efficiency(r.throughput, watts)):.4f}" if watts is not None else ""
        w.writerow([
            r.preset, r.strategy, f"{float(r.fps):.4f}", ref, f"{float(r.latency_ms):.4f}",
            r.total_cycles, r.compute_cycles, r.transfer_cycles, r.overhead_cycles, r.bytes_moved,
            r.weight_bytes, r.activation_bytes, f"{float(r.gops_per_frame):.6f}",
            f"{float(r.throughput):.4f}", eff, r.stages, r.partitions, r.fits_device, "",
        ])
    return buf.getvalue()


def to_svg(rows: list[ExperimentResult], width: int = 480, height: int = 300) -> str:
    """Monochrome bar chart of simulated FPS, with reference FPS as outlined bars."""
    good = [r for r in rows if r.ok]
    top = max([float(r.fps) for r in good] + [REFERENCE_FPS.get(r.preset, 0) for r in good] + [1.0])
    left, base_y, plot_h = 50, height - 40, height - 80
    slot = (width - left - 10) / max(len(rows), 1)
    bar = slot / 3
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">',
        f'<line x1="{left}" y1="{base_y}" x2="{width - 10}" y2="{base_y}" stroke="black"/>',
        f'<text x="{left}" y="20">frames per second (filled: simulated, outline: reference)</text>',
    ]
    for i, r in enumerate(rows):
        x = left + i * slot + bar / 2
        if r.ok:
            h = float(r.fps) / top * plot_h
            parts.append(f'<rect x="{x:.1f}" y="{base_y - h:.1f}" width="{bar:.1f}" height="{h:.1f}" fill="black"/>')
            parts.append(f'<text x="{x:.1f}" y="{base_y - h - 4:.1f}">{float(r.fps):.0f}</text>')
        ref = REFERENCE_FPS.get(r.preset)
        if ref:
            h = ref / top * plot_h
            parts.append(f'<rect x="{x + bar:.1f}" y="{base_y - h:.1f}" width="{bar:.1f}" height="{h:.1f}" '
                         f'fill="none" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{base_y + 15}">{r.preset}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
