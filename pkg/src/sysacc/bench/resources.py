"""FPGA resource estimate: DSP, BRAM36, URAM and LUT counts for an architecture."""

from __future__ import annotations

from dataclasses import dataclass

from sysacc.archspec import VECTORS_PER_KV, ArchConfig, DeviceProfile, XCZU7EV


@dataclass(frozen=True)
class ResourceReport:
    device: str
    dsp_used: int
    bram36_used: int
    uram_used: int
    lut_estimate: int
    accum_bram: int          # BRAM36 blocks holding accumulators
    local_bram: int          # BRAM36 blocks holding local memory (BRAM mapping or URAM spill)
    local_uram_needed: int   # URAM blocks local memory would need without the device cap
    local_spill_bram: int    # BRAM36 blocks taken by local memory beyond the URAM cap
    fits: bool

    def rows(self):
        return [("dsp", self.dsp_used), ("bram36", self.bram36_used), ("uram", self.uram_used),
                ("lut", self.lut_estimate)]


def _blocks(nbytes: int, block: int) -> int:
    return -(-nbytes // block)


def estimate_from_sizes(rows: int, cols: int, width_bytes: int, local_kv: int, accum_kv: int,
                        use_uram: bool, dev: DeviceProfile = XCZU7EV) -> ResourceReport:
    """Estimate from raw sizes; zero-sized memories are allowed here."""
    cal = dev.calibration
    vec = VECTORS_PER_KV * cols * width_bytes
    pes = rows * cols
    dsp = pes + cal.dsp_overhead
    lut = cal.lut_per_pe * pes + cal.lut_fixed
    accum_bram = _blocks(accum_kv * vec, dev.bram36_bytes) * cal.bram_port_factor
    local_bytes = local_kv * vec
    if use_uram:
        need = _blocks(local_bytes, dev.uram_bytes)
        uram = min(need, dev.uram_blocks)
        spill = max(0, local_bytes - uram * dev.uram_bytes)
        spill_bram = _blocks(spill, dev.bram36_bytes) * cal.bram_port_factor
        local_bram = spill_bram
    else:
        need, uram, spill_bram = 0, 0, 0
        local_bram = _blocks(local_bytes, dev.bram36_bytes) * cal.bram_port_factor
    bram = accum_bram + local_bram
    fits = (dsp <= dev.dsp_slices and bram <= dev.bram36_blocks and uram <= dev.uram_blocks
            and lut <= dev.luts)
    return ResourceReport(dev.name, dsp, bram, uram, lut, accum_bram, local_bram, need, spill_bram,
                          fits)


def estimate_resources(cfg: ArchConfig, dev: DeviceProfile = XCZU7EV) -> ResourceReport:
    return estimate_from_sizes(cfg.array_rows, cfg.array_cols, cfg.fmt.bytes, cfg.local_mem_kv,
                               cfg.accum_kv, cfg.use_uram, dev)
