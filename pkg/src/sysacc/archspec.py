"""Accelerator architecture description and memory-size arithmetic.

Memory sizes are expressed in KV (kilovectors): 1024 vectors, where one
vector holds ``array_cols`` datapath elements.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

VECTORS_PER_KV = 1024


class Rounding(str, Enum):
    NEAREST_EVEN = "round-to-nearest-even"
    TRUNCATE = "truncate"


class ArchError(ValueError):
    """Invalid architecture or device description."""


@dataclass(frozen=True)
class FixedFormat:
    width_bits: int = 16
    binary_point: int = 8
    rounding: Rounding = Rounding.NEAREST_EVEN

    def __post_init__(self):
        if self.width_bits not in (8, 16, 32):
            raise ArchError(f"width_bits must be 8, 16 or 32, got {self.width_bits}")
        if not 0 < self.binary_point < self.width_bits:
            raise ArchError(
                f"binary_point must lie in (0, {self.width_bits}), got {self.binary_point}"
            )
        object.__setattr__(self, "rounding", Rounding(self.rounding))

    @property
    def bytes(self) -> int:
        return self.width_bits // 8

    @property
    def raw_min(self) -> int:
        return -(1 << (self.width_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.width_bits - 1)) - 1

    @property
    def ulp(self) -> float:
        return 2.0 ** -self.binary_point


Q8_8 = FixedFormat(16, 8)


@dataclass(frozen=True)
class ArchConfig:
    array_rows: int = 32
    array_cols: int = 32
    fmt: FixedFormat = Q8_8
    local_mem_kv: int = 16
    accum_kv: int = 4
    accel_port_bits: int = 128
    host_port_bits: int = 128
    accel_clock_hz: int = 100_000_000
    host_clock_hz: int = 100_000_000
    dram_ports: int = 2
    # Map local memory to URAM instead of the default BRAM mapping.
    use_uram: bool = False

    def __post_init__(self):
        if self.array_rows != self.array_cols:
            raise ArchError(
                f"systolic array must be square, got {self.array_rows}x{self.array_cols}"
            )
        for name in ("array_rows", "local_mem_kv", "accum_kv", "accel_port_bits",
                     "host_port_bits", "accel_clock_hz", "host_clock_hz", "dram_ports"):
            if getattr(self, name) <= 0:
                raise ArchError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("accel_port_bits", "host_port_bits"):
            if getattr(self, name) % 8:
                raise ArchError(f"{name} must be a multiple of 8")

    @property
    def vector_bytes(self) -> int:
        return self.array_cols * self.fmt.bytes

    @property
    def local_vectors(self) -> int:
        return self.local_mem_kv * VECTORS_PER_KV

    @property
    def accum_vectors(self) -> int:
        return self.accum_kv * VECTORS_PER_KV

    def fingerprint(self) -> bytes:
        """SHA-256 over the canonical flat encoding; binds programs to an architecture."""
        blob = json.dumps(arch_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()

    def replace(self, **changes) -> "ArchConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Calibration:
    """Fitted constants of the resource model (not derived from first principles)."""

    dsp_overhead: int = 30
    lut_per_pe: int = 160
    lut_fixed: int = 20_000
    bram_port_factor: int = 1


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    bram36_blocks: int
    uram_blocks: int
    dsp_slices: int
    luts: int
    bram36_bytes: int = 4608
    uram_bytes: int = 36864
    calibration: Calibration = field(default_factory=Calibration)

    def __post_init__(self):
        for name in ("bram36_blocks", "uram_blocks", "dsp_slices", "luts"):
            if getattr(self, name) < 0:
                raise ArchError(f"{name} must be >= 0")
        if self.bram36_bytes != 4608 or self.uram_bytes != 36864:
            raise ArchError("block sizes are fixed: BRAM36 = 4608 bytes, URAM = 36864 bytes")


# Vendor datasheet capacities for the ZCU104 part.
XCZU7EV = DeviceProfile("XCZU7EV", bram36_blocks=312, uram_blocks=96,
                        dsp_slices=1728, luts=230_400)

DEVICES = {"XCZU7EV": XCZU7EV}


def kv_bytes(cfg: ArchConfig, kv: int) -> int:
    if kv < 0:
        raise ValueError("kv must be >= 0")
    return kv * VECTORS_PER_KV * cfg.array_cols * cfg.fmt.bytes


_BASELINE = ArchConfig()
_DUALCLOCK = _BASELINE.replace(accel_port_bits=512, host_clock_hz=333_000_000)
_URAM = _DUALCLOCK.replace(local_mem_kv=48, accum_kv=20, use_uram=True)

PRESETS = {
    "baseline": _BASELINE,
    "dualclock": _DUALCLOCK,
    "uram": _URAM,
    # Same hardware as uram; the difference is the compiler strategy.
    "uram_strategy": _URAM,
}


def preset(name: str) -> ArchConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ArchError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def validate(cfg: ArchConfig, dev: DeviceProfile = XCZU7EV) -> list[str]:
    """Return human-readable resource violations; empty when the design fits."""
    from sysacc.bench.resources import estimate_resources

    rep = estimate_resources(cfg, dev)
    out = []
    if rep.dsp_used > dev.dsp_slices:
        out.append(f"DSP shortfall {rep.dsp_used - dev.dsp_slices}")
    if rep.local_bram > 0 and rep.bram36_used > dev.bram36_blocks:
        out.append(
            f"local memory exceeds device: needs {rep.local_uram_needed} URAM + "
            f"{rep.local_bram} BRAM36 blocks"
        )
    if rep.bram36_used > dev.bram36_blocks:
        out.append(f"BRAM36 shortfall {rep.bram36_used - dev.bram36_blocks}")
    if rep.lut_estimate > dev.luts:
        out.append(f"LUT shortfall {rep.lut_estimate - dev.luts}")
    return out


# --- flat key/value files -------------------------------------------------

_FMT_KEYS = ("width_bits", "binary_point", "rounding")


def arch_to_dict(cfg: ArchConfig) -> dict:
    d = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name != "fmt"}
    d["width_bits"] = cfg.fmt.width_bits
    d["binary_point"] = cfg.fmt.binary_point
    d["rounding"] = cfg.fmt.rounding.value
    return d


def arch_from_dict(d: dict, base: ArchConfig = _BASELINE) -> ArchConfig:
    known = {f.name for f in dataclasses.fields(ArchConfig)} - {"fmt"} | set(_FMT_KEYS)
    unknown = sorted(set(d) - known)
    if unknown:
        raise ArchError(f"unknown architecture keys: {unknown}")
    try:
        fmt = FixedFormat(
            int(d.get("width_bits", base.fmt.width_bits)),
            int(d.get("binary_point", base.fmt.binary_point)),
            Rounding(d.get("rounding", base.fmt.rounding)),
        )
    except ValueError as e:
        raise ArchError(str(e)) from None
    fields = {k: v for k, v in d.items() if k not in _FMT_KEYS}
    for k, v in fields.items():
        if k == "use_uram":
            if not isinstance(v, bool):
                raise ArchError("use_uram must be a boolean")
        elif not isinstance(v, int) or isinstance(v, bool):
            raise ArchError(f"{k} must be an integer, got {v!r}")
    return dataclasses.replace(base, fmt=fmt, **fields)


def load_arch(path: str | Path) -> ArchConfig:
    return arch_from_dict(_read_json(path))


def save_arch(cfg: ArchConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(arch_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def device_from_dict(d: dict) -> DeviceProfile:
    cal_keys = {f.name for f in dataclasses.fields(Calibration)}
    dev_keys = {f.name for f in dataclasses.fields(DeviceProfile)} - {"calibration"}
    unknown = sorted(set(d) - cal_keys - dev_keys)
    if unknown:
        raise ArchError(f"unknown device keys: {unknown}")
    if "name" not in d:
        raise ArchError("device profile needs a name")
    cal = Calibration(**{k: int(v) for k, v in d.items() if k in cal_keys})
    return DeviceProfile(calibration=cal, **{k: v for k, v in d.items() if k in dev_keys})


def device_to_dict(dev: DeviceProfile) -> dict:
    d = {f.name: getattr(dev, f.name) for f in dataclasses.fields(dev) if f.name != "calibration"}
    d.update(dataclasses.asdict(dev.calibration))
    return d


def load_device(path: str | Path) -> DeviceProfile:
    return device_from_dict(_read_json(path))


def _read_json(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ArchError(f"{path}: {e}") from None
    if not isinstance(d, dict):
        raise ArchError(f"{path}: expected a flat object")
    for k, v in d.items():
        if isinstance(v, (dict, list)):
            raise ArchError(f"{path}: key {k!r} must be a scalar")
    return d
