"""Fixed-point arithmetic for the accelerator datapath.

Scalar functions operate on :class:`FxVal`; the ``*_array`` variants are the
vectorised forms used by the executor and must agree with the scalar ones
element for element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sysacc.archspec import FixedFormat, Rounding

ACC_BITS = 48
ACC_MIN = -(1 << (ACC_BITS - 1))
ACC_MAX = (1 << (ACC_BITS - 1)) - 1


class AccumulatorOverflow(ArithmeticError):
    pass


@dataclass(frozen=True)
class FxVal:
    raw: int
    fmt: FixedFormat

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise ValueError(f"raw {self.raw} outside {self.fmt.width_bits}-bit range")

    def __float__(self):
        return from_fixed(self)


def _saturate(v: int, fmt: FixedFormat) -> int:
    return max(fmt.raw_min, min(fmt.raw_max, v))


def to_fixed(x: float, fmt: FixedFormat) -> FxVal:
    if math.isnan(x):
        raise ValueError("cannot convert NaN to fixed point")
    if math.isinf(x):
        return FxVal(fmt.raw_max if x > 0 else fmt.raw_min, fmt)
    scaled = x * (1 << fmt.binary_point)  # exact: power-of-two scaling
    if fmt.rounding is Rounding.NEAREST_EVEN:
        r = round(scaled)  # Python rounds half to even
    else:
        r = math.floor(scaled)
    return FxVal(_saturate(r, fmt), fmt)


def from_fixed(v: FxVal) -> float:
    return math.ldexp(v.raw, -v.fmt.binary_point)


def mac(acc: int, a: FxVal, b: FxVal) -> int:
    if a.fmt != b.fmt:
        raise ValueError("operands must share a format")
    out = acc + a.raw * b.raw
    if not ACC_MIN <= out <= ACC_MAX:
        raise AccumulatorOverflow(f"accumulator value {out} exceeds {ACC_BITS} bits")
    return out


def shift_round(acc: int, shift: int, rounding: Rounding) -> int:
    """Divide by ``2**shift`` with the given rounding; exact integer arithmetic."""
    q = acc >> shift
    if rounding is Rounding.TRUNCATE or shift == 0:
        return q
    rem = acc - (q << shift)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


def requantize(acc: int, fmt: FixedFormat) -> FxVal:
    return FxVal(_saturate(shift_round(acc, fmt.binary_point, fmt.rounding), fmt), fmt)


def dot_error_bound(k: int, fmt: FixedFormat) -> float:
    """Worst-case |fixed - float| for a k-term dot product with inputs in [-1, 1]."""
    return k * fmt.ulp + fmt.ulp / 2


# --- vectorised forms ------------------------------------------------------

def to_fixed_array(x, fmt: FixedFormat) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.isnan(x).any():
        raise ValueError("cannot convert NaN to fixed point")
    scaled = np.ldexp(x, fmt.binary_point)
    r = np.rint(scaled) if fmt.rounding is Rounding.NEAREST_EVEN else np.floor(scaled)
    return np.clip(r, fmt.raw_min, fmt.raw_max).astype(np.int64)


def from_fixed_array(raw, fmt: FixedFormat) -> np.ndarray:
    return np.ldexp(np.asarray(raw, dtype=np.float64), -fmt.binary_point)


def shift_round_array(acc: np.ndarray, shift: int, rounding: Rounding) -> np.ndarray:
    acc = np.asarray(acc, dtype=np.int64)
    q = acc >> shift
    if rounding is Rounding.TRUNCATE or shift == 0:
        return q
    rem = acc - (q << shift)
    half = 1 << (shift - 1)
    odd = (q & 1).astype(bool)
    return q + ((rem > half) | ((rem == half) & odd))


def requantize_array(acc: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    q = shift_round_array(acc, fmt.binary_point, fmt.rounding)
    return np.clip(q, fmt.raw_min, fmt.raw_max)


def saturate_array(v: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    return np.clip(v, fmt.raw_min, fmt.raw_max)


def check_accumulator(acc: np.ndarray) -> None:
    if acc.size and (acc.max() > ACC_MAX or acc.min() < ACC_MIN):
        raise AccumulatorOverflow(f"accumulator exceeds {ACC_BITS} bits")
