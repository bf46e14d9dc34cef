"""Signed fixed-point arithmetic emulating a hardware MAC datapath.

Values are stored as raw two's-complement integers with an implicit binary
point: real value = raw * 2**(-frac_bits).  All operations saturate on
overflow and round half to even, matching common DSP synthesis defaults.
Dot products accumulate at full precision (no intermediate rounding) and
requantize exactly once, the way a pipelined MAC array does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BitAllocationError(ValueError):
    """Requested bit split leaves no room for sign/fraction."""


class FormatMismatchError(ValueError):
    """Operands carry different Q-formats."""


@dataclass(frozen=True)
class QFormat:
    """Signed Q-format descriptor: 1 sign bit + int_bits + frac_bits."""

    total_bits: int
    int_bits: int
    frac_bits: int = field(init=False)

    def __post_init__(self):
        if not 8 <= self.total_bits <= 32:
            raise BitAllocationError(
                f"total_bits must be in [8, 32], got {self.total_bits}")
        if self.int_bits < 0:
            raise BitAllocationError(
                f"int_bits must be >= 0, got {self.int_bits}")
        frac = self.total_bits - 1 - self.int_bits
        if frac < 1:
            raise BitAllocationError(
                f"Q{self.total_bits}.{self.int_bits} leaves {frac} fraction "
                "bits; need at least 1")
        object.__setattr__(self, "frac_bits", frac)

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def step(self) -> float:
        return 2.0 ** (-self.frac_bits)

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return float(-(1 << self.int_bits))

    @property
    def max_value(self) -> float:
        return self.raw_max * self.step

    def __repr__(self) -> str:
        return f"Q{self.total_bits}.{self.int_bits}"


def make_qformat(total_bits: int, int_bits: int = 3) -> QFormat:
    """Build a QFormat; frac_bits = total_bits - 1 - int_bits."""
    return QFormat(total_bits, int_bits)


@dataclass(frozen=True)
class FixedScalar:
    raw: int
    fmt: QFormat

    @property
    def value(self) -> float:
        return self.raw * self.fmt.step

    def __repr__(self) -> str:
        return f"FixedScalar({self.value} = {self.raw}/{self.fmt.scale}, {self.fmt})"


@dataclass(frozen=True)
class FixedTensor:
    """Array of raw integers sharing one Q-format."""

    raw: np.ndarray
    fmt: QFormat

    @property
    def shape(self):
        return self.raw.shape

    @property
    def values(self) -> np.ndarray:
        return self.raw.astype(np.float64) * self.fmt.step


def quantize(x, q: QFormat):
    """Quantize a real scalar or array onto the format's grid.

    Rounds half to even, saturates to the representable range.  Returns a
    FixedScalar for scalar input, a FixedTensor otherwise.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("quantize requires finite input")
    # Scaling by a power of two is exact in float64, so np.rint applies the
    # half-even rule to the mathematically exact scaled value.
    raw = np.rint(arr * q.scale)
    raw = np.clip(raw, q.raw_min, q.raw_max).astype(np.int64)
    if arr.ndim == 0:
        return FixedScalar(int(raw), q)
    return FixedTensor(raw, q)


def dequantize(f):
    """Exact real value of a FixedScalar (float) or FixedTensor (ndarray)."""
    if isinstance(f, FixedScalar):
        return f.value
    return f.values


def saturation_count(x, q: QFormat) -> int:
    """How many elements of x fall outside q's representable range."""
    arr = np.asarray(x, dtype=np.float64)
    scaled = np.rint(arr * q.scale)
    return int(np.sum((scaled < q.raw_min) | (scaled > q.raw_max)))


def _check_fmt(a, b):
    if a.fmt != b.fmt:
        raise FormatMismatchError(f"{a.fmt} vs {b.fmt}")


def _saturate(raw, q: QFormat):
    if isinstance(raw, (int, np.integer)):
        return min(max(int(raw), q.raw_min), q.raw_max)
    return np.clip(raw, q.raw_min, q.raw_max)


def _shift_round_half_even(v, k: int):
    """v / 2**k rounded half to even, on Python ints or integer ndarrays.

    Relies on arithmetic (floor) right shift, so the remainder is always
    non-negative regardless of sign.
    """
    if k == 0:
        return v
    down = v >> k
    rem = v & ((1 << k) - 1)
    half = 1 << (k - 1)
    bump = (rem > half) | ((rem == half) & ((down & 1) == 1))
    return down + bump


def fx_add(a: FixedScalar, b: FixedScalar) -> FixedScalar:
    """Saturating datapath adder; operands must share a format."""
    _check_fmt(a, b)
    return FixedScalar(_saturate(a.raw + b.raw, a.fmt), a.fmt)


def fx_mul(a: FixedScalar, b: FixedScalar) -> FixedScalar:
    """Multiply: exact double-width product, one requantize, saturate."""
    _check_fmt(a, b)
    prod = a.raw * b.raw  # carries 2*frac_bits of fraction
    raw = _shift_round_half_even(prod, a.fmt.frac_bits)
    return FixedScalar(_saturate(raw, a.fmt), a.fmt)


def fx_dot(a: FixedTensor, w: FixedTensor, bias: FixedScalar,
           q: QFormat) -> FixedScalar:
    """One hardware MAC pipeline: full-width accumulate, requantize once.

    Products and their sum are held exactly (Python integers are unbounded,
    so the accumulator is as wide as it needs to be); the bias joins at
    accumulator precision and a single round/saturate produces the result.
    """
    if a.fmt != q or w.fmt != q or bias.fmt != q:
        raise FormatMismatchError("all operands must be in the target format")
    if a.raw.ndim != 1 or w.raw.ndim != 1:
        raise ValueError("fx_dot expects 1-D tensors")
    if a.raw.shape != w.raw.shape:
        raise ValueError(
            f"length mismatch: {a.raw.shape[0]} vs {w.raw.shape[0]}")
    acc = int(bias.raw) << q.frac_bits
    for ai, wi in zip(a.raw.tolist(), w.raw.tolist()):
        acc += ai * wi
    raw = _shift_round_half_even(acc, q.frac_bits)
    return FixedScalar(_saturate(raw, q), q)


def _acc_fits_int64(q: QFormat, n_in: int) -> bool:
    # |sum of products| <= n * 2^(2t-2), |bias<<f| <= 2^(2t-2); keep a sign
    # bit of headroom inside int64.
    need = 2 * (q.total_bits - 1) + int(np.ceil(np.log2(n_in + 2))) + 1
    return need <= 62


def fx_linear(x: FixedTensor, w: FixedTensor, b: FixedTensor,
              q: QFormat) -> FixedTensor:
    """Batched MAC array: rows of x against rows of w, plus bias.

    x: [n, in] (or [in]); w: [out, in]; b: [out].  Equivalent element by
    element to fx_dot, vectorized.  When the exact accumulator cannot fit
    in int64, the weight matrix is split into 16-bit halves whose partial
    int64 matmuls are recombined as unbounded Python integers, so the
    result is still exact.
    """
    if x.fmt != q or w.fmt != q or b.fmt != q:
        raise FormatMismatchError("all operands must be in the target format")
    xr = x.raw
    single = xr.ndim == 1
    if single:
        xr = xr[None, :]
    if w.raw.ndim != 2 or xr.shape[1] != w.raw.shape[1]:
        raise ValueError(
            f"shape mismatch: x {x.raw.shape} vs w {w.raw.shape}")
    if b.raw.shape != (w.raw.shape[0],):
        raise ValueError(f"bias shape {b.raw.shape} vs out {w.raw.shape[0]}")
    n_in = xr.shape[1]
    if _acc_fits_int64(q, n_in):
        acc = xr @ w.raw.T + (b.raw << q.frac_bits)
    else:
        w_hi = w.raw >> 16
        w_lo = w.raw & 0xFFFF
        acc = (xr @ w_hi.T).astype(object)
        acc = (acc << 16) + (xr @ w_lo.T)
        acc = acc + (b.raw.astype(object) << q.frac_bits)
    raw = _shift_round_half_even(acc, q.frac_bits)
    raw = _saturate(raw, q)
    raw = raw.astype(np.int64)
    if single:
        raw = raw[0]
    return FixedTensor(raw, q)


def relu_raw(t: FixedTensor) -> FixedTensor:
    """ReLU on raw integers; exact because zero lies on every grid."""
    return FixedTensor(np.maximum(t.raw, 0), t.fmt)
