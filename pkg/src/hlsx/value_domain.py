"""Arithmetic-progression intervals over unsigned signal values.

A :class:`StrideInterval` ``[min, max, stride]`` stands for the set
``{min, min + stride, ..., max}``. Besides plain ranges this captures
parity facts such as "this signal only ever holds even values".

Operations that may produce the empty set return ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Iterable, Iterator, Optional

REFINE_KINDS = ("eq", "neq", "lt", "le", "gt", "ge")

# Exact images are computed by enumeration below this many elements.
_ENUM_LIMIT = 4096


@dataclass(frozen=True, order=True)
class StrideInterval:
    min: int
    max: int
    stride: int = 1

    def __post_init__(self):
        if self.min < 0:
            raise ValueError(f"negative lower bound {self.min}")
        if self.min > self.max:
            raise ValueError(f"empty interval [{self.min}, {self.max}]")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if (self.max - self.min) % self.stride:
            raise ValueError(
                f"max {self.max} not reachable from {self.min} by stride {self.stride}"
            )
        if self.min == self.max and self.stride != 1:
            object.__setattr__(self, "stride", 1)

    @classmethod
    def point(cls, v: int) -> StrideInterval:
        return cls(v, v, 1)

    @classmethod
    def of_width(cls, width: int) -> StrideInterval:
        """Full range of an unsigned ``width``-bit value."""
        return cls(0, (1 << width) - 1, 1)

    @property
    def is_point(self) -> bool:
        return self.min == self.max

    def __len__(self) -> int:
        return (self.max - self.min) // self.stride + 1

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.min, self.max + 1, self.stride))

    def __contains__(self, v: object) -> bool:
        return isinstance(v, int) and contains(self, v)

    def to_json(self) -> dict:
        return {"min": self.min, "max": self.max, "stride": self.stride}

    @classmethod
    def from_json(cls, d: dict) -> StrideInterval:
        return cls(int(d["min"]), int(d["max"]), int(d.get("stride", 1)))

    def __str__(self) -> str:
        return f"[{self.min}:{self.max}:{self.stride}]"


@dataclass(frozen=True)
class RefineOp:
    """A comparison ``signal <kind> bound`` used to restrict an interval."""

    kind: str
    bound: int

    def __post_init__(self):
        if self.kind not in REFINE_KINDS:
            raise ValueError(f"unknown comparison {self.kind!r}")
        if self.bound < 0:
            raise ValueError(f"negative bound {self.bound}")

    def holds(self, v: int) -> bool:
        b = self.bound
        return {
            "eq": v == b,
            "neq": v != b,
            "lt": v < b,
            "le": v <= b,
            "gt": v > b,
            "ge": v >= b,
        }[self.kind]

    def negate(self) -> RefineOp:
        return RefineOp(_NEGATION[self.kind], self.bound)


_NEGATION = {"eq": "neq", "neq": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}


def _span(lo: int, hi: int, stride: int) -> StrideInterval:
    # lo and hi already congruent modulo stride
    return StrideInterval(lo, hi, stride if hi > lo else 1)


def _stride_of(iv: StrideInterval) -> int:
    # a point has no stride information; 0 is neutral for gcd
    return 0 if iv.is_point else iv.stride


def from_values(values: Iterable[int]) -> Optional[StrideInterval]:
    """Tightest interval containing every value (``None`` for no values)."""
    vals = sorted(set(values))
    if not vals:
        return None
    lo = vals[0]
    g = 0
    for v in vals[1:]:
        g = gcd(g, v - lo)
    return _span(lo, vals[-1], g or 1)


def contains(iv: StrideInterval, v: int) -> bool:
    return iv.min <= v <= iv.max and (v - iv.min) % iv.stride == 0


def is_subset(a: StrideInterval, b: StrideInterval) -> bool:
    """True iff every value of ``a`` is a value of ``b``."""
    if not (contains(b, a.min) and contains(b, a.max)):
        return False
    return a.is_point or a.stride % b.stride == 0


def _saturate(lo: int, hi: int, s: int, blo: int, bhi: Optional[int]) -> StrideInterval:
    # [lo, hi] by s may stick out of [blo, bhi] on either side
    if bhi is not None and lo >= bhi:
        return StrideInterval.point(bhi)
    if hi <= blo:
        return StrideInterval.point(blo)
    parts = []
    if lo < blo:
        lo += -(-(blo - lo) // s) * s
        parts.append(StrideInterval.point(blo))
    if bhi is not None and hi > bhi:
        hi -= -(-(hi - bhi) // s) * s
        parts.append(StrideInterval.point(bhi))
    if lo <= hi:
        parts.append(_span(lo, hi, s))
    return hull_all(parts)


def clamp(iv: StrideInterval, bounds: StrideInterval) -> StrideInterval:
    """Saturate ``iv`` into ``[bounds.min, bounds.max]``.

    Values past either end saturate to that end, so the result is the
    hull of the in-range part plus whichever endpoints were hit.
    """
    return _saturate(iv.min, iv.max, iv.stride, bounds.min, bounds.max)


def add_const(
    iv: StrideInterval, c: int, bounds: Optional[StrideInterval] = None
) -> StrideInterval:
    """Shift every value by ``c``, saturating into ``bounds`` when given."""
    blo, bhi = (bounds.min, bounds.max) if bounds is not None else (0, None)
    return _saturate(iv.min + c, iv.max + c, iv.stride, blo, bhi)


def add(a: StrideInterval, b: StrideInterval) -> StrideInterval:
    """Sum of two independent intervals."""
    return _span(a.min + b.min, a.max + b.max, gcd(_stride_of(a), _stride_of(b)) or 1)


def mul_const(iv: StrideInterval, c: int) -> StrideInterval:
    if c < 0:
        raise ValueError("negative multiplier")
    if c == 0:
        return StrideInterval.point(0)
    return _span(iv.min * c, iv.max * c, iv.stride * c)


def mod_const(iv: StrideInterval, c: int) -> StrideInterval:
    """Sound image of ``{v mod c : v in iv}``.

    The exact image when it is itself a progression, otherwise the whole
    residue class ``min mod gcd(stride, c)`` below ``c``.
    """
    if c < 1:
        raise ValueError("modulus must be >= 1")
    if iv.max < c:
        return iv
    g = gcd(iv.stride, c)
    r = iv.min % g
    if len(iv) <= _ENUM_LIMIT:
        image = {v % c for v in iv}
        exact = from_values(image)
        if len(exact) == len(image):
            return exact
    return _span(r, r + ((c - 1 - r) // g) * g, g)


def refine(iv: StrideInterval, op: RefineOp) -> Optional[StrideInterval]:
    """Tightest interval holding the values of ``iv`` that satisfy ``op``.

    ``neq`` only trims an endpoint; an interior hole cannot be expressed.
    """
    b, s = op.bound, iv.stride
    kind = op.kind
    if kind == "eq":
        return StrideInterval.point(b) if contains(iv, b) else None
    if kind == "neq":
        if iv.is_point:
            return None if iv.min == b else iv
        if b == iv.min:
            return _span(iv.min + s, iv.max, s)
        if b == iv.max:
            return _span(iv.min, iv.max - s, s)
        return iv
    if kind == "lt":
        kind, b = "le", b - 1
    elif kind == "gt":
        kind, b = "ge", b + 1
    if kind == "le":
        if b < iv.min:
            return None
        hi = min(iv.max, iv.min + ((b - iv.min) // s) * s)
        return _span(iv.min, hi, s)
    # ge
    if b > iv.max:
        return None
    lo = iv.min if b <= iv.min else iv.min + -(-(b - iv.min) // s) * s
    if lo > iv.max:
        return None
    return _span(lo, iv.max, s)


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def intersect(a: StrideInterval, b: StrideInterval) -> Optional[StrideInterval]:
    """Exact intersection of two progressions (``None`` when disjoint)."""
    lo, hi = max(a.min, b.min), min(a.max, b.max)
    if lo > hi:
        return None
    # solve x = a.min (mod a.stride), x = b.min (mod b.stride)
    g, p, _ = _egcd(a.stride, b.stride)
    diff = b.min - a.min
    if diff % g:
        return None
    lcm = a.stride // g * b.stride
    x0 = (a.min + a.stride * ((diff // g * p) % (b.stride // g))) % lcm
    first = x0 + -(-(lo - x0) // lcm) * lcm
    if first > hi:
        return None
    last = first + ((hi - first) // lcm) * lcm
    return _span(first, last, lcm)


def hull(a: StrideInterval, b: StrideInterval) -> StrideInterval:
    """Smallest interval containing both ``a`` and ``b``."""
    g = gcd(gcd(_stride_of(a), _stride_of(b)), abs(a.min - b.min))
    return _span(min(a.min, b.min), max(a.max, b.max), g or 1)


def hull_all(ivs: Iterable[StrideInterval]) -> Optional[StrideInterval]:
    out = None
    for iv in ivs:
        out = iv if out is None else hull(out, iv)
    return out
