"""Dual numbers ``p_s + p_i ε`` with ``ε² = 0``.

Two flavours are provided. :class:`DualScalar` has real parts and carries the
lexicographic total order used to rank singular values and distances.
:class:`DualComplexScalar` has complex parts and no order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import InfinitesimalDivisionError

#: Absolute tolerance on ``|p_s|`` below which a dual number counts as
#: infinitesimal (not appreciable).
APPRECIABLE_TOL = 1e-12

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_DUAL_RE = re.compile(rf"^\s*({_NUM})\s*([+-])\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*ε\s*$")

Number = Union[int, float]


@dataclass(frozen=True, order=False)
class DualScalar:
    """A real dual number ``standard + infinitesimal·ε``."""

    standard: float
    infinitesimal: float = 0.0

    def __post_init__(self) -> None:
        s, i = float(self.standard), float(self.infinitesimal)
        if not (math.isfinite(s) and math.isfinite(i)):
            raise ValueError(f"dual number parts must be finite, got ({s}, {i})")
        object.__setattr__(self, "standard", s)
        object.__setattr__(self, "infinitesimal", i)

    @staticmethod
    def _coerce(other: object) -> "DualScalar | None":
        if isinstance(other, DualScalar):
            return other
        if isinstance(other, (int, float)) and not isinstance(other, bool):
            return DualScalar(float(other), 0.0)
        return None

    def __add__(self, other: object) -> "DualScalar":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return DualScalar(self.standard + o.standard, self.infinitesimal + o.infinitesimal)

    __radd__ = __add__

    def __sub__(self, other: object) -> "DualScalar":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return DualScalar(self.standard - o.standard, self.infinitesimal - o.infinitesimal)

    def __rsub__(self, other: object) -> "DualScalar":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self) -> "DualScalar":
        return DualScalar(-self.standard, -self.infinitesimal)

    def __mul__(self, other: object) -> "DualScalar":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return dual_mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "DualScalar":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.reciprocal()

    def __rtruediv__(self, other: object) -> "DualScalar":
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.reciprocal()

    def reciprocal(self) -> "DualScalar":
        # ε has no inverse, so neither does any number with zero standard part
        if self.standard == 0.0:
            raise InfinitesimalDivisionError(f"{self} has zero standard part and no inverse")
        inv = 1.0 / self.standard
        return DualScalar(inv, -self.infinitesimal * inv * inv)

    def sqrt(self) -> "DualScalar":
        """Principal square root; requires a positive standard part."""
        if self.standard <= 0.0:
            raise ValueError(f"sqrt needs a positive standard part, got {self}")
        r = math.sqrt(self.standard)
        return DualScalar(r, self.infinitesimal / (2.0 * r))

    def __lt__(self, other: object) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return dual_less_than(self, o)

    def __gt__(self, other: object) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return dual_less_than(o, self)

    def __le__(self, other: object) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return not dual_less_than(o, self)

    def __ge__(self, other: object) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return not dual_less_than(self, o)

    def __str__(self) -> str:
        return format_dual(self)

    @classmethod
    def parse(cls, text: str) -> "DualScalar":
        return parse_dual(text)


@dataclass(frozen=True)
class DualComplexScalar:
    """A dual number with complex standard and infinitesimal parts."""

    standard: complex
    infinitesimal: complex = 0j

    def __post_init__(self) -> None:
        s, i = complex(self.standard), complex(self.infinitesimal)
        if not all(math.isfinite(v) for v in (s.real, s.imag, i.real, i.imag)):
            raise ValueError("dual complex number parts must be finite")
        object.__setattr__(self, "standard", s)
        object.__setattr__(self, "infinitesimal", i)

    def __add__(self, other: "DualComplexScalar") -> "DualComplexScalar":
        return DualComplexScalar(self.standard + other.standard, self.infinitesimal + other.infinitesimal)

    def __sub__(self, other: "DualComplexScalar") -> "DualComplexScalar":
        return DualComplexScalar(self.standard - other.standard, self.infinitesimal - other.infinitesimal)

    def __mul__(self, other: "DualComplexScalar") -> "DualComplexScalar":
        return DualComplexScalar(
            self.standard * other.standard,
            self.standard * other.infinitesimal + self.infinitesimal * other.standard,
        )

    def conjugate(self) -> "DualComplexScalar":
        return DualComplexScalar(self.standard.conjugate(), self.infinitesimal.conjugate())

    def reciprocal(self) -> "DualComplexScalar":
        if self.standard == 0:
            raise InfinitesimalDivisionError(f"{self} has zero standard part and no inverse")
        inv = 1.0 / self.standard
        return DualComplexScalar(inv, -self.infinitesimal * inv * inv)


def dual_mul(a: DualScalar, b: DualScalar) -> DualScalar:
    """``(a_s + a_i ε)(b_s + b_i ε) = a_s b_s + (a_s b_i + a_i b_s) ε``."""
    return DualScalar(
        a.standard * b.standard,
        a.standard * b.infinitesimal + a.infinitesimal * b.standard,
    )


def dual_less_than(p: DualScalar, q: DualScalar) -> bool:
    """Lexicographic order: standard parts first, infinitesimal parts break ties."""
    if p.standard != q.standard:
        return p.standard < q.standard
    return p.infinitesimal < q.infinitesimal


def dual_leq_tol(p: DualScalar, q: DualScalar, atol_standard: float = 0.0,
                 atol_infinitesimal: float = 0.0) -> bool:
    """``p ≤ q`` with standard parts closer than ``atol_standard`` treated as tied.

    Used where both sides come from floating-point evaluations whose standard
    parts agree mathematically but not bit-for-bit.
    """
    if p.standard < q.standard - atol_standard:
        return True
    if p.standard > q.standard + atol_standard:
        return False
    return p.infinitesimal <= q.infinitesimal + atol_infinitesimal


def is_appreciable(p: DualScalar | DualComplexScalar, tol: float = APPRECIABLE_TOL) -> bool:
    return abs(p.standard) > tol


def dual_positive(p: DualScalar) -> bool:
    return dual_less_than(DualScalar(0.0, 0.0), p)


def format_dual(p: DualScalar, digits: int = 17) -> str:
    s = format(p.standard, f".{digits}g")
    i = p.infinitesimal
    sign = "-" if math.copysign(1.0, i) < 0 else "+"
    return f"{s}{sign}{format(abs(i), f'.{digits}g')}ε"


def parse_dual(text: str) -> DualScalar:
    m = _DUAL_RE.match(text)
    if m is None:
        raise ValueError(f"not a dual number literal: {text!r}")
    standard, sign, mag = m.groups()
    inf = float(mag)
    return DualScalar(float(standard), -inf if sign == "-" else inf)
