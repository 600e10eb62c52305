"""CSV matrices and two-file dual-matrix containers.

A container named ``A`` is the pair ``A.standard.csv`` / ``A.infinitesimal.csv``.
Each file holds one matrix row per line with comma-separated entries written
as ``a``, ``a+bi`` or ``a-bi`` (no spaces).  Numbers are written with 17
significant digits, which round-trips every float64 exactly.  A complex
matrix writes an imaginary token on every entry, so the dtype survives the
round trip even when all imaginary parts are zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContainerFormatError
from .matrix import DualMatrix

STANDARD_SUFFIX = ".standard.csv"
INFINITESIMAL_SUFFIX = ".infinitesimal.csv"

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_ENTRY = re.compile(rf"^({_NUM})(?:([+-])((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i)?$")


def format_real(x: float) -> str:
    return format(float(x), ".17g")


def format_entry(z, complex_: bool) -> str:
    if not complex_:
        return format_real(z)
    z = complex(z)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{format_real(z.real)}{sign}{format_real(abs(z.imag))}i"


def parse_entry(token: str) -> tuple[float | complex, bool]:
    """Parse one entry; returns ``(value, has_imaginary_token)``."""
    m = _ENTRY.match(token)
    if m is None:
        raise ValueError(f"not a number: {token!r}")
    re_part, sign, im_mag = m.groups()
    if sign is None:
        return float(re_part), False
    im = float(im_mag)
    return complex(float(re_part), -im if sign == "-" else im), True


def write_matrix_csv(a: np.ndarray, path: str | Path) -> None:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got ndim {a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("refusing to write non-finite entries")
    complex_ = np.iscomplexobj(a)
    lines = [",".join(format_entry(v, complex_) for v in row) for row in a.tolist()]
    text = "\n".join(lines) + "\n" if lines else ""
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a matrix CSV; errors name the 1-based line and column."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows: list[list] = []
    any_complex = False
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ContainerFormatError(f"{path}:{lineno}: expected {width} columns, found {len(tokens)}")
        row = []
        for col, tok in enumerate(tokens, start=1):
            try:
                value, is_c = parse_entry(tok.strip())
            except ValueError as exc:
                raise ContainerFormatError(f"{path}:{lineno}:{col}: {exc}") from None
            any_complex |= is_c
            row.append(value)
        rows.append(row)
    if not rows:
        raise ContainerFormatError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.complex128 if any_complex else np.float64)


@dataclass(frozen=True)
class MatrixContainer:
    name: str
    standard_path: Path
    infinitesimal_path: Path

    @classmethod
    def locate(cls, path: str | Path) -> "MatrixContainer":
        """Resolve a prefix path or a directory holding exactly one container."""
        p = Path(path)
        if p.is_dir():
            found = sorted(f for f in p.iterdir() if f.name.endswith(STANDARD_SUFFIX))
            if len(found) != 1:
                raise ContainerFormatError(f"{p}: expected exactly one *{STANDARD_SUFFIX}, found {len(found)}")
            name = found[0].name[: -len(STANDARD_SUFFIX)]
            return cls(name, found[0], p / f"{name}{INFINITESIMAL_SUFFIX}")
        for suffix in (STANDARD_SUFFIX, INFINITESIMAL_SUFFIX):
            if p.name.endswith(suffix):
                p = p.with_name(p.name[: -len(suffix)])
        return cls(p.name, p.with_name(p.name + STANDARD_SUFFIX), p.with_name(p.name + INFINITESIMAL_SUFFIX))


def parse_container(path: str | Path) -> DualMatrix:
    c = MatrixContainer.locate(path)
    for f in (c.standard_path, c.infinitesimal_path):
        if not f.is_file():
            raise FileNotFoundError(f"missing container file {f}")
    s = read_matrix_csv(c.standard_path)
    i = read_matrix_csv(c.infinitesimal_path)
    if s.shape != i.shape:
        raise ContainerFormatError(
            f"container {c.name}: standard part {s.shape} and infinitesimal part {i.shape} differ in shape"
        )
    return DualMatrix(s, i)


def serialize_container(a: DualMatrix, path: str | Path) -> MatrixContainer:
    """Write ``a`` under the prefix ``path``, creating parent directories."""
    c = MatrixContainer.locate(path) if not Path(path).is_dir() else MatrixContainer.locate(Path(path) / "matrix")
    c.standard_path.parent.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(a.standard, c.standard_path)
    write_matrix_csv(a.infinitesimal, c.infinitesimal_path)
    return c


def is_container(path: str | Path) -> bool:
    p = Path(path)
    if p.is_dir():
        return any(f.name.endswith(STANDARD_SUFFIX) for f in p.iterdir())
    c = MatrixContainer.locate(p)
    return c.standard_path.is_file()
