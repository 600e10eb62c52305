"""Dense dual complex matrices ``A = A_s + A_i ε``.

A :class:`DualMatrix` holds two equal-shape numpy arrays.  Arithmetic follows
``ε² = 0``; the representative form ``[[A_s, 0], [A_i, A_s]]`` turns every
dual product into an ordinary block product and is used as an independent
oracle throughout the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularStandardPartError
from .scalar import DualScalar

#: Relative scale of the "A_s ≠ B_s" branch cut in the norm and quasi-metric.
BRANCH_TOL = 1e-12


def _freeze(x: np.ndarray) -> np.ndarray:
    x = np.array(x, copy=True)
    x.setflags(write=False)
    return x


def _common_dtype(*arrays: np.ndarray) -> np.dtype:
    if any(np.iscomplexobj(a) for a in arrays):
        return np.dtype(np.complex128)
    return np.dtype(np.float64)


@dataclass(frozen=True, eq=False)
class DualMatrix:
    """Immutable pair ``(standard, infinitesimal)`` of dense matrices.

    Both parts share one dtype: ``float64`` when both inputs are real,
    ``complex128`` otherwise.  Entries must be finite.
    """

    standard: np.ndarray
    infinitesimal: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.standard)
        i = np.asarray(self.infinitesimal)
        if s.ndim != 2 or i.ndim != 2:
            raise DimensionError(f"dual matrix parts must be 2-D, got ndim {s.ndim} and {i.ndim}")
        if s.shape != i.shape:
            raise DimensionError(f"standard part {s.shape} and infinitesimal part {i.shape} differ in shape")
        dtype = _common_dtype(s, i)
        s = s.astype(dtype)
        i = i.astype(dtype)
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(i))):
            raise ValueError("dual matrix entries must be finite")
        object.__setattr__(self, "standard", _freeze(s))
        object.__setattr__(self, "infinitesimal", _freeze(i))

    @classmethod
    def from_standard(cls, a: np.ndarray) -> "DualMatrix":
        a = np.asarray(a)
        return cls(a, np.zeros_like(a))

    @classmethod
    def zeros(cls, m: int, n: int, dtype=np.float64) -> "DualMatrix":
        return cls(np.zeros((m, n), dtype), np.zeros((m, n), dtype))

    @classmethod
    def identity(cls, n: int, dtype=np.float64) -> "DualMatrix":
        return cls(np.eye(n, dtype=dtype), np.zeros((n, n), dtype))

    @property
    def shape(self) -> tuple[int, int]:
        return self.standard.shape

    @property
    def dtype(self) -> np.dtype:
        return self.standard.dtype

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.standard)

    @property
    def H(self) -> "DualMatrix":
        return conj_transpose(self)

    @property
    def T(self) -> "DualMatrix":
        return DualMatrix(self.standard.T, self.infinitesimal.T)

    def __add__(self, other: "DualMatrix") -> "DualMatrix":
        if not isinstance(other, DualMatrix):
            return NotImplemented
        _check_same_shape(self, other)
        return DualMatrix(self.standard + other.standard, self.infinitesimal + other.infinitesimal)

    def __sub__(self, other: "DualMatrix") -> "DualMatrix":
        if not isinstance(other, DualMatrix):
            return NotImplemented
        _check_same_shape(self, other)
        return DualMatrix(self.standard - other.standard, self.infinitesimal - other.infinitesimal)

    def __neg__(self) -> "DualMatrix":
        return DualMatrix(-self.standard, -self.infinitesimal)

    def __matmul__(self, other: "DualMatrix") -> "DualMatrix":
        if not isinstance(other, DualMatrix):
            return NotImplemented
        return dmat_mul(self, other)

    def scale(self, c: float | complex | DualScalar) -> "DualMatrix":
        if isinstance(c, DualScalar):
            return DualMatrix(c.standard * self.standard,
                              c.standard * self.infinitesimal + c.infinitesimal * self.standard)
        return DualMatrix(c * self.standard, c * self.infinitesimal)

    def __getitem__(self, key) -> "DualMatrix":
        s = self.standard[key]
        i = self.infinitesimal[key]
        if s.ndim != 2:
            raise IndexError("dual matrix indexing must keep two dimensions")
        return DualMatrix(s, i)

    def representative_form(self) -> np.ndarray:
        return representative_form(self)

    def allclose(self, other: "DualMatrix", rtol: float = 1e-10, atol: float = 1e-12) -> bool:
        return (self.shape == other.shape
                and np.allclose(self.standard, other.standard, rtol=rtol, atol=atol)
                and np.allclose(self.infinitesimal, other.infinitesimal, rtol=rtol, atol=atol))

    def array_equal(self, other: "DualMatrix") -> bool:
        return (np.array_equal(self.standard, other.standard)
                and np.array_equal(self.infinitesimal, other.infinitesimal))

    def __repr__(self) -> str:
        return f"DualMatrix(shape={self.shape}, dtype={self.dtype})"


def _check_same_shape(a: DualMatrix, b: DualMatrix) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def dmat_mul(a: DualMatrix, b: DualMatrix) -> DualMatrix:
    """``(A_s B_s) + (A_s B_i + A_i B_s) ε``."""
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    return DualMatrix(
        a.standard @ b.standard,
        a.standard @ b.infinitesimal + a.infinitesimal @ b.standard,
    )


def conj_transpose(a: DualMatrix) -> DualMatrix:
    return DualMatrix(a.standard.conj().T, a.infinitesimal.conj().T)


def representative_form(a: DualMatrix) -> np.ndarray:
    """Block lower-triangular Toeplitz matrix ``[[A_s, 0], [A_i, A_s]]``."""
    m, n = a.shape
    out = np.zeros((2 * m, 2 * n), dtype=a.dtype)
    out[:m, :n] = a.standard
    out[m:, :n] = a.infinitesimal
    out[m:, n:] = a.standard
    return out


def from_representative_form(block: np.ndarray) -> DualMatrix:
    """Inverse of :func:`representative_form`; the diagonal blocks must agree."""
    block = np.asarray(block)
    two_m, two_n = block.shape
    if two_m % 2 or two_n % 2:
        raise DimensionError(f"representative form must have even dimensions, got {block.shape}")
    m, n = two_m // 2, two_n // 2
    s = block[:m, :n]
    if not np.allclose(block[m:, n:], s) or np.any(block[:m, n:] != 0):
        raise ValueError("block matrix is not a representative form")
    return DualMatrix(s, block[m:, :n])


def representative_conj_transpose(block: np.ndarray) -> np.ndarray:
    """Conjugate transpose *in dual arithmetic* of a representative form.

    This is ``[[A_s*, 0], [A_i*, A_s*]]``, not the plain conjugate transpose of
    the block matrix.
    """
    a = from_representative_form(block)
    return representative_form(conj_transpose(a))


def dual_inverse(c: DualMatrix, cond_limit: float = 1e12) -> DualMatrix:
    """``C⁻¹ = C_s⁻¹ − C_s⁻¹ C_i C_s⁻¹ ε``."""
    n, n2 = c.shape
    if n != n2:
        raise DimensionError(f"dual_inverse needs a square matrix, got {c.shape}")
    cond = np.linalg.cond(c.standard) if n else 1.0
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularStandardPartError(f"standard part is singular (condition number {cond:.3g})")
    inv_s = np.linalg.inv(c.standard)
    return DualMatrix(inv_s, -inv_s @ c.infinitesimal @ inv_s)


def has_unitary_columns(b: DualMatrix, tol: float = 1e-10) -> bool:
    """True iff ``B*B = I`` in dual arithmetic, within ``tol`` per part."""
    return max(unitarity_residuals(b)) <= tol


def unitarity_residuals(b: DualMatrix) -> tuple[float, float]:
    """``(‖B_s*B_s − I‖_F, ‖B_s*B_i + B_i*B_s‖_F)``."""
    bs, bi = b.standard, b.infinitesimal
    p = b.shape[1]
    gram = bs.conj().T @ bs
    cross = bs.conj().T @ bi
    return (float(np.linalg.norm(gram - np.eye(p))),
            float(np.linalg.norm(cross + cross.conj().T)))


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Real inner product ``Re trace(X* Y)``."""
    return float(np.real(np.vdot(x, y)))


def dual_frobenius_norm(a: DualMatrix, branch_tol: float = BRANCH_TOL) -> DualScalar:
    ns = float(np.linalg.norm(a.standard))
    if ns > branch_tol:
        return DualScalar(ns, inner(a.standard, a.infinitesimal) / ns)
    return DualScalar(0.0, float(np.linalg.norm(a.infinitesimal)))


def quasi_metric(a: DualMatrix, b: DualMatrix, branch_tol: float = BRANCH_TOL) -> DualScalar:
    """The dual-valued distance ``d*``.

    Standard part ``‖A_s − B_s‖_F``; infinitesimal part
    ``‖A_i − B_i‖²_F / (2‖A_s − B_s‖_F)``.  When the standard parts coincide
    (up to a scale-aware cut) the distance is ``‖A_i − B_i‖_F ε``.
    """
    _check_same_shape(a, b)
    ds = float(np.linalg.norm(a.standard - b.standard))
    di = float(np.linalg.norm(a.infinitesimal - b.infinitesimal))
    scale = max(1.0, float(np.linalg.norm(a.standard)), float(np.linalg.norm(b.standard)))
    if ds > branch_tol * scale:
        return DualScalar(ds, di * di / (2.0 * ds))
    return DualScalar(0.0, di)


def dual_frobenius_distance(a: DualMatrix, b: DualMatrix) -> DualScalar:
    """Metric induced by the dual Frobenius norm, ``‖A − B‖_F``."""
    return dual_frobenius_norm(a - b)
