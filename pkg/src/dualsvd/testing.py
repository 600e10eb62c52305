"""Random dual-matrix generators with controlled structure.

Used by the test-suite, the acceptance checks and the benchmark.  Every
function takes an explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .matrix import DualMatrix


def _gaussian(rng: np.random.Generator, shape, complex_: bool) -> np.ndarray:
    z = rng.standard_normal(shape)
    if complex_:
        z = z + 1j * rng.standard_normal(shape)
    return z


def random_orthonormal(rng: np.random.Generator, m: int, r: int, complex_: bool = True) -> np.ndarray:
    """``m×r`` matrix with orthonormal columns, Haar-distributed."""
    q, rr = np.linalg.qr(_gaussian(rng, (m, r), complex_))
    d = np.diag(rr)
    return q * (d / np.abs(d))[None, :]


def engineered_standard(rng: np.random.Generator, m: int, n: int, sigma: Sequence[float],
                        complex_: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``A_s = U diag(sigma) V*`` with prescribed (possibly repeated) singular values."""
    sigma = np.asarray(sigma, dtype=float)
    r = sigma.size
    u = random_orthonormal(rng, m, r, complex_)
    v = random_orthonormal(rng, n, r, complex_)
    return (u * sigma[None, :]) @ v.conj().T, u, v


def random_multiplicity_pattern(rng: np.random.Generator, rank: int, max_block: int = 3,
                                low: float = 0.5, high: float = 5.0) -> list[float]:
    """Nonincreasing singular values with blocks of random size ``1..max_block``.

    Distinct values are separated by at least a few percent so the
    infinitesimal factors stay well conditioned.
    """
    sizes: list[int] = []
    while sum(sizes) < rank:
        sizes.append(int(rng.integers(1, max_block + 1)))
    sizes[-1] -= sum(sizes) - rank
    p = len(sizes)
    if p == 1:
        levels = np.array([rng.uniform(low, high)])
    else:
        steps = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 1.0, size=p - 1))])
        levels = high - (high - low) * steps / steps[-1]
    return [float(lv) for lv, sz in zip(levels, sizes) for _ in range(sz)]


def feasible_infinitesimal(rng: np.random.Generator, u: np.ndarray, v: np.ndarray,
                           complex_: bool = True) -> np.ndarray:
    """``A_i = U G V* + U H + K V*`` for Gaussian ``G, H, K``; always feasible."""
    m, r = u.shape
    n = v.shape[0]
    g = _gaussian(rng, (r, r), complex_)
    h = _gaussian(rng, (r, n), complex_)
    k = _gaussian(rng, (m, r), complex_)
    return u @ g @ v.conj().T + u @ h + k @ v.conj().T


def random_feasible(rng: np.random.Generator, m: int, n: int, rank: int | None = None,
                    sigma: Sequence[float] | None = None, complex_: bool = True) -> DualMatrix:
    """Dual matrix for which the compact dual SVD exists."""
    if sigma is None:
        r = min(m, n) if rank is None else rank
        sigma = random_multiplicity_pattern(rng, r) if r else []
    a_s, u, v = engineered_standard(rng, m, n, sigma, complex_)
    if len(sigma) == 0:
        return DualMatrix(np.zeros((m, n), a_s.dtype), np.zeros((m, n), a_s.dtype))
    return DualMatrix(a_s, feasible_infinitesimal(rng, u, v, complex_))


def random_infeasible(rng: np.random.Generator, m: int, n: int, rank: int,
                      strength: float = 1.0, complex_: bool = True) -> DualMatrix:
    """Feasible matrix plus a component in both orthogonal complements.

    Needs ``rank < min(m, n)``.  The added component has Frobenius norm
    ``strength``.
    """
    if rank >= min(m, n):
        raise ValueError("an infeasible instance needs a rank-deficient standard part")
    a = random_feasible(rng, m, n, rank=rank, complex_=complex_)
    uu, _, vh = np.linalg.svd(a.standard)
    u_perp = uu[:, rank:]
    v_perp = vh[rank:].conj().T
    c = _gaussian(rng, (m - rank, n - rank), complex_)
    bad = u_perp @ c @ v_perp.conj().T
    bad *= strength / np.linalg.norm(bad)
    return DualMatrix(a.standard, a.infinitesimal + bad)
