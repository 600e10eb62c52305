"""Compact dual SVD ``A = U Σ V*`` of dual complex matrices.

The construction starts from a compact SVD ``A_s = U_s Σ_s V_s*`` of the
standard part.  The factorization exists iff the infinitesimal part has no
component in both orthogonal complements::

    (I − U_s U_s*) A_i (I − V_s V_s*) = 0

When it exists, ``U_s`` and ``V_s`` are rotated inside each block of equal
singular values so that the Hermitian part of ``R = U_s* A_i V_s`` becomes
diagonal, after which ``U_i``, ``V_i`` and ``Σ_i`` follow in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateGapError, InfeasibleError, MultiplicityError
from .matrix import DualMatrix, conj_transpose, dmat_mul
from .scalar import DualScalar

EPS = float(np.finfo(np.float64).eps)
DEFAULT_TOL_GROUP = 1e-8


@dataclass(frozen=True)
class SingularBlockStructure:
    """Distinct singular values ``σ̃_1 > … > σ̃_p > 0`` and their multiplicities."""

    distinct_values: tuple[float, ...]
    multiplicities: tuple[int, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.distinct_values)
        mult = tuple(int(r) for r in self.multiplicities)
        if len(vals) != len(mult):
            raise ValueError("one multiplicity per distinct value required")
        if any(v <= 0 for v in vals) or any(a <= b for a, b in zip(vals, vals[1:])):
            raise ValueError(f"distinct values must be positive and strictly decreasing: {vals}")
        if any(r < 1 for r in mult):
            raise ValueError(f"multiplicities must be positive: {mult}")
        object.__setattr__(self, "distinct_values", vals)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def rank(self) -> int:
        return sum(self.multiplicities)

    @property
    def p(self) -> int:
        return len(self.distinct_values)

    @property
    def is_simple(self) -> bool:
        return all(r == 1 for r in self.multiplicities)

    def block_ids(self) -> np.ndarray:
        """Block index of every one of the ``rank`` columns."""
        return np.repeat(np.arange(self.p), self.multiplicities)

    def expanded(self) -> np.ndarray:
        """``diag(Σ_s)``: each distinct value repeated by its multiplicity."""
        return np.repeat(np.asarray(self.distinct_values, dtype=float), self.multiplicities)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for r in self.multiplicities:
            out.append(slice(start, start + r))
            start += r
        return out


@dataclass(frozen=True)
class ExistenceCertificate:
    exists: bool
    residual: float
    threshold: float


@dataclass(frozen=True, eq=False)
class CdsvdResult:
    """Factors of ``A = U Σ V*``.

    ``sigma_offdiag_mass`` is a diagnostic: the Frobenius norm of the part of
    ``R − PΣ_s − Σ_s Q*`` that the diagonal ``Σ_i`` does not capture.  It is
    at round-off level unless singular values were grouped while only
    approximately equal.
    """

    U: DualMatrix
    Sigma: DualMatrix
    V: DualMatrix
    blocks: SingularBlockStructure
    existence_residual: float = 0.0
    sigma_offdiag_mass: float = 0.0
    tolerances: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.blocks.rank

    @property
    def singular_values(self) -> list[DualScalar]:
        s = np.real(np.diag(self.Sigma.standard))
        i = np.real(np.diag(self.Sigma.infinitesimal))
        return [DualScalar(a, b) for a, b in zip(s, i)]

    def reconstruct(self) -> DualMatrix:
        return dmat_mul(dmat_mul(self.U, self.Sigma), conj_transpose(self.V))


def rank_tolerance(shape: tuple[int, int], sigma_max: float) -> float:
    """Numerical-rank cut ``max(m, n)·eps·σ_1``."""
    return max(shape) * EPS * sigma_max


def compact_svd(a: np.ndarray, rank_tol: float | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD truncated at the numerical rank: ``(U, s, V)`` with ``a ≈ U diag(s) V*``."""
    m, n = a.shape
    if min(m, n) == 0:
        return np.zeros((m, 0), a.dtype), np.zeros(0), np.zeros((n, 0), a.dtype)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    tol = rank_tolerance(a.shape, s[0]) if rank_tol is None else rank_tol
    r = int(np.sum(s > tol))
    return u[:, :r], s[:r], vh[:r].conj().T


def default_threshold(ai: np.ndarray) -> float:
    """Existence cut: ``1e-10·‖A_i‖_F``, or ``1e-12`` when ``A_i = 0``."""
    na = float(np.linalg.norm(ai))
    return 1e-10 * na if na > 0 else 1e-12


def _doubly_projected(u: np.ndarray, v: np.ndarray, ai: np.ndarray) -> np.ndarray:
    left = ai - u @ (u.conj().T @ ai)
    return left - (left @ v) @ v.conj().T


def cdsvd_exists(a: DualMatrix, threshold: float | None = None,
                 rank_tol: float | None = None) -> ExistenceCertificate:
    u, _, v = compact_svd(a.standard, rank_tol)
    residual = float(np.linalg.norm(_doubly_projected(u, v, a.infinitesimal)))
    thr = default_threshold(a.infinitesimal) if threshold is None else threshold
    return ExistenceCertificate(residual <= thr, residual, thr)


def project_to_feasible(a: DualMatrix, rank_tol: float | None = None) -> DualMatrix:
    """Remove the doubly projected component of ``A_i``; ``A_s`` is untouched."""
    u, _, v = compact_svd(a.standard, rank_tol)
    return DualMatrix(a.standard, a.infinitesimal - _doubly_projected(u, v, a.infinitesimal))


def group_singular_values(sigma, tol_group: float = DEFAULT_TOL_GROUP,
                          rank_tol: float | None = None) -> SingularBlockStructure:
    """Cluster a nonincreasing sequence of singular values into blocks.

    Values ``≤ rank_tol`` are dropped (default ``len(sigma)·eps·σ_1``).
    Consecutive values whose gap relative to ``σ_1`` is at most ``tol_group``
    share a block; each block is represented by its mean.
    """
    s = np.asarray(sigma, dtype=float)
    if s.size == 0 or s[0] <= 0:
        return SingularBlockStructure((), ())
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be sorted nonincreasing")
    tol = s.size * EPS * s[0] if rank_tol is None else rank_tol
    s = s[s > tol]
    if s.size == 0:
        return SingularBlockStructure((), ())
    values: list[float] = []
    mult: list[int] = []
    start = 0
    for j in range(1, s.size + 1):
        if j == s.size or (s[j - 1] - s[j]) / s[0] > tol_group:
            values.append(float(np.mean(s[start:j])))
            mult.append(j - start)
            start = j
    return SingularBlockStructure(tuple(values), tuple(mult))


def _check_gaps(blocks: SingularBlockStructure) -> None:
    v = np.asarray(blocks.distinct_values)
    if v.size < 2:
        return
    gaps = v[:-1] ** 2 - v[1:] ** 2
    floor = 1e3 * EPS * v[0] ** 2
    if np.any(gaps < floor):
        j = int(np.argmin(gaps))
        raise DegenerateGapError(
            f"singular values {v[j]:.17g} and {v[j + 1]:.17g} are too close to separate "
            f"(σ² gap {gaps[j]:.3g} < {floor:.3g}); increase tol_group"
        )


def _hermitian_eig_desc(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian block, eigenvalues nonincreasing.

    Each eigenvector's largest-magnitude component is made real positive.
    """
    w, x = np.linalg.eigh(h)
    w, x = w[::-1], x[:, ::-1]
    idx = np.argmax(np.abs(x), axis=0)
    pivot = x[idx, np.arange(x.shape[1])]
    x = x * (np.abs(pivot) / pivot)[None, :]
    return w, x


def dual_factors(us: np.ndarray, vs: np.ndarray, blocks: SingularBlockStructure,
                 ai: np.ndarray) -> dict:
    """Infinitesimal factors for a fixed standard triple ``(U_s, Σ̃, V_s)``.

    Carries out the gauge rotation inside repeated-value blocks and the
    closed-form assembly of ``P``, ``Q``, ``U_i``, ``V_i`` and ``Σ_i`` with the
    free skew-Hermitian block matrix set to zero.  ``A_i`` need not satisfy
    the existence condition: the factors then reproduce
    ``A_i − (I − U_sU_s*) A_i (I − V_sV_s*)``.

    Returns a dict with keys ``us, vs, ui, vi, sigma_s, sigma_i, R, P, Q,
    offdiag``.
    """
    sig = blocks.expanded()
    ids = blocks.block_ids()
    cplx = np.iscomplexobj(us) or np.iscomplexobj(vs) or np.iscomplexobj(ai)
    dtype = np.complex128 if cplx else np.float64
    us = us.astype(dtype)
    vs = vs.astype(dtype)
    ai = ai.astype(dtype)

    r_mat = us.conj().T @ (ai @ vs)

    # rotate inside each block so the Hermitian part of R_tt is diagonal
    x = np.eye(blocks.rank, dtype=dtype)
    for sl, mult in zip(blocks.slices(), blocks.multiplicities):
        if mult == 1:
            continue
        rtt = r_mat[sl, sl]
        _, xt = _hermitian_eig_desc(0.5 * (rtt + rtt.conj().T))
        x[sl, sl] = xt
    if not np.array_equal(x, np.eye(blocks.rank)):
        us = us @ x
        vs = vs @ x
        r_mat = x.conj().T @ r_mat @ x

    same = ids[:, None] == ids[None, :]
    si = sig[:, None]
    sj = sig[None, :]
    denom = np.where(same, 1.0, sj ** 2 - si ** 2)
    rh = r_mat.conj().T
    p_off = (sj * r_mat + si * rh) / denom
    q_off = (si * r_mat + sj * rh) / denom
    p_mat = np.where(same, (r_mat - rh) / (2.0 * si), p_off)
    q_mat = np.where(same, 0.0, q_off)

    inv_sig = 1.0 / sig
    ui = us @ p_mat + (ai @ vs - us @ r_mat) * inv_sig[None, :]
    vi = vs @ q_mat + (ai.conj().T @ us - vs @ rh) * inv_sig[None, :]
    sigma_i = np.real(np.diag(r_mat)).copy()

    resid = r_mat - p_mat * sig[None, :] - sig[:, None] * q_mat.conj().T
    offdiag = float(np.linalg.norm(resid - np.diag(sigma_i)))
    return dict(us=us, vs=vs, ui=ui, vi=vi, sigma_s=sig, sigma_i=sigma_i,
                R=r_mat, P=p_mat, Q=q_mat, offdiag=offdiag)


def _swap_sides(t: CdsvdResult) -> CdsvdResult:
    """Turn a factorization of ``A*`` into one of ``A`` with the same gauge as
    the tall case: the within-block skew part sits in ``U``, not ``V``.

    Swapping the sides alone leaves the blockwise skew term of ``V_s*V_i``
    in ``V``; adding ``Ω = −blockdiag(V_s*V_i)`` to both sides moves it over,
    which leaves ``UΣV*`` unchanged.
    """
    us, ui = t.V.standard, t.V.infinitesimal
    vs, vi = t.U.standard, t.U.infinitesimal
    q = vs.conj().T @ vi
    omega = np.zeros_like(q)
    for sl in t.blocks.slices():
        omega[sl, sl] = -q[sl, sl]
    return replace(t, U=DualMatrix(us, ui + us @ omega), V=DualMatrix(vs, vi + vs @ omega))


def compute_cdsvd(a: DualMatrix, *, tol_group: float = DEFAULT_TOL_GROUP,
                  rank_tol: float | None = None,
                  threshold: float | None = None) -> CdsvdResult:
    """Compact dual SVD of ``a``.

    Raises :class:`~dualsvd.errors.InfeasibleError` when the existence
    residual exceeds ``threshold`` and
    :class:`~dualsvd.errors.DegenerateGapError` when two grouped blocks are
    numerically indistinguishable.  Wide inputs are handled through the
    conjugate transpose.
    """
    m, n = a.shape
    if m < n:
        t = compute_cdsvd(conj_transpose(a), tol_group=tol_group, rank_tol=rank_tol, threshold=threshold)
        return _swap_sides(t)

    dtype = a.dtype
    u0, s0, v0 = compact_svd(a.standard, rank_tol)
    tau = rank_tolerance(a.shape, s0[0]) if (rank_tol is None and s0.size) else rank_tol
    residual = float(np.linalg.norm(_doubly_projected(u0, v0, a.infinitesimal)))
    thr = default_threshold(a.infinitesimal) if threshold is None else threshold
    tolerances = {"rank_tol": None if tau is None else float(tau), "tol_group": tol_group,
                  "existence_threshold": thr}
    if residual > thr:
        raise InfeasibleError(residual, thr)

    blocks = group_singular_values(s0, tol_group, rank_tol=0.0)
    if blocks.rank == 0:
        empty = DualMatrix.zeros(0, 0, dtype)
        return CdsvdResult(DualMatrix.zeros(m, 0, dtype), empty, DualMatrix.zeros(n, 0, dtype),
                           blocks, residual, 0.0, tolerances)
    _check_gaps(blocks)

    f = dual_factors(u0, v0, blocks, a.infinitesimal)
    out_dtype = np.result_type(dtype, f["us"].dtype)
    if not np.iscomplexobj(a.standard) and not np.iscomplexobj(a.infinitesimal):
        out_dtype = np.float64
    cast = (lambda z: np.real(z)) if out_dtype == np.float64 else (lambda z: z)
    U = DualMatrix(cast(f["us"]), cast(f["ui"]))
    V = DualMatrix(cast(f["vs"]), cast(f["vi"]))
    Sigma = DualMatrix(np.diag(f["sigma_s"]), np.diag(f["sigma_i"]))
    return CdsvdResult(U, Sigma, V, blocks, residual, f["offdiag"], tolerances)


def skew_parts(result: CdsvdResult) -> tuple[np.ndarray, np.ndarray]:
    """``P = U_s* U_i`` and ``Q = V_s* V_i`` recovered from a result."""
    us, ui = result.U.standard, result.U.infinitesimal
    vs, vi = result.V.standard, result.V.infinitesimal
    return us.conj().T @ ui, vs.conj().T @ vi


def normalize_gauge(result: CdsvdResult, real_tol: float = 1e-14) -> CdsvdResult:
    """Fix the remaining diagonal gauge so that one anchor entry per column of
    ``V_i`` is real.

    The anchor of column ``t`` is the largest-magnitude entry of ``V_s(:, t)``.
    If that entry is not already real, the whole dual column pair
    ``(U(:,t), V(:,t))`` is first multiplied by a unit phase making it real
    positive.  Then ``Ω = diag(iω_t)`` with ``ω_t = −Im V_i(ℓ_t,t) / V_s(ℓ_t,t)``
    is added: ``U_i += U_s Ω`` and ``V_i += V_s Ω``.  Requires simple singular
    values.
    """
    if not result.blocks.is_simple:
        raise MultiplicityError(
            f"gauge normalization needs simple singular values, got multiplicities {result.blocks.multiplicities}"
        )
    r = result.rank
    if r == 0:
        return result
    us = np.array(result.U.standard, dtype=np.complex128)
    ui = np.array(result.U.infinitesimal, dtype=np.complex128)
    vs = np.array(result.V.standard, dtype=np.complex128)
    vi = np.array(result.V.infinitesimal, dtype=np.complex128)

    cols = np.arange(r)
    anchors = np.argmax(np.abs(vs), axis=0)
    piv = vs[anchors, cols]
    needs = np.abs(piv.imag) > real_tol * np.abs(piv)
    phase = np.where(needs, np.abs(piv) / np.where(piv == 0, 1, piv), 1.0)
    us, ui, vs, vi = (z * phase[None, :] for z in (us, ui, vs, vi))

    piv = vs[anchors, cols].real
    omega = -vi[anchors, cols].imag / piv
    ui = ui + us * (1j * omega)[None, :]
    vi = vi + vs * (1j * omega)[None, :]
    vi[anchors, cols] = vi[anchors, cols].real

    if result.U.is_real and result.V.is_real and not np.any(needs) and np.all(omega == 0):
        return result
    return replace(result, U=DualMatrix(us, ui), V=DualMatrix(vs, vi))
