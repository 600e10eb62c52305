"""Optimal rank-k approximation under ``d*`` and the dual Moore-Penrose inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cdsvd import (
    CdsvdResult,
    cdsvd_exists,
    compact_svd,
    compute_cdsvd,
    dual_factors,
    group_singular_values,
    rank_tolerance,
)
from .errors import DimensionError, InfeasibleError
from .matrix import DualMatrix, conj_transpose, dmat_mul, dual_frobenius_norm, quasi_metric
from .scalar import DualScalar, dual_leq_tol, dual_mul


@dataclass(frozen=True, eq=False)
class RankKApproximation:
    """``approx = A_s^(k) + (A_i − P⊥_U A_i P⊥_V) ε``.

    ``standard_error`` is ``‖A_s − A_s^(k)‖_F`` and ``infinitesimal_error`` is
    ``‖P⊥_U A_i P⊥_V‖_F``, where the projectors are onto the complements of the
    leading k singular subspaces of ``A_s``.
    """

    approx: DualMatrix
    k: int
    standard_error: float
    infinitesimal_error: float

    @property
    def distance(self) -> DualScalar:
        """``d*(A, approx)`` computed from the two errors."""
        es, ei = self.standard_error, self.infinitesimal_error
        if es > 0:
            return DualScalar(es, ei * ei / (2.0 * es))
        return DualScalar(0.0, ei)


def numerical_rank(a: np.ndarray) -> int:
    return compact_svd(a)[1].size


def _leading_subspaces(a: DualMatrix, k: int):
    m, n = a.shape
    u, s, vh = np.linalg.svd(a.standard, full_matrices=False)
    r = int(np.sum(s > rank_tolerance(a.shape, s[0]))) if s.size else 0
    if not 1 <= k <= r:
        raise DimensionError(f"k must lie in [1, rank(A_s)] = [1, {r}], got {k}")
    return u[:, :k], s, vh[:k].conj().T


def rank_k_approx(a: DualMatrix, k: int) -> RankKApproximation:
    """Best rank-k dual approximation of ``a`` in the quasi-metric ``d*``."""
    uk, s, vk = _leading_subspaces(a, k)
    a_sk = (uk * s[:k][None, :]) @ vk.conj().T
    ai = a.infinitesimal
    left = ai - uk @ (uk.conj().T @ ai)
    both = left - (left @ vk) @ vk.conj().T
    approx = DualMatrix(a_sk, ai - both)
    return RankKApproximation(
        approx=approx,
        k=k,
        standard_error=float(np.sqrt(np.sum(s[k:] ** 2))),
        infinitesimal_error=float(np.linalg.norm(both)),
    )


def optimal_rank_k_factors(a: DualMatrix, k: int, *, uk: np.ndarray | None = None,
                           vk: np.ndarray | None = None, tol_group: float = 1e-8) -> CdsvdResult:
    """Dual factors ``U Σ V*`` of the optimal rank-k approximation.

    ``uk`` and ``vk`` optionally supply another orthonormal basis pair of the
    leading singular subspaces (any blockwise unitary regauging of the thin
    SVD); the product is independent of that choice.
    """
    u0, s, v0 = _leading_subspaces(a, k)
    uk = u0 if uk is None else uk
    vk = v0 if vk is None else vk
    blocks = group_singular_values(s[:k], tol_group, rank_tol=0.0)
    f = dual_factors(uk, vk, blocks, a.infinitesimal)
    real = a.is_real and np.isrealobj(uk) and np.isrealobj(vk)
    cast = np.real if real else (lambda z: z)
    return CdsvdResult(
        U=DualMatrix(cast(f["us"]), cast(f["ui"])),
        Sigma=DualMatrix(np.diag(f["sigma_s"]), np.diag(f["sigma_i"])),
        V=DualMatrix(cast(f["vs"]), cast(f["vi"])),
        blocks=blocks,
        sigma_offdiag_mass=f["offdiag"],
    )


@dataclass(frozen=True)
class TruncationComparison:
    optimal_distance: DualScalar
    truncated_distance: DualScalar
    optimal_not_worse: bool


def truncated_cdsvd_vs_optimal(a: DualMatrix, k: int, *, tol_group: float = 1e-8) -> TruncationComparison:
    """Compare the first k CDSVD terms with the ``d*``-optimal rank-k approximation.

    Raises ``AssertionError`` if the optimal one is beaten, which would
    indicate a defect rather than a property of the input.
    """
    res = compute_cdsvd(a, tol_group=tol_group)
    if not 1 <= k <= res.rank:
        raise DimensionError(f"k must lie in [1, {res.rank}], got {k}")
    trunc = dmat_mul(dmat_mul(res.U[:, :k], res.Sigma[:k, :k]), conj_transpose(res.V[:, :k]))
    opt = rank_k_approx(a, k)
    d_opt = quasi_metric(a, opt.approx)
    d_tr = quasi_metric(a, trunc)
    scale = max(1.0, float(np.linalg.norm(a.standard)))
    ok = dual_leq_tol(d_opt, d_tr, atol_standard=1e-12 * scale, atol_infinitesimal=1e-10 * scale)
    if not ok:
        raise AssertionError(f"optimal distance {d_opt} exceeds truncated distance {d_tr}")
    return TruncationComparison(d_opt, d_tr, ok)


def random_rank_k_candidate(a: DualMatrix, k: int, step: float, rng: np.random.Generator,
                            perturb_standard: bool = True) -> DualMatrix:
    """A feasible rank-k dual matrix near the optimum.

    With ``perturb_standard`` the leading singular bases are moved along a
    random direction and re-orthonormalized and the singular values are
    scaled, all by ``step``; the infinitesimal factors are then random.
    Otherwise the optimal standard part is kept and only the infinitesimal
    part moves by ``step`` along a random tangent direction, which probes the
    ``ε`` tie-break of the order.
    """
    uk, s, vk = _leading_subspaces(a, k)
    cplx = not a.is_real

    def gauss(shape):
        z = rng.standard_normal(shape)
        return z + 1j * rng.standard_normal(shape) if cplx else z

    if not perturb_standard:
        opt = rank_k_approx(a, k).approx
        d = uk @ gauss((k, a.shape[1])) + gauss((a.shape[0], k)) @ vk.conj().T
        d *= step / np.linalg.norm(d)
        return DualMatrix(opt.standard, opt.infinitesimal + d)

    u = np.linalg.qr(uk + step * gauss(uk.shape))[0]
    v = np.linalg.qr(vk + step * gauss(vk.shape))[0]
    sig = s[:k] * np.exp(step * rng.standard_normal(k))
    kk = gauss((k, k))
    ui = u @ (kk - kk.conj().T) / 2 + (gauss(u.shape) - u @ (u.conj().T @ gauss(u.shape)))
    kv = gauss((k, k))
    vi = v @ (kv - kv.conj().T) / 2 + (gauss(v.shape) - v @ (v.conj().T @ gauss(v.shape)))
    si = rng.standard_normal(k)
    U = DualMatrix(u, ui)
    S = DualMatrix(np.diag(sig), np.diag(si))
    V = DualMatrix(v, vi)
    return dmat_mul(dmat_mul(U, S), conj_transpose(V))


@dataclass(frozen=True)
class OptimalityProbe:
    candidates: int
    violations: int
    optimal_distance: DualScalar


def optimality_probe(a: DualMatrix, k: int, candidates: int, rng: np.random.Generator,
                     steps=(1e-3, 1e-1, 1.0)) -> OptimalityProbe:
    """Count random rank-k candidates that beat :func:`rank_k_approx` under ``d*``."""
    d_opt = rank_k_approx(a, k).distance
    scale = max(1.0, float(np.linalg.norm(a.standard)))
    bad = 0
    for j in range(candidates):
        step = steps[j % len(steps)]
        cand = random_rank_k_candidate(a, k, step, rng, perturb_standard=bool(j % 2))
        d = quasi_metric(a, cand)
        if not dual_leq_tol(d_opt, d, atol_standard=1e-12 * scale, atol_infinitesimal=1e-12 * scale):
            bad += 1
    return OptimalityProbe(candidates, bad, d_opt)


@dataclass(frozen=True, eq=False)
class DmpgiResult:
    pinv: DualMatrix
    existence_residual: float


def dmpgi(a: DualMatrix, threshold: float | None = None) -> DmpgiResult:
    """Dual Moore-Penrose inverse in closed form.

    Raises :class:`~dualsvd.errors.InfeasibleError` exactly when
    :func:`~dualsvd.cdsvd.cdsvd_exists` says no.
    """
    cert = cdsvd_exists(a, threshold)
    if not cert.exists:
        raise InfeasibleError(cert.residual, cert.threshold, what="dual Moore-Penrose inverse")
    m, n = a.shape
    u, s, v = compact_svd(a.standard)
    dtype = a.dtype
    if s.size == 0:
        return DmpgiResult(DualMatrix.zeros(n, m, dtype), cert.residual)
    uh, vh = u.conj().T, v.conj().T
    ai_h = a.infinitesimal.conj().T
    inv1 = 1.0 / s
    inv2 = inv1 * inv1
    x_s = (v * inv1[None, :]) @ uh
    # (I − VV*) A_i* U Σ⁻² U*
    t1 = ai_h @ u
    t1 = (t1 - v @ (vh @ t1)) * inv2[None, :] @ uh
    # V Σ⁻² V* A_i* (I − UU*)
    t2 = vh @ ai_h
    t2 = (v * inv2[None, :]) @ (t2 - (t2 @ u) @ uh)
    # V Σ⁻¹ U* A_i V Σ⁻¹ U*
    t3 = x_s @ a.infinitesimal @ x_s
    return DmpgiResult(DualMatrix(x_s, t1 + t2 - t3), cert.residual)


def penrose_residuals(a: DualMatrix, x: DualMatrix) -> dict[str, float]:
    """Frobenius norms (of representative forms) of the four Penrose defects."""
    def rnorm(d: DualMatrix) -> float:
        return float(np.hypot(np.sqrt(2.0) * np.linalg.norm(d.standard), np.linalg.norm(d.infinitesimal)))

    ax = dmat_mul(a, x)
    xa = dmat_mul(x, a)
    return {
        "AXA-A": rnorm(dmat_mul(ax, a) - a),
        "XAX-X": rnorm(dmat_mul(xa, x) - x),
        "(AX)*-AX": rnorm(conj_transpose(ax) - ax),
        "(XA)*-XA": rnorm(conj_transpose(xa) - xa),
    }


@dataclass(frozen=True)
class DegeneracyReport:
    values: tuple[DualScalar, ...]
    infinitesimal_spread: float


def frobenius_rank_k_degeneracy_demo(a: DualMatrix, k: int, trials: int,
                                     rng: np.random.Generator) -> DegeneracyReport:
    """Squared dual Frobenius distance to many rank-k factorizations sharing
    the optimal standard part.

    Infinitesimal factors are drawn as ``U_s K + (I − U_sU_s*) W`` with
    ``K`` skew-Hermitian (so the dual columns stay unitary) plus a random real
    ``Σ_i``.  The ``ε`` part of the squared distance never changes, which is
    why this metric cannot select the infinitesimal factors.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    uk, s, vk = _leading_subspaces(a, k)
    sk = np.diag(s[:k])
    cplx = not a.is_real

    def gauss(shape):
        z = rng.standard_normal(shape)
        return z + 1j * rng.standard_normal(shape) if cplx else z

    def tangent(base):
        kk = gauss((k, k))
        w = gauss(base.shape)
        return base @ (kk - kk.conj().T) / 2 + w - base @ (base.conj().T @ w)

    values = []
    for _ in range(trials):
        U = DualMatrix(uk, tangent(uk))
        V = DualMatrix(vk, tangent(vk))
        S = DualMatrix(sk, np.diag(rng.standard_normal(k)))
        b = dmat_mul(dmat_mul(U, S), conj_transpose(V))
        nrm = dual_frobenius_norm(a - b)
        values.append(dual_mul(nrm, nrm))
    eps_parts = [v.infinitesimal for v in values]
    return DegeneracyReport(tuple(values), float(max(eps_parts) - min(eps_parts)))
