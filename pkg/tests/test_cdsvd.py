import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsvd.cdsvd import (
    SingularBlockStructure,
    cdsvd_exists,
    compute_cdsvd,
    dual_factors,
    group_singular_values,
    normalize_gauge,
    project_to_feasible,
    skew_parts,
)
from dualsvd.errors import DegenerateGapError, InfeasibleError, MultiplicityError
from dualsvd.matrix import DualMatrix, conj_transpose, dmat_mul, has_unitary_columns
from dualsvd.scalar import dual_less_than
from dualsvd.testing import (
    engineered_standard,
    feasible_infinitesimal,
    random_feasible,
    random_infeasible,
)

import oracles


def _assert_result_invariants(a, res, tol=1e-10):
    assert oracles.reconstruction_residual(a, res.U, res.Sigma, res.V) <= tol
    assert has_unitary_columns(res.U, tol)
    assert has_unitary_columns(res.V, tol)
    si = res.Sigma.infinitesimal
    assert np.linalg.norm(si - np.diag(np.diag(si))) <= tol
    assert np.all(np.diag(res.Sigma.standard) > 0)
    values = res.singular_values
    for hi, lo in zip(values, values[1:]):
        assert not dual_less_than(hi, lo)


# --- SingularBlockStructure -------------------------------------------------

def test_block_structure_helpers():
    b = SingularBlockStructure((3.0, 2.0, 1.0), (2, 1, 2))
    assert b.rank == 5 and b.p == 3 and not b.is_simple
    assert b.block_ids().tolist() == [0, 0, 1, 2, 2]
    assert b.expanded().tolist() == [3, 3, 2, 1, 1]
    assert [(s.start, s.stop) for s in b.slices()] == [(0, 2), (2, 3), (3, 5)]


@pytest.mark.parametrize("values,mult", [((1.0, 2.0), (1, 1)), ((1.0, 1.0), (1, 1)),
                                          ((1.0, 0.0), (1, 1)), ((1.0,), (0,)), ((1.0,), (1, 1))])
def test_block_structure_rejects_bad_input(values, mult):
    with pytest.raises(ValueError):
        SingularBlockStructure(values, mult)


# --- existence --------------------------------------------------------------

def test_exists_zero_infinitesimal(rng):
    a = DualMatrix.from_standard(rng.standard_normal((5, 3)))
    cert = cdsvd_exists(a)
    assert cert.exists and cert.residual == 0.0


def test_exists_two_by_two_counterexample():
    a = DualMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]]))
    cert = cdsvd_exists(a)
    assert not cert.exists
    assert abs(cert.residual - 1.0) <= 1e-15


def test_exists_admissible_subspace(rng):
    a_s, u, v = engineered_standard(rng, 9, 7, [4.0, 2.0, 1.0])
    a = DualMatrix(a_s, feasible_infinitesimal(rng, u, v))
    cert = cdsvd_exists(a)
    assert cert.exists and cert.residual <= 1e-12


def test_exists_zero_standard_part():
    ai = np.array([[0.0, 2.0], [0.0, 0.0]])
    cert = cdsvd_exists(DualMatrix(np.zeros((2, 2)), ai))
    assert not cert.exists and cert.residual == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(20))
def test_existence_residual_matches_full_svd_oracle(seed):
    rng = np.random.default_rng(seed)
    a = random_infeasible(rng, 7, 5, rank=2, strength=0.3)
    cert = cdsvd_exists(a)
    expected = oracles.existence_residual_full_svd(a.standard, a.infinitesimal, 2)
    assert cert.residual == pytest.approx(expected, rel=1e-10)
    assert cert.residual == pytest.approx(0.3, rel=1e-10)
    assert not cert.exists


def test_project_to_feasible_examples(rng):
    a = random_feasible(rng, 6, 4, rank=3)
    p = project_to_feasible(a)
    np.testing.assert_allclose(p.infinitesimal, a.infinitesimal, atol=1e-12)

    bad = DualMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_array_equal(project_to_feasible(bad).infinitesimal, np.zeros((2, 2)))

    r = random_infeasible(rng, 6, 4, rank=2)
    fixed = project_to_feasible(r)
    np.testing.assert_array_equal(fixed.standard, r.standard)
    assert cdsvd_exists(fixed).residual <= 1e-12


# --- grouping ---------------------------------------------------------------

def test_group_repeated():
    b = group_singular_values([2, 2, 1], tol_group=1e-10)
    assert b.p == 2 and b.distinct_values == (2.0, 1.0) and b.multiplicities == (2, 1)


def test_group_simple():
    assert group_singular_values([3, 2, 1]).multiplicities == (1, 1, 1)


def test_group_near_equal():
    b = group_singular_values([1, 1 - 1e-14, 0.5], tol_group=1e-10)
    assert b.p == 2 and b.multiplicities == (2, 1)


def test_group_drops_below_rank_cut():
    b = group_singular_values([5.0, 1.0, 1e-17])
    assert b.rank == 2


def test_group_requires_sorted():
    with pytest.raises(ValueError):
        group_singular_values([1.0, 2.0])


# --- compute_cdsvd examples -------------------------------------------------

def test_diagonal_example_is_its_own_factorization():
    a = DualMatrix(np.diag([2.0, 1.0]), np.diag([0.5, 0.25]))
    res = compute_cdsvd(a)
    np.testing.assert_allclose(np.abs(res.U.standard), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(res.U.infinitesimal, 0, atol=1e-15)
    np.testing.assert_allclose(res.V.infinitesimal, 0, atol=1e-15)
    np.testing.assert_allclose(res.Sigma.standard, np.diag([2.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(res.Sigma.infinitesimal, np.diag([0.5, 0.25]), atol=1e-15)
    # U_s and V_s carry the same sign per column
    np.testing.assert_allclose(res.U.standard, res.V.standard, atol=1e-15)


def test_zero_infinitesimal_part(rng):
    a = DualMatrix.from_standard(rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4)))
    res = compute_cdsvd(a)
    for part in (res.U.infinitesimal, res.V.infinitesimal, res.Sigma.infinitesimal):
        np.testing.assert_allclose(part, 0, atol=1e-14)
    np.testing.assert_allclose(np.diag(res.Sigma.standard), np.linalg.svd(a.standard, compute_uv=False), rtol=1e-13)


def test_engineered_mixed_multiplicities(rng):
    a_s, u, v = engineered_standard(rng, 8, 5, [3, 3, 2, 1, 1])
    a = DualMatrix(a_s, feasible_infinitesimal(rng, u, v))
    res = compute_cdsvd(a)
    assert res.blocks.multiplicities == (2, 1, 2)
    _assert_result_invariants(a, res)
    assert np.abs(res.Sigma.infinitesimal.imag).max() <= 1e-12


def test_infeasible_raises(rng):
    a = random_infeasible(rng, 6, 5, rank=3)
    with pytest.raises(InfeasibleError) as info:
        compute_cdsvd(a)
    assert info.value.residual == pytest.approx(1.0, rel=1e-10)


def test_wide_input(rng):
    a = random_feasible(rng, 4, 9, rank=3)
    res = compute_cdsvd(a)
    assert res.U.shape == (4, 3) and res.V.shape == (9, 3)
    _assert_result_invariants(a, res)


def test_zero_matrix_gives_empty_factorization():
    a = DualMatrix.zeros(3, 2)
    res = compute_cdsvd(a)
    assert res.rank == 0
    assert res.U.shape == (3, 0) and res.V.shape == (2, 0) and res.Sigma.shape == (0, 0)
    np.testing.assert_array_equal(res.reconstruct().standard, np.zeros((3, 2)))


def test_zero_standard_nonzero_infinitesimal_is_infeasible():
    with pytest.raises(InfeasibleError):
        compute_cdsvd(DualMatrix(np.zeros((2, 2)), np.eye(2)))


def test_degenerate_gap_guard(rng):
    # values 1 and 1 − 1e-14 stay separate under a tiny tol_group, and then collide
    a_s, u, v = engineered_standard(rng, 4, 3, [1.0, 1.0 - 1e-14, 0.5], complex_=False)
    a = DualMatrix(a_s, feasible_infinitesimal(rng, u, v, complex_=False))
    with pytest.raises(DegenerateGapError):
        compute_cdsvd(a, tol_group=1e-17)
    compute_cdsvd(a)  # default grouping merges them


def test_real_input_gives_real_factors(rng):
    a = random_feasible(rng, 7, 4, rank=4, complex_=False)
    res = compute_cdsvd(a)
    assert res.U.is_real and res.V.is_real
    _assert_result_invariants(a, res)


def test_tolerances_recorded(rng):
    a = random_feasible(rng, 5, 4)
    res = compute_cdsvd(a, tol_group=1e-9)
    assert res.tolerances["tol_group"] == 1e-9
    assert res.tolerances["rank_tol"] > 0
    assert res.tolerances["existence_threshold"] == pytest.approx(1e-10 * np.linalg.norm(a.infinitesimal))


# --- invariants -------------------------------------------------------------

shapes = st.tuples(st.integers(1, 12), st.integers(1, 12))


@settings(max_examples=60)
@given(shape=shapes, seed=st.integers(0, 2**32 - 1), cplx=st.booleans(), data=st.data())
def test_invariants_random_feasible(shape, seed, cplx, data):
    m, n = shape
    rank = data.draw(st.integers(1, min(m, n)))
    rng = np.random.default_rng(seed)
    a = random_feasible(rng, m, n, rank=rank, complex_=cplx)
    res = compute_cdsvd(a)
    assert res.rank == rank
    _assert_result_invariants(a, res)

    p, q = skew_parts(res)
    assert np.linalg.norm(p + p.conj().T) <= 1e-12 * max(1.0, np.linalg.norm(p))
    assert np.linalg.norm(q + q.conj().T) <= 1e-12 * max(1.0, np.linalg.norm(q))

    # Σ_i equals the real diagonal of R recomputed from the returned gauge
    r_mat = res.U.standard.conj().T @ a.infinitesimal @ res.V.standard
    np.testing.assert_allclose(np.diag(res.Sigma.infinitesimal), np.real(np.diag(r_mat)), atol=1e-10)
    # the Hermitian part of each diagonal block of R is diagonal after the rotation
    for sl in res.blocks.slices():
        h = 0.5 * (r_mat[sl, sl] + r_mat[sl, sl].conj().T)
        assert np.linalg.norm(h - np.diag(np.diag(h))) <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_rank_decomposition_reproduces_input(seed):
    rng = np.random.default_rng(seed)
    a = random_feasible(rng, 9, 6, rank=4)
    res = compute_cdsvd(a)
    b = res.U
    c = dmat_mul(res.Sigma, conj_transpose(res.V))
    prod = dmat_mul(b, c)
    np.testing.assert_allclose(prod.standard, a.standard, atol=1e-10)
    np.testing.assert_allclose(prod.infinitesimal, a.infinitesimal, atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_pq_agrees_with_blockwise_oracle(seed):
    rng = np.random.default_rng(seed)
    sigma = [4.0, 4.0, 3.0, 2.0, 2.0, 2.0, 1.0]
    a_s, u, v = engineered_standard(rng, 10, 8, sigma)
    a = DualMatrix(a_s, feasible_infinitesimal(rng, u, v))
    blocks = group_singular_values(sigma)
    f = dual_factors(u, v, blocks, a.infinitesimal)
    p, q = oracles.pq_blockwise(f["R"], list(blocks.distinct_values), list(blocks.multiplicities))
    np.testing.assert_allclose(f["P"], p, atol=1e-12)
    np.testing.assert_allclose(f["Q"], q, atol=1e-12)


def _sym(x):
    return x + x.conj().T


@pytest.mark.parametrize("seed", range(10))
def test_simple_values_match_single_multiplicity_closed_form(seed):
    rng = np.random.default_rng(seed)
    a = random_feasible(rng, 7, 5, sigma=[5.0, 3.5, 2.0, 1.2, 0.6])
    res = compute_cdsvd(a)
    assert res.blocks.is_simple
    for r0 in (res, normalize_gauge(res)):
        us, ui = r0.U.standard, r0.U.infinitesimal
        s = np.diag(r0.Sigma.standard).real
        r_mat = us.conj().T @ a.infinitesimal @ r0.V.standard
        gap = s[None, :] ** 2 - s[:, None] ** 2
        np.fill_diagonal(gap, np.inf)
        delta = 1.0 / gap
        psi = np.diag(np.diag(r_mat - r_mat.conj().T) / (2 * s))
        omega = us.conj().T @ ui - _sym(r_mat * s[None, :]) * delta - psi
        assert np.linalg.norm(omega - np.diag(np.diag(omega))) <= 1e-10
        assert np.abs(np.diag(omega).real).max() <= 1e-10


# --- gauge normalization ----------------------------------------------------

def test_normalize_gauge_makes_anchor_entries_real(rng):
    a = random_feasible(rng, 5, 4, sigma=[4.0, 3.0, 2.0, 1.0])
    res = compute_cdsvd(a)
    g = normalize_gauge(res)
    vs, vi = g.V.standard, g.V.infinitesimal
    anchors = np.argmax(np.abs(vs), axis=0)
    cols = np.arange(4)
    assert np.abs(vs[anchors, cols].imag).max() <= 1e-12
    assert np.abs(vi[anchors, cols].imag).max() <= 1e-12
    before = oracles.reconstruction_residual(a, res.U, res.Sigma, res.V)
    after = oracles.reconstruction_residual(a, g.U, g.Sigma, g.V)
    assert abs(after - before) <= 1e-12
    assert has_unitary_columns(g.U) and has_unitary_columns(g.V)


def test_normalize_gauge_noop_on_real_input(rng):
    a = random_feasible(rng, 5, 3, sigma=[3.0, 2.0, 1.0], complex_=False)
    res = compute_cdsvd(a)
    assert normalize_gauge(res) is res


def test_normalize_gauge_is_idempotent(rng):
    a = random_feasible(rng, 6, 4, sigma=[4.0, 3.0, 2.0, 1.0])
    g1 = normalize_gauge(compute_cdsvd(a))
    g2 = normalize_gauge(g1)
    np.testing.assert_allclose(g2.U.infinitesimal, g1.U.infinitesimal, atol=1e-13)
    np.testing.assert_allclose(g2.V.infinitesimal, g1.V.infinitesimal, atol=1e-13)


def test_normalize_gauge_rejects_repeated_values(rng):
    a = random_feasible(rng, 5, 4, sigma=[2.0, 2.0, 1.0])
    with pytest.raises(MultiplicityError):
        normalize_gauge(compute_cdsvd(a))


@pytest.mark.parametrize("seed", range(5))
def test_wide_input_uses_tall_gauge(seed):
    rng = np.random.default_rng(seed)
    a = random_feasible(rng, 5, 11, sigma=[3.0, 3.0, 2.0, 1.0])
    res = compute_cdsvd(a)
    _assert_result_invariants(a, res)
    p, q = skew_parts(res)
    for sl in res.blocks.slices():
        np.testing.assert_allclose(q[sl, sl], 0, atol=1e-12)
        r_tt = res.U.standard[:, sl].conj().T @ a.infinitesimal @ res.V.standard[:, sl]
        sig = res.blocks.expanded()[sl][0]
        np.testing.assert_allclose(p[sl, sl], (r_tt - r_tt.conj().T) / (2 * sig), atol=1e-10)
