# tests/test_polar.py
import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.core.funbackend import Domain1D, diag_from, pw_equal, pw_from_pieces, pw_poly
from src.core.hilbmod import op_adjoint, op_distance, op_identity, op_norm
from src.core.matalg import BlockProfile
from src.core.polar import (
    adjoint_polar_check,
    closed_range_suite,
    cor32_check,
    generalized_inverse,
    polar_decompose,
    proof_formula_inverse,
    transform_polar_check,
    verify_thm31,
)
from src.core.regular import RegularOperator, btransform, graded_family
from src.core.sampling import diag_corpus
from src.shared.errors import NotComplemented, ShapeMismatch

UNIT = Domain1D.of(("0", "1"))


def test_nilpotent_polar(scalar_operator, tol):
    b = scalar_operator([[0.0, 1.0], [0.0, 0.0]])
    pd = polar_decompose(b, tol)
    # operators act on rows, so the nilpotent is its own partial isometry
    assert_allclose(pd.v.blocks[0], [[0.0, 1.0], [0.0, 0.0]], atol=1e-12)
    assert_allclose(pd.abs_t.blocks[0], np.diag([1.0, 0.0]), atol=1e-12)
    assert_allclose(pd.initial.blocks[0], np.diag([1.0, 0.0]), atol=1e-12)
    assert_allclose(pd.final.blocks[0], np.diag([0.0, 1.0]), atol=1e-12)
    assert max(pd.residuals.values()) <= 1e-12


def test_nilpotent_inverse_is_adjoint(scalar_operator, tol):
    b = scalar_operator([[0.0, 1.0], [0.0, 0.0]])
    gi = generalized_inverse(b, tol)
    assert_allclose(gi.s.blocks[0], [[0.0, 0.0], [1.0, 0.0]], atol=1e-12)
    assert gi.bounded
    assert max(gi.residuals.values()) <= 1e-12


def test_identity_and_positive_diagonal(scalar_operator, tol):
    identity = op_identity(BlockProfile.of(1, 2), 3)
    pd = polar_decompose(identity, tol)
    assert op_distance(pd.v, identity) <= 1e-12
    assert op_distance(pd.abs_t, identity) <= 1e-12

    diag = scalar_operator(np.diag([3.0, 4.0]))
    pd = polar_decompose(diag, tol)
    assert op_distance(pd.v, op_identity(diag.profile, 2)) <= 1e-12
    assert_allclose(pd.abs_t.blocks[0], np.diag([3.0, 4.0]), atol=1e-12)


def test_rank_deficient_inverse(scalar_operator, tol):
    gi = generalized_inverse(scalar_operator(np.diag([2.0, 0.0])), tol)
    assert_allclose(gi.s.blocks[0], np.diag([0.5, 0.0]), atol=1e-12)


def test_zero_operator(scalar_operator, tol):
    zero = scalar_operator(np.zeros((2, 3)))
    pd = polar_decompose(zero, tol)
    assert op_norm(pd.v) == 0.0
    assert op_norm(pd.abs_t) == 0.0
    report = verify_thm31(zero, tol)
    assert report.cond_i and report.cond_ii and report.cond_iii


def test_proof_formula_matches_svd(corpus, tol):
    for b in corpus[:15]:
        s = generalized_inverse(b, tol).s
        assert op_distance(proof_formula_inverse(b, tol), s) <= 1e-8 * (1.0 + op_norm(s))


def test_equivalence_holds_over_compact_coefficients(corpus, tol):
    for b in corpus:
        report = verify_thm31(b, tol)
        assert report.cond_i and report.cond_ii and report.cond_iii
        assert report.equivalent
        assert report.certificate is None
        assert max(report.residuals.values()) <= tol.identity_tol


def test_equivalence_accepts_regular_and_graded(scalar_operator, tol):
    t = RegularOperator.from_transform(scalar_operator([[0.6, 0.0], [0.0, 0.0]]), tol)
    assert verify_thm31(t, tol).cond_i
    graded = verify_thm31(graded_family("inv_n", 5, BlockProfile.of(1), 2), tol)
    assert graded.cond_i and graded.cond_ii and graded.cond_iii
    assert "graph_decomposition" in graded.residuals


def test_corollaries(corpus, tol):
    for b in corpus[:15]:
        assert cor32_check(b, tol) <= tol.identity_tol
        assert adjoint_polar_check(b, tol) <= tol.identity_tol
        assert max(transform_polar_check(b, tol).values()) <= tol.identity_tol


def test_closed_range_over_matrices(corpus, tol):
    for b in corpus[:15]:
        report = closed_range_suite(b, tol)
        assert report.range_closed and report.s_bounded and report.consistent


def test_closed_range_measures_the_inverse_norm(scalar_operator, tol):
    report = closed_range_suite(scalar_operator([[3.0, 0.0], [0.0, 4.0]]), tol)
    assert report.s_bounded and report.adjoint_range_closed and report.transform_range_closed
    assert report.inf_singular_value == pytest.approx(3.0)
    assert report.sup_inverse_norm == pytest.approx(1 / 3)
    zero = closed_range_suite(scalar_operator([[0.0, 0.0], [0.0, 0.0]]), tol)
    assert zero.s_bounded and zero.consistent
    assert zero.inf_singular_value is None
    assert zero.sup_inverse_norm == 0.0


def test_closed_range_verdicts_over_function_backend(tol):
    rooted = closed_range_suite(diag_from([pw_poly(UNIT, ["0", "1"])]), tol)
    assert not (rooted.range_closed or rooted.s_bounded or rooted.adjoint_range_closed
                or rooted.transform_range_closed)
    assert rooted.consistent
    assert rooted.sup_inverse_norm is None
    invertible = closed_range_suite(diag_from([pw_poly(UNIT, ["-2", "1"])]), tol)
    assert invertible.range_closed and invertible.s_bounded
    assert invertible.adjoint_range_closed and invertible.transform_range_closed
    assert invertible.consistent and invertible.certificate is None
    # |1/(x - 2)| peaks at x = 1
    assert invertible.sup_inverse_norm == pytest.approx(1.0)


def test_closed_range_of_graded_inv_n(tol):
    report = closed_range_suite(graded_family("inv_n", 50, BlockProfile.of(1), 1), tol)
    assert not report.range_closed
    assert not report.s_bounded
    assert not report.adjoint_range_closed
    assert not report.transform_range_closed
    assert report.consistent
    assert report.sup_inverse_norm == pytest.approx(50.0)


def test_function_backend_rejects_mixed_operands(tol):
    with pytest.raises(ShapeMismatch):
        cor32_check(diag_from([pw_poly(UNIT, ["1"])]), tol)


# =================== FUNCTION BACKEND ===================

def test_multiplication_by_x_fails_all_three(tol):
    t = diag_from([pw_poly(UNIT, ["0", "1"])])
    report = verify_thm31(t, tol)
    assert (report.cond_i, report.cond_ii, report.cond_iii) == (False, False, False)
    assert report.equivalent
    assert report.certificate.point == "0"
    assert report.certificate.entry == 1
    with pytest.raises(NotComplemented):
        polar_decompose(t, tol)
    with pytest.raises(NotComplemented):
        generalized_inverse(t, tol)

    closed = closed_range_suite(t, tol)
    assert not closed.range_closed and closed.consistent
    assert closed.certificate.point == "0"


def test_invertible_function_operator(tol):
    t = diag_from([pw_poly(UNIT, ["-2", "1"])])
    report = verify_thm31(t, tol)
    assert report.cond_i and report.cond_ii and report.cond_iii
    assert max(report.residuals.values()) == 0.0
    assert pw_equal(report.polar.v.entries[0], pw_poly(UNIT, ["-1"]))
    assert pw_equal(report.polar.abs_t.entries[0], pw_poly(UNIT, ["2", "-1"]))
    s = report.inverse.s.entries[0]
    assert float(s.evaluate("1/2")) == pytest.approx(-2 / 3)
    assert float(s.evaluate(0)) == pytest.approx(-0.5)
    assert adjoint_polar_check(t, tol) == 0.0


def test_two_component_projection(tol):
    domain = Domain1D.of(("0", "1"), ("2", "3"))
    f = pw_from_pieces(domain, [("0", "1", ["0"], ["1"]), ("2", "3", ["1"], ["1"])])
    report = verify_thm31(diag_from([f]), tol)
    assert report.cond_i and report.cond_ii and report.cond_iii
    assert pw_equal(report.polar.v.entries[0], f)
    assert pw_equal(report.inverse.s.entries[0], f)
    assert pw_equal(report.polar.initial.entries[0], f)


def test_random_function_corpora(tol):
    for t in diag_corpus(3, 6, complemented=True):
        report = verify_thm31(t, tol)
        assert report.cond_i and report.cond_ii and report.cond_iii
        assert max(report.residuals.values()) == 0.0
    for t in diag_corpus(3, 6, complemented=False):
        report = verify_thm31(t, tol)
        assert not (report.cond_i or report.cond_ii or report.cond_iii)
        assert report.certificate is not None


def test_adjoint_of_inverse_over_matrices(corpus, tol):
    for b in corpus[:10]:
        gi = generalized_inverse(b, tol)
        assert op_distance(gi.s_tilde, op_adjoint(gi.s)) <= 1e-10
        f = btransform(RegularOperator.explicit(b), tol)
        assert op_norm(f) < 1.0
