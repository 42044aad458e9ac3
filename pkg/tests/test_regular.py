# tests/test_regular.py
import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose
from pydantic import ValidationError

from src.core.hilbmod import OperatorMatrix, op_adjoint, op_distance, op_identity, op_norm, op_scale
from src.core.matalg import BlockProfile
from src.core.regular import (
    GradedOperator,
    RegularOperator,
    btransform,
    classify,
    graded_family,
    graded_report,
    graph_decomposition_check,
    inverse_btransform,
    q_of,
    remark22_residuals,
    validate_transform,
)
from src.core.sampling import random_operator
from src.shared.errors import DefectSingular, InvalidPolynomial, NotContractive, NotSquare

seeds = st.integers(min_value=0, max_value=2**32 - 1)
polynomials = st.lists(st.floats(min_value=-3, max_value=3), min_size=1, max_size=5)


def test_scalar_transform(scalar_operator, tol):
    t = RegularOperator.explicit(scalar_operator([[3.0]]))
    assert q_of(t, tol).blocks[0][0, 0].real == pytest.approx(1 / np.sqrt(10))
    assert btransform(t, tol).blocks[0][0, 0].real == pytest.approx(3 / np.sqrt(10))


def test_diagonal_transform(scalar_operator, tol):
    f = btransform(RegularOperator.explicit(scalar_operator(np.diag([3.0, 4.0]))), tol)
    assert_allclose(f.blocks[0], np.diag([3 / np.sqrt(10), 4 / np.sqrt(17)]), atol=1e-12)


def test_transform_of_zero_is_zero(scalar_operator, tol):
    f = btransform(RegularOperator.explicit(scalar_operator(np.zeros((2, 3)))), tol)
    assert op_norm(f) == 0.0


def test_unit_transform_has_no_inverse(scalar_operator, tol):
    with pytest.raises(DefectSingular):
        inverse_btransform(scalar_operator([[1.0]]), tol)
    validity = validate_transform(scalar_operator(np.diag([1.0, 0.5])), tol)
    assert validity.contractive
    assert not validity.dense_defect


def test_from_transform(scalar_operator, tol):
    t = RegularOperator.from_transform(scalar_operator([[0.6]]), tol)
    assert not t.is_explicit
    assert t.matrix(tol).blocks[0][0, 0].real == pytest.approx(0.75)
    assert q_of(t, tol).blocks[0][0, 0].real == pytest.approx(0.8)
    with pytest.raises(NotContractive):
        RegularOperator.from_transform(scalar_operator([[2.0]]), tol)
    with pytest.raises(DefectSingular):
        RegularOperator.from_transform(scalar_operator([[1.0]]), tol)


def test_exactly_one_representation(scalar_operator):
    b = scalar_operator([[1.0]])
    with pytest.raises(ValidationError):
        RegularOperator()
    with pytest.raises(ValidationError):
        RegularOperator(matrix_form=b, transform=b)


@given(seed=seeds)
def test_transform_round_trip(seed):
    b = random_operator(np.random.default_rng(seed))
    t = RegularOperator.explicit(b)
    f = btransform(t)
    assert op_norm(f) < 1.0
    assert op_distance(inverse_btransform(f).matrix(), b) <= 1e-8 * (1.0 + op_norm(b))


@given(seed=seeds)
def test_transform_commutes_with_adjoint(seed):
    t = RegularOperator.explicit(random_operator(np.random.default_rng(seed)))
    assert op_distance(btransform(t.adjoint()), op_adjoint(btransform(t))) <= 1e-10


def test_transform_form_agrees_with_explicit(rng, tol):
    t = RegularOperator.explicit(random_operator(rng))
    f = btransform(t, tol)
    carried = RegularOperator.from_transform(f, tol)
    assert op_distance(q_of(carried, tol), q_of(t, tol)) <= 1e-8
    assert op_distance(btransform(carried.adjoint(tol), tol), btransform(t.adjoint(tol), tol)) <= 1e-10


def test_classify_identity_and_nilpotent(scalar_operator, tol):
    identity = classify(RegularOperator.explicit(op_identity(BlockProfile.of(1, 2), 2)), tol)
    assert (identity.normal, identity.selfadjoint, identity.positive) == (True, True, True)
    assert identity.transform_agrees

    nilpotent = classify(RegularOperator.explicit(scalar_operator([[0.0, 1.0], [0.0, 0.0]])), tol)
    assert (nilpotent.normal, nilpotent.selfadjoint, nilpotent.positive) == (False, False, False)
    assert nilpotent.transform_agrees
    assert nilpotent.residuals["normal"] == pytest.approx(1.0)


def test_classify_negative_selfadjoint(scalar_operator, tol):
    result = classify(RegularOperator.explicit(scalar_operator(np.diag([1.0, -2.0]))), tol)
    assert result.normal and result.selfadjoint and not result.positive


def test_classify_needs_square(scalar_operator, tol):
    with pytest.raises(NotSquare):
        classify(RegularOperator.explicit(scalar_operator([[1.0, 2.0]])), tol)


@given(seed=seeds, coefficients=polynomials)
def test_intertwining_identities(seed, coefficients):
    t = RegularOperator.explicit(random_operator(np.random.default_rng(seed)))
    first, second = remark22_residuals(t, coefficients)
    assert first <= 1e-8
    assert second <= 1e-8


def test_intertwining_rejects_bad_polynomials(rng, tol):
    t = RegularOperator.explicit(random_operator(rng))
    with pytest.raises(InvalidPolynomial):
        remark22_residuals(t, [], tol)
    with pytest.raises(InvalidPolynomial):
        remark22_residuals(t, [1.0] * 18, tol)
    with pytest.raises(InvalidPolynomial):
        remark22_residuals(t, [1j], tol)


def _explicit(b: OperatorMatrix) -> RegularOperator:
    return RegularOperator.explicit(b)


def _pinv(b: OperatorMatrix) -> OperatorMatrix:
    return OperatorMatrix(profile=b.profile, domain_rank=b.codomain_rank, codomain_rank=b.domain_rank,
                          blocks=tuple(np.linalg.pinv(block, rcond=1e-10) for block in b.blocks))


def test_graph_decomposition(corpus, tol):
    for b in corpus[:10]:
        s = _pinv(b)
        s_tilde = _pinv(op_adjoint(b))
        assert graph_decomposition_check(_explicit(b), _explicit(s), _explicit(s_tilde), tol) <= 1e-8


def test_graph_decomposition_detects_non_adjoint_pair(scalar_operator, tol):
    b = scalar_operator([[2.0, 1.0], [0.0, 1.0]])
    s = _pinv(b)
    residual = graph_decomposition_check(_explicit(b), _explicit(s), _explicit(op_scale(op_adjoint(s), 2.0)), tol)
    assert residual >= op_norm(s) - 1e-12


def test_graded_inverse_norms_grow(tol):
    gt = graded_family("inv_n", 50, BlockProfile.of(1), 1)
    report = graded_report(gt, tol)
    assert [c.label for c in report.components] == list(range(1, 51))
    for c in report.components:
        assert c.norm_inverse == pytest.approx(c.label, rel=1e-12)
        assert c.norm_partial_isometry == pytest.approx(1.0, rel=1e-12)
        assert c.inverse_residual <= 1e-10 * (1 + c.label)
        assert c.polar_residual <= 1e-10
        assert c.norm_transform < 1.0
    assert report.inf_singular_value == pytest.approx(0.02)
    assert report.sup_inverse_norm == pytest.approx(50.0)
    assert report.unbounded_inverse
    assert report.range_not_uniformly_closed
    assert report.flags == ["unbounded_inverse", "range_not_uniformly_closed"]


def test_graded_norms_are_measured_on_each_component(scalar_operator, tol):
    gt = GradedOperator(components=(
        RegularOperator.explicit(scalar_operator([[2.0, 0.0], [0.0, 0.0]])),
        RegularOperator.explicit(scalar_operator([[0.0, 0.0], [0.0, 0.0]])),
        RegularOperator.explicit(scalar_operator([[0.0, 4.0], [0.0, 0.0]])),
    ))
    rank_one, zero, shift = graded_report(gt, tol).components
    assert rank_one.norm_inverse == pytest.approx(0.5)
    assert rank_one.norm_partial_isometry == pytest.approx(1.0)
    assert zero.norm_inverse == 0.0
    assert zero.norm_partial_isometry == 0.0
    assert zero.smallest_singular_value is None
    assert shift.norm_inverse == pytest.approx(0.25)
    assert shift.norm_partial_isometry == pytest.approx(1.0)
    assert max(c.inverse_residual for c in (rank_one, zero, shift)) <= 1e-12
    assert max(c.polar_residual for c in (rank_one, zero, shift)) <= 1e-12


@pytest.mark.parametrize("kind", ["identity", "n"])
def test_graded_families_with_bounded_inverse(kind, tol):
    report = graded_report(graded_family(kind, 20, BlockProfile.of(2), 2), tol)
    assert report.sup_inverse_norm == pytest.approx(1.0)
    assert report.inf_singular_value == pytest.approx(1.0)
    assert report.flags == []


def test_graded_operator_validation(scalar_operator):
    with pytest.raises(ValidationError):
        GradedOperator(components=())
    with pytest.raises(ValueError):
        graded_family("squares", 3, BlockProfile.of(1), 1)
    single = GradedOperator(components=(RegularOperator.explicit(scalar_operator([[2.0]])),))
    assert single.label(0) == 1
