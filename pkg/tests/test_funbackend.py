# tests/test_funbackend.py
import pytest
import sympy
from pydantic import ValidationError

from src.core.funbackend import (
    Domain1D,
    ZeroSet,
    diag_complement_check,
    diag_from,
    diag_pinv,
    diag_polar,
    diag_transform_square,
    is_clopen,
    make_poly,
    pw_abs,
    pw_arith,
    pw_const,
    pw_equal,
    pw_from_pieces,
    pw_poly,
    pw_recip_support,
    pw_sign_support,
    pw_star,
    sturm_count,
    zero_set,
)
from src.core.matalg import ArithOp
from src.shared.errors import (
    DiscontinuousFunction,
    DomainMismatch,
    NotComplemented,
    NotRealValued,
    UnsupportedIrrationalRoot,
    ZeroPolynomial,
)

UNIT = Domain1D.of(("0", "1"))
TWO = Domain1D.of(("0", "1"), ("2", "3"))


@pytest.mark.parametrize("coefficients, interval, expected", [
    (["-1", "0", "1"], ("0", "2"), 1),         # x^2 - 1
    (["1", "0", "1"], ("-5", "5"), 0),         # x^2 + 1
    (["0", "1", "-5/2", "1"], ("0", "2"), 2),  # x(x - 1/2)(x - 2), right end excluded
    (["0", "1", "-5/2", "1"], ("0", "3"), 3),
    (["1", "-2", "1"], ("0", "2"), 1),         # (x - 1)^2 counts once
    (["3"], ("0", "1"), 0),
])
def test_sturm_count(coefficients, interval, expected):
    assert sturm_count(make_poly(coefficients), interval) == expected


def test_sturm_count_of_zero_polynomial():
    with pytest.raises(ZeroPolynomial):
        sturm_count(make_poly(["0"]), ("0", "1"))


def test_domain_must_be_sorted_and_disjoint():
    with pytest.raises(ValidationError):
        Domain1D.of(("0", "2"), ("1", "3"))
    with pytest.raises(ValidationError):
        Domain1D.of(("1", "1"))


def test_piecewise_needs_coverage_and_continuity():
    with pytest.raises(ValidationError):
        pw_from_pieces(UNIT, [("0", "1/2", ["0"], ["1"])])
    with pytest.raises(DiscontinuousFunction):
        pw_from_pieces(UNIT, [("0", "1/2", ["0"], ["1"]), ("1/2", "1", ["1"], ["1"])])
    with pytest.raises(ValidationError):
        pw_from_pieces(UNIT, [("0", "1", ["1"], ["-1/2", "1"])])  # 1/(x - 1/2)
    with pytest.raises(DomainMismatch):
        pw_from_pieces(TWO, [("0", "3", ["1"], ["1"])])


def test_arithmetic_refines_breakpoints():
    f = pw_from_pieces(UNIT, [("0", "1/2", ["0"], ["1"]), ("1/2", "1", ["-1/2", "1"], ["1"])])
    g = pw_poly(UNIT, ["1", "1"])
    product = pw_arith(f, g, ArithOp.MUL)
    assert product.evaluate("3/4") == sympy.Rational(1, 4) * sympy.Rational(7, 4)
    assert product.evaluate("1/4") == 0
    total = pw_arith(f, g, ArithOp.ADD)
    assert total.evaluate(1) == sympy.Rational(5, 2)


def test_equal_pieces_coalesce():
    f = pw_from_pieces(UNIT, [("0", "1/2", ["0", "1"], ["1"]), ("1/2", "1", ["0", "1"], ["1"])])
    assert len(f.pieces[0]) == 1
    assert pw_equal(f, pw_poly(UNIT, ["0", "1"]))


def test_rational_pieces_are_reduced():
    f = pw_from_pieces(UNIT, [("0", "1", ["-4", "0", "1"], ["2", "1"])])  # (x^2 - 4)/(x + 2)
    assert pw_equal(f, pw_poly(UNIT, ["-2", "1"]))


def test_star_conjugates():
    f = pw_poly(UNIT, [0, sympy.I], complex_valued=True)
    g = pw_star(f)
    assert g.evaluate(1) == -sympy.I
    real = pw_poly(UNIT, ["1", "1"])
    assert pw_star(real) is real


def test_zero_set_and_clopen():
    z = zero_set(pw_poly(UNIT, ["0", "1"]))
    assert z.components[0].points == (0,)
    assert is_clopen(z) == (False, 0)

    half = pw_from_pieces(UNIT, [("0", "1/2", ["0"], ["1"]), ("1/2", "1", ["-1/2", "1"], ["1"])])
    z = zero_set(half)
    assert z.components[0].intervals == ((0, sympy.Rational(1, 2)),)
    assert is_clopen(z) == (False, sympy.Rational(1, 2))

    assert is_clopen(zero_set(pw_const(UNIT, 0))) == (True, None)
    assert is_clopen(zero_set(pw_const(UNIT, 3))) == (True, None)
    assert is_clopen(ZeroSet(domain=UNIT, components=())) == (True, None)


def test_zero_set_component_pattern():
    f = pw_from_pieces(TWO, [("0", "1", ["0"], ["1"]), ("2", "3", ["1"], ["1"])])
    z = zero_set(f)
    assert z.components[0].intervals == ((0, 1),)
    assert z.components[1].is_empty
    assert is_clopen(z) == (True, None)


def test_zero_set_errors():
    with pytest.raises(UnsupportedIrrationalRoot):
        zero_set(pw_poly(UNIT, ["-1/2", "0", "1"]))  # x^2 - 1/2
    with pytest.raises(NotRealValued):
        zero_set(pw_poly(UNIT, [0, sympy.I], complex_valued=True))


def test_abs_splits_at_roots():
    f = pw_poly(Domain1D.of(("-1", "1")), ["0", "1"])
    a = pw_abs(f)
    assert a.evaluate("-1/2") == sympy.Rational(1, 2)
    assert a.evaluate("1/2") == sympy.Rational(1, 2)
    assert len(a.pieces[0]) == 2


def test_sign_and_reciprocal_on_supports():
    f = pw_from_pieces(TWO, [("0", "1", ["0"], ["1"]), ("2", "3", ["-2", "-1"], ["1"])])  # -(x + 2) on [2, 3]
    sign = pw_sign_support(f)
    assert sign.evaluate("1/2") == 0
    assert sign.evaluate("5/2") == -1
    recip = pw_recip_support(f)
    assert recip.evaluate(3) == sympy.Rational(-1, 5)
    assert recip.evaluate(0) == 0
    with pytest.raises(NotComplemented):
        pw_recip_support(pw_poly(UNIT, ["0", "1"]), entry=2)


def test_complement_check_names_failing_entry():
    t = diag_from([pw_const(UNIT, 1), pw_poly(UNIT, ["0", "1"])])
    verdict = diag_complement_check(t)
    assert not verdict.complemented
    assert [v.complemented for v in verdict.entries] == [True, False]
    assert verdict.certificate.entry == 2
    assert verdict.certificate.point == "0"
    assert verdict.certificate.reason == "isolated_root"


def test_interval_boundary_certificate():
    half = pw_from_pieces(UNIT, [("0", "1/2", ["0"], ["1"]), ("1/2", "1", ["-1/2", "1"], ["1"])])
    verdict = diag_complement_check(diag_from([half]))
    assert verdict.certificate.point == "1/2"
    assert verdict.certificate.reason == "interval_boundary"


def test_diag_polar_and_pinv():
    t = diag_from([pw_poly(UNIT, ["-2", "1"]), pw_const(UNIT, 3)])
    v, abs_t = diag_polar(t)
    assert pw_equal(v.entries[0], pw_const(UNIT, -1))
    assert pw_equal(v.entries[1], pw_const(UNIT, 1))
    assert pw_equal(abs_t.entries[1], pw_const(UNIT, 3))
    s = diag_pinv(t)
    assert s.entries[1].evaluate(0) == sympy.Rational(1, 3)
    with pytest.raises(NotComplemented):
        diag_polar(diag_from([pw_poly(UNIT, ["0", "1"])]))


def test_transform_square_is_exact():
    (square,) = diag_transform_square(diag_from([pw_poly(UNIT, ["-2", "1"])])).entries
    expected = pw_from_pieces(UNIT, [("0", "1", ["4", "-4", "1"], ["5", "-4", "1"])])
    assert pw_equal(square, expected)
    rooted = diag_transform_square(diag_from([pw_poly(UNIT, ["0", "1"])]))
    assert diag_complement_check(rooted).certificate.point == "0"
