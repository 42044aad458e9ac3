# src/core/funbackend.py - exact piecewise-rational functions on a finite union of closed intervals
"""Commutative coefficient algebra A = C(X), X a finite union of closed intervals.

A diagonal multiplication operator T = diag(f_1, ..., f_k) on A^k has a
complemented range closure iff every zero set Z(f_j) is clopen in X, i.e. a
union of whole components. On a component where f vanishes somewhere but not
identically, the ideal generated by f is not complemented: any point of Z(f)
adherent to {f != 0} is a certificate.
"""
import logging
from typing import Iterator, List, Optional, Sequence, Tuple

import sympy
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from sympy import Poly, Rational, Symbol
from sympy.polys.domains import QQ, QQ_I

from src.shared.errors import (
    DiscontinuousFunction,
    DomainMismatch,
    NotComplemented,
    NotRealValued,
    UnsupportedIrrationalRoot,
    ZeroPolynomial,
)
from src.shared.models import Certificate
from .matalg import ArithOp

logger = logging.getLogger(__name__)

X = Symbol("x", real=True)


def rational(value) -> Rational:
    """Exact rational from an int, a Fraction-like value or a 'p/q' string."""
    result = sympy.Rational(str(value)) if isinstance(value, str) else sympy.Rational(value)
    if not result.is_Rational:
        raise ValueError(f"'{value}' is not a rational number")
    return result


def format_rational(value) -> str:
    return str(sympy.Rational(value))


def _is_real_poly(p: Poly) -> bool:
    return p.domain in (QQ, sympy.ZZ) or all(sympy.im(c) == 0 for c in p.all_coeffs())


def make_poly(coefficients: Sequence, complex_valued: bool = False) -> Poly:
    """Polynomial from coefficients listed lowest degree first."""
    coeffs = [sympy.sympify(c) if not isinstance(c, str) else rational(c) for c in coefficients] or [0]
    domain = QQ_I if complex_valued else QQ
    return Poly.from_list(list(reversed(coeffs)), X, domain=domain)


def _to_qq(p: Poly) -> Poly:
    return p if p.domain == QQ else Poly(p.as_expr(), X, domain=QQ)


def _as_field_poly(p: Poly) -> Poly:
    if _is_real_poly(p):
        return _to_qq(p)
    return p if p.domain == QQ_I else Poly(p.as_expr(), X, domain=QQ_I)


class Interval(BaseModel):
    lo: Rational
    hi: Rational

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("lo", "hi", mode="before")
    @classmethod
    def _exact(cls, value):
        return rational(value)

    @model_validator(mode="after")
    def _positive_length(self):
        if not self.lo < self.hi:
            raise ValueError(f"interval [{self.lo}, {self.hi}] must have positive length")
        return self

    def contains(self, point) -> bool:
        return bool(self.lo <= point <= self.hi)


class Domain1D(BaseModel):
    components: Tuple[Interval, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _sorted_disjoint(self):
        if not self.components:
            raise ValueError("domain needs at least one interval")
        for left, right in zip(self.components, self.components[1:]):
            if not left.hi < right.lo:
                raise ValueError(f"intervals [{left.lo}, {left.hi}] and [{right.lo}, {right.hi}] "
                                 "must be disjoint and sorted")
        return self

    @classmethod
    def of(cls, *intervals: Tuple) -> "Domain1D":
        return cls(components=tuple(Interval(lo=lo, hi=hi) for lo, hi in intervals))

    def component_of(self, point) -> Optional[int]:
        for index, component in enumerate(self.components):
            if component.contains(point):
                return index
        return None


class Piece(BaseModel):
    lo: Rational
    hi: Rational
    num: Poly
    den: Poly

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def interval(self) -> Interval:
        return Interval(lo=self.lo, hi=self.hi)

    def value_at(self, point):
        return self.num.eval(point) / self.den.eval(point)


class PwRational(BaseModel):
    """Continuous piecewise rational function; pieces partition each component."""

    domain: Domain1D
    pieces: Tuple[Tuple[Piece, ...], ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _well_formed(self):
        if len(self.pieces) != len(self.domain.components):
            raise ValueError("one piece list per domain component is required")
        for component, pieces in zip(self.domain.components, self.pieces):
            if not pieces:
                raise ValueError("every component needs at least one piece")
            if pieces[0].lo != component.lo or pieces[-1].hi != component.hi:
                raise ValueError(f"pieces do not cover [{component.lo}, {component.hi}]")
            for piece in pieces:
                if not piece.lo < piece.hi:
                    raise ValueError(f"piece [{piece.lo}, {piece.hi}] must have positive length")
                if not _is_real_poly(piece.den):
                    raise ValueError("denominators must be real")
                if piece.den.is_zero or roots_in_closed(piece.den, piece.lo, piece.hi) > 0:
                    raise ValueError(f"denominator {piece.den.as_expr()} vanishes on [{piece.lo}, {piece.hi}]")
            for left, right in zip(pieces, pieces[1:]):
                if left.hi != right.lo:
                    raise ValueError(f"gap between pieces at {left.hi} and {right.lo}")
        check_continuity(self)
        return self

    @property
    def is_real(self) -> bool:
        return all(_is_real_poly(p.num) for pieces in self.pieces for p in pieces)

    def evaluate(self, point):
        point = rational(point) if isinstance(point, str) else sympy.Rational(point)
        for pieces in self.pieces:
            for piece in pieces:
                if piece.lo <= point <= piece.hi:
                    return piece.value_at(point)
        raise DomainMismatch(f"{point} is outside the domain")


class ComponentZeros(BaseModel):
    intervals: Tuple[Tuple[Rational, Rational], ...] = ()
    points: Tuple[Rational, ...] = ()

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def is_empty(self) -> bool:
        return not self.intervals and not self.points


class ZeroSet(BaseModel):
    domain: Domain1D
    components: Tuple[ComponentZeros, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class DiagOperator(BaseModel):
    """diag(f_1, ..., f_k) acting on A^k; real entries are star-fixed."""

    domain: Domain1D
    entries: Tuple[PwRational, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _real_entries(self):
        for j, f in enumerate(self.entries):
            if f.domain != self.domain:
                raise ValueError(f"entry {j + 1} lives on a different domain")
            if not f.is_real:
                raise ValueError(f"entry {j + 1} is not real-valued")
        return self

    @property
    def rank(self) -> int:
        return len(self.entries)


class EntryVerdict(BaseModel):
    entry: int
    complemented: bool
    certificate: Optional[Certificate] = None


class ComplementVerdict(BaseModel):
    entries: List[EntryVerdict]
    complemented: bool
    certificate: Optional[Certificate] = None


# =================== STURM KERNEL ===================

def _sign_changes(values) -> int:
    signs = [v > 0 for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def sturm_count(p: Poly, interval: Tuple) -> int:
    """Number of distinct real roots of p in the half-open interval [a, b)."""
    if p.is_zero:
        raise ZeroPolynomial("Sturm count of the zero polynomial is undefined")
    a, b = (rational(v) if isinstance(v, str) else sympy.Rational(v) for v in interval)
    p = _to_qq(p)
    if p.degree() <= 0:
        return 0
    chain = p.sqf_part().sturm()
    # V(a) - V(b) counts roots in (a, b]
    count = _sign_changes([q.eval(a) for q in chain]) - _sign_changes([q.eval(b) for q in chain])
    if p.eval(a) == 0:
        count += 1
    if p.eval(b) == 0:
        count -= 1
    return count


def roots_in_closed(p: Poly, lo, hi) -> int:
    return sturm_count(p, (lo, hi)) + (1 if p.eval(hi) == 0 else 0)


def _rational_roots(p: Poly, lo, hi) -> List[Rational]:
    """Distinct rational roots in [lo, hi]; raises if a real root there is irrational."""
    p = _to_qq(p)
    if p.degree() <= 0:
        return []
    candidates = sorted(r for r in p.sqf_part().ground_roots() if lo <= r <= hi)
    total = roots_in_closed(p, lo, hi)
    if total > len(candidates):
        raise UnsupportedIrrationalRoot(
            f"{p.as_expr()} has {total - len(candidates)} irrational root(s) in [{lo}, {hi}]"
        )
    return candidates


# =================== CONSTRUCTION ===================

def _normalize(num: Poly, den: Poly) -> Tuple[Poly, Poly]:
    num, den = _as_field_poly(num), _to_qq(den)
    if num.is_zero:
        return num, Poly(1, X, domain=QQ)
    if _is_real_poly(num):
        g = num.gcd(den)
        if g.degree() > 0:
            num, den = num.exquo(g), den.exquo(g)
    lc = den.LC()
    return num.quo_ground(lc), den.quo_ground(lc)


def _same_function(a: Piece, b: Piece) -> bool:
    return (a.num * b.den - b.num * a.den).is_zero


def _coalesce(pieces: Sequence[Piece]) -> Tuple[Piece, ...]:
    merged: List[Piece] = []
    for piece in pieces:
        if merged and _same_function(merged[-1], piece):
            last = merged.pop()
            piece = Piece(lo=last.lo, hi=piece.hi, num=last.num, den=last.den)
        merged.append(piece)
    return tuple(merged)


def _build(domain: Domain1D, pieces: Sequence[Sequence[Piece]]) -> PwRational:
    return PwRational(domain=domain, pieces=tuple(_coalesce(p) for p in pieces))


def pw_from_pieces(domain: Domain1D, pieces: Sequence[Tuple]) -> PwRational:
    """Pieces given as (lo, hi, num_coeffs, den_coeffs), assigned to components by position."""
    grouped: List[List[Piece]] = [[] for _ in domain.components]
    for lo, hi, num, den in pieces:
        lo, hi = rational(lo), rational(hi)
        index = domain.component_of(lo)
        if index is None or not domain.components[index].contains(hi):
            raise DomainMismatch(f"piece [{lo}, {hi}] does not fit inside one domain component")
        n, d = _normalize(make_poly(num), make_poly(den))
        grouped[index].append(Piece(lo=lo, hi=hi, num=n, den=d))
    for group in grouped:
        group.sort(key=lambda p: p.lo)
    return _build(domain, grouped)


def pw_poly(domain: Domain1D, coefficients: Sequence, complex_valued: bool = False) -> PwRational:
    p = make_poly(coefficients, complex_valued)
    one = Poly(1, X, domain=QQ)
    return PwRational(
        domain=domain,
        pieces=tuple((Piece(lo=c.lo, hi=c.hi, num=p, den=one),) for c in domain.components),
    )


def pw_const(domain: Domain1D, value) -> PwRational:
    return pw_poly(domain, [value])


def pw_componentwise(domain: Domain1D, values: Sequence) -> PwRational:
    """Locally constant function taking ``values[i]`` on component i."""
    one = Poly(1, X, domain=QQ)
    return PwRational(
        domain=domain,
        pieces=tuple((Piece(lo=c.lo, hi=c.hi, num=make_poly([v]), den=one),)
                     for c, v in zip(domain.components, values)),
    )


def check_continuity(f: PwRational) -> None:
    """Exact agreement of neighbouring pieces at every shared breakpoint."""
    for pieces in f.pieces:
        for left, right in zip(pieces, pieces[1:]):
            if sympy.expand(left.value_at(left.hi) - right.value_at(right.lo)) != 0:
                raise DiscontinuousFunction(
                    f"pieces disagree at {left.hi}: {left.value_at(left.hi)} vs {right.value_at(right.lo)}"
                )


# =================== ARITHMETIC ===================

def _refine(f: PwRational, g: PwRational) -> Iterator[Tuple[int, Rational, Rational, Piece, Piece]]:
    """Common refinement: (component, lo, hi, piece of f, piece of g)."""
    if f.domain != g.domain:
        raise DomainMismatch("functions live on different domains")
    for index, (fp, gp) in enumerate(zip(f.pieces, g.pieces)):
        breakpoints = sorted({p.lo for p in fp} | {p.hi for p in fp} | {p.lo for p in gp} | {p.hi for p in gp})
        i = j = 0
        for lo, hi in zip(breakpoints, breakpoints[1:]):
            while fp[i].hi <= lo:
                i += 1
            while gp[j].hi <= lo:
                j += 1
            yield index, lo, hi, fp[i], gp[j]


def pw_arith(f: PwRational, g: PwRational, op: ArithOp) -> PwRational:
    op = ArithOp(op)
    grouped: List[List[Piece]] = [[] for _ in f.domain.components]
    for index, lo, hi, a, b in _refine(f, g):
        if op == ArithOp.ADD:
            num, den = a.num * b.den + b.num * a.den, a.den * b.den
        else:
            num, den = a.num * b.num, a.den * b.den
        num, den = _normalize(num, den)
        grouped[index].append(Piece(lo=lo, hi=hi, num=num, den=den))
    return _build(f.domain, grouped)


def pw_star(f: PwRational) -> PwRational:
    """Pointwise complex conjugation (identity on real-valued functions)."""
    if f.is_real:
        return f
    pieces = []
    for component in f.pieces:
        conjugated = []
        for piece in component:
            num = Poly(sympy.conjugate(piece.num.as_expr()), X)
            conjugated.append(Piece(lo=piece.lo, hi=piece.hi, num=_as_field_poly(num), den=piece.den))
        pieces.append(conjugated)
    return _build(f.domain, pieces)


def pw_scale(f: PwRational, c) -> PwRational:
    return pw_arith(f, pw_const(f.domain, c), ArithOp.MUL)


def pw_sub(f: PwRational, g: PwRational) -> PwRational:
    return pw_arith(f, pw_scale(g, -1), ArithOp.ADD)


def pw_equal(f: PwRational, g: PwRational) -> bool:
    return all(_same_function(a, b) for _, _, _, a, b in _refine(f, g))


def pw_sample_sup(f: PwRational) -> float:
    """max |f| over breakpoints and piece midpoints (a residual scale, not a certified bound)."""
    best = 0.0
    for pieces in f.pieces:
        for piece in pieces:
            for point in (piece.lo, (piece.lo + piece.hi) / 2, piece.hi):
                best = max(best, float(abs(sympy.N(piece.value_at(point)))))
    return best


# =================== ZERO SETS ===================

def _require_real(f: PwRational) -> None:
    if not f.is_real:
        raise NotRealValued("operation requires a real-valued function")


def zero_set(f: PwRational) -> ZeroSet:
    _require_real(f)
    components = []
    for pieces in f.pieces:
        intervals: List[Tuple[Rational, Rational]] = []
        points = set()
        for piece in pieces:
            if piece.num.is_zero:
                if intervals and intervals[-1][1] == piece.lo:
                    intervals[-1] = (intervals[-1][0], piece.hi)
                else:
                    intervals.append((piece.lo, piece.hi))
            else:
                points.update(_rational_roots(piece.num, piece.lo, piece.hi))
        isolated = tuple(sorted(p for p in points if not any(lo <= p <= hi for lo, hi in intervals)))
        components.append(ComponentZeros(intervals=tuple(intervals), points=isolated))
    return ZeroSet(domain=f.domain, components=tuple(components))


def _boundary_points(z: ZeroSet) -> List[Tuple[Rational, str]]:
    """Points of Z adherent to {f != 0}."""
    witnesses = []
    for component, zeros in zip(z.domain.components, z.components):
        if zeros.intervals == ((component.lo, component.hi),):
            continue
        witnesses.extend((p, "isolated_root") for p in zeros.points)
        for lo, hi in zeros.intervals:
            if lo > component.lo:
                witnesses.append((lo, "interval_boundary"))
            if hi < component.hi:
                witnesses.append((hi, "interval_boundary"))
    return sorted(witnesses, key=lambda w: w[0])


def is_clopen(z: ZeroSet) -> Tuple[bool, Optional[Rational]]:
    witnesses = _boundary_points(z)
    if not witnesses:
        return True, None
    return False, witnesses[0][0]


def _certificate(z: ZeroSet, entry: int) -> Optional[Certificate]:
    witnesses = _boundary_points(z)
    if not witnesses:
        return None
    point, reason = witnesses[0]
    return Certificate(entry=entry, point=format_rational(point), reason=reason)


def _vanishing_components(f: PwRational, entry: int) -> List[bool]:
    z = zero_set(f)
    certificate = _certificate(z, entry)
    if certificate is not None:
        raise NotComplemented(certificate)
    return [not zeros.is_empty for zeros in z.components]


# =================== ABS, SIGN, RECIPROCAL ===================

def pw_abs(f: PwRational) -> PwRational:
    _require_real(f)
    grouped: List[List[Piece]] = []
    for pieces in f.pieces:
        result: List[Piece] = []
        for piece in pieces:
            if piece.num.is_zero:
                result.append(piece)
                continue
            roots = [r for r in _rational_roots(piece.num, piece.lo, piece.hi) if piece.lo < r < piece.hi]
            cuts = [piece.lo, *roots, piece.hi]
            for lo, hi in zip(cuts, cuts[1:]):
                value = piece.value_at((lo + hi) / 2)
                num = -piece.num if value < 0 else piece.num
                result.append(Piece(lo=lo, hi=hi, num=num, den=piece.den))
        grouped.append(result)
    return _build(f.domain, grouped)


def pw_sign_support(f: PwRational, entry: int = 1) -> PwRational:
    """+-1 on components where f never vanishes, 0 on components where f vanishes identically."""
    vanishing = _vanishing_components(f, entry)
    values = []
    for pieces, vanishes in zip(f.pieces, vanishing):
        if vanishes:
            values.append(0)
        else:
            first = pieces[0]
            values.append(1 if first.value_at((first.lo + first.hi) / 2) > 0 else -1)
    return pw_componentwise(f.domain, values)


def pw_recip_support(f: PwRational, entry: int = 1) -> PwRational:
    """1/f on components where f never vanishes, 0 elsewhere."""
    vanishing = _vanishing_components(f, entry)
    grouped: List[List[Piece]] = []
    zero, one = Poly(0, X, domain=QQ), Poly(1, X, domain=QQ)
    for component, pieces, vanishes in zip(f.domain.components, f.pieces, vanishing):
        if vanishes:
            grouped.append([Piece(lo=component.lo, hi=component.hi, num=zero, den=one)])
            continue
        inverted = []
        for piece in pieces:
            num, den = piece.den, piece.num
            if den.LC() < 0:
                num, den = -num, -den
            num, den = _normalize(num, den)
            inverted.append(Piece(lo=piece.lo, hi=piece.hi, num=num, den=den))
        grouped.append(inverted)
    return _build(f.domain, grouped)


# =================== DIAGONAL OPERATORS ===================

def diag_from(entries: Sequence[PwRational]) -> DiagOperator:
    if not entries:
        raise DomainMismatch("a diagonal operator needs at least one entry")
    return DiagOperator(domain=entries[0].domain, entries=tuple(entries))


def diag_mul(a: DiagOperator, b: DiagOperator) -> DiagOperator:
    """Composition of diagonal operators (entrywise product)."""
    if a.rank != b.rank:
        raise DomainMismatch(f"ranks differ: {a.rank} vs {b.rank}")
    return DiagOperator(domain=a.domain,
                        entries=tuple(pw_arith(f, g, ArithOp.MUL) for f, g in zip(a.entries, b.entries)))


def diag_adjoint(a: DiagOperator) -> DiagOperator:
    return DiagOperator(domain=a.domain, entries=tuple(pw_star(f) for f in a.entries))


def diag_equal(a: DiagOperator, b: DiagOperator) -> bool:
    return a.rank == b.rank and all(pw_equal(f, g) for f, g in zip(a.entries, b.entries))


def diag_residual(a: DiagOperator, b: DiagOperator) -> float:
    """0.0 when the operators agree exactly, else a sampled sup of the difference."""
    if diag_equal(a, b):
        return 0.0
    return max(pw_sample_sup(pw_sub(f, g)) for f, g in zip(a.entries, b.entries))


def diag_complement_check(t: DiagOperator) -> ComplementVerdict:
    verdicts = []
    for j, f in enumerate(t.entries, start=1):
        certificate = _certificate(zero_set(f), j)
        verdicts.append(EntryVerdict(entry=j, complemented=certificate is None, certificate=certificate))
    failing = next((v.certificate for v in verdicts if not v.complemented), None)
    return ComplementVerdict(entries=verdicts, complemented=failing is None, certificate=failing)


def _require_complemented(t: DiagOperator) -> None:
    verdict = diag_complement_check(t)
    if not verdict.complemented:
        logger.info(f"range closure not complemented: entry {verdict.certificate.entry}, "
                    f"point {verdict.certificate.point}")
        raise NotComplemented(verdict.certificate)


def diag_polar(t: DiagOperator) -> Tuple[DiagOperator, DiagOperator]:
    _require_complemented(t)
    v = tuple(pw_sign_support(f, j) for j, f in enumerate(t.entries, start=1))
    abs_t = tuple(pw_abs(f) for f in t.entries)
    return DiagOperator(domain=t.domain, entries=v), DiagOperator(domain=t.domain, entries=abs_t)


def diag_pinv(t: DiagOperator) -> DiagOperator:
    _require_complemented(t)
    return DiagOperator(domain=t.domain,
                        entries=tuple(pw_recip_support(f, j) for j, f in enumerate(t.entries, start=1)))


def diag_support(t: DiagOperator) -> DiagOperator:
    """Indicator of the components where each entry does not vanish: the range projection."""
    return diag_mul(t, diag_pinv(t))


def diag_transform_square(t: DiagOperator) -> DiagOperator:
    """F_t* F_t = diag(f_j^2 / (1 + f_j^2)), exactly."""
    one = pw_const(t.domain, 1)
    entries = []
    for j, f in enumerate(t.entries, start=1):
        square = pw_arith(f, f, ArithOp.MUL)
        shifted = pw_arith(one, square, ArithOp.ADD)
        entries.append(pw_arith(square, pw_recip_support(shifted, j), ArithOp.MUL))
    return DiagOperator(domain=t.domain, entries=tuple(entries))
