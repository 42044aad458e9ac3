# src/core/polar.py - polar decompositions, generalized inverses and the equivalence checks
"""Polar decomposition t = V|t| and generalized inverse s of a regular operator.

Three conditions are equivalent for t in R(E, F):

  (i)   t has a polar decomposition,
  (ii)  E = Ker|t| + cl Ran|t| and F = Ker t* + cl Ran t,
  (iii) t and t* have generalized inverses, adjoint to each other.

Over the matrix backend (compact coefficients) all three always hold and are
verified numerically. Over the function backend (A = C(X)) condition (ii) is
decided exactly; when it fails the report carries a certificate and all three
verdicts are negative.
"""
import logging
from typing import Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.shared.config import Tolerances, resolve
from src.shared.errors import NotComplemented, ShapeMismatch
from src.shared.models import Certificate
from .funbackend import (
    DiagOperator,
    diag_adjoint,
    diag_complement_check,
    diag_mul,
    diag_pinv,
    diag_polar,
    diag_residual,
    diag_support,
    diag_transform_square,
    pw_sample_sup,
)
from .hilbmod import (
    OperatorMatrix,
    abs_op,
    compose,
    kernel_projection,
    op_add,
    op_adjoint,
    op_distance,
    op_identity,
    op_norm,
    range_basis,
    range_projection,
    rank_cutoff,
    smallest_nonzero_singular_value,
    svd_factors,
)
from .regular import GradedOperator, RegularOperator, btransform, graded_report, graph_decomposition_check

logger = logging.getLogger(__name__)

Operand = Union[OperatorMatrix, RegularOperator, DiagOperator, GradedOperator]
Carrier = Union[OperatorMatrix, DiagOperator]


class PolarDecomposition(BaseModel):
    v: Carrier
    abs_t: Carrier
    initial: Carrier  # V*V
    final: Carrier    # VV*
    residuals: Dict[str, float]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class GeneralizedInverse(BaseModel):
    s: Carrier
    s_tilde: Carrier  # generalized inverse of t*, built independently
    bounded: bool = True
    residuals: Dict[str, float]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class Thm31Report(BaseModel):
    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    polar: Optional[PolarDecomposition] = None
    inverse: Optional[GeneralizedInverse] = None
    residuals: Dict[str, float]
    certificate: Optional[Certificate] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def equivalent(self) -> bool:
        return self.cond_i == self.cond_ii == self.cond_iii


class ClosedRangeReport(BaseModel):
    range_closed: bool
    s_bounded: bool
    adjoint_range_closed: bool
    transform_range_closed: bool
    consistent: bool
    inf_singular_value: Optional[float] = None
    sup_inverse_norm: Optional[float] = None
    certificate: Optional[Certificate] = None


SUMMAND_KEYS = ("abs_summand", "kernel_summand", "range_summand")


def _matrix(t: Union[OperatorMatrix, RegularOperator], tol: Tolerances) -> OperatorMatrix:
    if isinstance(t, RegularOperator):
        return t.matrix(tol)
    if isinstance(t, OperatorMatrix):
        return t
    raise ShapeMismatch(f"expected a matrix-backend operator, got {type(t).__name__}")


def _regular(t: Union[OperatorMatrix, RegularOperator], tol: Tolerances) -> RegularOperator:
    return t if isinstance(t, RegularOperator) else RegularOperator.explicit(_matrix(t, tol))


def _threshold(tol: Tolerances, *operators: OperatorMatrix) -> float:
    return tol.identity_tol * (1.0 + max((op_norm(o) for o in operators), default=0.0))


# =================== MATRIX BACKEND CONSTRUCTIONS ===================

def _polar_matrix(b: OperatorMatrix, tol: Tolerances) -> PolarDecomposition:
    v, s = svd_factors(b, tol)
    v_adj, b_adj = op_adjoint(v), op_adjoint(b)
    abs_t = abs_op(b, tol)
    initial = compose(v, v_adj)
    final = compose(v_adj, v)
    residuals = {
        "polar_factorization": op_distance(b, compose(abs_t, v)),
        "partial_isometry": op_distance(compose(v, v_adj, v), v),
        "initial_projection": op_distance(initial, range_projection(b_adj, tol).operator),
        "final_projection": op_distance(final, range_projection(b, tol).operator),
        "initial_equals_t_star_s_star": op_distance(initial, compose(op_adjoint(s), b_adj)),
        "final_equals_ts": op_distance(final, compose(s, b)),
        "v_star_t": op_distance(compose(b, v_adj), abs_t),
        "v_v_star_t": op_distance(compose(b, v_adj, v), b),
        "initial_fixes_abs": op_distance(compose(abs_t, initial), abs_t),
        # V* recovered as |t| o s
        "uniqueness": op_distance(compose(s, abs_t), v_adj),
        "kernel_of_v": op_distance(kernel_projection(v, tol).operator, kernel_projection(b, tol).operator),
    }
    return PolarDecomposition(v=v, abs_t=abs_t, initial=initial, final=final, residuals=residuals)


def proof_formula_inverse(t: Union[OperatorMatrix, RegularOperator],
                          tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
    """s(t(x1 + x2) + x3) = x1 with x1 in Ran t*, x2 in Ker t, x3 in Ker t*.

    Each orthonormal range vector q is pulled back by the minimum-norm
    least-squares solution of xB = q, which lies in Ran t*; Ker t* maps to 0.
    """
    tol = resolve(tolerances)
    b = _matrix(t, tol)
    cutoff = rank_cutoff(b, tol)
    blocks = []
    for block, q in zip(b.blocks, range_basis(b, tol)):
        rows, cols = block.shape
        if q.shape[0] == 0:
            blocks.append(np.zeros((cols, rows), dtype=complex))
            continue
        largest = float(np.linalg.norm(block, 2))
        x, *_ = np.linalg.lstsq(block.T, q.T, rcond=cutoff / largest)
        blocks.append(q.conj().T @ x.T)
    return OperatorMatrix(profile=b.profile, domain_rank=b.codomain_rank, codomain_rank=b.domain_rank,
                          blocks=tuple(blocks))


def _inverse_matrix(b: OperatorMatrix, tol: Tolerances) -> GeneralizedInverse:
    _, s = svd_factors(b, tol)
    _, s_tilde = svd_factors(op_adjoint(b), tol)
    residuals = {
        "tst": op_distance(compose(b, s, b), b),
        "sts": op_distance(compose(s, b, s), s),
        "ts_selfadjoint": op_distance(compose(s, b), op_adjoint(compose(s, b))),
        "st_selfadjoint": op_distance(compose(b, s), op_adjoint(compose(b, s))),
        "ts_projection": op_distance(compose(s, b), range_projection(b, tol).operator),
        "adjoint_inverse": op_distance(s_tilde, op_adjoint(s)),
    }
    return GeneralizedInverse(s=s, s_tilde=s_tilde, bounded=True, residuals=residuals)


def _summand_residuals(b: OperatorMatrix, abs_t: OperatorMatrix, tol: Tolerances) -> Dict[str, float]:
    b_adj = op_adjoint(b)

    def split(kernel: OperatorMatrix, rng: OperatorMatrix, rank: int) -> float:
        total = op_add(kernel_projection(kernel, tol).operator, range_projection(rng, tol).operator)
        return op_distance(total, op_identity(b.profile, rank))

    return {
        "abs_summand": split(abs_t, abs_t, b.domain_rank),
        "kernel_summand": split(b, b_adj, b.domain_rank),
        "range_summand": split(b_adj, b, b.codomain_rank),
    }


# =================== FUNCTION BACKEND CONSTRUCTIONS ===================

def _polar_diag(t: DiagOperator) -> PolarDecomposition:
    v, abs_t = diag_polar(t)
    s = diag_pinv(t)
    v_adj = diag_adjoint(v)
    initial = diag_mul(v_adj, v)
    support = diag_support(t)
    residuals = {
        "polar_factorization": diag_residual(t, diag_mul(v, abs_t)),
        "partial_isometry": diag_residual(diag_mul(diag_mul(v, v_adj), v), v),
        "initial_projection": diag_residual(initial, support),
        "final_projection": diag_residual(diag_mul(v, v_adj), support),
        "initial_equals_t_star_s_star": diag_residual(initial, diag_mul(diag_adjoint(t), diag_adjoint(s))),
        "final_equals_ts": diag_residual(diag_mul(v, v_adj), diag_mul(t, s)),
        "v_star_t": diag_residual(diag_mul(v_adj, t), abs_t),
        "v_v_star_t": diag_residual(diag_mul(diag_mul(v, v_adj), t), t),
        "initial_fixes_abs": diag_residual(diag_mul(initial, abs_t), abs_t),
        "uniqueness": diag_residual(diag_mul(abs_t, s), v_adj),
    }
    return PolarDecomposition(v=v, abs_t=abs_t, initial=initial, final=diag_mul(v, v_adj), residuals=residuals)


def _inverse_diag(t: DiagOperator) -> GeneralizedInverse:
    s = diag_pinv(t)
    s_tilde = diag_pinv(diag_adjoint(t))
    ts, st = diag_mul(t, s), diag_mul(s, t)
    residuals = {
        "tst": diag_residual(diag_mul(ts, t), t),
        "sts": diag_residual(diag_mul(st, s), s),
        "ts_selfadjoint": diag_residual(ts, diag_adjoint(ts)),
        "st_selfadjoint": diag_residual(st, diag_adjoint(st)),
        "ts_projection": diag_residual(diag_mul(ts, ts), ts),
        "adjoint_inverse": diag_residual(s_tilde, diag_adjoint(s)),
    }
    return GeneralizedInverse(s=s, s_tilde=s_tilde, bounded=True, residuals=residuals)


# =================== PUBLIC OPERATIONS ===================

def polar_decompose(t: Operand, tolerances: Optional[Tolerances] = None) -> PolarDecomposition:
    """t = V|t|. Raises NotComplemented over C(X) when cl Ran t is not a summand."""
    tol = resolve(tolerances)
    if isinstance(t, DiagOperator):
        return _polar_diag(t)
    return _polar_matrix(_matrix(t, tol), tol)


def generalized_inverse(t: Operand, tolerances: Optional[Tolerances] = None) -> GeneralizedInverse:
    tol = resolve(tolerances)
    if isinstance(t, DiagOperator):
        return _inverse_diag(t)
    b = _matrix(t, tol)
    inverse = _inverse_matrix(b, tol)
    residuals = dict(inverse.residuals)
    residuals["dual_construction"] = op_distance(inverse.s, proof_formula_inverse(b, tol))
    return inverse.model_copy(update={"residuals": residuals})


def _negative_report(certificate: Certificate) -> Thm31Report:
    logger.info(f"condition (ii) fails at entry {certificate.entry}, point {certificate.point}")
    return Thm31Report(cond_i=False, cond_ii=False, cond_iii=False, residuals={}, certificate=certificate)


def _verify_matrix(b: OperatorMatrix, tol: Tolerances) -> Thm31Report:
    polar = _polar_matrix(b, tol)
    inverse = generalized_inverse(b, tol)
    summands = _summand_residuals(b, polar.abs_t, tol)
    graph = graph_decomposition_check(
        RegularOperator.explicit(b),
        RegularOperator.explicit(inverse.s),
        RegularOperator.explicit(inverse.s_tilde),
        tol,
    )
    threshold = _threshold(tol, b, inverse.s)
    residuals = {**summands, **polar.residuals, **inverse.residuals, "graph_decomposition": graph}
    return Thm31Report(
        cond_i=max(polar.residuals.values()) <= threshold,
        cond_ii=max(summands.values()) <= threshold,
        cond_iii=max(inverse.residuals.values()) <= threshold and graph <= threshold,
        polar=polar,
        inverse=inverse,
        residuals=residuals,
    )


def _verify_diag(t: DiagOperator) -> Thm31Report:
    verdict = diag_complement_check(t)
    if not verdict.complemented:
        return _negative_report(verdict.certificate)
    polar = _polar_diag(t)
    inverse = _inverse_diag(t)
    # complemented diagonal entries split exactly; the residual is structural
    summands = {key: 0.0 for key in SUMMAND_KEYS}
    residuals = {**summands, **polar.residuals, **inverse.residuals}
    return Thm31Report(
        cond_i=max(polar.residuals.values()) == 0.0,
        cond_ii=True,
        cond_iii=max(inverse.residuals.values()) == 0.0,
        polar=polar,
        inverse=inverse,
        residuals=residuals,
    )


def verify_thm31(t: Operand, tolerances: Optional[Tolerances] = None) -> Thm31Report:
    tol = resolve(tolerances)
    if isinstance(t, DiagOperator):
        return _verify_diag(t)
    if isinstance(t, GradedOperator):
        reports = [_verify_matrix(c.matrix(tol), tol) for c in t.components]
        keys = reports[0].residuals.keys()
        return Thm31Report(
            cond_i=all(r.cond_i for r in reports),
            cond_ii=all(r.cond_ii for r in reports),
            cond_iii=all(r.cond_iii for r in reports),
            residuals={key: max(r.residuals[key] for r in reports) for key in keys},
        )
    return _verify_matrix(_matrix(t, tol), tol)


def adjoint_polar_check(t: Operand, tolerances: Optional[Tolerances] = None) -> float:
    """max of ||t* - V*|t*||| and ||abs(F_{t*}) - V |F_t| V*||."""
    tol = resolve(tolerances)
    if isinstance(t, DiagOperator):
        v, abs_t = diag_polar(t)
        t_adj = diag_adjoint(t)
        _, abs_t_adj = diag_polar(t_adj)
        # no bounded transform in the exact backend; the adjoint factorization is the whole check
        return max(diag_residual(t_adj, diag_mul(diag_adjoint(v), abs_t_adj)),
                   diag_residual(abs_t_adj, diag_mul(diag_mul(v, abs_t), diag_adjoint(v))))
    regular = _regular(t, tol)
    b = regular.matrix(tol)
    v = _polar_matrix(b, tol).v
    v_adj = op_adjoint(v)
    b_adj = op_adjoint(b)
    factorization = op_distance(b_adj, compose(abs_op(b_adj, tol), v_adj))
    f = btransform(regular, tol)
    f_adj = btransform(regular.adjoint(tol), tol)
    conjugated = op_distance(abs_op(f_adj, tol), compose(v_adj, abs_op(f, tol), v))
    return max(factorization, conjugated)


def cor32_check(t: Union[OperatorMatrix, RegularOperator], tolerances: Optional[Tolerances] = None) -> float:
    """max of ||F_{|t|} - |F_t||| and ||F_t - V|F_t|||."""
    tol = resolve(tolerances)
    regular = _regular(t, tol)
    b = regular.matrix(tol)
    polar = _polar_matrix(b, tol)
    f = btransform(regular, tol)
    abs_f = abs_op(f, tol)
    f_of_abs = btransform(RegularOperator.explicit(polar.abs_t), tol)
    return max(op_distance(f_of_abs, abs_f), op_distance(f, compose(abs_f, polar.v)))


def transform_polar_check(t: Union[OperatorMatrix, RegularOperator],
                          tolerances: Optional[Tolerances] = None) -> Dict[str, float]:
    """The partial isometry of t also decomposes F_t, and agrees with the one computed from F_t."""
    tol = resolve(tolerances)
    regular = _regular(t, tol)
    b = regular.matrix(tol)
    polar = _polar_matrix(b, tol)
    f = btransform(regular, tol)
    f_of_abs = btransform(RegularOperator.explicit(polar.abs_t), tol)
    return {
        "transform_factorization": op_distance(f, compose(abs_op(f, tol), polar.v)),
        "transform_of_abs_factorization": op_distance(f, compose(f_of_abs, polar.v)),
        "transform_isometry_agreement": op_distance(_polar_matrix(f, tol).v, polar.v),
    }


def _transform_threshold(threshold: float) -> float:
    # sigma -> sigma / sqrt(1 + sigma^2) is increasing
    return threshold / float(np.sqrt(1.0 + threshold * threshold))


def _closed_range_diag(t: DiagOperator) -> ClosedRangeReport:
    verdict = diag_complement_check(t)
    adjoint_closed = diag_complement_check(diag_adjoint(t)).complemented
    # Ran F_t is closed iff the zero set of F_t* F_t is clopen
    transform_closed = diag_complement_check(diag_transform_square(t)).complemented
    try:
        s = diag_pinv(t)
        sup_inverse = max(pw_sample_sup(f) for f in s.entries)
        s_bounded = bool(np.isfinite(sup_inverse))
    except NotComplemented:
        # 1/f_j is unbounded near the certificate point
        sup_inverse, s_bounded = None, False
    return _closed_range_report(verdict.complemented, s_bounded, adjoint_closed, transform_closed,
                                sup_inverse_norm=sup_inverse, certificate=verdict.certificate)


def _closed_range_report(range_closed: bool, s_bounded: bool, adjoint_closed: bool, transform_closed: bool,
                         **extra) -> ClosedRangeReport:
    consistent = range_closed == s_bounded == adjoint_closed == transform_closed
    if not consistent:
        logger.warning(f"closed-range verdicts disagree: range={range_closed} s={s_bounded} "
                       f"adjoint={adjoint_closed} transform={transform_closed}")
    return ClosedRangeReport(
        range_closed=range_closed,
        s_bounded=s_bounded,
        adjoint_range_closed=adjoint_closed,
        transform_range_closed=transform_closed,
        consistent=consistent,
        **extra,
    )


def closed_range_suite(t: Operand, tolerances: Optional[Tolerances] = None) -> ClosedRangeReport:
    tol = resolve(tolerances)
    if isinstance(t, DiagOperator):
        return _closed_range_diag(t)

    if isinstance(t, GradedOperator):
        report = graded_report(t, tol)
        range_closed = not report.range_not_uniformly_closed
        s_bounded = report.sup_inverse_norm <= tol.inverse_norm_threshold
        adjoint_sigmas = [smallest_nonzero_singular_value(op_adjoint(c.matrix(tol)), tol) for c in t.components]
        adjoint_sigmas = [s for s in adjoint_sigmas if s is not None]
        adjoint_closed = not adjoint_sigmas or min(adjoint_sigmas) >= tol.singular_value_threshold
        transform_sigmas = [smallest_nonzero_singular_value(btransform(c, tol), tol) for c in t.components]
        transform_sigmas = [s for s in transform_sigmas if s is not None]
        transform_closed = (not transform_sigmas
                            or min(transform_sigmas) >= _transform_threshold(tol.singular_value_threshold))
        return _closed_range_report(range_closed, s_bounded, adjoint_closed, transform_closed,
                                    inf_singular_value=report.inf_singular_value,
                                    sup_inverse_norm=report.sup_inverse_norm)

    b = _matrix(t, tol)
    sigma = smallest_nonzero_singular_value(b, tol)
    sigma_adj = smallest_nonzero_singular_value(op_adjoint(b), tol)
    f = btransform(_regular(t, tol), tol)
    _, s = svd_factors(b, tol)
    norm_s = op_norm(s)
    expected = 0.0 if sigma is None else 1.0 / sigma
    # finite dimension: every range is closed; the transfer checks still compare the data
    range_closed = True
    s_bounded = (bool(np.isfinite(norm_s))
                 and abs(norm_s - expected) <= tol.identity_tol * (1.0 + expected)
                 and op_distance(compose(b, s, b), b) <= _threshold(tol, b))
    adjoint_closed = (sigma is None) == (sigma_adj is None) and (
        sigma is None or abs(sigma - sigma_adj) <= _threshold(tol, b))
    transform_closed = op_distance(range_projection(f, tol).operator,
                                   range_projection(b, tol).operator) <= _threshold(tol)
    return _closed_range_report(range_closed, s_bounded, adjoint_closed, transform_closed,
                                inf_singular_value=sigma, sup_inverse_norm=norm_s)
