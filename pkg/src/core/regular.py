# src/core/regular.py - bounded transform calculus for regular operators
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.shared.config import Tolerances, resolve
from src.shared.errors import DefectSingular, InvalidPolynomial, NotContractive, NotSquare, ShapeMismatch
from .hilbmod import (
    OperatorMatrix,
    abs_op,
    compose,
    op_adjoint,
    op_compose,
    op_distance,
    op_identity,
    op_norm,
    op_scale,
    op_sub,
    smallest_nonzero_singular_value,
    spectral_apply,
    svd_factors,
)
from .matalg import BlockProfile, SpectralFunction, is_positive, jacobi_hermitian, spectral_norm

logger = logging.getLogger(__name__)


class TransformValidity(BaseModel):
    contractive: bool
    norm: float
    defect_min_eigenvalue: float
    dense_defect: bool


class RegularOperator(BaseModel):
    """A regular operator carried explicitly or by its bounded transform F_t.

    In finite dimensions every domain is the whole module, so Dom(t) = Ran(Q_t)
    is not tracked.
    """

    matrix_form: Optional[OperatorMatrix] = None
    transform: Optional[OperatorMatrix] = None
    validity: Optional[TransformValidity] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _one_representation(self):
        if (self.matrix_form is None) == (self.transform is None):
            raise ValueError("exactly one of matrix_form or transform must be given")
        if self.transform is not None and self.validity is None:
            raise ValueError("transform form requires a validity witness")
        return self

    @classmethod
    def explicit(cls, t: OperatorMatrix) -> "RegularOperator":
        return cls(matrix_form=t)

    @classmethod
    def from_transform(cls, f: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> "RegularOperator":
        validity = validate_transform(f, tolerances)
        if not validity.contractive:
            raise NotContractive(f"||F|| = {validity.norm:.12f} exceeds 1")
        if validity.defect_min_eigenvalue <= 0.0:
            raise DefectSingular("1 - F*F is singular; the transform encodes no bounded operator")
        return cls(transform=f, validity=validity)

    @property
    def is_explicit(self) -> bool:
        return self.matrix_form is not None

    @property
    def _carrier(self) -> OperatorMatrix:
        return self.matrix_form if self.matrix_form is not None else self.transform

    @property
    def profile(self) -> BlockProfile:
        return self._carrier.profile

    @property
    def domain_rank(self) -> int:
        return self._carrier.domain_rank

    @property
    def codomain_rank(self) -> int:
        return self._carrier.codomain_rank

    def matrix(self, tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
        if self.matrix_form is not None:
            return self.matrix_form
        return _invert_transform(self.transform, tolerances)

    def adjoint(self, tolerances: Optional[Tolerances] = None) -> "RegularOperator":
        if self.matrix_form is not None:
            return RegularOperator.explicit(op_adjoint(self.matrix_form))
        # F_{t*} = (F_t)*
        return RegularOperator.from_transform(op_adjoint(self.transform), tolerances)


class GradedOperator(BaseModel):
    """Finite direct sum of regular operators: the truncation of an unbounded one."""

    components: Tuple[RegularOperator, ...]
    labels: Tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _uniform(self):
        if not self.components:
            raise ValueError("a graded operator needs at least one component")
        profile = self.components[0].profile
        if any(c.profile != profile for c in self.components):
            raise ValueError("all components must share one profile")
        if self.labels and len(self.labels) != len(self.components):
            raise ValueError("labels must match components")
        return self

    @property
    def profile(self) -> BlockProfile:
        return self.components[0].profile

    def label(self, index: int) -> int:
        return self.labels[index] if self.labels else index + 1


class OperatorClass(BaseModel):
    normal: bool
    selfadjoint: bool
    positive: bool
    residuals: Dict[str, float]
    transform_agrees: bool


class GradedComponentReport(BaseModel):
    label: int
    norm_t: float
    norm_transform: float
    smallest_singular_value: Optional[float]
    norm_inverse: float
    norm_partial_isometry: float
    inverse_residual: float
    polar_residual: float


class GradedReport(BaseModel):
    components: List[GradedComponentReport]
    inf_singular_value: Optional[float]
    sup_inverse_norm: float
    sup_transform_norm: float
    unbounded_inverse: bool
    range_not_uniformly_closed: bool
    flags: List[str] = Field(default_factory=list)


# =================== TRANSFORM CALCULUS ===================

def validate_transform(f: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> TransformValidity:
    """Contractivity and the spectrum of 1 - F*F.

    In finite dimensions Ran(1 - F*F) is dense iff 1 - F*F is invertible.
    """
    tol = resolve(tolerances)
    norm = op_norm(f)
    defect = op_sub(op_identity(f.profile, f.domain_rank), op_compose(f, op_adjoint(f)))
    eigenvalues = [jacobi_hermitian((b + b.conj().T) / 2.0, tol)[0] for b in defect.blocks if b.size]
    if eigenvalues:
        defect_min = float(min(lam[0] for lam in eigenvalues))
        defect_norm = float(max(np.abs(lam).max() for lam in eigenvalues))
    else:
        defect_min, defect_norm = 1.0, 1.0
    return TransformValidity(
        contractive=norm <= 1.0 + tol.contraction_slack,
        norm=norm,
        defect_min_eigenvalue=defect_min,
        dense_defect=defect_min > tol.rank_tol * (1.0 + defect_norm),
    )


def _invert_transform(f: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
    # t = F (1 - F*F)^(-1/2)
    g = spectral_apply(op_compose(f, op_adjoint(f)), SpectralFunction.INV_SQRT_DEFECT, tolerances)
    return op_compose(g, f)


def q_of(t: RegularOperator, tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
    """Q_t = (1 + t*t)^(-1/2), or (1 - F*F)^(1/2) for the transform form."""
    if t.matrix_form is not None:
        b = t.matrix_form
        return spectral_apply(op_compose(b, op_adjoint(b)), SpectralFunction.INV_SQRT_SHIFT, tolerances)
    f = t.transform
    defect = op_sub(op_identity(f.profile, f.domain_rank), op_compose(f, op_adjoint(f)))
    return spectral_apply(defect, SpectralFunction.SQRT, tolerances)


def btransform(t: RegularOperator, tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
    """F_t = t Q_t."""
    if t.transform is not None:
        return t.transform
    return op_compose(q_of(t, tolerances), t.matrix_form)


def inverse_btransform(f: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> RegularOperator:
    validity = validate_transform(f, tolerances)
    if not validity.dense_defect:
        raise DefectSingular(
            f"1 - F*F has minimum eigenvalue {validity.defect_min_eigenvalue:.3e}"
            f" (contractive={validity.contractive}); no bounded operator has this transform"
        )
    return RegularOperator.explicit(_invert_transform(f, tolerances))


# =================== CLASSIFICATION ===================

def _flags(b: OperatorMatrix, tol: Tolerances) -> Tuple[bool, bool, bool, float, float]:
    scale = 1.0 + op_norm(b)
    adjoint = op_adjoint(b)
    sa_residual = op_distance(b, adjoint)
    normal_residual = op_distance(op_compose(b, adjoint), op_compose(adjoint, b))
    selfadjoint = sa_residual <= tol.identity_tol * scale
    normal = selfadjoint or normal_residual <= tol.identity_tol * scale * scale
    positive = selfadjoint and (b.domain_rank == 0 or is_positive(b.as_algebra_element(), tol))
    return normal, selfadjoint, positive, sa_residual, normal_residual


def classify(t: RegularOperator, tolerances: Optional[Tolerances] = None) -> OperatorClass:
    tol = resolve(tolerances)
    if t.domain_rank != t.codomain_rank:
        raise NotSquare(f"operator maps A^{t.domain_rank} to A^{t.codomain_rank}")
    b = t.matrix(tol)
    normal, selfadjoint, positive, sa_residual, normal_residual = _flags(b, tol)
    f_normal, f_selfadjoint, f_positive, f_sa, f_normal_res = _flags(btransform(t, tol), tol)
    agrees = (normal, selfadjoint, positive) == (f_normal, f_selfadjoint, f_positive)
    if not agrees:
        logger.warning(f"classification of t and F_t disagree: {(normal, selfadjoint, positive)}"
                       f" vs {(f_normal, f_selfadjoint, f_positive)}")
    return OperatorClass(
        normal=normal,
        selfadjoint=selfadjoint,
        positive=positive,
        residuals={
            "selfadjoint": sa_residual,
            "normal": normal_residual,
            "transform_selfadjoint": f_sa,
            "transform_normal": f_normal_res,
        },
        transform_agrees=agrees,
    )


# =================== IDENTITIES ===================

def _poly_of(h: OperatorMatrix, coefficients: Sequence[float]) -> OperatorMatrix:
    """Horner evaluation of p(h), coefficients lowest degree first."""
    identity = op_identity(h.profile, h.domain_rank)
    result = op_scale(identity, coefficients[-1])
    for c in reversed(coefficients[:-1]):
        result = op_compose(result, h)
        result = OperatorMatrix(
            profile=h.profile,
            domain_rank=h.domain_rank,
            codomain_rank=h.codomain_rank,
            blocks=tuple(r + c * i for r, i in zip(result.blocks, identity.blocks)),
        )
    return result


def _check_polynomial(coefficients: Sequence[float], tol: Tolerances) -> List[float]:
    if not coefficients:
        raise InvalidPolynomial("polynomial needs at least one coefficient")
    if len(coefficients) - 1 > tol.max_polynomial_degree:
        raise InvalidPolynomial(f"degree {len(coefficients) - 1} exceeds {tol.max_polynomial_degree}")
    if any(isinstance(c, complex) or not np.isfinite(c) for c in coefficients):
        raise InvalidPolynomial("coefficients must be finite reals")
    return [float(c) for c in coefficients]


def remark22_residuals(
    t: RegularOperator,
    coefficients: Sequence[float],
    tolerances: Optional[Tolerances] = None,
) -> Tuple[float, float]:
    """||F p(F*F) - p(FF*) F|| and ||t Q_t^2 - Q_{t*} t Q_t|| in the composition sense."""
    tol = resolve(tolerances)
    p = _check_polynomial(coefficients, tol)
    f = btransform(t, tol)
    f_star = op_adjoint(f)
    lhs = op_compose(_poly_of(op_compose(f, f_star), p), f)
    rhs = op_compose(f, _poly_of(op_compose(f_star, f), p))
    first = op_distance(lhs, rhs)

    b = t.matrix(tol)
    q = q_of(t, tol)
    q_adj = q_of(t.adjoint(tol), tol)
    second = op_distance(compose(q, q, b), compose(q, b, q_adj))
    return first, second


def graph_decomposition_check(
    t: RegularOperator,
    s: RegularOperator,
    s_tilde: RegularOperator,
    tolerances: Optional[Tolerances] = None,
) -> float:
    """F + E = G(s) + VG(s~) with V(x, y) = (y, -x).

    Returns the larger of the orthogonality residual and the dimension deficit.
    """
    tol = resolve(tolerances)
    k, m = t.domain_rank, t.codomain_rank
    if (s.domain_rank, s.codomain_rank) != (m, k) or (s_tilde.domain_rank, s_tilde.codomain_rank) != (k, m):
        raise ShapeMismatch("s must map F -> E and s~ must map E -> F")
    sb = s.matrix(tol)
    stb = s_tilde.matrix(tol)

    residual = 0.0
    for n, s_block, st_block in zip(t.profile.sizes, sb.blocks, stb.blocks):
        # rows of [I | S] span G(s); rows of [S~ | -I] span V G(s~), both inside F + E
        graph_s = np.hstack([np.eye(m * n, dtype=complex), s_block])
        graph_st = np.hstack([st_block, -np.eye(k * n, dtype=complex)])
        orthogonality = spectral_norm(graph_s @ graph_st.conj().T)
        total = (m + k) * n
        if total:
            stacked = np.vstack([graph_s, graph_st])
            sv = np.linalg.svd(stacked, compute_uv=False)
            dimension = int(np.sum(sv > tol.rank_tol * (1.0 + sv.max())))
        else:
            dimension = 0
        residual = max(residual, orthogonality, float(abs(total - dimension)))
    return residual


# =================== GRADED OPERATORS ===================

def graded_family(kind: str, count: int, profile: BlockProfile, rank: int) -> GradedOperator:
    """inv_n: (1/n)I, n: nI, identity: I for n = 1..count."""
    scales = {
        "inv_n": lambda n: 1.0 / n,
        "n": lambda n: float(n),
        "identity": lambda n: 1.0,
    }
    if kind not in scales:
        raise ValueError(f"unknown graded family '{kind}'")
    identity = op_identity(profile, rank)
    components = tuple(
        RegularOperator.explicit(op_scale(identity, scales[kind](n))) for n in range(1, count + 1)
    )
    return GradedOperator(components=components, labels=tuple(range(1, count + 1)))


def _component_report(label: int, t: RegularOperator, tol: Tolerances) -> GradedComponentReport:
    b = t.matrix(tol)
    v, s = svd_factors(b, tol)
    abs_t = abs_op(b, tol)
    return GradedComponentReport(
        label=label,
        norm_t=op_norm(b),
        norm_transform=op_norm(btransform(t, tol)),
        smallest_singular_value=smallest_nonzero_singular_value(b, tol),
        norm_inverse=op_norm(s),
        norm_partial_isometry=op_norm(v),
        inverse_residual=max(op_distance(compose(b, s, b), b), op_distance(compose(s, b, s), s)),
        polar_residual=op_distance(compose(abs_t, v), b),
    )


def graded_report(gt: GradedOperator, tolerances: Optional[Tolerances] = None) -> GradedReport:
    tol = resolve(tolerances)
    labels = [gt.label(i) for i in range(len(gt.components))]
    with ThreadPoolExecutor(max_workers=tol.workers) as pool:
        reports = list(pool.map(lambda args: _component_report(args[0], args[1], tol),
                                zip(labels, gt.components)))

    sigmas = [r.smallest_singular_value for r in reports if r.smallest_singular_value is not None]
    inf_sigma = min(sigmas) if sigmas else None
    sup_inverse = max(r.norm_inverse for r in reports)
    partial_isometries_bounded = all(r.norm_partial_isometry <= 1.0 + tol.identity_tol for r in reports)
    unbounded_inverse = sup_inverse > tol.inverse_norm_threshold and partial_isometries_bounded
    not_closed = inf_sigma is not None and inf_sigma < tol.singular_value_threshold

    flags = []
    if unbounded_inverse:
        flags.append("unbounded_inverse")
    if not_closed:
        flags.append("range_not_uniformly_closed")
    logger.info(f"graded report over {len(reports)} components: flags={flags}")
    return GradedReport(
        components=reports,
        inf_singular_value=inf_sigma,
        sup_inverse_norm=sup_inverse,
        sup_transform_norm=max(r.norm_transform for r in reports),
        unbounded_inverse=unbounded_inverse,
        range_not_uniformly_closed=not_closed,
        flags=flags,
    )
