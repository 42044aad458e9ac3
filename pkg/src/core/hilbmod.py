# src/core/hilbmod.py - Hilbert A-modules A^k over the matrix backend
"""Row-vector convention.

An element x of A^k is stored per block i as the n_i x (k*n_i) complex matrix
[x_1 | ... | x_k]. An operator B: A^k -> A^m acts on the right, x -> xB, and is
stored per block as the (k*n_i) x (m*n_i) matrix [B_jl]. Consequences:

* the adjoint is the blockwise conjugate transpose;
* the matrix of ``second o first`` is ``first @ second`` (order flips);
* Ran(B) is the row space of each block, Ker(B) its left null space.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.shared.config import Tolerances, resolve
from src.shared.errors import ProfileMismatch, ShapeMismatch
from .matalg import AlgElement, BlockProfile, SpectralFunction, funcalc_block, spectral_norm

logger = logging.getLogger(__name__)


def _freeze(blocks) -> Tuple[np.ndarray, ...]:
    frozen = []
    for block in blocks:
        array = np.array(block, dtype=complex)
        array.setflags(write=False)
        frozen.append(array)
    return tuple(frozen)


class ModuleVector(BaseModel):
    profile: BlockProfile
    rank: int
    blocks: Tuple[np.ndarray, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("blocks", mode="before")
    @classmethod
    def _as_complex(cls, blocks):
        return _freeze(blocks)

    @model_validator(mode="after")
    def _shapes(self):
        if self.rank < 0:
            raise ValueError("rank must be non-negative")
        if len(self.blocks) != len(self.profile.sizes):
            raise ValueError(f"expected {len(self.profile.sizes)} blocks, got {len(self.blocks)}")
        for i, (block, n) in enumerate(zip(self.blocks, self.profile.sizes)):
            if block.shape != (n, self.rank * n):
                raise ValueError(f"block {i} has shape {block.shape}, expected ({n}, {self.rank * n})")
        return self

    @classmethod
    def from_entries(cls, entries: Sequence[AlgElement], profile: Optional[BlockProfile] = None) -> "ModuleVector":
        if profile is None:
            if not entries:
                raise ShapeMismatch("profile is required for a rank-0 vector")
            profile = entries[0].profile
        for j, entry in enumerate(entries):
            if entry.profile != profile:
                raise ProfileMismatch(f"entry {j} has profile {list(entry.profile.sizes)}")
        blocks = []
        for i, n in enumerate(profile.sizes):
            if entries:
                blocks.append(np.hstack([e.blocks[i] for e in entries]))
            else:
                blocks.append(np.zeros((n, 0), dtype=complex))
        return cls(profile=profile, rank=len(entries), blocks=tuple(blocks))

    def entry(self, j: int) -> AlgElement:
        return AlgElement(
            profile=self.profile,
            blocks=tuple(b[:, j * n:(j + 1) * n] for b, n in zip(self.blocks, self.profile.sizes)),
        )

    def entries(self) -> List[AlgElement]:
        return [self.entry(j) for j in range(self.rank)]


class OperatorMatrix(BaseModel):
    """Adjointable A-linear map A^k -> A^m, acting on row vectors by x -> xB."""

    profile: BlockProfile
    domain_rank: int
    codomain_rank: int
    blocks: Tuple[np.ndarray, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("blocks", mode="before")
    @classmethod
    def _as_complex(cls, blocks):
        return _freeze(blocks)

    @model_validator(mode="after")
    def _shapes(self):
        if self.domain_rank < 0 or self.codomain_rank < 0:
            raise ValueError("ranks must be non-negative")
        if len(self.blocks) != len(self.profile.sizes):
            raise ValueError(f"expected {len(self.profile.sizes)} blocks, got {len(self.blocks)}")
        for i, (block, n) in enumerate(zip(self.blocks, self.profile.sizes)):
            expected = (self.domain_rank * n, self.codomain_rank * n)
            if block.shape != expected:
                raise ValueError(f"block {i} has shape {block.shape}, expected {expected}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"block {i} has non-finite entries")
        return self

    @classmethod
    def from_entries(
        cls,
        entries: Sequence[Sequence[AlgElement]],
        profile: Optional[BlockProfile] = None,
        domain_rank: Optional[int] = None,
        codomain_rank: Optional[int] = None,
    ) -> "OperatorMatrix":
        k = len(entries) if domain_rank is None else domain_rank
        m = (len(entries[0]) if entries else 0) if codomain_rank is None else codomain_rank
        if profile is None:
            if k == 0 or m == 0:
                raise ShapeMismatch("profile is required for degenerate shapes")
            profile = entries[0][0].profile
        if len(entries) != k or any(len(row) != m for row in entries):
            raise ShapeMismatch(f"entries do not form a {k}x{m} array")
        for j, row in enumerate(entries):
            for l, entry in enumerate(row):
                if entry.profile != profile:
                    raise ProfileMismatch(f"entry ({j},{l}) has profile {list(entry.profile.sizes)}")
        blocks = []
        for i, n in enumerate(profile.sizes):
            if k and m:
                blocks.append(np.block([[entries[j][l].blocks[i] for l in range(m)] for j in range(k)]))
            else:
                blocks.append(np.zeros((k * n, m * n), dtype=complex))
        return cls(profile=profile, domain_rank=k, codomain_rank=m, blocks=tuple(blocks))

    def entry(self, j: int, l: int) -> AlgElement:
        return AlgElement(
            profile=self.profile,
            blocks=tuple(
                b[j * n:(j + 1) * n, l * n:(l + 1) * n] for b, n in zip(self.blocks, self.profile.sizes)
            ),
        )

    @property
    def is_square(self) -> bool:
        return self.domain_rank == self.codomain_rank

    def as_algebra_element(self) -> AlgElement:
        """A square operator on A^k viewed as an element of M_k(A)."""
        if not self.is_square or self.domain_rank == 0:
            raise ShapeMismatch("only nonzero square operators are elements of M_k(A)")
        return AlgElement(profile=self.profile.scaled(self.domain_rank), blocks=self.blocks)


class Submodule(BaseModel):
    """Per block: orthonormal rows spanning the block's row-space component in C^(k*n_i)."""

    profile: BlockProfile
    rank: int
    bases: Tuple[np.ndarray, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("bases", mode="before")
    @classmethod
    def _as_complex(cls, bases):
        return _freeze(bases)

    @model_validator(mode="after")
    def _orthonormal(self):
        if len(self.bases) != len(self.profile.sizes):
            raise ValueError(f"expected {len(self.profile.sizes)} bases, got {len(self.bases)}")
        for i, (basis, n) in enumerate(zip(self.bases, self.profile.sizes)):
            if basis.ndim != 2 or basis.shape[1] != self.rank * n:
                raise ValueError(f"basis {i} must have {self.rank * n} columns, got shape {basis.shape}")
            gram = basis @ basis.conj().T
            if spectral_norm(gram - np.eye(basis.shape[0])) > 1e-10:
                raise ValueError(f"basis {i} is not orthonormal")
        return self

    @property
    def dimensions(self) -> Tuple[int, ...]:
        return tuple(b.shape[0] for b in self.bases)


class ProjectionOperator(BaseModel):
    operator: OperatorMatrix

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _is_projection(self):
        p = self.operator
        if not p.is_square:
            raise ValueError("a projection must be square")
        for i, block in enumerate(p.blocks):
            if spectral_norm(block - block.conj().T) > 1e-8:
                raise ValueError(f"block {i} is not self-adjoint")
            if spectral_norm(block @ block - block) > 1e-8:
                raise ValueError(f"block {i} is not idempotent")
        return self

    @property
    def rank(self) -> Tuple[int, ...]:
        return tuple(int(round(np.trace(b).real)) for b in self.operator.blocks)


# =================== VECTORS ===================

def _check_vectors(x: ModuleVector, y: ModuleVector) -> None:
    if x.profile != y.profile:
        raise ProfileMismatch(f"profiles differ: {list(x.profile.sizes)} vs {list(y.profile.sizes)}")
    if x.rank != y.rank:
        raise ShapeMismatch(f"ranks differ: {x.rank} vs {y.rank}")


def inner_product(x: ModuleVector, y: ModuleVector) -> AlgElement:
    """<x, y> = sum_j x_j y_j*, A-linear in the first variable."""
    _check_vectors(x, y)
    return AlgElement(profile=x.profile, blocks=tuple(a @ b.conj().T for a, b in zip(x.blocks, y.blocks)))


def module_norm(x: ModuleVector) -> float:
    gram = inner_product(x, x)
    return float(np.sqrt(max(spectral_norm(b) for b in gram.blocks)))


def left_action(a: AlgElement, x: ModuleVector) -> ModuleVector:
    if a.profile != x.profile:
        raise ProfileMismatch("algebra element and vector have different profiles")
    return ModuleVector(profile=x.profile, rank=x.rank, blocks=tuple(ab @ xb for ab, xb in zip(a.blocks, x.blocks)))


def vector_add(x: ModuleVector, y: ModuleVector) -> ModuleVector:
    _check_vectors(x, y)
    return ModuleVector(profile=x.profile, rank=x.rank, blocks=tuple(a + b for a, b in zip(x.blocks, y.blocks)))


def orthogonal_sum(x: ModuleVector, y: ModuleVector) -> ModuleVector:
    """(x, y) in E + F."""
    if x.profile != y.profile:
        raise ProfileMismatch("summands have different profiles")
    return ModuleVector(
        profile=x.profile,
        rank=x.rank + y.rank,
        blocks=tuple(np.hstack([a, b]) for a, b in zip(x.blocks, y.blocks)),
    )


# =================== OPERATORS ===================

def op_zero(profile: BlockProfile, domain_rank: int, codomain_rank: int) -> OperatorMatrix:
    return OperatorMatrix(
        profile=profile,
        domain_rank=domain_rank,
        codomain_rank=codomain_rank,
        blocks=tuple(np.zeros((domain_rank * n, codomain_rank * n), dtype=complex) for n in profile.sizes),
    )


def op_identity(profile: BlockProfile, rank: int) -> OperatorMatrix:
    return OperatorMatrix(
        profile=profile,
        domain_rank=rank,
        codomain_rank=rank,
        blocks=tuple(np.eye(rank * n, dtype=complex) for n in profile.sizes),
    )


def _same_shape(a: OperatorMatrix, b: OperatorMatrix) -> None:
    if a.profile != b.profile:
        raise ProfileMismatch(f"profiles differ: {list(a.profile.sizes)} vs {list(b.profile.sizes)}")
    if (a.domain_rank, a.codomain_rank) != (b.domain_rank, b.codomain_rank):
        raise ShapeMismatch(
            f"shapes differ: {a.domain_rank}->{a.codomain_rank} vs {b.domain_rank}->{b.codomain_rank}"
        )


def _with_blocks(template: OperatorMatrix, blocks, domain_rank=None, codomain_rank=None) -> OperatorMatrix:
    return OperatorMatrix(
        profile=template.profile,
        domain_rank=template.domain_rank if domain_rank is None else domain_rank,
        codomain_rank=template.codomain_rank if codomain_rank is None else codomain_rank,
        blocks=tuple(blocks),
    )


def op_add(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    _same_shape(a, b)
    return _with_blocks(a, (x + y for x, y in zip(a.blocks, b.blocks)))


def op_sub(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    _same_shape(a, b)
    return _with_blocks(a, (x - y for x, y in zip(a.blocks, b.blocks)))


def op_scale(a: OperatorMatrix, c: complex) -> OperatorMatrix:
    return _with_blocks(a, (c * x for x in a.blocks))


def op_norm(a: OperatorMatrix) -> float:
    return max(spectral_norm(b) for b in a.blocks)


def op_distance(a: OperatorMatrix, b: OperatorMatrix) -> float:
    _same_shape(a, b)
    return max(spectral_norm(x - y) for x, y in zip(a.blocks, b.blocks))


def op_apply(b: OperatorMatrix, x: ModuleVector) -> ModuleVector:
    if b.profile != x.profile:
        raise ProfileMismatch("operator and vector have different profiles")
    if x.rank != b.domain_rank:
        raise ShapeMismatch(f"vector rank {x.rank} does not match domain rank {b.domain_rank}")
    return ModuleVector(
        profile=x.profile,
        rank=b.codomain_rank,
        blocks=tuple(xb @ bb for xb, bb in zip(x.blocks, b.blocks)),
    )


def op_adjoint(b: OperatorMatrix) -> OperatorMatrix:
    return _with_blocks(
        b,
        (x.conj().T for x in b.blocks),
        domain_rank=b.codomain_rank,
        codomain_rank=b.domain_rank,
    )


def op_compose(first: OperatorMatrix, second: OperatorMatrix) -> OperatorMatrix:
    """second o first (apply ``first``, then ``second``)."""
    if first.profile != second.profile:
        raise ProfileMismatch("operators have different profiles")
    if first.codomain_rank != second.domain_rank:
        raise ShapeMismatch(
            f"cannot compose {first.domain_rank}->{first.codomain_rank} with "
            f"{second.domain_rank}->{second.codomain_rank}"
        )
    return _with_blocks(
        first,
        (a @ b for a, b in zip(first.blocks, second.blocks)),
        domain_rank=first.domain_rank,
        codomain_rank=second.codomain_rank,
    )


def compose(*operators: OperatorMatrix) -> OperatorMatrix:
    """Apply operators left to right: compose(a, b, c) = c o b o a."""
    result = operators[0]
    for op in operators[1:]:
        result = op_compose(result, op)
    return result


def spectral_apply(h: OperatorMatrix, fn: SpectralFunction, tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
    """Functional calculus of a positive operator on A^k (blockwise on M_k(A))."""
    if not h.is_square:
        raise ShapeMismatch("functional calculus needs a square operator")
    tol = resolve(tolerances)
    return _with_blocks(h, (funcalc_block(b, fn, tol) for b in h.blocks))


def abs_op(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> OperatorMatrix:
    """|t| = (t*t)^(1/2), an operator on the domain module."""
    return spectral_apply(op_compose(b, op_adjoint(b)), SpectralFunction.SQRT, tolerances)


# =================== RANGES, KERNELS, SUBMODULES ===================

def rank_cutoff(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> float:
    return resolve(tolerances).rank_tol * (1.0 + op_norm(b))


def block_svd(block: np.ndarray, cutoff: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Full SVD of one block plus its numerical rank."""
    rows, cols = block.shape
    if rows == 0 or cols == 0:
        return np.eye(rows, dtype=complex), np.zeros(0), np.eye(cols, dtype=complex), 0
    u, s, vh = np.linalg.svd(block, full_matrices=True)
    return u, s, vh, int(np.sum(s > cutoff))


def svd_factors(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> Tuple[OperatorMatrix, OperatorMatrix]:
    """Partial isometry U_r W_r^H and Moore-Penrose inverse W_r S_r^-1 U_r^H, blockwise."""
    cutoff = rank_cutoff(b, tolerances)
    v_blocks, s_blocks = [], []
    for block in b.blocks:
        u, sv, vh, r = block_svd(block, cutoff)
        v_blocks.append(u[:, :r] @ vh[:r])
        s_blocks.append((vh[:r].conj().T / sv[:r]) @ u[:, :r].conj().T)
        logger.debug(f"block {block.shape}: numerical rank {r}")
    v = OperatorMatrix(profile=b.profile, domain_rank=b.domain_rank, codomain_rank=b.codomain_rank,
                       blocks=tuple(v_blocks))
    s = OperatorMatrix(profile=b.profile, domain_rank=b.codomain_rank, codomain_rank=b.domain_rank,
                       blocks=tuple(s_blocks))
    return v, s


def singular_values(b: OperatorMatrix) -> np.ndarray:
    values = [np.linalg.svd(block, compute_uv=False) for block in b.blocks if block.size]
    return np.concatenate(values) if values else np.zeros(0)


def smallest_nonzero_singular_value(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> Optional[float]:
    s = singular_values(b)
    s = s[s > rank_cutoff(b, tolerances)]
    return float(s.min()) if s.size else None


def range_basis(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> Tuple[np.ndarray, ...]:
    """Orthonormal rows spanning the row space of each block (Ran B)."""
    cutoff = rank_cutoff(b, tolerances)
    bases = []
    for block in b.blocks:
        _, _, vh, r = block_svd(block, cutoff)
        bases.append(vh[:r])
    return tuple(bases)


def kernel_basis(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> Tuple[np.ndarray, ...]:
    """Orthonormal rows spanning the left null space of each block (Ker B)."""
    cutoff = rank_cutoff(b, tolerances)
    bases = []
    for block in b.blocks:
        u, _, _, r = block_svd(block, cutoff)
        bases.append(u[:, r:].conj().T)
    return tuple(bases)


def projection_onto(profile: BlockProfile, rank: int, bases: Sequence[np.ndarray]) -> ProjectionOperator:
    blocks = [q.conj().T @ q if q.shape[0] else np.zeros((rank * n, rank * n), dtype=complex)
              for q, n in zip(bases, profile.sizes)]
    operator = OperatorMatrix(profile=profile, domain_rank=rank, codomain_rank=rank,
                              blocks=tuple((p + p.conj().T) / 2.0 for p in blocks))
    return ProjectionOperator(operator=operator)


def range_projection(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> ProjectionOperator:
    return projection_onto(b.profile, b.codomain_rank, range_basis(b, tolerances))


def kernel_projection(b: OperatorMatrix, tolerances: Optional[Tolerances] = None) -> ProjectionOperator:
    return projection_onto(b.profile, b.domain_rank, kernel_basis(b, tolerances))


def submodule_from_generators(
    profile: BlockProfile,
    rank: int,
    generators: Sequence[ModuleVector],
    tolerances: Optional[Tolerances] = None,
) -> Submodule:
    """The A-submodule generated by ``generators``: the range of the operator whose rows they are."""
    for g in generators:
        if g.profile != profile or g.rank != rank:
            raise ShapeMismatch("generator does not live in the ambient module")
    if generators:
        stacked = OperatorMatrix(
            profile=profile,
            domain_rank=len(generators),
            codomain_rank=rank,
            blocks=tuple(np.vstack([g.blocks[i] for g in generators]) for i in range(len(profile.sizes))),
        )
        bases = range_basis(stacked, tolerances)
    else:
        bases = tuple(np.zeros((0, rank * n), dtype=complex) for n in profile.sizes)
    return Submodule(profile=profile, rank=rank, bases=bases)


def decompose(e_rank: int, s: Submodule) -> Tuple[ProjectionOperator, ProjectionOperator]:
    """E = S + S^perp; always succeeds over a C*-algebra of compact operators."""
    if s.rank != e_rank:
        raise ShapeMismatch(f"submodule lives in A^{s.rank}, not A^{e_rank}")
    p = projection_onto(s.profile, e_rank, s.bases)
    complement = _with_blocks(p.operator, (np.eye(b.shape[0], dtype=complex) - b for b in p.operator.blocks))
    logger.debug(f"decomposed A^{e_rank} with summand dimensions {s.dimensions}")
    return p, ProjectionOperator(operator=complement)
