# src/core/matalg.py - the finite-dimensional coefficient algebra A = M_n1(C) + ... + M_nr(C)
import logging
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from src.shared.config import Tolerances, resolve
from src.shared.errors import (
    DefectSingular,
    EigenNotConverged,
    NegativeSpectrum,
    NotHermitian,
    ProfileMismatch,
)

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)
# pivots below this (unit Frobenius scale) cannot move an eigenvalue
_PIVOT_FLOOR = _EPS * _EPS


class ArithOp(str, Enum):
    ADD = "add"
    MUL = "mul"


class SpectralFunction(str, Enum):
    SQRT = "sqrt"
    INV_SQRT_SHIFT = "inv_sqrt_shift"     # x -> (1+x)^(-1/2)
    INV_SQRT_DEFECT = "inv_sqrt_defect"   # x -> (1-x)^(-1/2)
    PINV_SQRT = "pinv_sqrt"               # x -> x^(-1/2) above rank tolerance, 0 below


class BlockProfile(BaseModel):
    sizes: Tuple[int, ...]

    model_config = ConfigDict(frozen=True)

    @field_validator("sizes")
    @classmethod
    def _positive_sizes(cls, sizes: Tuple[int, ...]) -> Tuple[int, ...]:
        if not sizes:
            raise ValueError("profile must contain at least one block")
        if any(n < 1 for n in sizes):
            raise ValueError(f"block sizes must be >= 1, got {list(sizes)}")
        return sizes

    @classmethod
    def of(cls, *sizes: int) -> "BlockProfile":
        return cls(sizes=tuple(sizes))

    def scaled(self, k: int) -> "BlockProfile":
        """Profile of M_k(A), i.e. blocks of size k*n_i."""
        return BlockProfile(sizes=tuple(k * n for n in self.sizes))

    def __len__(self) -> int:
        return len(self.sizes)


def _frozen_complex(matrix) -> np.ndarray:
    array = np.array(matrix, dtype=complex)
    if array.ndim != 2:
        raise ValueError(f"block must be two-dimensional, got shape {array.shape}")
    array.setflags(write=False)
    return array


class AlgElement(BaseModel):
    profile: BlockProfile
    blocks: Tuple[np.ndarray, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("blocks", mode="before")
    @classmethod
    def _as_complex(cls, blocks):
        return tuple(_frozen_complex(b) for b in blocks)

    @model_validator(mode="after")
    def _shapes_match_profile(self):
        if len(self.blocks) != len(self.profile.sizes):
            raise ValueError(f"expected {len(self.profile.sizes)} blocks, got {len(self.blocks)}")
        for i, (block, n) in enumerate(zip(self.blocks, self.profile.sizes)):
            if block.shape != (n, n):
                raise ValueError(f"block {i} has shape {block.shape}, profile requires ({n}, {n})")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"block {i} has non-finite entries")
        return self

    @classmethod
    def from_blocks(cls, blocks: Sequence) -> "AlgElement":
        arrays = [np.atleast_2d(np.array(b, dtype=complex)) for b in blocks]
        return cls(profile=BlockProfile(sizes=tuple(a.shape[0] for a in arrays)), blocks=tuple(arrays))


class HermSpectrum(BaseModel):
    """Per block: ascending real eigenvalues and the unitary of eigenvectors (columns)."""

    profile: BlockProfile
    eigenvalues: Tuple[np.ndarray, ...]
    vectors: Tuple[np.ndarray, ...]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def reconstruct(self) -> AlgElement:
        return AlgElement(
            profile=self.profile,
            blocks=tuple(u @ np.diag(lam) @ u.conj().T for lam, u in zip(self.eigenvalues, self.vectors)),
        )

    @property
    def min_eigenvalue(self) -> float:
        return min(float(lam[0]) for lam in self.eigenvalues)

    @property
    def max_eigenvalue(self) -> float:
        return max(float(lam[-1]) for lam in self.eigenvalues)


# =================== BLOCK-LEVEL KERNELS ===================

def spectral_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def hermitian_defect(matrix: np.ndarray) -> float:
    return spectral_norm(matrix - matrix.conj().T)


def _off_diagonal(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def jacobi_hermitian(
    h: np.ndarray,
    tolerances: Optional[Tolerances] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a single Hermitian block.

    The block is scaled to unit Frobenius norm first. Each rotation rotates
    the phase of a_pq away, then applies the real 2x2 rotation annihilating
    it. Pivots below eps * sqrt(|a_pp a_qq|) or the absolute floor are zeroed
    instead of rotated. Returns ascending eigenvalues and the unitary whose
    columns are the eigenvectors.
    """
    tol = resolve(tolerances)
    a = np.array(h, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 0:
        return np.zeros(0), v
    frob = float(np.linalg.norm(a))
    if frob == 0.0:
        return np.zeros(n), v

    a /= frob
    for sweep in range(tol.jacobi_max_sweeps):
        off = _off_diagonal(a)
        if off <= tol.jacobi_tol:
            logger.debug(f"Jacobi converged after {sweep} sweeps (n={n}, off={off:.2e})")
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                magnitude = abs(a[p, q])
                if magnitude <= max(_EPS * np.sqrt(abs(a[p, p].real * a[q, q].real)), _PIVOT_FLOOR):
                    a[p, q] = a[q, p] = 0.0
                    continue
                phase = np.conj(a[p, q] / magnitude)
                theta = (a[q, q].real - a[p, p].real) / (2.0 * magnitude)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rotation = np.array([[c, s], [-s * phase, c * phase]], dtype=complex)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rotation
                a[idx, :] = rotation.conj().T @ a[idx, :]
                v[:, idx] = v[:, idx] @ rotation
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    else:
        off = _off_diagonal(a)
        if off > tol.jacobi_tol:
            raise EigenNotConverged(
                f"Jacobi did not converge in {tol.jacobi_max_sweeps} sweeps (relative off-diagonal {off:.3e})"
            )

    eigenvalues = np.real(np.diag(a)) * frob
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def _kernel_for(fn: SpectralFunction, scale: float, tol: Tolerances) -> Callable[[np.ndarray], np.ndarray]:
    if fn == SpectralFunction.SQRT:
        return np.sqrt
    if fn == SpectralFunction.INV_SQRT_SHIFT:
        return lambda lam: 1.0 / np.sqrt(1.0 + lam)
    if fn == SpectralFunction.INV_SQRT_DEFECT:
        return lambda lam: 1.0 / np.sqrt(1.0 - lam)
    cutoff = tol.rank_tol * scale
    return lambda lam: np.where(lam > cutoff, 1.0 / np.sqrt(np.where(lam > cutoff, lam, 1.0)), 0.0)


def funcalc_block(h: np.ndarray, fn: SpectralFunction, tolerances: Optional[Tolerances] = None) -> np.ndarray:
    """Apply a spectral function to one Hermitian, positive semidefinite block."""
    tol = resolve(tolerances)
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)

    norm_h = spectral_norm(h)
    defect = hermitian_defect(h)
    if defect > tol.hermitian_tol * (1.0 + norm_h):
        raise NotHermitian(f"hermitian defect {defect:.3e} exceeds tolerance")

    lam, u = jacobi_hermitian((h + h.conj().T) / 2.0, tol)
    scale = 1.0 + norm_h
    if lam[0] < -tol.rank_tol * scale:
        raise NegativeSpectrum(f"minimum eigenvalue {lam[0]:.3e} is negative")
    lam = np.clip(lam, 0.0, None)
    if fn == SpectralFunction.SQRT:
        # roundoff eigenvalues of a singular block would surface as ~sqrt(eps)
        lam = np.where(lam > tol.rank_tol * scale, lam, 0.0)
    if fn == SpectralFunction.INV_SQRT_DEFECT and lam[-1] > 1.0 - tol.defect_margin:
        raise DefectSingular(f"eigenvalue {lam[-1]:.12f} within defect margin of 1")

    values = _kernel_for(fn, scale, tol)(lam)
    result = (u * values) @ u.conj().T
    return (result + result.conj().T) / 2.0


# =================== ALGEBRA OPERATIONS ===================

def _check_profiles(a: AlgElement, b: AlgElement) -> None:
    if a.profile != b.profile:
        raise ProfileMismatch(f"profiles differ: {list(a.profile.sizes)} vs {list(b.profile.sizes)}")


def alg_zero(profile: BlockProfile) -> AlgElement:
    return AlgElement(profile=profile, blocks=tuple(np.zeros((n, n), dtype=complex) for n in profile.sizes))


def alg_unit(profile: BlockProfile) -> AlgElement:
    return AlgElement(profile=profile, blocks=tuple(np.eye(n, dtype=complex) for n in profile.sizes))


def alg_scale(a: AlgElement, c: complex) -> AlgElement:
    return AlgElement(profile=a.profile, blocks=tuple(c * b for b in a.blocks))


def alg_arith(a: AlgElement, b: AlgElement, op: ArithOp) -> AlgElement:
    _check_profiles(a, b)
    if ArithOp(op) == ArithOp.ADD:
        blocks = tuple(x + y for x, y in zip(a.blocks, b.blocks))
    else:
        blocks = tuple(x @ y for x, y in zip(a.blocks, b.blocks))
    return AlgElement(profile=a.profile, blocks=blocks)


def alg_star(a: AlgElement) -> AlgElement:
    return AlgElement(profile=a.profile, blocks=tuple(b.conj().T for b in a.blocks))


def alg_norm(a: AlgElement) -> float:
    return max(spectral_norm(b) for b in a.blocks)


def alg_distance(a: AlgElement, b: AlgElement) -> float:
    _check_profiles(a, b)
    return max(spectral_norm(x - y) for x, y in zip(a.blocks, b.blocks))


def alg_equal(a: AlgElement, b: AlgElement, tolerances: Optional[Tolerances] = None) -> bool:
    tol = resolve(tolerances)
    scale = 1.0 + max(alg_norm(a), alg_norm(b))
    return alg_distance(a, b) <= tol.identity_tol * scale


def herm_eig(h: AlgElement, tolerances: Optional[Tolerances] = None) -> HermSpectrum:
    tol = resolve(tolerances)
    norm_h = alg_norm(h)
    defect = max(hermitian_defect(b) for b in h.blocks)
    if defect > tol.hermitian_tol * (1.0 + norm_h):
        raise NotHermitian(f"hermitian defect {defect:.3e} exceeds tolerance")

    eigenvalues: List[np.ndarray] = []
    vectors: List[np.ndarray] = []
    for block in h.blocks:
        lam, u = jacobi_hermitian((block + block.conj().T) / 2.0, tol)
        eigenvalues.append(lam)
        vectors.append(u)
    return HermSpectrum(profile=h.profile, eigenvalues=tuple(eigenvalues), vectors=tuple(vectors))


def psd_funcalc(h: AlgElement, fn: SpectralFunction, tolerances: Optional[Tolerances] = None) -> AlgElement:
    tol = resolve(tolerances)
    fn = SpectralFunction(fn)
    return AlgElement(profile=h.profile, blocks=tuple(funcalc_block(b, fn, tol) for b in h.blocks))


def is_positive(a: AlgElement, tolerances: Optional[Tolerances] = None) -> bool:
    tol = resolve(tolerances)
    norm_a = alg_norm(a)
    if max(hermitian_defect(b) for b in a.blocks) > tol.hermitian_tol * (1.0 + norm_a):
        return False
    spectrum = herm_eig(a, tol)
    return spectrum.min_eigenvalue >= -tol.rank_tol * (1.0 + norm_a)
