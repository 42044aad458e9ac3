# src/core/sampling.py - seeded random operators for the acceptance corpora
import logging
from typing import List, Optional, Tuple

import numpy as np
from sympy import Rational

from .funbackend import DiagOperator, Domain1D, PwRational, pw_from_pieces, pw_poly
from .hilbmod import OperatorMatrix
from .matalg import BlockProfile

logger = logging.getLogger(__name__)

PROFILES: Tuple[Tuple[int, ...], ...] = ((1,), (2,), (1, 2), (2, 3))
MAX_RANK = 3
SIGMA_RANGE = (0.2, 3.0)
TWO_COMPONENTS = (("0", "1"), ("2", "3"))


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * np.where(np.abs(d) > 0, d / np.abs(d), 1.0)


def _block(rng: np.random.Generator, rows: int, cols: int, deficiency_prob: float) -> np.ndarray:
    full = min(rows, cols)
    rank = full
    if full and rng.random() < deficiency_prob:
        rank = int(rng.integers(0, full))
    sigma = np.zeros((rows, cols))
    values = np.sort(rng.uniform(*SIGMA_RANGE, size=rank))[::-1]
    sigma[np.arange(rank), np.arange(rank)] = values
    return random_unitary(rng, rows) @ sigma @ random_unitary(rng, cols).conj().T


def random_operator(
    rng: np.random.Generator,
    profile: Optional[BlockProfile] = None,
    domain_rank: Optional[int] = None,
    codomain_rank: Optional[int] = None,
    deficiency_prob: float = 0.3,
) -> OperatorMatrix:
    """Nonzero singular values in [0.2, 3]; some blocks rank deficient."""
    if profile is None:
        profile = BlockProfile(sizes=PROFILES[int(rng.integers(len(PROFILES)))])
    k = int(rng.integers(1, MAX_RANK + 1)) if domain_rank is None else domain_rank
    m = int(rng.integers(1, MAX_RANK + 1)) if codomain_rank is None else codomain_rank
    blocks = tuple(_block(rng, k * n, m * n, deficiency_prob) for n in profile.sizes)
    return OperatorMatrix(profile=profile, domain_rank=k, codomain_rank=m, blocks=blocks)


def operator_corpus(seed: int, size: int) -> List[OperatorMatrix]:
    rng = np.random.default_rng(seed)
    corpus = [random_operator(rng) for _ in range(size)]
    logger.debug(f"generated corpus of {size} operators from seed {seed}")
    return corpus


# =================== FUNCTION BACKEND ===================

def two_component_domain() -> Domain1D:
    return Domain1D.of(*TWO_COMPONENTS)


def _rational(rng: np.random.Generator, lo: int, hi: int, max_den: int = 8) -> Rational:
    den = int(rng.integers(1, max_den + 1))
    return Rational(int(rng.integers(lo * den, hi * den + 1)), den)


def _scale(rng: np.random.Generator) -> Rational:
    value = _rational(rng, 1, 4)
    return -value if rng.random() < 0.5 else value


def _nonvanishing(rng: np.random.Generator, domain: Domain1D) -> PwRational:
    """c(x - a) with a strictly between or outside the components."""
    a = [Rational(3, 2), Rational(-1), Rational(4)][int(rng.integers(3))]
    c = _scale(rng)
    return pw_poly(domain, [str(-c * a), str(c)])


def _component_pattern(rng: np.random.Generator, domain: Domain1D) -> PwRational:
    """Identically zero on one component, nonvanishing on the other."""
    vanishing = int(rng.integers(len(domain.components)))
    c = _scale(rng)
    pieces = []
    for index, component in enumerate(domain.components):
        num = ["0"] if index == vanishing else [str(c * Rational(5)), str(c)]  # c(x + 5)
        pieces.append((str(component.lo), str(component.hi), num, ["1"]))
    return pw_from_pieces(domain, pieces)


def random_complemented_diag(rng: np.random.Generator, rank: Optional[int] = None) -> DiagOperator:
    domain = two_component_domain()
    k = int(rng.integers(1, MAX_RANK + 1)) if rank is None else rank
    entries = [(_component_pattern if rng.random() < 0.5 else _nonvanishing)(rng, domain) for _ in range(k)]
    return DiagOperator(domain=domain, entries=tuple(entries))


def random_rooted_diag(rng: np.random.Generator, rank: Optional[int] = None) -> Tuple[DiagOperator, Rational]:
    """At least one entry has a rational isolated root; returns the operator and that root."""
    domain = two_component_domain()
    k = int(rng.integers(1, MAX_RANK + 1)) if rank is None else rank
    component = domain.components[int(rng.integers(len(domain.components)))]
    root = _rational(rng, int(component.lo), int(component.hi))
    c = _scale(rng)
    # c(x - root)(x^2 + 1)
    rooted = pw_poly(domain, [str(-c * root), str(c), str(-c * root), str(c)])
    entries: List[PwRational] = [random_complemented_diag(rng, 1).entries[0] for _ in range(k - 1)]
    entries.insert(int(rng.integers(k)), rooted)
    return DiagOperator(domain=domain, entries=tuple(entries)), root


def diag_corpus(seed: int, size: int, complemented: bool) -> List[DiagOperator]:
    rng = np.random.default_rng(seed)
    if complemented:
        return [random_complemented_diag(rng) for _ in range(size)]
    return [random_rooted_diag(rng)[0] for _ in range(size)]
