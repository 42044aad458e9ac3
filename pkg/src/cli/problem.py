# src/cli/problem.py - problem files: parsing, operator construction, serialization
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from src.core.funbackend import DiagOperator, Domain1D, PwRational, format_rational, pw_from_pieces, pw_poly
from src.core.hilbmod import OperatorMatrix
from src.core.matalg import AlgElement, BlockProfile
from src.core.regular import GradedOperator, RegularOperator, graded_family
from src.shared.errors import ParseError, PolarModError, SchemaError
from src.shared.models import (
    Backend,
    FunctionOperatorPayload,
    GradedOperatorPayload,
    MatrixOperatorPayload,
    ProblemFile,
    PwRationalPayload,
)

logger = logging.getLogger(__name__)

DEFAULT_GRADED_COUNT = 50

BuiltOperator = Union[OperatorMatrix, DiagOperator, GradedOperator]


def _location(loc) -> str:
    parts = []
    for item in loc:
        parts.append(f"[{item}]" if isinstance(item, int) else f".{item}")
    return "".join(parts).lstrip(".")


def _schema_error(err: ValidationError, prefix: str = "") -> SchemaError:
    first = err.errors()[0]
    location = _location(first["loc"])
    if prefix:
        location = f"{prefix}.{location}" if location else prefix
    return SchemaError(first["msg"], location or None)


def parse_problem(path: Union[str, Path]) -> ProblemFile:
    """Read and validate a problem file, including the operator payload."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read problem file: {e.strerror}", str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"line {e.lineno}, column {e.colno}")
    try:
        problem = ProblemFile.model_validate(data)
    except ValidationError as e:
        raise _schema_error(e)
    build_operator(problem)
    logger.debug(f"parsed {path.name}: backend={problem.backend.value}")
    return problem


def serialize_problem(problem: ProblemFile) -> str:
    return json.dumps(problem.model_dump(mode="json", exclude_none=True), sort_keys=True, indent=2) + "\n"


# =================== OPERATOR CONSTRUCTION ===================

def _block(raw, n: int, location: str) -> np.ndarray:
    try:
        pairs = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError("block entries must be [re, im] number pairs", location)
    if pairs.shape != (n, n, 2):
        raise SchemaError(f"block has shape {list(pairs.shape)}, expected [{n}, {n}, 2]", location)
    if not np.all(np.isfinite(pairs)):
        raise SchemaError("block entries must be finite", location)
    return pairs[..., 0] + 1j * pairs[..., 1]


def _matrix_operator(payload: Dict[str, Any], profile: BlockProfile, k: int, m: int, prefix: str) -> OperatorMatrix:
    try:
        parsed = MatrixOperatorPayload.model_validate(payload)
    except ValidationError as e:
        raise _schema_error(e, prefix)
    if len(parsed.entries) != k:
        raise SchemaError(f"expected {k} rows of entries, got {len(parsed.entries)}", f"{prefix}.entries")
    rows = []
    for j, row in enumerate(parsed.entries):
        if len(row) != m:
            raise SchemaError(f"expected {m} entries, got {len(row)}", f"{prefix}.entries[{j}]")
        elements = []
        for l, element in enumerate(row):
            location = f"{prefix}.entries[{j}][{l}]"
            if len(element) != len(profile.sizes):
                raise SchemaError(f"expected {len(profile.sizes)} blocks, got {len(element)}", location)
            blocks = [_block(raw, n, f"{location}[{i}]") for i, (raw, n) in enumerate(zip(element, profile.sizes))]
            elements.append(AlgElement(profile=profile, blocks=tuple(blocks)))
        rows.append(elements)
    return OperatorMatrix.from_entries(rows, profile, k, m)


def _pw_function(payload: PwRationalPayload, domain: Domain1D) -> PwRational:
    if payload.poly is not None:
        return pw_poly(domain, payload.poly)
    return pw_from_pieces(domain, [(p.lo, p.hi, p.num, p.den) for p in payload.pieces])


def _function_operator(payload: Dict[str, Any], domain: Domain1D, k: int) -> DiagOperator:
    try:
        parsed = FunctionOperatorPayload.model_validate(payload)
    except ValidationError as e:
        raise _schema_error(e, "operator")
    if len(parsed.entries) != k:
        raise SchemaError(f"expected {k} diagonal entries, got {len(parsed.entries)}", "operator.entries")
    entries = []
    for j, entry in enumerate(parsed.entries):
        try:
            entries.append(_pw_function(entry, domain))
        except PolarModError as e:
            raise SchemaError(e.message, f"operator.entries[{j}]")
        except (ValueError, TypeError) as e:
            raise SchemaError(str(e).splitlines()[0], f"operator.entries[{j}]")
    return DiagOperator(domain=domain, entries=tuple(entries))


def _graded_operator(problem: ProblemFile, profile: BlockProfile, components: Optional[int]) -> GradedOperator:
    try:
        parsed = GradedOperatorPayload.model_validate(problem.operator)
    except ValidationError as e:
        raise _schema_error(e, "operator")
    k, m = problem.domain_rank, problem.target_rank
    if parsed.family is not None:
        if k != m:
            raise SchemaError("graded families are square", "codomain_rank")
        count = components or parsed.count or problem.options.components or DEFAULT_GRADED_COUNT
        return graded_family(parsed.family, count, profile, k)
    matrices = [
        _matrix_operator(c.model_dump(), profile, k, m, f"operator.components[{i}]")
        for i, c in enumerate(parsed.components)
    ]
    if components:
        matrices = matrices[:components]
    return GradedOperator(components=tuple(RegularOperator.explicit(b) for b in matrices))


def build_domain(problem: ProblemFile) -> Domain1D:
    try:
        return Domain1D.of(*problem.domain)
    except (ValueError, TypeError) as e:
        raise SchemaError(str(e).splitlines()[0], "domain")


def build_profile(problem: ProblemFile) -> BlockProfile:
    try:
        return BlockProfile(sizes=tuple(problem.profile))
    except ValidationError as e:
        raise _schema_error(e, "profile")


def build_operator(problem: ProblemFile, components: Optional[int] = None) -> BuiltOperator:
    if problem.backend == Backend.FUNCTION:
        if problem.codomain_rank not in (None, problem.domain_rank):
            raise SchemaError("diagonal operators are square", "codomain_rank")
        return _function_operator(problem.operator, build_domain(problem), problem.domain_rank)
    profile = build_profile(problem)
    if problem.backend == Backend.GRADED:
        return _graded_operator(problem, profile, components)
    return _matrix_operator(problem.operator, profile, problem.domain_rank, problem.target_rank, "operator")


# =================== PAYLOAD SERIALIZATION ===================

def element_payload(blocks) -> List:
    return [[[[float(z.real), float(z.imag)] for z in row] for row in block] for block in blocks]


def operator_payload(b: OperatorMatrix) -> Dict[str, Any]:
    """Inverse of the problem-file matrix format."""
    entries = [
        [element_payload(b.entry(j, l).blocks) for l in range(b.codomain_rank)]
        for j in range(b.domain_rank)
    ]
    return {
        "profile": list(b.profile.sizes),
        "domain_rank": b.domain_rank,
        "codomain_rank": b.codomain_rank,
        "entries": entries,
    }


def pw_payload(f: PwRational) -> Dict[str, Any]:
    pieces = []
    for component in f.pieces:
        for piece in component:
            pieces.append({
                "lo": format_rational(piece.lo),
                "hi": format_rational(piece.hi),
                "num": [str(c) for c in reversed(piece.num.all_coeffs())],
                "den": [str(c) for c in reversed(piece.den.all_coeffs())],
            })
    return {"pieces": pieces}


def diag_payload(t: DiagOperator) -> Dict[str, Any]:
    return {"entries": [pw_payload(f) for f in t.entries]}
