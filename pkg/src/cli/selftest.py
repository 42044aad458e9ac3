# src/cli/selftest.py - seeded randomized invariant suites
import logging
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel

from src.core.funbackend import Domain1D, diag_from, pw_poly
from src.core.hilbmod import op_adjoint, op_distance, op_norm
from src.core.matalg import BlockProfile
from src.core.polar import adjoint_polar_check, closed_range_suite, cor32_check, verify_thm31
from src.core.regular import RegularOperator, btransform, graded_family, graded_report, inverse_btransform, remark22_residuals
from src.core.sampling import diag_corpus, operator_corpus
from src.shared.config import Tolerances, resolve
from src.shared.errors import PolarModError
from src.shared.models import Report, ReportStatus

logger = logging.getLogger(__name__)

DEFAULT_CORPUS_SIZE = 200
FUNCTION_CORPUS_SIZE = 12
TRANSFORM_ADJOINT_TOL = 1e-10
SELFTEST_POLYNOMIALS = ((1.0,), (0.0, 1.0), (0.0, 0.0, 1.0), (0.0, -1.0, 0.0, 3.0))


class SuiteResult(BaseModel):
    name: str
    passed: int = 0
    failed: int = 0
    max_residual: float = 0.0
    failures: List[str] = []

    def record(self, ok: bool, residual: float = 0.0, label: str = "") -> None:
        self.max_residual = max(self.max_residual, float(residual))
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.failures) < 5:
                self.failures.append(label)


def _guarded(suite: SuiteResult, label: str, check: Callable[[], Tuple[bool, float]]) -> None:
    try:
        ok, residual = check()
    except PolarModError as e:
        logger.warning(f"{suite.name}/{label}: {e.code}: {e.message}")
        ok, residual = False, 0.0
    except (ValueError, ArithmeticError) as e:
        # numpy.linalg.LinAlgError and pydantic.ValidationError are ValueErrors
        logger.warning(f"{suite.name}/{label}: {type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}")
        ok, residual = False, 0.0
    suite.record(ok, residual, label)


def _equivalence_suite(corpus, tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="polar_equivalence")
    for i, b in enumerate(corpus):
        def check(b=b):
            report = verify_thm31(b, tol)
            worst = max(report.residuals.values())
            ok = report.cond_i and report.cond_ii and report.cond_iii and worst <= tol.identity_tol
            return ok, worst
        _guarded(suite, f"operator {i}", check)
    return suite


def _transform_suite(corpus, tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="bounded_transform")
    for i, b in enumerate(corpus):
        def check(b=b):
            t = RegularOperator.explicit(b)
            f = btransform(t, tol)
            round_trip = op_distance(inverse_btransform(f, tol).matrix(tol), b)
            adjoint = op_distance(op_adjoint(f), btransform(t.adjoint(tol), tol))
            ok = round_trip <= tol.identity_tol * (1.0 + op_norm(b)) and adjoint <= TRANSFORM_ADJOINT_TOL
            return ok, max(round_trip, adjoint)
        _guarded(suite, f"operator {i}", check)
    return suite


def _intertwining_suite(corpus, tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="transform_intertwining")
    for i, b in enumerate(corpus):
        def check(b=b):
            t = RegularOperator.explicit(b)
            worst = max(max(remark22_residuals(t, p, tol)) for p in SELFTEST_POLYNOMIALS)
            return worst <= tol.identity_tol, worst
        _guarded(suite, f"operator {i}", check)
    return suite


def _dual_construction_suite(corpus, tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="dual_construction")
    for i, b in enumerate(corpus):
        def check(b=b):
            residuals = verify_thm31(b, tol).residuals
            worst = max(residuals["dual_construction"], residuals["graph_decomposition"])
            return worst <= tol.identity_tol, worst
        _guarded(suite, f"operator {i}", check)
    return suite


def _corollary_suite(corpus, tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="corollaries")
    for i, b in enumerate(corpus):
        def check(b=b):
            worst = max(cor32_check(b, tol), adjoint_polar_check(b, tol))
            return worst <= tol.identity_tol and closed_range_suite(b, tol).consistent, worst
        _guarded(suite, f"operator {i}", check)
    return suite


def _function_suite(seed: int, size: int, tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="function_dichotomy")
    unit = Domain1D.of(("0", "1"))

    def mult_x():
        report = verify_thm31(diag_from([pw_poly(unit, ["0", "1"])]), tol)
        ok = not (report.cond_i or report.cond_ii or report.cond_iii) and report.certificate.point == "0"
        return ok, 0.0

    def mult_x_minus_2():
        report = verify_thm31(diag_from([pw_poly(unit, ["-2", "1"])]), tol)
        worst = max(report.residuals.values())
        return report.cond_i and report.cond_ii and report.cond_iii and worst == 0.0, worst

    _guarded(suite, "mult_x", mult_x)
    _guarded(suite, "mult_x_minus_2", mult_x_minus_2)
    for i, t in enumerate(diag_corpus(seed, size, complemented=False)):
        _guarded(suite, f"rooted {i}", lambda t=t: (not verify_thm31(t, tol).cond_ii, 0.0))
    for i, t in enumerate(diag_corpus(seed + 1, size, complemented=True)):
        def check(t=t):
            report = verify_thm31(t, tol)
            worst = max(report.residuals.values())
            return report.cond_i and report.cond_ii and report.cond_iii and worst == 0.0, worst
        _guarded(suite, f"component pattern {i}", check)
    return suite


def _graded_suite(tol: Tolerances) -> SuiteResult:
    suite = SuiteResult(name="graded_unbounded")

    def check():
        gt = graded_family("inv_n", 50, BlockProfile.of(1), 1)
        report = graded_report(gt, tol)
        exact = all(abs(c.norm_inverse - c.label) <= 1e-12 * c.label for c in report.components)
        increasing = all(a.norm_inverse < b.norm_inverse for a, b in zip(report.components, report.components[1:]))
        ok = (exact and increasing and report.unbounded_inverse and report.range_not_uniformly_closed
              and all(c.norm_transform < 1.0 for c in report.components)
              and closed_range_suite(gt, tol).consistent)
        return ok, 0.0

    _guarded(suite, "inv_n", check)
    return suite


def run_selftest(seed: int = 0, corpus_size: Optional[int] = None,
                 tolerances: Optional[Tolerances] = None) -> Report:
    tol = resolve(tolerances)
    size = corpus_size or DEFAULT_CORPUS_SIZE
    corpus = operator_corpus(seed, size)
    logger.info(f"selftest: seed={seed}, corpus={size}")

    suites = [
        _equivalence_suite(corpus, tol),
        _transform_suite(corpus, tol),
        _intertwining_suite(corpus, tol),
        _dual_construction_suite(corpus, tol),
        _corollary_suite(corpus, tol),
        _function_suite(seed, min(size, FUNCTION_CORPUS_SIZE), tol),
        _graded_suite(tol),
    ]
    failed = [s for s in suites if s.failed]
    for suite in failed:
        logger.warning(f"suite {suite.name} failed {suite.failed} case(s): {suite.failures}")

    counts: Dict[str, Dict[str, object]] = {
        s.name: {"passed": s.passed, "failed": s.failed, "failures": s.failures} for s in suites
    }
    return Report(
        command="selftest",
        status=ReportStatus.FAILED if failed else ReportStatus.COMPLETE,
        verdicts={s.name: not s.failed for s in suites},
        residuals={s.name: s.max_residual for s in suites},
        payload={"seed": seed, "corpus_size": size, "suites": counts},
        exit_code=1 if failed else 0,
    )
