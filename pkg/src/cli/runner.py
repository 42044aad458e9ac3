# src/cli/runner.py - command dispatch
import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from src.core.funbackend import (
    DiagOperator,
    diag_adjoint,
    diag_complement_check,
    diag_residual,
    pw_abs,
    pw_equal,
)
from src.core.hilbmod import OperatorMatrix, op_adjoint, op_distance, op_norm
from src.core.polar import (
    adjoint_polar_check,
    closed_range_suite,
    cor32_check,
    generalized_inverse,
    polar_decompose,
    transform_polar_check,
    verify_thm31,
)
from src.core.regular import (
    GradedOperator,
    RegularOperator,
    btransform,
    classify,
    graded_report,
    inverse_btransform,
    q_of,
    remark22_residuals,
    validate_transform,
)
from src.shared.config import Tolerances, get_tolerances
from src.shared.errors import NotComplemented, PolarModError, UnsupportedCommandForBackend
from src.shared.models import Backend, Command, ProblemFile, Report, ReportError, ReportStatus
from .problem import BuiltOperator, build_operator, diag_payload, operator_payload, parse_problem
from .selftest import run_selftest

logger = logging.getLogger(__name__)

# real test polynomials, lowest degree first: 1, x, x^2, 3x^3 - x
TEST_POLYNOMIALS: Tuple[Tuple[float, ...], ...] = ((1.0,), (0.0, 1.0), (0.0, 0.0, 1.0), (0.0, -1.0, 0.0, 3.0))

SUPPORTED: Dict[Command, Tuple[Backend, ...]] = {
    Command.POLAR: (Backend.MATRIX, Backend.FUNCTION, Backend.GRADED),
    Command.PINV: (Backend.MATRIX, Backend.FUNCTION, Backend.GRADED),
    Command.BTRANSFORM: (Backend.MATRIX, Backend.GRADED),
    Command.INV_BTRANSFORM: (Backend.MATRIX,),
    Command.VERIFY_THM31: (Backend.MATRIX, Backend.FUNCTION, Backend.GRADED),
    Command.CHECK_COMPLEMENTED: (Backend.MATRIX, Backend.FUNCTION, Backend.GRADED),
    Command.CLOSED_RANGE: (Backend.MATRIX, Backend.FUNCTION, Backend.GRADED),
    Command.CLASSIFY: (Backend.MATRIX, Backend.FUNCTION, Backend.GRADED),
    Command.GRADED_REPORT: (Backend.MATRIX, Backend.GRADED),
}


def _max_merge(target: Dict[str, float], residuals: Dict[str, float]) -> None:
    for key, value in residuals.items():
        target[key] = max(target.get(key, 0.0), float(value))


class CommandRunner:
    """Runs one command against one problem file and always returns a Report."""

    def __init__(self, overrides: Optional[Dict[str, Any]] = None, components: Optional[int] = None,
                 seed: Optional[int] = None, corpus_size: Optional[int] = None, timing: bool = False):
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        self.components = components
        self.seed = seed
        self.corpus_size = corpus_size
        self.timing = timing

    def tolerances_for(self, problem: Optional[ProblemFile]) -> Tolerances:
        """flag > problem options > environment > default."""
        updates: Dict[str, Any] = {}
        if problem is not None:
            options = problem.options
            if options.tol is not None:
                updates["identity_tol"] = options.tol
            for name in ("rank_tol", "inverse_norm_threshold", "singular_value_threshold"):
                if getattr(options, name) is not None:
                    updates[name] = getattr(options, name)
        updates.update(self.overrides)
        return get_tolerances().model_copy(update=updates)

    def run_command(self, command: Command, problem_path: Optional[str] = None) -> Report:
        command = Command(command)
        start_time = time.time()
        source = Path(problem_path).name if problem_path else None
        report = Report(command=command.value, source=source)

        try:
            if command == Command.SELFTEST:
                report = run_selftest(
                    seed=self.seed if self.seed is not None else 0,
                    corpus_size=self.corpus_size,
                    tolerances=self.tolerances_for(None),
                )
            else:
                if problem_path is None:
                    raise UnsupportedCommandForBackend(f"'{command.value}' needs a problem file")
                problem = parse_problem(problem_path)
                report.backend = problem.backend.value
                if problem.backend not in SUPPORTED[command]:
                    raise UnsupportedCommandForBackend(
                        f"'{command.value}' is not available for the {problem.backend.value} backend"
                    )
                tol = self.tolerances_for(problem)
                operator = build_operator(problem, self.components)
                handler = self._handlers()[command]
                handler(report, operator, tol)
        except NotComplemented as e:
            # a negative verdict is a completed analysis
            report.certificate = e.certificate
            report.verdicts = {name: False for name in (report.verdicts or {"complemented": False})}
        except PolarModError as e:
            logger.error(f"{command.value} failed: {e.message}")
            report.status = ReportStatus.FAILED
            report.errors.append(ReportError(code=e.code, message=e.message))
            report.exit_code = e.exit_code
        except (ValueError, ArithmeticError) as e:
            # numpy.linalg.LinAlgError is a ValueError
            logger.exception(f"{command.value} failed")
            report.status = ReportStatus.FAILED
            report.errors.append(ReportError(code="numerical_error", message=str(e) or type(e).__name__))
            report.exit_code = 2

        report.command = command.value
        report.source = source
        elapsed = time.time() - start_time
        logger.info(f"{command.value} on {source or '-'} ({report.backend or 'no backend'}): "
                    f"exit {report.exit_code} in {elapsed:.2f}s")
        if self.timing:
            report.stats = {**(report.stats or {}), "processing_time_seconds": round(elapsed, 3)}
        return report

    def _handlers(self) -> Dict[Command, Callable[[Report, BuiltOperator, Tolerances], None]]:
        return {
            Command.POLAR: self._polar,
            Command.PINV: self._pinv,
            Command.BTRANSFORM: self._btransform,
            Command.INV_BTRANSFORM: self._inv_btransform,
            Command.VERIFY_THM31: self._verify_thm31,
            Command.CHECK_COMPLEMENTED: self._check_complemented,
            Command.CLOSED_RANGE: self._closed_range,
            Command.CLASSIFY: self._classify,
            Command.GRADED_REPORT: self._graded_report,
        }

    # =================== HANDLERS ===================

    @staticmethod
    def _components(operator: BuiltOperator, tol: Tolerances) -> List[OperatorMatrix]:
        if isinstance(operator, GradedOperator):
            return [c.matrix(tol) for c in operator.components]
        return [operator]

    def _polar(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        report.verdicts = {"polar_decomposition": False}
        if isinstance(operator, DiagOperator):
            pd = polar_decompose(operator, tol)
            report.residuals = {**pd.residuals, "adjoint_polar": adjoint_polar_check(operator, tol)}
            report.payload = {"V": diag_payload(pd.v), "abs_t": diag_payload(pd.abs_t),
                              "initial": diag_payload(pd.initial)}
            report.verdicts = {"polar_decomposition": max(report.residuals.values()) == 0.0}
            return

        residuals: Dict[str, float] = {}
        payloads = []
        for b in self._components(operator, tol):
            pd = polar_decompose(b, tol)
            _max_merge(residuals, pd.residuals)
            _max_merge(residuals, {"adjoint_polar": adjoint_polar_check(b, tol), "abs_transform": cor32_check(b, tol)})
            _max_merge(residuals, transform_polar_check(b, tol))
            payloads.append({"V": operator_payload(pd.v), "abs_t": operator_payload(pd.abs_t),
                             "initial": operator_payload(pd.initial), "final": operator_payload(pd.final)})
        report.residuals = residuals
        report.payload = payloads[0] if len(payloads) == 1 else {"components": payloads}
        report.verdicts = {"polar_decomposition": max(residuals.values(), default=0.0) <= tol.identity_tol}

    def _pinv(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        report.verdicts = {"generalized_inverse": False}
        if isinstance(operator, DiagOperator):
            gi = generalized_inverse(operator, tol)
            report.residuals = dict(gi.residuals)
            report.payload = {"s": diag_payload(gi.s)}
            report.verdicts = {"generalized_inverse": max(gi.residuals.values()) == 0.0, "bounded": gi.bounded}
            return

        residuals: Dict[str, float] = {}
        payloads = []
        for b in self._components(operator, tol):
            gi = generalized_inverse(b, tol)
            _max_merge(residuals, gi.residuals)
            payloads.append({"s": operator_payload(gi.s), "norm_s": op_norm(gi.s)})
        report.residuals = residuals
        report.payload = payloads[0] if len(payloads) == 1 else {"components": payloads}
        report.verdicts = {"generalized_inverse": max(residuals.values(), default=0.0) <= tol.identity_tol,
                           "bounded": True}

    def _btransform(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        residuals: Dict[str, float] = {}
        payloads = []
        contractive = True
        for b in self._components(operator, tol):
            t = RegularOperator.explicit(b)
            f = btransform(t, tol)
            q = q_of(t, tol)
            f_adj = btransform(t.adjoint(tol), tol)
            validity = validate_transform(f, tol)
            contractive = contractive and validity.contractive
            first = max(remark22_residuals(t, p, tol)[0] for p in TEST_POLYNOMIALS)
            second = remark22_residuals(t, TEST_POLYNOMIALS[0], tol)[1]
            _max_merge(residuals, {
                "adjoint_compatibility": op_distance(op_adjoint(f), f_adj),
                "round_trip": op_distance(inverse_btransform(f, tol).matrix(tol), b),
                "intertwining": first,
                "q_squared_intertwining": second,
                "abs_transform": cor32_check(t, tol),
            })
            payloads.append({"F": operator_payload(f), "Q": operator_payload(q), "norm_F": op_norm(f),
                             "defect_min_eigenvalue": validity.defect_min_eigenvalue})
        report.residuals = residuals
        report.payload = payloads[0] if len(payloads) == 1 else {"components": payloads}
        report.verdicts = {"contractive": contractive}

    def _inv_btransform(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        # the problem operator is read as a transform F
        validity = validate_transform(operator, tol)
        report.verdicts = {"contractive": validity.contractive, "dense_defect": validity.dense_defect}
        t = inverse_btransform(operator, tol)
        b = t.matrix(tol)
        report.residuals = {"round_trip": op_distance(btransform(t, tol), operator)}
        report.payload = {"t": operator_payload(b), "norm_t": op_norm(b),
                          "defect_min_eigenvalue": validity.defect_min_eigenvalue}

    def _verify_thm31(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        result = verify_thm31(operator, tol)
        report.verdicts = {"cond_i": result.cond_i, "cond_ii": result.cond_ii, "cond_iii": result.cond_iii,
                           "equivalent": result.equivalent}
        report.residuals = dict(result.residuals)
        report.certificate = result.certificate
        if result.polar is not None and isinstance(result.polar.v, OperatorMatrix):
            report.payload = {"V": operator_payload(result.polar.v), "s": operator_payload(result.inverse.s)}
        elif result.polar is not None:
            report.payload = {"V": diag_payload(result.polar.v), "s": diag_payload(result.inverse.s)}

    def _check_complemented(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        if isinstance(operator, DiagOperator):
            verdict = diag_complement_check(operator)
            report.verdicts = {"complemented": verdict.complemented}
            report.verdicts.update({f"entry_{v.entry}": v.complemented for v in verdict.entries})
            report.certificate = verdict.certificate
            return
        result = verify_thm31(operator, tol)
        keys = ("abs_summand", "kernel_summand", "range_summand")
        report.residuals = {key: result.residuals[key] for key in keys}
        report.verdicts = {"complemented": result.cond_ii}

    def _closed_range(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        result = closed_range_suite(operator, tol)
        report.verdicts = {
            "range_closed": result.range_closed,
            "s_bounded": result.s_bounded,
            "adjoint_range_closed": result.adjoint_range_closed,
            "transform_range_closed": result.transform_range_closed,
            "consistent": result.consistent,
        }
        report.certificate = result.certificate
        report.payload = {key: value for key, value in
                          (("inf_singular_value", result.inf_singular_value),
                           ("sup_inverse_norm", result.sup_inverse_norm)) if value is not None}

    def _classify(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        if isinstance(operator, DiagOperator):
            # real diagonal entries: always selfadjoint
            positive = all(pw_equal(f, pw_abs(f)) for f in operator.entries)
            report.verdicts = {"normal": True, "selfadjoint": True, "positive": positive}
            report.residuals = {"selfadjoint": diag_residual(operator, diag_adjoint(operator))}
            return
        flags = {"normal": True, "selfadjoint": True, "positive": True, "transform_agrees": True}
        residuals: Dict[str, float] = {}
        for b in self._components(operator, tol):
            result = classify(RegularOperator.explicit(b), tol)
            for name in flags:
                flags[name] = flags[name] and getattr(result, name)
            _max_merge(residuals, result.residuals)
        report.verdicts = flags
        report.residuals = residuals

    def _graded_report(self, report: Report, operator: BuiltOperator, tol: Tolerances) -> None:
        if isinstance(operator, OperatorMatrix):
            operator = GradedOperator(components=(RegularOperator.explicit(operator),))
        result = graded_report(operator, tol)
        report.verdicts = {
            "unbounded_inverse": result.unbounded_inverse,
            "range_not_uniformly_closed": result.range_not_uniformly_closed,
        }
        report.payload = result.model_dump(mode="json", exclude={"unbounded_inverse", "range_not_uniformly_closed"})
