# src/cli/report.py
import json
from enum import Enum

from src.shared.models import Report


class OutputFormat(str, Enum):
    JSON = "json"
    TEXT = "text"


def emit_report(report: Report, output_format: OutputFormat = OutputFormat.TEXT) -> str:
    if OutputFormat(output_format) == OutputFormat.JSON:
        return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
    return _render_text(report)


def _render_text(report: Report) -> str:
    lines = [f"{report.command}: {report.status.value}"]
    if report.source or report.backend:
        lines.append(f"problem: {report.source or '-'} ({report.backend or '-'} backend)")

    if report.verdicts:
        lines.append("")
        lines.append("verdicts:")
        width = max(len(name) for name in report.verdicts)
        for name in sorted(report.verdicts):
            lines.append(f"  {name:<{width}}  {'yes' if report.verdicts[name] else 'no'}")

    if report.residuals:
        lines.append("")
        lines.append("residuals:")
        width = max(len(name) for name in report.residuals)
        for name in sorted(report.residuals):
            lines.append(f"  {name:<{width}}  {report.residuals[name]:.3e}")

    if report.certificate is not None:
        c = report.certificate
        lines.append("")
        lines.append(f"certificate: entry {c.entry} vanishes at x = {c.point} ({c.reason.replace('_', ' ')})")

    if report.errors:
        lines.append("")
        for error in report.errors:
            lines.append(f"error [{error.code}]: {error.message}")

    if report.stats:
        lines.append("")
        lines.extend(f"{key}: {value}" for key, value in sorted(report.stats.items()))
    return "\n".join(lines) + "\n"
