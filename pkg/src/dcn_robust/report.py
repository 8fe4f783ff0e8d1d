"""Report assembly and emission.

A report is a plan echo plus measurement rows. The JSON form nests
plan -> series -> points; the CSV form is the flat projection with a fixed
column order. Both serializations are byte-deterministic for a given plan
and seed, independent of worker count.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from . import __version__
from .simulation import MetricSample, ReliabilityResult, confidence_interval

__all__ = [
    "CSV_COLUMNS",
    "Report",
    "reliability_rows",
    "to_csv_text",
    "to_json_text",
    "gnuplot_script",
]

CSV_COLUMNS = (
    "topology",
    "params",
    "failure_type",
    "fer_link",
    "fer_switch",
    "fer_server",
    "normalized_time",
    "metric",
    "mean",
    "ci95_half",
    "samples",
    "seed",
)


@dataclass(frozen=True)
class Report:
    """Plan echo, measurement rows and free-form notes."""

    plan: dict
    seed: int
    rows: tuple[MetricSample, ...]
    notes: tuple[str, ...] = ()
    tool: str = "dcn-robust"
    version: str = __version__


def reliability_rows(result: ReliabilityResult) -> list[MetricSample]:
    """Flatten a reliability simulation into report rows."""
    base = dict(
        topology=result.params.kind.value,
        params=result.params.args_text(),
        failure_type=result.failure.value,
    )
    fer_mean, fer_half = confidence_interval(result.critical_points / result.universe)
    rows = [
        MetricSample(
            metric="nmttf_sim",
            mean=result.nmttf_sim,
            ci95_half_width=result.ci95_half_width,
            samples=result.samples,
            **base,
        ),
        MetricSample(
            metric="critical_fer",
            mean=fer_mean,
            ci95_half_width=fer_half,
            samples=result.samples,
            **base,
        ),
    ]
    if result.nmttf_theoretical is not None:
        rows.append(
            MetricSample(
                metric="nmttf_theo",
                mean=result.nmttf_theoretical,
                ci95_half_width=None,
                samples=0,
                extra={"quality": result.theoretical_quality.value},
                **base,
            )
        )
        rows.append(
            MetricSample(
                metric="relative_error",
                mean=result.relative_error,
                ci95_half_width=None,
                samples=0,
                **base,
            )
        )
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv_text(report: Report) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(
            (
                row.topology,
                row.params,
                row.failure_type,
                _cell(row.fer_link),
                _cell(row.fer_switch),
                _cell(row.fer_server),
                _cell(row.normalized_time),
                row.metric,
                _cell(row.mean),
                _cell(row.ci95_half_width),
                str(row.samples),
                str(report.seed),
            )
        )
    return out.getvalue()


def _point_doc(row: MetricSample) -> dict:
    doc: dict = {
        "mean": row.mean,
        "ci95_half": row.ci95_half_width,
        "samples": row.samples,
    }
    for name in ("fer_link", "fer_switch", "fer_server", "normalized_time"):
        value = getattr(row, name)
        if value is not None:
            doc[name] = value
    if row.extra:
        doc.update(row.extra)
    return doc


def to_json_text(report: Report) -> str:
    series: list[dict] = []
    seen: dict[tuple, int] = {}
    for row in report.rows:
        key = (row.topology, row.params, row.failure_type, row.metric)
        if key not in seen:
            seen[key] = len(series)
            series.append(
                {
                    "topology": row.topology,
                    "params": row.params,
                    "failure_type": row.failure_type,
                    "metric": row.metric,
                    "points": [],
                }
            )
        series[seen[key]]["points"].append(_point_doc(row))
    doc = {
        "tool": report.tool,
        "version": report.version,
        "seed": report.seed,
        "plan": report.plan,
        "notes": list(report.notes),
        "series": series,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def gnuplot_script(csv_path: str, report: Report) -> str:
    """A pipeable gnuplot script plotting mean vs FER per metric series."""
    metrics = []
    for row in report.rows:
        if row.metric not in metrics:
            metrics.append(row.metric)
    fer_col = CSV_COLUMNS.index("fer_link") + 1
    for row in report.rows:
        if row.fer_switch is not None:
            fer_col = CSV_COLUMNS.index("fer_switch") + 1
            break
        if row.fer_server is not None:
            fer_col = CSV_COLUMNS.index("fer_server") + 1
            break
        if row.fer_link is not None:
            break
    mean_col = CSV_COLUMNS.index("mean") + 1
    ci_col = CSV_COLUMNS.index("ci95_half") + 1
    lines = [
        "set datafile separator ','",
        "set key outside",
        "set xlabel 'failed elements ratio'",
    ]
    for metric in metrics:
        lines.append(f"set ylabel '{metric}'")
        lines.append(
            f"plot '{csv_path}' skip 1 using {fer_col}:{mean_col}:{ci_col} "
            f"with yerrorlines title '{metric}'"
        )
        lines.append("pause -1")
    return "\n".join(lines) + "\n"
