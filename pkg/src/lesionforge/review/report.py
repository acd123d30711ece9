"""Unblinded summary of stored rankings, one row per method."""

from __future__ import annotations

from typing import Mapping, Sequence

from lesionforge.errors import EmptyStoreError
from lesionforge.metrics import average_rankings

from .store import RankingRecord


def rankings_report(
    records: Sequence[RankingRecord],
    alignment_by_method: Mapping[str, float] | None = None,
) -> dict:
    """Average naturalness/similarity rank per method, plus the mean
    alignment score column when the caller has one."""
    if not records:
        raise EmptyStoreError("no rankings have been submitted")
    averaged = average_rankings((r.naturalness, r.similarity) for r in records)
    alignment = alignment_by_method or {}
    rows = [
        {
            "method": r.method,
            "avg_naturalness": r.avg_naturalness,
            "avg_similarity": r.avg_similarity,
            "avg_alignment": alignment.get(r.method),
        }
        for r in averaged
    ]
    return {"n_records": len(records), "rows": rows}


def report_text(report: dict) -> str:
    """Fixed-width rendering; '-' marks criteria a method was not rated on."""
    header = f"{'method':<16} {'naturalness':>12} {'similarity':>11} {'alignment':>10}"
    lines = [header]
    for row in report["rows"]:
        sim = f"{row['avg_similarity']:.3f}" if row["avg_similarity"] is not None else "-"
        align = f"{row['avg_alignment']:.3f}" if row.get("avg_alignment") is not None else "-"
        lines.append(
            f"{row['method']:<16} {row['avg_naturalness']:>12.3f} {sim:>11} {align:>10}"
        )
    lines.append(f"records: {report['n_records']}")
    return "\n".join(lines)
