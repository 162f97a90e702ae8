"""Run artifacts: manifest, CSV tables, text blobs and the pass/fail summary."""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import yaml

from .checks import CheckList
from .pipelines import PipelineResult
from .scenario import Scenario

log = logging.getLogger(__name__)

NUMBER_FORMAT = "%.17g"


def _fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return NUMBER_FORMAT % float(value)
    return str(value)


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to builtins; non-finite floats to strings for strict JSON."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def ledger_lines(ledger: Dict[str, float]) -> List[str]:
    return [f"{key} = {_fmt(value)}" for key, value in ledger.items()]


def check_lines(checks: CheckList) -> List[str]:
    lines = []
    for check in checks:
        relation = "<=" if check.sense == "le" else ">="
        lines.append(
            f"{'PASS' if check.passed else 'FAIL'} {check.name}: measured = {_fmt(check.measured)} "
            f"{relation} bound = {_fmt(check.bound)} (tol {_fmt(check.tol)}, margin {_fmt(check.margin)})"
        )
    return lines


def summary_text(scn: Scenario, result: PipelineResult) -> str:
    failed = result.checks.failed()
    lines = [
        f"scenario = {scn.name}",
        f"pipeline = {result.pipeline}",
        f"status = {'pass' if result.passed else 'fail'}",
        f"checks = {len(result.checks)}",
        f"failed = {len(failed)}",
        "",
        "[ledger]",
        *ledger_lines(result.ledger),
        "",
        "[checks]",
        *check_lines(result.checks),
    ]
    if result.notes:
        lines += ["", "[notes]", *result.notes]
    return "\n".join(lines) + "\n"


def write_table(path: Path, columns: List[str], rows: np.ndarray) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    np.savetxt(path, rows, fmt=NUMBER_FORMAT, delimiter=",", header=",".join(columns), comments="")


def emit_report(scn: Scenario, result: PipelineResult, out_dir: str | Path) -> List[Path]:
    """Write every artifact of a finished run into out_dir; returns the written paths in order."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out_dir}: {exc}") from exc

    written: List[Path] = []
    try:
        manifest = out_dir / "manifest.yaml"
        with open(manifest, "w", encoding="utf-8") as f:
            yaml.safe_dump(
                _plain({"scenario": scn.to_dict(), "ledger": result.ledger}),
                f,
                default_flow_style=False,
                sort_keys=False,
            )
        written.append(manifest)

        if scn.output.tables:
            for name, table in result.tables.items():
                path = out_dir / f"{name}.csv"
                write_table(path, table.columns, table.rows)
                written.append(path)
        for name, text in result.texts.items():
            path = out_dir / name
            path.write_text(text, encoding="utf-8")
            written.append(path)

        summary = out_dir / "summary.txt"
        summary.write_text(summary_text(scn, result), encoding="utf-8")
        written.append(summary)

        summary_json = out_dir / "summary.json"
        payload = {
            "scenario": scn.name,
            "pipeline": result.pipeline,
            "passed": result.passed,
            "ledger": result.ledger,
            "checks": [check.to_dict() for check in result.checks],
            "values": result.values,
            "notes": result.notes,
            "tables": sorted(f"{name}.csv" for name in result.tables) if scn.output.tables else [],
        }
        with open(summary_json, "w", encoding="utf-8") as f:
            json.dump(_plain(payload), f, indent=2, sort_keys=True)
            f.write("\n")
        written.append(summary_json)
    except OSError as exc:
        raise RuntimeError(f"cannot write report into {out_dir}: {exc}") from exc

    log.info("wrote %d artifacts to %s", len(written), out_dir)
    return written
