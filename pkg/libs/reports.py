"""
Scenario reports and tabular output.

Reports and tables are written as JSON or CSV. Every file starts with the
full configuration that produced it: a "config" key in JSON, a
"# config: {...}" comment line in CSV. Wall-clock runtime is kept on the
in-memory report only, so reruns write identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, Field, computed_field

logger = logging.getLogger(__name__)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class CheckResult(BaseModel):
    """Outcome of one named check."""

    name: str = Field(description="Check identifier")
    statistic: Optional[float] = Field(None, description="Measured quantity")
    tolerance: Optional[float] = Field(None, description="Threshold the statistic is held to")
    passed: bool = Field(description="Whether the check passed")
    pvalue: Optional[float] = Field(None, description="p-value for hypothesis tests")
    detail: str = Field("", description="Short human-readable explanation")


class Report(BaseModel):
    """Result of running one scenario."""

    scenario: str = Field(description="Scenario name")
    seed: int = Field(description="Master seed")
    config: Dict[str, Any] = Field(default_factory=dict, description="Configuration echo")
    checks: List[CheckResult] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(
        default_factory=dict, description="Scenario-specific aggregates"
    )
    runtime_s: Optional[float] = Field(None, exclude=True, description="Wall-clock time")

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2) + "\n"

    def to_csv(self) -> str:
        rows = [check.model_dump() for check in self.checks]
        return table_to_csv(rows, {"scenario": self.scenario, **self.config})


def _config_line(config: Dict[str, Any]) -> str:
    return "# config: " + json.dumps(config, sort_keys=True)


def table_to_csv(rows: Sequence[Dict[str, Any]], config: Dict[str, Any]) -> str:
    buffer = io.StringIO()
    buffer.write(_config_line(config) + "\n")
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(v) for k, v in row.items()})
    return buffer.getvalue()


def _csv_value(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Enum):
        return value.value
    return value


def table_to_json(rows: Sequence[Dict[str, Any]], config: Dict[str, Any]) -> str:
    return dump_json({"config": config, "rows": list(rows)})


def dump_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, default=str) + "\n"


def render_table(
    rows: Sequence[Dict[str, Any]], config: Dict[str, Any], fmt: OutputFormat
) -> str:
    if OutputFormat(fmt) == OutputFormat.JSON:
        return table_to_json(rows, config)
    return table_to_csv(rows, config)


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Wrote {path}")
    return path


def write_report(report: Report, out_dir: Path, fmt: OutputFormat) -> Path:
    fmt = OutputFormat(fmt)
    text = report.to_json() if fmt == OutputFormat.JSON else report.to_csv()
    return write_text(Path(out_dir) / f"{report.scenario}.{fmt.value}", text)


def write_table(
    rows: Sequence[Dict[str, Any]],
    config: Dict[str, Any],
    out_path: Path,
    fmt: OutputFormat,
) -> Path:
    return write_text(Path(out_path), render_table(rows, config, fmt))
