"""Evaluation reports: one row per (embedding label, metric), TSV or JSON on disk."""

import csv
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field

from metafair.errors import InvalidArgument, IoError, ParseError
from metafair.security.paths import OutputGuard
from metafair.store.textio import format_float

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("tsv", "json")
TSV_COLUMNS = ("label", "metric", "score", "skipped", "fingerprint")


@dataclass(frozen=True)
class ReportRow:
    label: str
    metric: str
    score: float
    skipped: int
    fingerprint: str


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, label: str, metric: str, score: float, skipped: int = 0) -> ReportRow:
        row = ReportRow(label, metric, float(score), int(skipped), self.fingerprint)
        self.rows.append(row)
        return row

    def extend(self, other: "EvalReport") -> None:
        self.rows.extend(other.rows)

    @property
    def fingerprint(self) -> str:
        return self.provenance.get("fingerprint", "")

    @property
    def labels(self) -> list[str]:
        return list(dict.fromkeys(r.label for r in self.rows))

    @property
    def metrics(self) -> list[str]:
        return list(dict.fromkeys(r.metric for r in self.rows))

    def scores(self, metric: str) -> dict[str, float]:
        """label -> score for one metric."""
        return {r.label: r.score for r in self.rows if r.metric == metric}

    def score(self, label: str, metric: str) -> float:
        for r in self.rows:
            if r.label == label and r.metric == metric:
                return r.score
        raise KeyError(f"No {metric!r} score for {label!r}")

    def to_dict(self) -> dict:
        return {"provenance": dict(self.provenance), "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        rows = [
            ReportRow(
                label=str(r["label"]),
                metric=str(r["metric"]),
                score=float(r["score"]),
                skipped=int(r["skipped"]),
                fingerprint=str(r["fingerprint"]),
            )
            for r in data.get("rows", [])
        ]
        return cls(rows=rows, provenance=dict(data.get("provenance", {})))


def format_report(report: EvalReport, fmt: str = "tsv", precision: int | None = None) -> str:
    if fmt not in REPORT_FORMATS:
        raise InvalidArgument(f"Unknown report format {fmt!r}; choose from {REPORT_FORMATS}")
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(TSV_COLUMNS)
    for r in report.rows:
        writer.writerow(
            (r.label, r.metric, format_float(r.score, precision), r.skipped, r.fingerprint)
        )
    return buf.getvalue()


def report_emit(
    report: EvalReport,
    path: str,
    fmt: str | None = None,
    precision: int | None = None,
    guard: OutputGuard | None = None,
) -> None:
    """Write `report` to `path`; the format defaults to the file extension."""
    path = str(path)
    if fmt is None:
        fmt = "json" if path.endswith(".json") else "tsv"
    if guard is not None:
        guard.check(path)
    text = format_report(report, fmt, precision)
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {len(report.rows)} report rows to {path}")


def _parse_tsv(text: str, path: str) -> EvalReport:
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    header = next(reader, None)
    if header is None or tuple(header) != TSV_COLUMNS:
        raise ParseError(path, 1, f"expected header {'<TAB>'.join(TSV_COLUMNS)}")
    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TSV_COLUMNS):
            raise ParseError(path, line_no, f"expected {len(TSV_COLUMNS)} columns")
        try:
            rows.append(ReportRow(row[0], row[1], float(row[2]), int(row[3]), row[4]))
        except ValueError as e:
            raise ParseError(path, line_no, str(e)) from None
    provenance = {"fingerprint": rows[0].fingerprint} if rows else {}
    return EvalReport(rows=rows, provenance=provenance)


def read_report(path: str) -> EvalReport:
    """Load a report written by report_emit (JSON, or TSV without provenance)."""
    path = str(path)
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except FileNotFoundError:
        raise IoError(f"Report not found: {path}") from None
    except OSError as e:
        raise IoError(f"Error reading {path}: {e}") from e
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(path, e.lineno, f"invalid JSON: {e.msg}") from None
        return EvalReport.from_dict(data)
    return _parse_tsv(text, path)
