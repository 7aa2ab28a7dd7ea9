"""CSV/JSON reading and writing, and the bundled real-data fixture.

All numbers are written with 12 significant digits so that output bytes only
depend on the inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .binary_core import MarginalSummary, SummaryCollection
from .exceptions import DomainError

SCHEMA_VERSION = 1
LEGACY_SE = 999.0


class InputError(DomainError):
    """Malformed or invalid input file."""


@dataclass(frozen=True)
class RealDataFixture:
    """Twelve study-level (n, x, y) rows for abnormal BMI and White race."""

    data: SummaryCollection
    study_ids: tuple[str, ...]
    studies: tuple[str, ...]
    regions: tuple[str, ...]


def fmt(value) -> str:
    """Render a CSV field; ``None``/NaN become empty, strings pass through."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return ""
    return f"{value:.12g}"


def jsonable(value):
    """Recursively round floats to 12 significant digits; NaN becomes ``null``."""
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if hasattr(value, "item"):
        return jsonable(value.item())
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.12g}")


def _read_rows(path, required):
    path = Path(path)
    text = path.read_text()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError(f"{path}: empty file, expected header {','.join(required)}") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(
            f"{path}: line 1: header must contain {','.join(required)} (missing {','.join(missing)})"
        )
    idx = [header.index(c) for c in required]
    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise InputError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
        rows.append((line_no, [row[i].strip() for i in idx]))
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


def parse_binary_csv(path) -> SummaryCollection:
    """Read studies from a CSV with header ``n,x,y`` (extra columns ignored)."""
    records = []
    for line_no, (n, x, y) in _read_rows(path, ("n", "x", "y")):
        try:
            values = [int(v) for v in (n, x, y)]
        except ValueError:
            raise InputError(f"{path}: line {line_no}: counts must be integers, got {n},{x},{y}") from None
        try:
            records.append(MarginalSummary(*values))
        except DomainError as exc:
            raise InputError(f"{path}: line {line_no}: {exc}") from None
    return SummaryCollection(tuple(records))


def parse_continuous_csv(path):
    """Read studies from a CSV with header ``n,m1,m2,s1,s2``.

    ``s1`` and ``s2`` are within-study variances, not standard deviations.
    """
    from .gauss_corr import ContinuousStudySummary

    out = []
    for line_no, fields in _read_rows(path, ("n", "m1", "m2", "s1", "s2")):
        try:
            n = int(fields[0])
            rest = [float(v) for v in fields[1:]]
        except ValueError:
            raise InputError(f"{path}: line {line_no}: malformed row {','.join(fields)}") from None
        try:
            out.append(ContinuousStudySummary(n, *rest))
        except DomainError as exc:
            raise InputError(f"{path}: line {line_no}: {exc}") from None
    return out


def binary_csv_text(data: SummaryCollection) -> str:
    lines = ["n,x,y"] + [f"{r.n},{r.x},{r.y}" for r in data]
    return "\n".join(lines) + "\n"


def load_real_data() -> RealDataFixture:
    """The bundled twelve-study BMI/race fixture."""
    text = resources.files("margjoint").joinpath("data/real_data.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    data = SummaryCollection(tuple(MarginalSummary(int(r["n"]), int(r["x"]), int(r["y"])) for r in rows))
    return RealDataFixture(
        data,
        tuple(r["study_id"] for r in rows),
        tuple(r["study"] for r in rows),
        tuple(r["region"] for r in rows),
    )


def fixture_csv_text() -> str:
    return resources.files("margjoint").joinpath("data/real_data.csv").read_text()


# --- emission ---------------------------------------------------------------


def _se_value(se, legacy_999: bool):
    if se is None:
        return LEGACY_SE if legacy_999 else None
    return se


def _interval_dict(ci):
    if ci is None:
        return None
    return {
        "lower": ci.lower,
        "upper": ci.upper,
        "method": ci.method,
        "clipped_low": ci.clipped_low,
        "clipped_high": ci.clipped_high,
    }


def report_to_dict(report, legacy_999: bool = False, k: int | None = None) -> dict:
    out = {"schema": SCHEMA_VERSION, "kind": "binary-estimate"}
    if k is not None:
        out["k"] = k
    for name in ("p1", "p2", "p11"):
        est = getattr(report, name)
        out[name] = {"value": est.value, "se": _se_value(est.se, legacy_999), "boundary": est.boundary}
    for fam in ("ci1", "ci2"):
        for name in ("p1", "p2", "p11"):
            key = f"{fam}_{name}"
            out[key] = _interval_dict(getattr(report, key))
    out.update(
        phi=report.phi,
        loglik_at_mle=report.loglik_at_mle,
        optimizer_iterations=report.optimizer_iterations,
        grid_argmax=report.grid_argmax,
        alpha=report.alpha,
    )
    return jsonable(out)


REPORT_CSV_COLUMNS = ("quantity", "value", "se", "ci1_low", "ci1_high", "ci2_low", "ci2_high")


def report_csv_text(report, legacy_999: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_CSV_COLUMNS)
    for name in ("p1", "p2", "p11"):
        est = getattr(report, name)
        ci1 = getattr(report, f"ci1_{name}")
        ci2 = getattr(report, f"ci2_{name}")
        w.writerow(
            [
                name,
                fmt(est.value),
                fmt(_se_value(est.se, legacy_999)),
                fmt(ci1.lower if ci1 else None),
                fmt(ci1.upper if ci1 else None),
                fmt(ci2.lower),
                fmt(ci2.upper),
            ]
        )
    w.writerow(["phi", fmt(report.phi), "", "", "", "", ""])
    w.writerow(["loglik", fmt(report.loglik_at_mle), "", "", "", "", ""])
    return buf.getvalue()


SCENARIO_CSV_COLUMNS = ("rep", "estimate", "se", "ci1_low", "ci1_high", "ci2_low", "ci2_high", "cover1", "cover2")


def scenario_csv_text(result, legacy_999: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCENARIO_CSV_COLUMNS)
    for row in result.rows():
        se = row["se"]
        if legacy_999 and math.isnan(se) and not math.isnan(row["estimate"]):
            se = LEGACY_SE
        w.writerow(
            [
                row["rep"],
                fmt(row["estimate"]),
                fmt(se),
                fmt(row["ci1_low"]),
                fmt(row["ci1_high"]),
                fmt(row["ci2_low"]),
                fmt(row["ci2_high"]),
                fmt(row["cover1"]),
                fmt(row["cover2"]),
            ]
        )
    return buf.getvalue()


def scenario_to_dict(result, legacy_999: bool = False) -> dict:
    sc = result.scenario
    rows = []
    for row in result.rows():
        if legacy_999 and math.isnan(row["se"]) and not math.isnan(row["estimate"]):
            row["se"] = LEGACY_SE
        rows.append(row)
    return jsonable(
        {
            "schema": SCHEMA_VERSION,
            "kind": "binary-simulation",
            "scenario": {
                "k": sc.k,
                "n_min": sc.n_min,
                "n_max": sc.n_max,
                "p1": sc.truth.p1,
                "p2": sc.truth.p2,
                "p11": sc.truth.p11,
                "reps": sc.reps,
                "seed": sc.seed,
                "extreme_inflate": sc.extreme_inflate,
            },
            "summary": result.summary,
            "reps": rows,
        }
    )


def diagnostics_to_dict(bundle) -> dict:
    return jsonable(
        {
            "schema": SCHEMA_VERSION,
            "kind": "diagnostics",
            "histogram": {"bin_edges": list(bundle.bin_edges), "counts": [int(c) for c in bundle.counts]},
            "qq": [[t, e] for t, e in zip(bundle.qq_theoretical, bundle.qq_empirical)],
            "qq_correlation": bundle.qq_correlation,
        }
    )


def diagnostics_csv_text(bundle) -> str:
    """Long format: ``kind,a,b`` with histogram rows (left edge, count) then QQ rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("kind", "a", "b"))
    for left, count in zip(bundle.bin_edges[:-1], bundle.counts):
        w.writerow(("hist", fmt(left), int(count)))
    w.writerow(("hist_end", fmt(bundle.bin_edges[-1]), ""))
    for t, e in zip(bundle.qq_theoretical, bundle.qq_empirical):
        w.writerow(("qq", fmt(t), fmt(e)))
    return buf.getvalue()


def table_csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_text(text: str, path=None) -> None:
    """Write to ``path``, or to stdout when ``path`` is ``None`` or ``-``."""
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    Path(path).write_text(text)
