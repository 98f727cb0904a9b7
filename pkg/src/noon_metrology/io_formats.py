"""Counts CSV, output tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .bayes_estimator import CountRecord

COUNTS_HEADER = ("theta_rad", "coincidences")
BUNCHED_HEADER = COUNTS_HEADER + ("bunched_arm1", "bunched_arm2")


class CountsFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def fmt(x) -> str:
    """Lossless text form of a number (17 significant digits for floats)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def digest_config(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _comment_lines(comments: dict[str, Any] | None) -> str:
    if not comments:
        return ""
    return "".join(f"# {k}: {v}\n" for k, v in comments.items())


def write_counts_csv(path: str | Path, record: CountRecord, comments: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(_comment_lines(comments))
    has_bunched = record.bunched is not None
    buf.write(",".join(BUNCHED_HEADER if has_bunched else COUNTS_HEADER) + "\n")
    for i, (theta, n) in enumerate(zip(record.settings, record.coincidences)):
        row = [fmt(theta), fmt(n)]
        if has_bunched:
            row += [fmt(record.bunched[i, 0]), fmt(record.bunched[i, 1])]
        buf.write(",".join(row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _parse_count(text: str, line: int, column: str):
    try:
        value = int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise CountsFormatError(f"{column} is not a number: {text!r}", line) from None
    if not math.isfinite(value) or value < 0:
        raise CountsFormatError(f"{column} must be a finite non-negative count, got {text!r}", line)
    return value


def read_counts_csv(path: str | Path) -> CountRecord:
    """Parse a counts file; '#' lines are comments.  Errors name the offending line."""
    thetas, coinc, bunched = [], [], []
    header = None
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            cells = [c.strip() for c in text.split(",")]
            if header is None:
                if tuple(cells) not in (COUNTS_HEADER, BUNCHED_HEADER):
                    raise CountsFormatError(
                        f"expected header {','.join(COUNTS_HEADER)}[,bunched_arm1,bunched_arm2], got {text!r}",
                        lineno,
                    )
                header = tuple(cells)
                continue
            if len(cells) != len(header):
                raise CountsFormatError(f"expected {len(header)} fields, got {len(cells)}", lineno)
            try:
                theta = float(cells[0])
            except ValueError:
                raise CountsFormatError(f"theta_rad is not a number: {cells[0]!r}", lineno) from None
            if not math.isfinite(theta):
                raise CountsFormatError("theta_rad must be finite", lineno)
            thetas.append(theta)
            coinc.append(_parse_count(cells[1], lineno, "coincidences"))
            if len(header) == 4:
                bunched.append([_parse_count(c, lineno, h) for c, h in zip(cells[2:], header[2:])])
    if header is None:
        raise CountsFormatError("counts file has no header")
    if not thetas:
        raise CountsFormatError("counts file contains no data rows")
    coinc_arr = np.array(coinc, dtype=np.int64 if all(isinstance(c, int) for c in coinc) else float)
    return CountRecord(np.array(thetas), coinc_arr, np.array(bunched) if bunched else None)


def write_table_csv(
    path: str | Path,
    rows: Iterable[dict[str, Any]],
    columns: Sequence[str],
    comments: dict[str, Any] | None = None,
) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(_comment_lines(comments))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_manifest(
    out_dir: str | Path,
    command: str,
    config: dict,
    seed: int | None,
    outputs: Sequence[Path],
    started: datetime,
) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "schema_version": 1,
        "command": command,
        "tool": "noon-metrology",
        "tool_version": __version__,
        "config": config,
        "config_sha256": digest_config(config),
        "seed": seed,
        "started_utc": started.isoformat(),
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": [{"file": p.name, "sha256": file_digest(p)} for p in outputs],
    }
    return write_json(out_dir / "run_manifest.json", manifest)
