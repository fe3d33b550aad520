"""Submission CSV (``itemid,prediction``) reading and writing."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from .metrics import SubmissionSet

HEADER = ("itemid", "prediction")


class SubmissionFormatError(ValueError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


def parse_submission(text: str, team: str = "", timestamp: str = "") -> SubmissionSet:
    """Parse and validate; duplicate ids and out-of-range values are rejected with row numbers."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip().lower() for c in rows[0]) != HEADER:
        raise SubmissionFormatError("header must be itemid,prediction")
    preds, dupes, bad = {}, [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            bad.append(f"line {lineno}: expected 2 fields")
            continue
        item_id, raw = row[0].strip(), row[1].strip()
        try:
            value = float(raw)
        except ValueError:
            bad.append(f"line {lineno}: {item_id}={raw!r} is not a number")
            continue
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            bad.append(f"line {lineno}: {item_id}={raw} outside [0, 1]")
            continue
        if item_id in preds:
            dupes.append(item_id)
            continue
        preds[item_id] = value
    if bad:
        raise SubmissionFormatError(f"{len(bad)} invalid rows: {'; '.join(bad[:10])}", bad[:10])
    if dupes:
        raise SubmissionFormatError(f"duplicate item ids: {dupes[:10]}", dupes[:10])
    return SubmissionSet(preds, team, timestamp)


def load_submission(path, team: str = "") -> SubmissionSet:
    path = Path(path)
    return parse_submission(path.read_text(encoding="utf-8"), team=team or path.stem)


def format_submission(sub: SubmissionSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for item_id, score in sub.predictions.items():
        w.writerow([item_id, repr(float(score))])
    return buf.getvalue()


def write_submission(sub: SubmissionSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_submission(sub))
    return path
