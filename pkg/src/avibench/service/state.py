"""Challenge mechanics: teams, rate-limited submissions, preview and final leaderboards.

All mutations go through one lock and are appended to a JSON-lines event log
before they become visible, so replaying the log rebuilds the same state.
Readers work on an immutable snapshot and never take the lock.
"""

from __future__ import annotations

import hashlib
import json
import math
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..eval.io import SubmissionFormatError, parse_submission
from ..eval.metrics import SubmissionSet, UndefinedAUC, auc_scores, bootstrap_scores
from ..eval.report import evaluate
from ..manifest import DatasetManifest
from ..pipeline import derive_seed

OPEN, CLOSED = "open", "closed"
LOG_NAME = "events.jsonl"


class ServiceError(Exception):
    status = 400
    code = "bad-request"

    def __init__(self, detail: str, offenders=()):
        super().__init__(detail)
        self.detail = detail
        self.offenders = list(offenders)

    def to_dict(self):
        d = {"code": self.code, "detail": self.detail}
        if self.offenders:
            d["offenders"] = self.offenders
        return d


class ConfigError(ServiceError):
    code = "config"


class AuthError(ServiceError):
    status, code = 401, "unauthorized"


class ValidationError(ServiceError):
    status, code = 422, "invalid-submission"


class RateLimited(ServiceError):
    status, code = 429, "rate-limited"


class PhaseError(ServiceError):
    status, code = 409, "wrong-phase"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    if ts.tzinfo is None:
        raise ValueError("clock must return timezone-aware datetimes")
    return ts.astimezone(timezone.utc).isoformat()


def _token_hash(token: str) -> str:
    return hashlib.sha256(token.encode()).hexdigest()


def truth_hash(truth: dict) -> str:
    body = "\n".join(f"{i},{truth[i]}" for i in sorted(truth))
    return hashlib.sha256(body.encode()).hexdigest()


def preview_size(n_test: int, fraction: float) -> int:
    return math.floor(fraction * n_test + 1e-9)


def choose_preview(ids, fraction: float, seed: int) -> list[str]:
    """Seeded shuffle of the sorted ids; the first floor(fraction * n) form the preview set."""
    ids = sorted(ids)
    rng = np.random.default_rng(derive_seed(seed, "preview"))
    order = rng.permutation(len(ids))
    return sorted(ids[j] for j in order[:preview_size(len(ids), fraction)])


@dataclass(frozen=True)
class TeamRecord:
    team_id: str
    name: str
    token_hash: str
    last_submission_date: str | None = None  # UTC calendar day of the last accepted submission


@dataclass(frozen=True)
class SubmissionRecord:
    submission_id: str
    team_id: str
    timestamp: str
    submission: SubmissionSet = field(repr=False, compare=False)
    preview_auc: float | None
    final_auc: float | None  # private until the challenge closes

    def public(self, closed: bool) -> dict:
        d = {"submission_id": self.submission_id, "team_id": self.team_id, "timestamp": self.timestamp,
             "preview_auc": self.preview_auc}
        if closed:
            d["final_auc"] = self.final_auc
        return d


@dataclass(frozen=True)
class Snapshot:
    phase: str
    teams: dict  # team_id -> TeamRecord (never mutated after publication)
    submissions: tuple


class ChallengeState:
    """Use `create_challenge` rather than constructing directly."""

    def __init__(self, truth: dict, preview_ids, preview_fraction: float, seed: int, log_path=None,
                 clock=utc_now, n_boot: int = 1000, manifest: DatasetManifest | None = None):
        self.manifest = manifest
        self.truth = dict(truth)
        self.test_ids = sorted(self.truth)
        self.preview_ids = tuple(preview_ids)
        self.preview_fraction = preview_fraction
        self.seed = seed
        self.clock = clock
        self.n_boot = n_boot
        self.log_path = Path(log_path) if log_path else None
        self._lock = threading.Lock()
        self._snap = Snapshot(OPEN, {}, ())
        self._by_token = {}
        self._boot_cache = {}
        self._y_all = np.array([self.truth[i] for i in self.test_ids])
        self._y_preview = np.array([self.truth[i] for i in self.preview_ids])

    # ---- persistence

    def _append(self, event: dict):
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n")
            f.flush()

    def _apply(self, event: dict):
        """Apply one event to the snapshot. Caller holds the lock (or is replaying)."""
        snap = self._snap
        kind = event["type"]
        if kind == "team":
            rec = TeamRecord(event["team_id"], event["name"], event["token_hash"])
            self._by_token[rec.token_hash] = rec.team_id
            self._snap = Snapshot(snap.phase, {**snap.teams, rec.team_id: rec}, snap.submissions)
        elif kind == "submission":
            sub = SubmissionSet(dict(zip(self.test_ids, event["predictions"])), event["team_id"],
                                event["timestamp"])
            rec = SubmissionRecord(event["submission_id"], event["team_id"], event["timestamp"], sub,
                                   *self._score(sub))
            team = snap.teams[rec.team_id]
            day = event["timestamp"][:10]
            teams = {**snap.teams, team.team_id: TeamRecord(team.team_id, team.name, team.token_hash, day)}
            self._snap = Snapshot(snap.phase, teams, snap.submissions + (rec,))
        elif kind == "close":
            self._snap = Snapshot(CLOSED, snap.teams, snap.submissions)
        elif kind != "create":
            raise ConfigError(f"unknown event type {kind!r}")

    def _score(self, sub: SubmissionSet):
        preview = None
        if self.preview_ids:
            try:
                preview = auc_scores(sub.scores(self.preview_ids), self._y_preview)
            except UndefinedAUC:
                pass
        return preview, auc_scores(sub.scores(self.test_ids), self._y_all)

    # ---- mutations

    def register_team(self, name: str) -> tuple[str, str]:
        """Returns (team_id, token). Only the token's hash is stored."""
        name = str(name).strip()
        if not name:
            raise ServiceError("team name must be non-empty")
        token = secrets.token_hex(16)
        with self._lock:
            if any(t.name == name for t in self._snap.teams.values()):
                raise ServiceError(f"team name {name!r} already taken")
            event = {"type": "team", "team_id": f"t{len(self._snap.teams) + 1:04d}", "name": name,
                     "token_hash": _token_hash(token)}
            self._append(event)
            self._apply(event)
        return event["team_id"], token

    def authenticate(self, token: str | None) -> str:
        if not token:
            raise AuthError("missing bearer token")
        team_id = self._by_token.get(_token_hash(token))
        if team_id is None:
            raise AuthError("unknown token")
        return team_id

    def validate(self, csv_text: str) -> SubmissionSet:
        try:
            sub = parse_submission(csv_text)
        except SubmissionFormatError as e:
            raise ValidationError(str(e), e.offenders) from None
        unknown = [i for i in sub.predictions if i not in self.truth]
        if unknown:
            raise ValidationError(f"{len(unknown)} unknown item ids", unknown[:10])
        missing = [i for i in self.test_ids if i not in sub.predictions]
        if missing:
            raise ValidationError(f"{len(missing)} test items have no prediction", missing[:10])
        return sub

    def submit(self, token: str | None, csv_text: str) -> dict:
        """Validate, rate-limit, persist and score one submission.

        Malformed submissions are rejected before the quota check, so they do
        not use up the team's day.
        """
        team_id = self.authenticate(token)
        if self._snap.phase != OPEN:
            raise PhaseError("challenge is closed")
        sub = self.validate(csv_text)
        with self._lock:
            snap = self._snap
            if snap.phase != OPEN:
                raise PhaseError("challenge is closed")
            now = _iso(self.clock())
            if snap.teams[team_id].last_submission_date == now[:10]:
                raise RateLimited(f"team {team_id} already has an accepted submission on {now[:10]} (UTC)")
            event = {"type": "submission", "submission_id": f"s{len(snap.submissions) + 1:05d}",
                     "team_id": team_id, "timestamp": now,
                     "predictions": [sub.predictions[i] for i in self.test_ids]}
            self._append(event)
            self._apply(event)
            rec = self._snap.submissions[-1]
        return {"submission_id": rec.submission_id, "preview_auc": rec.preview_auc}

    def close(self) -> "ChallengeState":
        with self._lock:
            if self._snap.phase == OPEN:
                event = {"type": "close", "timestamp": _iso(self.clock())}
                self._append(event)
                self._apply(event)
        return self

    # ---- reads

    @property
    def phase(self) -> str:
        return self._snap.phase

    @property
    def submissions(self) -> tuple:
        return self._snap.submissions

    @property
    def teams(self) -> dict:
        return self._snap.teams

    def info(self) -> dict:
        return {"phase": self.phase, "n_test": len(self.test_ids), "preview_fraction": self.preview_fraction,
                "n_preview": len(self.preview_ids), "n_teams": len(self.teams),
                "n_submissions": len(self.submissions)}

    def _bootstrap(self, rec: SubmissionRecord):
        if rec.submission_id not in self._boot_cache:
            s = rec.submission.scores(self.test_ids)
            seed = derive_seed(self.seed, f"leaderboard/{rec.submission_id}")
            self._boot_cache[rec.submission_id] = bootstrap_scores(s, self._y_all, self.n_boot, seed)
        return self._boot_cache[rec.submission_id]

    def leaderboard(self, mode: str = "preview") -> list[dict]:
        """Best submission per team, best first (ties by team id).

        Preview entries carry the team's preview timeline; final entries
        (closed phase only) carry bootstrap error bars.
        """
        snap = self._snap
        if mode not in ("preview", "final"):
            raise ServiceError(f"mode must be preview or final, got {mode!r}")
        if mode == "final" and snap.phase != CLOSED:
            raise PhaseError("final leaderboard is only available after the challenge closes")
        key = "preview_auc" if mode == "preview" else "final_auc"
        by_team = {}
        for rec in snap.submissions:
            by_team.setdefault(rec.team_id, []).append(rec)
        rows = []
        for team_id, recs in by_team.items():
            scored = [r for r in recs if getattr(r, key) is not None]
            best = max(scored, key=lambda r: getattr(r, key), default=None)
            row = {"team_id": team_id, "name": snap.teams[team_id].name, "n_submissions": len(recs),
                   "best_submission_id": best.submission_id if best else None,
                   key: getattr(best, key) if best else None}
            if mode == "preview":
                row["timeline"] = [{"timestamp": r.timestamp, "preview_auc": r.preview_auc} for r in recs]
            else:
                b = self._bootstrap(best)
                row["ci_lo"], row["ci_hi"] = b.lo, b.hi
            rows.append(row)
        rows.sort(key=lambda r: (-(r[key] if r[key] is not None else -1.0), r["team_id"]))
        return rows

    def report(self, submission_id: str) -> dict:
        """Full evaluation report for one submission; closed phase only."""
        snap = self._snap
        if snap.phase != CLOSED:
            raise PhaseError("reports are released after the challenge closes")
        rec = next((r for r in snap.submissions if r.submission_id == submission_id), None)
        if rec is None:
            raise ServiceError(f"no submission {submission_id!r}")
        truth = self.manifest if self.manifest is not None else self.truth
        d = evaluate(rec.submission, truth, self.n_boot, derive_seed(self.seed, f"report/{submission_id}")).to_dict()
        d.update(rec.public(closed=True))
        return d

    def state_dict(self) -> dict:
        """Everything replay must reproduce, including private scores."""
        snap = self._snap
        return {
            "phase": snap.phase, "preview_ids": list(self.preview_ids),
            "teams": {k: vars(t).copy() for k, t in sorted(snap.teams.items())},
            "submissions": [{**r.public(closed=True), "predictions": r.submission.predictions}
                            for r in snap.submissions],
        }


def create_challenge(test_manifest: DatasetManifest, preview_fraction: float = 0.15, seed: int = 0,
                     data_dir=None, clock=utc_now, n_boot: int = 1000) -> ChallengeState:
    """New challenge, or the replayed one if `data_dir` already holds an event log for the same setup."""
    if any(it.label is None for it in test_manifest.items):
        raise ConfigError("test manifest must be fully labelled")
    if not test_manifest.items:
        raise ConfigError("test manifest is empty")
    if not 0.0 < preview_fraction <= 1.0:
        raise ConfigError(f"preview_fraction must be in (0, 1], got {preview_fraction}")
    truth = test_manifest.labels()
    if len(set(truth.values())) < 2:
        raise ConfigError("test manifest needs both positive and negative items")
    if preview_size(len(truth), preview_fraction) < 1:
        raise ConfigError("preview set would be empty")
    log_path = None
    events = []
    if data_dir is not None:
        data_dir = Path(data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        log_path = data_dir / LOG_NAME
        if log_path.exists():
            events = [json.loads(line) for line in log_path.read_text(encoding="utf-8").splitlines() if line.strip()]
    th = truth_hash(truth)
    if events:
        head = events[0]
        if head.get("type") != "create":
            raise ConfigError("event log does not start with a create event")
        if (head["truth_hash"], head["preview_fraction"], head["seed"]) != (th, preview_fraction, seed):
            raise ConfigError("event log belongs to a different challenge setup")
        preview = head["preview_ids"]
    else:
        preview = choose_preview(truth, preview_fraction, seed)
    state = ChallengeState(truth, preview, preview_fraction, seed, log_path, clock, n_boot, test_manifest)
    if events:
        for ev in events[1:]:
            state._apply(ev)
    else:
        create = {"type": "create", "truth_hash": th, "preview_fraction": preview_fraction, "seed": seed,
                  "n_test": len(truth), "preview_ids": list(preview)}
        state._append(create)
    return state
