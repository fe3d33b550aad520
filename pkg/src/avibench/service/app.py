"""FastAPI front end over `ChallengeState`."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.concurrency import run_in_threadpool

from ..manifest import load_manifest
from .state import ChallengeState, ConfigError, ServiceError, create_challenge


@dataclass(frozen=True)
class ServiceConfig:
    test_manifest: str
    preview_fraction: float = 0.15
    seed: int = 0
    data_dir: str = "challenge-data"
    host: str = "127.0.0.1"
    port: int = 8000
    n_boot: int = 1000

    @classmethod
    def from_file(cls, path, **overrides) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        if "test_manifest" not in raw:
            raise ConfigError("config needs test_manifest")
        return cls(**raw)

    def to_dict(self):
        return asdict(self)


def state_from_config(cfg: ServiceConfig, clock=None) -> ChallengeState:
    kw = {"clock": clock} if clock else {}
    return create_challenge(load_manifest(cfg.test_manifest), cfg.preview_fraction, cfg.seed, cfg.data_dir,
                            n_boot=cfg.n_boot, **kw)


def _bearer(request: Request) -> str | None:
    auth = request.headers.get("authorization", "")
    scheme, _, token = auth.partition(" ")
    return token.strip() if scheme.lower() == "bearer" and token.strip() else None


def create_app(state: ChallengeState) -> FastAPI:
    app = FastAPI(title="avibench challenge")
    app.state.challenge = state

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(exc.to_dict(), status_code=exc.status)

    @app.post("/api/teams")
    async def register(request: Request):
        try:
            body = await request.json()
        except ValueError:
            raise ServiceError("body must be JSON {name}") from None
        if not isinstance(body, dict) or not isinstance(body.get("name"), str):
            raise ServiceError("body must be JSON {name}")
        team_id, token = state.register_team(body["name"])
        return {"team_id": team_id, "token": token}

    @app.post("/api/submissions")
    async def submit(request: Request):
        token = _bearer(request)
        state.authenticate(token)
        raw = await request.body()
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError:
            raise ServiceError("body must be UTF-8 CSV") from None
        # scoring is CPU work; the state lock serializes the writers
        return await run_in_threadpool(state.submit, token, text)

    @app.get("/api/leaderboard")
    def leaderboard(mode: str = "preview"):
        return state.leaderboard(mode)

    @app.get("/api/challenge")
    def challenge():
        return state.info()

    @app.get("/api/submissions/{submission_id}/report")
    def report(submission_id: str):
        return state.report(submission_id)

    return app
