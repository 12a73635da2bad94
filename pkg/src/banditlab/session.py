"""HTTP session service: live play against the two bandit settings.

Every session is a JSONL event log on disk; request handlers fold the log
into state, never the other way around, so a crash between append and
response can at worst replay one already-acknowledged choice. The append
is flushed and fsynced before the response leaves the process.

External surface speaks machine labels (1/2 stationary, 0-3 restless).
Latent means stay server-side until the session completes; the export
endpoint then emits the standard dataset JSONL, importable as-is.
"""

from __future__ import annotations

import json
import math
import os
import secrets
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .domain import (
    Dataset,
    EnvSpec,
    Step,
    Trajectory,
    Variant,
    restless4_spec,
    stationary2_spec,
)
from .envgen import DEFAULT_GROUP_SEEDS, default_groups, round_half_away
from .store import dataset_lines

SPECS: dict[str, EnvSpec] = {
    Variant.STATIONARY2.value: stationary2_spec(),
    Variant.RESTLESS4.value: restless4_spec(),
}


def _session_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def stationary_means(seed: int, game: int, n_arms: int, prior_var: float) -> tuple[float, ...]:
    sd = math.sqrt(prior_var)
    return tuple(float(_session_rng(seed, game, k).normal(0.0, sd)) for k in range(n_arms))


def stationary_reward(seed: int, game: int, round_: int, arm: int, spec: EnvSpec) -> float:
    """Reward is a pure function of its coordinates, so resubmitting a choice
    can never mint a different outcome."""
    mean = stationary_means(seed, game, spec.n_arms, spec.mean_prior_variance)[arm]
    noise = float(
        _session_rng(seed, game, round_, arm).normal(0.0, math.sqrt(spec.reward_variance))
    )
    value = mean + noise
    return round_half_away(value) if spec.integer_rewards else value


@dataclass
class SessionState:
    session_id: str
    variant: str
    seed: int
    group_id: int | None
    cursor_game: int
    cursor_round: int
    complete: bool
    total_reward: float
    history: list[dict] = field(default_factory=list)
    responses: dict[str, dict] = field(default_factory=dict)

    @property
    def spec(self) -> EnvSpec:
        return SPECS[self.variant]


def fold_events(session_id: str, lines: list[str]) -> SessionState:
    head = json.loads(lines[0])
    spec = SPECS[head["variant"]]
    n = 0
    total = 0.0
    history: list[dict] = []
    responses: dict[str, dict] = {}
    for raw in lines[1:]:
        ev = json.loads(raw)
        if ev["type"] != "choice":
            continue
        n += 1
        total += ev["reward"]
        history.append(
            {
                "game": ev["game"],
                "round": ev["round"],
                "choice": ev["arm"],
                "reward": ev["reward"],
            }
        )
        key = ev.get("idempotency_key")
        if key:
            responses[key] = ev["response"]
    games = spec.games_per_session
    horizon = spec.horizon
    complete = n >= games * horizon
    if complete:
        cursor_game, cursor_round = games, horizon
    else:
        cursor_game = n // horizon + 1
        cursor_round = n % horizon + 1
    return SessionState(
        session_id=session_id,
        variant=head["variant"],
        seed=head["seed"],
        group_id=head.get("group_id"),
        cursor_game=cursor_game,
        cursor_round=cursor_round,
        complete=complete,
        total_reward=total,
        history=history,
        responses=responses,
    )


class SessionBackend:
    """Disk-backed registry; one lock per session serializes appends."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._registry_lock = threading.Lock()
        self._groups = None

    def groups(self):
        if self._groups is None:
            self._groups = default_groups(SPECS[Variant.RESTLESS4.value])
        return self._groups

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks[session_id]

    def path(self, session_id: str) -> Path:
        if not session_id.replace("-", "").replace("_", "").isalnum():
            raise HTTPException(404, "no such session")
        return self.data_dir / f"{session_id}.jsonl"

    def append(self, session_id: str, event: dict) -> None:
        with open(self.path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load(self, session_id: str) -> SessionState:
        path = self.path(session_id)
        if not path.exists():
            raise HTTPException(404, "no such session")
        lines = path.read_text(encoding="utf-8").splitlines()
        return fold_events(session_id, lines)

    def create(self, variant: str, seed: int | None, group_id: int | None) -> SessionState:
        if variant not in SPECS:
            raise HTTPException(400, f"unknown variant: {variant}")
        session_id = secrets.token_urlsafe(12)
        if seed is None:
            seed = secrets.randbits(63)
        head: dict = {"type": "created", "variant": variant, "seed": seed}
        if variant == Variant.RESTLESS4.value:
            if group_id is None:
                group_id = 1 + seed % len(DEFAULT_GROUP_SEEDS)
            if group_id not in DEFAULT_GROUP_SEEDS:
                raise HTTPException(400, f"unknown reward group: {group_id}")
            head["group_id"] = group_id
        with self.lock(session_id):
            self.append(session_id, head)
        return self.load(session_id)

    def list_sessions(self) -> list[dict]:
        out = []
        for p in sorted(self.data_dir.glob("*.jsonl")):
            state = self.load(p.stem)
            out.append(public_state(state))
        return out


def public_state(state: SessionState) -> dict:
    """What a live player may see: no seed, no group, no latent means."""
    spec = state.spec
    base = spec.external_arm_base
    body = {
        "session_id": state.session_id,
        "variant": state.variant,
        "n_arms": spec.n_arms,
        "arm_labels": list(range(base, base + spec.n_arms)),
        "games": spec.games_per_session,
        "rounds_per_game": spec.horizon,
        "complete": state.complete,
        "total_reward": state.total_reward,
        "n_choices": len(state.history),
        "history": state.history,
    }
    if not state.complete:
        body["cursor"] = {"game": state.cursor_game, "round": state.cursor_round}
    return body


def session_dataset(state: SessionState, backend: SessionBackend) -> Dataset:
    spec = state.spec
    trajectories = []
    if state.variant == Variant.STATIONARY2.value:
        per_game: dict[int, list[Step]] = defaultdict(list)
        for h in state.history:
            per_game[h["game"]].append(
                Step(round=h["round"], choice=h["choice"] - spec.external_arm_base,
                     reward=float(h["reward"]))
            )
        for game in sorted(per_game):
            trajectories.append(
                Trajectory(
                    subject_id=state.session_id,
                    trial_index=game - 1,
                    steps=tuple(per_game[game]),
                    true_means=stationary_means(
                        state.seed, game, spec.n_arms, spec.mean_prior_variance
                    ),
                )
            )
    else:
        steps = tuple(
            Step(round=h["round"], choice=h["choice"], reward=float(h["reward"]))
            for h in state.history
        )
        trajectories.append(
            Trajectory(
                subject_id=state.session_id,
                trial_index=0,
                steps=steps,
                group_id=state.group_id,
            )
        )
    return Dataset(
        env_spec=spec,
        agent_label="session",
        trajectories=trajectories,
        meta={"source": "session", "session_id": state.session_id, "seed": state.seed},
    )


class CreateSession(BaseModel):
    variant: str = Variant.STATIONARY2.value
    seed: int | None = None
    group_id: int | None = None


class ChoiceBody(BaseModel):
    round: int
    arm: int
    game: int = 1
    idempotency_key: str | None = None


def create_app(
    data_dir: str | Path,
    *,
    token: str | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    backend = SessionBackend(data_dir)
    app = FastAPI(title="banditlab sessions", docs_url=None, redoc_url=None)
    app.state.backend = backend

    def authed(request: Request) -> None:
        if token is None:
            return
        got = request.headers.get("authorization", "")
        if not secrets.compare_digest(got, f"Bearer {token}"):
            raise HTTPException(401, "missing or wrong bearer token")

    guard = [Depends(authed)]

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201, dependencies=guard)
    def create_session(body: CreateSession) -> dict:
        state = backend.create(body.variant, body.seed, body.group_id)
        return public_state(state)

    @app.get("/sessions", dependencies=guard)
    def list_sessions() -> dict:
        return {"sessions": backend.list_sessions()}

    @app.get("/sessions/{session_id}", dependencies=guard)
    def get_session(session_id: str) -> dict:
        return public_state(backend.load(session_id))

    @app.post("/sessions/{session_id}/choices", dependencies=guard)
    def post_choice(session_id: str, body: ChoiceBody) -> dict:
        with backend.lock(session_id):
            state = backend.load(session_id)
            spec = state.spec
            key = body.idempotency_key
            if key and key in state.responses:
                return state.responses[key]
            if state.complete:
                raise HTTPException(410, "session already complete")
            base = spec.external_arm_base
            if not (base <= body.arm < base + spec.n_arms):
                raise HTTPException(
                    400, f"arm must be one of {list(range(base, base + spec.n_arms))}"
                )
            if (body.game, body.round) != (state.cursor_game, state.cursor_round):
                raise HTTPException(
                    409,
                    {
                        "error": "stale cursor",
                        "expected": {
                            "game": state.cursor_game,
                            "round": state.cursor_round,
                        },
                    },
                )
            arm_internal = body.arm - base
            if state.variant == Variant.STATIONARY2.value:
                reward = stationary_reward(
                    state.seed, body.game, body.round, arm_internal, spec
                )
            else:
                group = backend.groups()[state.group_id]
                reward = float(group.rewards[arm_internal, body.round - 1])
            n_after = len(state.history) + 1
            done = n_after >= spec.games_per_session * spec.horizon
            if done:
                nxt = None
            elif body.round == spec.horizon:
                nxt = {"game": body.game + 1, "round": 1}
            else:
                nxt = {"game": body.game, "round": body.round + 1}
            payload = {
                "session_id": session_id,
                "game": body.game,
                "round": body.round,
                "arm": body.arm,
                "reward": reward,
                "total_reward": state.total_reward + reward,
                "complete": done,
                "next": nxt,
            }
            event = {
                "type": "choice",
                "game": body.game,
                "round": body.round,
                "arm": body.arm,
                "reward": reward,
                "idempotency_key": key,
                "response": payload,
            }
            backend.append(session_id, event)
            return payload

    @app.get("/sessions/{session_id}/export", dependencies=guard)
    def export_session(session_id: str) -> PlainTextResponse:
        state = backend.load(session_id)
        if not state.complete:
            raise HTTPException(
                409, "session still active; finish it before exporting"
            )
        lines = dataset_lines(session_dataset(state, backend))
        return PlainTextResponse(
            "\n".join(lines) + "\n", media_type="application/x-ndjson"
        )

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
