"""Language-model subjects: prompt construction, reply parsing, and a
trial loop that speaks an OpenAI-style chat-completion wire format.

Prompts are assembled fresh every round from the running history; the
chat itself carries no memory. The two settings phrase things slightly
differently (labels, quoting, where the history JSON sits), and those
differences are load-bearing for reproducing transcripts, so the
templates below are kept literal rather than factored into one string.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import httpx

from .domain import EnvSpec, Step, Variant
from .runner import run_with_factory


class LlmError(RuntimeError):
    """Transport or wire-format failure talking to the model."""


class LlmProtocolError(LlmError):
    """No parseable choice after every allowed attempt."""


@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model: str
    api_key: str | None = None
    instruction: str = "terse"  # "think": free reasoning; "terse": number only
    temperature: float = 1.0
    max_tokens: int | None = None
    max_retries: int = 3
    timeout: float = 60.0
    extra: dict = field(default_factory=dict)


SYSTEM_STATIONARY = (
    "You are a real human agent playing with two slot machines, labeled 1 and 2, "
    "which provide uncertain rewards over time. You will play 20 games, each with "
    "a different pair of slot machines. Each game consists of 10 rounds. In each "
    "round, you are asked to choose one machine to play, and you will win or lose "
    "points based on your choice. Your objective is to maximize your total reward."
)

SYSTEM_RESTLESS = (
    "You are a real human agent playing with four slot machines, labeled 0, 1, 2, "
    "and 3, which provide uncertain rewards over time. You will play a single game "
    "consisting of 300 rounds. In each round, you choose one machine to play and "
    "receive points based on your choice. Your objective is to maximize your total "
    "reward throughout the experiment."
)

QUESTION_STATIONARY = "Which machine do you choose between machines 1 and 2?"
QUESTION_RESTLESS = "Which machine do you choose between machines 0, 1, 2 and 3?"

INSTRUCTIONS = {
    "think": "You can think out loud and answer the number.",
    "terse": "Do not explain, answer the number.",
}


def system_prompt(spec: EnvSpec) -> str:
    return SYSTEM_STATIONARY if spec.variant is Variant.STATIONARY2 else SYSTEM_RESTLESS


def history_json(spec: EnvSpec, steps: list[Step]) -> str:
    base = spec.external_arm_base
    records = [
        {
            "round": s.round,
            "choice": s.choice + base,
            "reward": int(s.reward) if float(s.reward).is_integer() else s.reward,
        }
        for s in steps
    ]
    return json.dumps(records, indent=2)


def user_prompt(spec: EnvSpec, round_: int, history: list[Step], *,
                game: int | None = None, instruction: str = "terse") -> str:
    if instruction not in INSTRUCTIONS:
        raise ValueError(f"unknown instruction style: {instruction!r}")
    stationary = spec.variant is Variant.STATIONARY2
    if stationary and game is None:
        raise ValueError("the stationary setting numbers its games; pass game=")
    if round_ == 1:
        body = (
            f"You are now performing game: {game}, round 1."
            if stationary
            else "You are now performing round 1."
        )
    else:
        hist = history_json(spec, history)
        if stationary:
            body = (
                f"You are now performing game: {game}, round: {round_}.\n"
                "Your history is provided below, which includes the “choice” "
                "you made and the corresponding “reward” you received in each "
                "round. Negative reward means losing points, and positive means "
                f"winning points. {hist}"
            )
        else:
            body = (
                f"You are now performing round: {round_}.\n"
                "Your history is provided below, which contains the “choice” "
                "you made and the corresponding “reward” you received in each "
                f"“round.”\n{hist}"
            )
    question = QUESTION_STATIONARY if stationary else QUESTION_RESTLESS
    return f"{body}\n\n{question}\n{INSTRUCTIONS[instruction]}"


# A standalone integer: not glued to letters or digits and not part of a
# decimal fraction; sentence-final "2." still counts.
_INT = re.compile(r"(?<![\w.])\d+(?!\w)(?!\.\d)")


def parse_choice(text: str, valid_labels: tuple[int, ...]) -> int | None:
    """Last standalone integer naming a real machine; None when absent."""
    hits = [int(m) for m in _INT.findall(text)]
    valid = [h for h in hits if h in valid_labels]
    return valid[-1] if valid else None


@dataclass
class Exchange:
    trial: int
    game: int | None
    round: int
    attempt: int
    system: str
    user: str
    reply: str | None
    parsed: int | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "game": self.game,
            "round": self.round,
            "attempt": self.attempt,
            "system": self.system,
            "user": self.user,
            "reply": self.reply,
            "parsed": self.parsed,
            "error": self.error,
        }


class LlmClient:
    """Thin chat-completions client; inject a transport to fake the wire."""

    def __init__(self, cfg: LlmConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        headers = {}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        self._http = httpx.Client(
            base_url=cfg.base_url,
            timeout=cfg.timeout,
            headers=headers,
            transport=transport,
        )

    def complete(self, system: str, user: str) -> str:
        payload: dict = {
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.cfg.temperature,
        }
        if self.cfg.max_tokens is not None:
            payload["max_tokens"] = self.cfg.max_tokens
        payload.update(self.cfg.extra)
        try:
            resp = self._http.post("/chat/completions", json=payload)
            resp.raise_for_status()
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise LlmError(f"chat request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise LlmError(f"malformed chat response: {exc}") from exc

    def close(self) -> None:
        self._http.close()


class LlmAgent:
    """Agent-protocol adapter: one chat exchange per round, with retries.

    A reply that names no machine is retried with the byte-identical prompt;
    exhausting the budget raises, which the runner records as an incomplete
    trial rather than a crash.
    """

    def __init__(
        self,
        spec: EnvSpec,
        client: LlmClient,
        cfg: LlmConfig,
        trial_index: int = 0,
        sink: list[Exchange] | None = None,
    ):
        self.spec = spec
        self.client = client
        self.cfg = cfg
        self.trial = trial_index
        self.game = (
            trial_index % spec.games_per_session + 1
            if spec.variant is Variant.STATIONARY2
            else None
        )
        self.sink = sink
        self.history: list[Step] = []
        base = spec.external_arm_base
        self.labels = tuple(range(base, base + spec.n_arms))

    def reset(self, n_arms: int, rng) -> None:  # rng unused: the wire is the dice
        self.history = []

    def act(self, t: int) -> int:
        system = system_prompt(self.spec)
        user = user_prompt(
            self.spec, t, self.history, game=self.game, instruction=self.cfg.instruction
        )
        last_error = "no attempts made"
        for attempt in range(1, self.cfg.max_retries + 2):
            reply = None
            error = None
            parsed = None
            try:
                reply = self.client.complete(system, user)
                parsed = parse_choice(reply, self.labels)
                if parsed is None:
                    error = "reply names no valid machine"
            except LlmError as exc:
                error = str(exc)
            if self.sink is not None:
                self.sink.append(
                    Exchange(self.trial, self.game, t, attempt, system, user,
                             reply, parsed, error)
                )
            if parsed is not None:
                return parsed - self.spec.external_arm_base
            last_error = error
        raise LlmProtocolError(
            f"round {t}: no usable choice after {self.cfg.max_retries + 1} attempts "
            f"({last_error})"
        )

    def observe(self, t: int, arm: int, reward: float) -> None:
        self.history.append(Step(round=t, choice=arm, reward=reward))


def run_llm(
    spec: EnvSpec,
    cfg: LlmConfig,
    *,
    n_trials: int | None = None,
    master_seed: int = 0,
    client: LlmClient | None = None,
    transport: httpx.BaseTransport | None = None,
    groups=None,
):
    """Play full sessions against a model; returns (dataset, exchanges)."""
    own_client = client is None
    client = client or LlmClient(cfg, transport)
    stationary = spec.variant is Variant.STATIONARY2
    per_subject = spec.games_per_session if stationary else 1
    if n_trials is None:
        n_trials = per_subject
    exchanges: list[Exchange] = []

    def factory(i: int) -> LlmAgent:
        return LlmAgent(spec, client, cfg, trial_index=i, sink=exchanges)

    try:
        dataset = run_with_factory(
            spec,
            factory,
            n_trials=n_trials,
            trials_per_subject=per_subject,
            master_seed=master_seed,
            agent_label=f"llm:{cfg.model}",
            groups=groups,
        )
    finally:
        if own_client:
            client.close()
    dataset.meta["llm_model"] = cfg.model
    dataset.meta["instruction"] = cfg.instruction
    dataset.meta["n_exchanges"] = len(exchanges)
    return dataset, exchanges
