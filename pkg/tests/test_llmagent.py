"""Chat-adapter contract: golden prompt bytes, reply parsing, retry and
abort semantics against a scripted in-process transport."""

import json

import httpx
import pytest

from banditlab.domain import Step, restless4_spec, stationary2_spec
from banditlab.llmagent import (
    LlmAgent,
    LlmClient,
    LlmConfig,
    LlmError,
    LlmProtocolError,
    history_json,
    parse_choice,
    run_llm,
    system_prompt,
    user_prompt,
)

STAT_SYSTEM = (
    "You are a real human agent playing with two slot machines, labeled 1 and 2, "
    "which provide uncertain rewards over time. You will play 20 games, each with "
    "a different pair of slot machines. Each game consists of 10 rounds. In each "
    "round, you are asked to choose one machine to play, and you will win or lose "
    "points based on your choice. Your objective is to maximize your total reward."
)

REST_SYSTEM = (
    "You are a real human agent playing with four slot machines, labeled 0, 1, 2, "
    "and 3, which provide uncertain rewards over time. You will play a single game "
    "consisting of 300 rounds. In each round, you choose one machine to play and "
    "receive points based on your choice. Your objective is to maximize your total "
    "reward throughout the experiment."
)

# internal arms 1 then 0 surface as machines 2 then 1 in the transcript
TWO_STEPS = [Step(1, 1, 45.0), Step(2, 0, 21.0)]

TWO_STEP_JSON = """[
  {
    "round": 1,
    "choice": 2,
    "reward": 45
  },
  {
    "round": 2,
    "choice": 1,
    "reward": 21
  }
]"""


def reply_body(text):
    return {"choices": [{"message": {"content": text}}]}


def scripted_transport(replies, record=None):
    """Serves each entry once, then repeats the last; int entries are HTTP
    status codes, strings are assistant replies."""
    state = {"i": 0}

    def handler(request):
        if record is not None:
            record.append(request)
        idx = min(state["i"], len(replies) - 1)
        state["i"] += 1
        entry = replies[idx]
        if isinstance(entry, int):
            return httpx.Response(entry, json={"error": "scripted failure"})
        return httpx.Response(200, json=reply_body(entry))

    return httpx.MockTransport(handler)


def make_cfg(**kw):
    kw.setdefault("base_url", "http://llm.test/v1")
    kw.setdefault("model", "stub-model")
    return LlmConfig(**kw)


class TestGoldenPrompts:
    def test_stationary_system(self, stat_spec):
        assert system_prompt(stat_spec) == STAT_SYSTEM

    def test_restless_system(self, rest_spec):
        assert system_prompt(rest_spec) == REST_SYSTEM

    def test_stationary_round_one(self, stat_spec):
        got = user_prompt(stat_spec, 1, [], game=3, instruction="terse")
        assert got == (
            "You are now performing game: 3, round 1.\n\n"
            "Which machine do you choose between machines 1 and 2?\n"
            "Do not explain, answer the number."
        )

    def test_stationary_with_history(self, stat_spec):
        got = user_prompt(stat_spec, 3, TWO_STEPS, game=1, instruction="think")
        assert got == (
            "You are now performing game: 1, round: 3.\n"
            "Your history is provided below, which includes the “choice” "
            "you made and the corresponding “reward” you received in each "
            "round. Negative reward means losing points, and positive means "
            "winning points. " + TWO_STEP_JSON + "\n\n"
            "Which machine do you choose between machines 1 and 2?\n"
            "You can think out loud and answer the number."
        )

    def test_restless_round_one(self, rest_spec):
        got = user_prompt(rest_spec, 1, [], instruction="terse")
        assert got == (
            "You are now performing round 1.\n\n"
            "Which machine do you choose between machines 0, 1, 2 and 3?\n"
            "Do not explain, answer the number."
        )

    def test_restless_with_history(self, rest_spec):
        steps = [Step(1, 3, 62.0)]
        got = user_prompt(rest_spec, 2, steps, instruction="terse")
        hist = history_json(rest_spec, steps)
        assert got == (
            "You are now performing round: 2.\n"
            "Your history is provided below, which contains the “choice” "
            "you made and the corresponding “reward” you received in each "
            "“round.”\n" + hist + "\n\n"
            "Which machine do you choose between machines 0, 1, 2 and 3?\n"
            "Do not explain, answer the number."
        )
        # restless machines keep their zero-based labels on the wire
        assert json.loads(hist) == [{"round": 1, "choice": 3, "reward": 62}]

    def test_history_renders_integral_rewards_as_ints(self, stat_spec):
        assert history_json(stat_spec, TWO_STEPS) == TWO_STEP_JSON
        frac = history_json(stat_spec, [Step(1, 0, 20.5)])
        assert json.loads(frac) == [{"round": 1, "choice": 1, "reward": 20.5}]
        assert '"reward": 20.5' in frac

    def test_stationary_requires_game_number(self, stat_spec):
        with pytest.raises(ValueError, match="numbers its games"):
            user_prompt(stat_spec, 1, [], instruction="terse")

    def test_unknown_instruction_style(self, stat_spec):
        with pytest.raises(ValueError, match="unknown instruction style"):
            user_prompt(stat_spec, 1, [], game=1, instruction="verbose")


class TestParseChoice:
    @pytest.mark.parametrize(
        "text,expect",
        [
            ("2", 2),
            ("I choose machine 1", 1),
            ("Therefore, I will choose: Arm 1", 1),
            ("I considered 1 at first, but I will go with 2", 2),
            ("I pick 2.", 2),
            ("machine 5 looks good", None),
            ("no numbers here", None),
            ("", None),
            ("the expected value is 1.5 so neither", None),
            ("option2 has promise", None),
        ],
    )
    def test_two_armed_replies(self, text, expect):
        assert parse_choice(text, (1, 2)) == expect

    def test_four_armed_zero_label(self):
        assert parse_choice("machine 0", (0, 1, 2, 3)) == 0
        assert parse_choice("after 300 rounds I pick 3", (0, 1, 2, 3)) == 3

    def test_last_valid_wins_over_later_invalid(self):
        assert parse_choice("I pick 2, scoring 45 points", (1, 2)) == 2


class TestClientWire:
    def test_payload_and_auth(self, stat_spec):
        record = []
        cfg = make_cfg(api_key="sk-test", temperature=0.3, max_tokens=64,
                       extra={"top_p": 0.9})
        client = LlmClient(cfg, scripted_transport(["1"], record))
        try:
            assert client.complete("sys", "usr") == "1"
        finally:
            client.close()
        req = record[0]
        assert req.url == "http://llm.test/v1/chat/completions"
        assert req.headers["authorization"] == "Bearer sk-test"
        body = json.loads(req.content)
        assert body == {
            "model": "stub-model",
            "messages": [
                {"role": "system", "content": "sys"},
                {"role": "user", "content": "usr"},
            ],
            "temperature": 0.3,
            "max_tokens": 64,
            "top_p": 0.9,
        }

    def test_http_error_raises(self):
        client = LlmClient(make_cfg(), scripted_transport([500]))
        try:
            with pytest.raises(LlmError, match="chat request failed"):
                client.complete("sys", "usr")
        finally:
            client.close()

    def test_malformed_body_raises(self):
        transport = httpx.MockTransport(
            lambda request: httpx.Response(200, json={"unexpected": True})
        )
        client = LlmClient(make_cfg(), transport)
        try:
            with pytest.raises(LlmError, match="malformed chat response"):
                client.complete("sys", "usr")
        finally:
            client.close()


class TestRetrySemantics:
    def test_garbage_then_answer(self, stat_spec):
        record = []
        cfg = make_cfg()
        client = LlmClient(cfg, scripted_transport(["hmm", "no idea", "2"], record))
        sink = []
        agent = LlmAgent(stat_spec, client, cfg, trial_index=0, sink=sink)
        try:
            agent.reset(2, None)
            arm = agent.act(1)
        finally:
            client.close()
        assert arm == 1  # machine label 2
        assert [e.attempt for e in sink] == [1, 2, 3]
        assert [e.parsed for e in sink] == [None, None, 2]
        assert sink[0].error == "reply names no valid machine"
        assert sink[2].error is None
        # retries re-send the byte-identical prompt
        bodies = [json.loads(r.content) for r in record]
        assert len({json.dumps(b, sort_keys=True) for b in bodies}) == 1

    def test_transport_failures_retry_then_recover(self, stat_spec):
        cfg = make_cfg()
        client = LlmClient(cfg, scripted_transport([500, "1"]))
        sink = []
        agent = LlmAgent(stat_spec, client, cfg, sink=sink)
        try:
            agent.reset(2, None)
            assert agent.act(1) == 0
        finally:
            client.close()
        assert sink[0].error.startswith("chat request failed")
        assert sink[0].reply is None
        assert sink[1].parsed == 1

    def test_exhaustion_raises_protocol_error(self, stat_spec):
        cfg = make_cfg(max_retries=2)
        client = LlmClient(cfg, scripted_transport(["garbage"]))
        agent = LlmAgent(stat_spec, client, cfg, sink=None)
        try:
            agent.reset(2, None)
            with pytest.raises(LlmProtocolError, match="no usable choice after 3 attempts"):
                agent.act(1)
        finally:
            client.close()


class TestRunLoop:
    def test_full_stationary_session(self):
        spec = stationary2_spec(horizon=4, games_per_session=3)
        record = []
        cfg = make_cfg()
        ds, exchanges = run_llm(
            spec, cfg, transport=scripted_transport(["1", "2"], record), master_seed=5
        )
        # one subject playing every game of the session
        assert ds.subject_ids() == ["s0000"]
        assert len(ds.trajectories) == 3
        assert ds.n_choices == 12
        assert ds.agent_label == "llm:stub-model"
        assert ds.meta["llm_model"] == "stub-model"
        assert ds.meta["instruction"] == "terse"
        assert ds.meta["n_exchanges"] == 12
        assert len(exchanges) == 12
        # game numbering follows the trial index
        assert [e.game for e in exchanges[::4]] == [1, 2, 3]
        # after the scripted "1" is spent the transport repeats "2"
        choices = [s.choice for t in ds.trajectories for s in t.steps]
        assert choices[0] == 0 and set(choices[1:]) == {1}

    def test_history_grows_inside_a_trial(self, rest_spec):
        seen_users = []

        def handler(request):
            seen_users.append(json.loads(request.content)["messages"][1]["content"])
            return httpx.Response(200, json=reply_body("0"))

        spec = restless4_spec(horizon=3)
        ds, _ = run_llm(spec, make_cfg(), n_trials=1,
                        transport=httpx.MockTransport(handler))
        assert ds.n_choices == 3
        assert seen_users[0] == user_prompt(spec, 1, [], instruction="terse")
        assert "round: 2" in seen_users[1] and '"round": 1' in seen_users[1]
        assert '"round": 2' in seen_users[2]
        # the history fed into round 3 is the trajectory so far, verbatim
        hist = history_json(spec, list(ds.trajectories[0].steps[:2]))
        assert hist in seen_users[2]

    def test_exhausted_trials_are_marked_incomplete(self):
        spec = stationary2_spec(horizon=3, games_per_session=2)
        cfg = make_cfg(max_retries=1)
        ds, exchanges = run_llm(spec, cfg, transport=scripted_transport(["static"]))
        assert ds.trajectories == []
        assert ds.meta["incomplete_trials"] == [0, 1]
        assert ds.meta["completion_rate"] == 0.0
        # two attempts per aborted trial, nothing silently substituted
        assert len(exchanges) == 4
        assert all(e.parsed is None for e in exchanges)
