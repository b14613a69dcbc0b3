"""Prompt templates (golden files), session retry semantics, and planning."""

from pathlib import Path

import pytest

from sdrkit.administer import (
    HttpProvider,
    ProviderReply,
    ProviderRequest,
    ResponseParseError,
    TransportError,
    block_id,
    build_rating_plan,
    make_session_plans,
    parse_single_int,
    render_gfc_prompt,
    render_likert_prompt,
    render_rating_prompt,
    render_unit_prompt,
    run_session,
)
from sdrkit.core import InstructionCondition, ResponseFormat
from sdrkit.personas import Persona

GOLDEN = Path(__file__).parent / "golden"

DESC = (
    "YOU ARE THE RESPONDENT.\n\nYou are very organized.\n\n"
    "Answer all questions AS THIS PERSON would."
)


def make_persona(pid="p001"):
    return Persona(id=pid, z=(0.0,) * 5, stanines=(5,) * 5, description=DESC)


# ---------------------------------------------------------------------------
# Golden prompt files
# ---------------------------------------------------------------------------


def test_likert_prompt_matches_golden():
    got = render_likert_prompt(DESC, InstructionCondition.HONEST, "Am the life of the party.")
    assert got == (GOLDEN / "likert_honest.txt").read_text(encoding="utf-8")


def test_gfc_prompt_matches_golden():
    got = render_gfc_prompt(
        DESC,
        InstructionCondition.FAKE_GOOD,
        "Am the life of the party.",
        "Worry about things.",
    )
    assert got == (GOLDEN / "gfc_fake_good.txt").read_text(encoding="utf-8")


def test_rating_prompt_matches_golden():
    got = render_rating_prompt(["Am the life of the party.", "Worry about things."])
    assert got == (GOLDEN / "rating_two_statements.txt").read_text(encoding="utf-8")


def test_empty_statements_rejected():
    from sdrkit.core import SdrkitError

    with pytest.raises(SdrkitError):
        render_likert_prompt(DESC, InstructionCondition.HONEST, "")
    with pytest.raises(SdrkitError):
        render_gfc_prompt(DESC, InstructionCondition.HONEST, "left", "")


# ---------------------------------------------------------------------------
# Reply parsing
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("text,value", [("4", 4), (" 7 \n", 7), ("1", 1)])
def test_parse_single_int_accepts(text, value):
    assert parse_single_int(text) == value


@pytest.mark.parametrize(
    "text,kind",
    [("", "empty"), ("  ", "empty"), ("4.", "extra-text"), ("answer: 4", "extra-text"),
     ("8", "out-of-range"), ("0", "out-of-range"), ("-3", "extra-text")],
)
def test_parse_single_int_rejects(text, kind):
    with pytest.raises(ResponseParseError) as exc:
        parse_single_int(text)
    assert exc.value.kind == kind


# ---------------------------------------------------------------------------
# Session planning
# ---------------------------------------------------------------------------


def make_plans(small_pool_inventory, conditions, formats=None, seed=11):
    pool, inv = small_pool_inventory
    formats = formats or [ResponseFormat.LIKERT, ResponseFormat.GFC]
    return make_session_plans(
        [make_persona("p001"), make_persona("p002")], inv, pool,
        formats, conditions, seed=seed, respondent_id="m",
    )


def test_presentation_order_fixed_across_conditions(small_pool_inventory):
    plans = make_plans(
        small_pool_inventory,
        [InstructionCondition.HONEST, InstructionCondition.FAKE_GOOD],
    )
    by_key = {(p.persona.id, p.format, p.condition): p for p in plans}
    for pid in ("p001", "p002"):
        for fmt in ResponseFormat:
            honest = by_key[(pid, fmt, InstructionCondition.HONEST)]
            fake = by_key[(pid, fmt, InstructionCondition.FAKE_GOOD)]
            assert honest.units == fake.units  # same order AND side assignment


def test_orders_differ_across_personas_and_formats(small_pool_inventory):
    plans = make_plans(small_pool_inventory, [InstructionCondition.HONEST])
    by_key = {(p.persona.id, p.format): [u.id for u in p.units] for p in plans}
    assert by_key[("p001", ResponseFormat.LIKERT)] != by_key[("p002", ResponseFormat.LIKERT)]
    assert set(by_key[("p001", ResponseFormat.LIKERT)]) == {
        i for k in by_key[("p001", ResponseFormat.GFC)] for i in k.split("~")
    }


def test_plans_deterministic_under_seed(small_pool_inventory):
    a = make_plans(small_pool_inventory, [InstructionCondition.HONEST], seed=5)
    b = make_plans(small_pool_inventory, [InstructionCondition.HONEST], seed=5)
    c = make_plans(small_pool_inventory, [InstructionCondition.HONEST], seed=6)
    assert a == b
    assert a != c


def test_gfc_flips_display_statement_sides(small_pool_inventory):
    pool, inv = small_pool_inventory
    plans = make_session_plans(
        [make_persona(f"p{i:03d}") for i in range(12)], inv, pool,
        [ResponseFormat.GFC], [InstructionCondition.HONEST], seed=0, respondent_id="m",
    )
    flips = [u.flipped for p in plans for u in p.units]
    assert any(flips) and not all(flips)
    for p in plans:
        for u in p.units:
            left_id, right_id = u.id.split("~")
            if u.flipped:
                assert u.left_text == pool.get(right_id).text
            else:
                assert u.left_text == pool.get(left_id).text


# ---------------------------------------------------------------------------
# Session execution and retries
# ---------------------------------------------------------------------------


class ScriptedProvider:
    model_id = "scripted"

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def complete(self, request: ProviderRequest) -> ProviderReply:
        self.calls.append(request.message)
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return ProviderReply(text=reply)


def single_unit_plan(small_pool_inventory):
    pool, inv = small_pool_inventory
    (plan,) = make_session_plans(
        [make_persona()], inv, pool, [ResponseFormat.LIKERT],
        [InstructionCondition.HONEST], seed=0, respondent_id="m",
    )
    return plan


def test_retry_ceiling_is_one_plus_three(small_pool_inventory):
    plan = single_unit_plan(small_pool_inventory)
    provider = ScriptedProvider(["garbage"] * 4 * len(plan.units))
    result = run_session(plan, provider)
    assert not result.complete
    assert result.failed_unit == plan.units[0].id
    # exactly 4 attempts on the failing unit, all with the identical prompt
    assert len(provider.calls) == 4
    assert len(set(provider.calls)) == 1
    assert result.refit_count == 3


def test_retry_recovers_after_nonconforming_replies(small_pool_inventory):
    plan = single_unit_plan(small_pool_inventory)
    n = len(plan.units)
    replies = ["not a number", "9", "4"] + ["4"] * (n - 1)
    provider = ScriptedProvider(replies)
    result = run_session(plan, provider)
    assert result.complete
    assert result.refit_count == 2
    assert result.response_set.answers[plan.units[0].id] == 4


def test_transport_retries_with_backoff_do_not_count_as_refits(small_pool_inventory):
    plan = single_unit_plan(small_pool_inventory)
    n = len(plan.units)
    replies = [TransportError("boom"), TransportError("boom"), "5"] + ["5"] * (n - 1)
    provider = ScriptedProvider(replies)
    sleeps = []
    result = run_session(plan, provider, backoff=1.0, sleep=sleeps.append)
    assert result.complete
    assert result.refit_count == 0
    assert result.transport_retries == 2
    assert sleeps == [1.0, 2.0]  # exponential backoff


def test_transport_failure_exhausts_and_raises(small_pool_inventory):
    plan = single_unit_plan(small_pool_inventory)
    provider = ScriptedProvider([TransportError("down")] * 4)
    with pytest.raises(TransportError):
        run_session(plan, provider, max_transport_retries=3, sleep=lambda s: None)


def test_session_prompts_are_rendered_units(small_pool_inventory):
    plan = single_unit_plan(small_pool_inventory)
    n = len(plan.units)
    provider = ScriptedProvider(["3"] * n)
    run_session(plan, provider)
    assert provider.calls == [render_unit_prompt(plan, u) for u in plan.units]


# ---------------------------------------------------------------------------
# Rating plan
# ---------------------------------------------------------------------------


def test_rating_plan_partitions_pool(small_pool_inventory):
    pool, _ = small_pool_inventory
    prompts = build_rating_plan(pool, ["r1"], replications=3, block_size=4, seed=0)
    by_rep = {}
    for p in prompts:
        by_rep.setdefault(p.replication, []).extend(p.item_ids)
    assert set(by_rep) == {1, 2, 3}
    for rep, ids in by_rep.items():
        assert sorted(ids) == sorted(it.id for it in pool)  # full pool, no repeats
    # permutations differ across replications
    assert by_rep[1] != by_rep[2] or by_rep[2] != by_rep[3]
    # block sizes: 4 + 4 + 2
    sizes = [len(p.item_ids) for p in prompts if p.replication == 1]
    assert sizes == [4, 4, 2]
    assert "EXACTLY 4 integers" in prompts[0].text


# ---------------------------------------------------------------------------
# HTTP provider
# ---------------------------------------------------------------------------


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        return self._payload


class FakeSession:
    def __init__(self, response):
        self.response = response
        self.posts = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posts.append({"url": url, "json": json, "headers": headers})
        return self.response


def test_http_provider_round_trip(monkeypatch):
    session = FakeSession(
        FakeResponse(payload={"choices": [{"message": {"content": " 6 "}}]})
    )
    monkeypatch.setenv("SDRKIT_API_TOKEN", "secret")
    provider = HttpProvider("https://api.example/v1/chat", "model-x", session=session)
    reply = provider.complete(ProviderRequest(message="hello", model_id="model-x"))
    assert reply.text == " 6 "
    post = session.posts[0]
    assert post["json"]["messages"] == [{"role": "user", "content": "hello"}]
    assert post["json"]["model"] == "model-x"
    assert post["headers"]["Authorization"] == "Bearer secret"


def test_http_provider_error_paths(monkeypatch):
    monkeypatch.delenv("SDRKIT_API_TOKEN", raising=False)
    provider = HttpProvider(
        "https://api.example/v1/chat", "m", session=FakeSession(FakeResponse(status_code=500, text="oops"))
    )
    with pytest.raises(TransportError):
        provider.complete(ProviderRequest(message="x", model_id="m"))
    provider = HttpProvider(
        "https://api.example/v1/chat", "m", session=FakeSession(FakeResponse(payload={"nope": 1}))
    )
    with pytest.raises(TransportError):
        provider.complete(ProviderRequest(message="x", model_id="m"))


def test_block_id_format():
    assert block_id("A01p", "C07n") == "A01p~C07n"
