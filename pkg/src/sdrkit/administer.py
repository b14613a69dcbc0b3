"""Questionnaire prompt rendering, session execution, and provider plumbing.

Prompt renderers are pure and byte-stable; the templates are pinned by golden
tests. Sessions retry non-conforming replies with the identical prompt up to
``max_retries`` additional times (transport failures are retried separately
with backoff and do not count as refits).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

import requests

from .core import (
    InstructionCondition,
    Inventory,
    ItemPool,
    ResponseFormat,
    ResponseSet,
    SdrkitError,
)
from .personas import Persona

HONEST_INSTRUCTION = (
    "You will complete a personality questionnaire. When completing this questionnaire,\n"
    "we would like you to be as honest as possible, that is, to present yourself as you really are."
)

FAKE_GOOD_INSTRUCTION = (
    "You will complete a personality questionnaire. When completing this questionnaire,\n"
    "we would like you to answer the questions in order to give a really good impression of yourself,\n"
    "that is, to present yourself in the best possible light."
)

INSTRUCTION_TEXT: dict[InstructionCondition, str] = {
    InstructionCondition.HONEST: HONEST_INSTRUCTION,
    InstructionCondition.FAKE_GOOD: FAKE_GOOD_INSTRUCTION,
}

_LIKERT_BODY = (
    "Indicate how accurately the following statement describes you\n"
    "using a 7-point scale:\n"
    "1: Very Inaccurate\n"
    "2: Moderately Inaccurate\n"
    "3: Slightly Inaccurate\n"
    "4: Neither Accurate nor Inaccurate\n"
    "5: Slightly Accurate\n"
    "6: Moderately Accurate\n"
    "7: Very Accurate\n"
    "Return ONLY one integer (1-7).\n"
    "Do not include any other text.\n"
    "++++\n"
    "Statement: {statement}\n"
    "++++"
)

_GFC_BODY = (
    "For the following pair of statements, indicate which one describes you\n"
    "more accurately and by how much\n"
    "using a 7-point bipolar scale:\n"
    "1: LEFT statement describes me much more accurately\n"
    "2: LEFT statement describes me moderately more accurately\n"
    "3: LEFT statement describes me slightly more accurately\n"
    "4: About the same\n"
    "5: RIGHT statement describes me slightly more accurately\n"
    "6: RIGHT statement describes me moderately more accurately\n"
    "7: RIGHT statement describes me much more accurately\n"
    "Return ONLY one integer (1-7).\n"
    "Do not include any other text.\n"
    "++++\n"
    "LEFT: {left}  ||  RIGHT: {right}\n"
    "++++"
)

_RATING_INSTRUCTION = (
    "The following statements are characteristics of people. Indicate on a scale from 1 to 9 "
    "how desirable you think each trait or characteristic is for an adult person: "
    "1 = Very undesirable, 3 = Undesirable, 5 = Neutral, 7 = Desirable, 9 = Very desirable. "
    "Use any number from 1 through 9 (i.e., 1, 2, 3, 4, 5, 6, 7, 8, or 9) that best indicates "
    "your opinion regarding how desirable that trait is.\n"
    "\n"
    "Please return EXACTLY {count} integers separated by single spaces, in the SAME ORDER as the statements.\n"
    "\n"
    "Do not include any other text.\n"
    "++++\n"
    "{statements}\n"
    "++++"
)


def render_likert_prompt(persona_desc: str, condition: InstructionCondition, statement: str) -> str:
    if not statement:
        raise SdrkitError("empty statement")
    return f"{persona_desc}\n\n{INSTRUCTION_TEXT[condition]}\n\n" + _LIKERT_BODY.format(
        statement=statement
    )


def render_gfc_prompt(
    persona_desc: str, condition: InstructionCondition, left_text: str, right_text: str
) -> str:
    if not left_text or not right_text:
        raise SdrkitError("empty statement in pair")
    return f"{persona_desc}\n\n{INSTRUCTION_TEXT[condition]}\n\n" + _GFC_BODY.format(
        left=left_text, right=right_text
    )


def render_rating_prompt(statements: Sequence[str]) -> str:
    lines = "\n".join(f"Statement: {s}" for s in statements)
    return _RATING_INSTRUCTION.format(count=len(statements), statements=lines)


class ResponseParseError(SdrkitError):
    """Non-conforming answer. ``kind``: 'empty', 'extra-text', 'out-of-range'."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def parse_single_int(text: str) -> int:
    """Accept iff, after trimming whitespace, the reply is one integer in 1..7."""
    stripped = text.strip()
    if not stripped:
        raise ResponseParseError("empty", "empty reply")
    if not stripped.isdigit():
        raise ResponseParseError("extra-text", f"reply is not a bare integer: {text!r}")
    value = int(stripped)
    if not (1 <= value <= 7):
        raise ResponseParseError("out-of-range", f"integer {value} outside 1..7")
    return value


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProviderRequest:
    message: str  # single user message, no chat history
    model_id: str
    options: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class ProviderReply:
    text: str
    status: str = "ok"
    latency: float = 0.0


class Provider(Protocol):
    model_id: str

    def complete(self, request: ProviderRequest) -> ProviderReply: ...


class TransportError(SdrkitError):
    pass


class HttpProvider:
    """Single-turn chat-completions client for an OpenAI-compatible endpoint.

    The auth token is read from the environment variable named by
    ``token_env``; decode options pass through unchanged.
    """

    def __init__(
        self,
        base_url: str,
        model_id: str,
        token_env: str = "SDRKIT_API_TOKEN",
        options: Mapping[str, object] | None = None,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url
        self.model_id = model_id
        self.token_env = token_env
        self.options = dict(options or {})
        self.timeout = timeout
        self._session = session or requests.Session()

    def complete(self, request: ProviderRequest) -> ProviderReply:
        token = os.environ.get(self.token_env, "")
        payload = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.message}],
            **self.options,
            **request.options,
        }
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        start = time.monotonic()
        try:
            resp = self._session.post(
                self.base_url, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, json.JSONDecodeError, ValueError) as exc:
            raise TransportError(f"malformed provider response: {exc}") from exc
        return ProviderReply(text=text, latency=time.monotonic() - start)


# ---------------------------------------------------------------------------
# Session planning and execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionUnit:
    id: str  # item id (Likert) or block id (GFC)
    statement: str | None = None  # Likert
    left_text: str | None = None  # GFC, as displayed
    right_text: str | None = None
    flipped: bool = False  # GFC: displayed left/right swapped vs. canonical


@dataclass(frozen=True)
class SessionPlan:
    respondent_id: str
    persona: Persona
    format: ResponseFormat
    condition: InstructionCondition
    units: tuple[SessionUnit, ...]  # in presentation order
    max_retries: int = 3


@dataclass(frozen=True)
class SessionResult:
    plan: SessionPlan
    response_set: ResponseSet | None
    refit_count: int
    transport_retries: int
    failed_unit: str | None = None

    @property
    def complete(self) -> bool:
        return self.response_set is not None


def block_id(left: str, right: str) -> str:
    return f"{left}~{right}"


def make_session_plans(
    personas: Sequence[Persona],
    inventory: Inventory,
    pool: ItemPool,
    formats: Sequence[ResponseFormat],
    conditions: Sequence[InstructionCondition],
    seed: int,
    respondent_id: str,
    max_retries: int = 3,
) -> list[SessionPlan]:
    """Build the fully crossed persona x format x condition session plans.

    Presentation order is randomized once per (persona, format) and reused
    across instruction conditions; GFC left/right assignment is likewise drawn
    once per persona and held fixed.
    """
    plans: list[SessionPlan] = []
    for persona in personas:
        per_format_units: dict[ResponseFormat, tuple[SessionUnit, ...]] = {}
        for fmt in formats:
            rng = _plan_rng(seed, persona.id, fmt.value)
            if fmt is ResponseFormat.LIKERT:
                ids = list(inventory.statements)
                order = rng.permutation(len(ids))
                units = tuple(
                    SessionUnit(id=ids[i], statement=pool.get(ids[i]).text) for i in order
                )
            else:
                blocks = list(inventory.blocks)
                order = rng.permutation(len(blocks))
                flips = _plan_rng(seed, persona.id, "sides").random(len(blocks)) < 0.5
                units = []
                for i in order:
                    b = blocks[i]
                    lt, rt = pool.get(b.left).text, pool.get(b.right).text
                    flipped = bool(flips[i])
                    if flipped:
                        lt, rt = rt, lt
                    units.append(
                        SessionUnit(
                            id=block_id(b.left, b.right),
                            left_text=lt,
                            right_text=rt,
                            flipped=flipped,
                        )
                    )
                units = tuple(units)
            per_format_units[fmt] = units
        for fmt in formats:
            for cond in conditions:
                plans.append(
                    SessionPlan(
                        respondent_id=respondent_id,
                        persona=persona,
                        format=fmt,
                        condition=cond,
                        units=per_format_units[fmt],
                        max_retries=max_retries,
                    )
                )
    return plans


def _plan_rng(seed: int, *key: str) -> np.random.Generator:
    import hashlib

    digest = hashlib.sha256(("\x1f".join([str(seed), *key])).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def render_unit_prompt(plan: SessionPlan, unit: SessionUnit) -> str:
    if plan.format is ResponseFormat.LIKERT:
        return render_likert_prompt(plan.persona.description, plan.condition, unit.statement)
    return render_gfc_prompt(
        plan.persona.description, plan.condition, unit.left_text, unit.right_text
    )


def run_session(
    plan: SessionPlan,
    provider: Provider,
    max_transport_retries: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> SessionResult:
    """Administer one questionnaire session.

    A unit that still fails the format check after 1 + ``max_retries``
    attempts aborts the session; the result is marked incomplete and carries
    no :class:`ResponseSet` (incomplete sessions are excluded from fitting).
    """
    answers: dict[str, int] = {}
    sides: dict[str, bool] = {}
    refits = 0
    transport_retries = 0
    for unit in plan.units:
        prompt = render_unit_prompt(plan, unit)
        request = ProviderRequest(message=prompt, model_id=provider.model_id)
        value: int | None = None
        for attempt in range(1 + plan.max_retries):
            reply = None
            for t_try in range(1 + max_transport_retries):
                try:
                    reply = provider.complete(request)
                    break
                except TransportError:
                    transport_retries += 1
                    if t_try == max_transport_retries:
                        raise
                    sleep(backoff * 2**t_try)
            try:
                value = parse_single_int(reply.text)
                break
            except ResponseParseError:
                if attempt < plan.max_retries:
                    refits += 1
        if value is None:
            return SessionResult(
                plan=plan,
                response_set=None,
                refit_count=refits,
                transport_retries=transport_retries,
                failed_unit=unit.id,
            )
        answers[unit.id] = value
        if plan.format is ResponseFormat.GFC:
            sides[unit.id] = unit.flipped
    rs = ResponseSet(
        respondent_id=plan.respondent_id,
        persona_id=plan.persona.id,
        format=plan.format,
        condition=plan.condition,
        answers=answers,
        presentation_order=tuple(u.id for u in plan.units),
        side_assignment=sides,
    )
    return SessionResult(
        plan=plan, response_set=rs, refit_count=refits, transport_retries=transport_retries
    )


# ---------------------------------------------------------------------------
# Desirability rating plan (blocks of statements per replication)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatingPrompt:
    rater: str
    replication: int
    block_index: int
    item_ids: tuple[str, ...]
    text: str


def build_rating_plan(
    pool: ItemPool,
    raters: Sequence[str],
    replications: int = 30,
    block_size: int = 25,
    seed: int = 0,
) -> list[RatingPrompt]:
    """Per (rater, replication): a fresh permutation of the pool partitioned
    into consecutive blocks of ``block_size`` (final short block allowed)."""
    items = list(pool.items)
    prompts: list[RatingPrompt] = []
    for rater in raters:
        for rep in range(1, replications + 1):
            rng = _plan_rng(seed, "rating", rater, str(rep))
            perm = rng.permutation(len(items))
            for b, start in enumerate(range(0, len(items), block_size), start=1):
                chunk = [items[i] for i in perm[start : start + block_size]]
                prompts.append(
                    RatingPrompt(
                        rater=rater,
                        replication=rep,
                        block_index=b,
                        item_ids=tuple(it.id for it in chunk),
                        text=render_rating_prompt([it.text for it in chunk]),
                    )
                )
    return prompts


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    run_id: str
    model_id: str
    seeds: dict[str, int]
    created_at: str
    sessions: list[dict] = field(default_factory=list)
    artifacts: dict[str, str] = field(default_factory=dict)  # path -> sha256

    def record_session(self, result: SessionResult) -> None:
        self.sessions.append(
            {
                "persona": result.plan.persona.id,
                "format": result.plan.format.value,
                "condition": result.plan.condition.value,
                "outcome": "ok" if result.complete else "failed",
                "refits": result.refit_count,
                "transport_retries": result.transport_retries,
                "failed_unit": result.failed_unit,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)
