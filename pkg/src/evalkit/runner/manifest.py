"""Test-case manifests."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import DuplicateId, SchemaViolation

SCENARIO_CHALLENGE = {
    "customer_service": "acoustics",
    "audiobook": "acoustics",
    "podcast": "acoustics",
    "chat": "acoustics",
    "debate": "acoustics",
    "interview": "acoustics",
    "news": "semantics",
    "popular_science": "semantics",
    "lesson": "semantics",
    "seminar": "semantics",
    "presentation": "semantics",
    "sportscast": "expressiveness",
    "live_streaming": "expressiveness",
    "speech": "expressiveness",
    "host": "expressiveness",
    "talk_show": "expressiveness",
    "drama": "expressiveness",
}
SCENARIOS = tuple(SCENARIO_CHALLENGE)
CHALLENGES = ("acoustics", "semantics", "expressiveness")


def canonical_label(label: str) -> str:
    return re.sub(r"[\s\-]+", "_", label.strip().lower())


class Utterance(BaseModel):
    model_config = ConfigDict(extra="forbid")

    speaker: str = Field(min_length=1)
    text: str


class TestCase(BaseModel):
    model_config = ConfigDict(extra="allow")
    __test__ = False  # not a pytest class

    id: str = Field(min_length=1)
    content: list[Utterance] = Field(min_length=1)
    num_speakers: int = Field(ge=1)
    theme: str = ""
    source: str = ""
    TLDR: str = ""
    scenario: str
    challenge: Optional[str] = None
    language: Literal["zh", "en"]

    @field_validator("scenario")
    @classmethod
    def _known_scenario(cls, v: str) -> str:
        key = canonical_label(v)
        if key not in SCENARIO_CHALLENGE:
            raise ValueError(f"unknown scenario {v!r}; valid labels: {', '.join(SCENARIOS)}")
        return key

    @model_validator(mode="after")
    def _consistent(self):
        speakers = {u.speaker for u in self.content}
        if len(speakers) != self.num_speakers:
            raise ValueError(f"num_speakers={self.num_speakers} but content has {len(speakers)} "
                             f"distinct speaker label(s): {sorted(speakers)}")
        expected = SCENARIO_CHALLENGE[self.scenario]
        if self.challenge is None:
            self.challenge = expected
        elif canonical_label(self.challenge) != expected:
            raise ValueError(f"challenge {self.challenge!r} does not match scenario "
                             f"{self.scenario!r} (expected {expected!r})")
        else:
            self.challenge = expected
        return self

    @property
    def speakers(self) -> list[str]:
        seen = []
        for u in self.content:
            if u.speaker not in seen:
                seen.append(u.speaker)
        return seen

    @property
    def text(self) -> str:
        sep = "" if self.language == "zh" else " "
        return sep.join(u.text.strip() for u in self.content)


def _loc(prefix: str, loc) -> str:
    path = prefix
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def parse_case(data: dict, where: str = "") -> TestCase:
    try:
        return TestCase.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        msg = err["msg"].removeprefix("Value error, ")
        raise SchemaViolation(msg, _loc(where, err["loc"]) or where or "$") from None


def _read_records(path: Path) -> list:
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"invalid JSON ({exc.msg})", f"line {lineno}") from None
        return records
    if isinstance(data, dict):
        data = data.get("cases", [data])
    if not isinstance(data, list):
        raise SchemaViolation("expected a JSON array of cases", "$")
    return data


def load_manifest(path: str | Path) -> list[TestCase]:
    records = _read_records(Path(path))
    cases, seen = [], set()
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise SchemaViolation("case must be an object", f"[{i}]")
        case = parse_case(record, f"[{i}]")
        if case.id in seen:
            raise DuplicateId(f"duplicate id {case.id!r}", f"[{i}].id")
        seen.add(case.id)
        cases.append(case)
    return cases
