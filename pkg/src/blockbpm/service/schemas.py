"""Pydantic request/response models for the JSON side of the service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    code: str
    message: str
    details: object | None = None


class ViolationOut(BaseModel):
    code: str
    subject: str = ""
    element: str = ""
    detail: str = ""
    severity: str = "error"


class StoredOut(BaseModel):
    id: str
    created: float
    updated: float


class ValidateReport(BaseModel):
    well_formed: list[ViolationOut]
    interface: list[ViolationOut]
    conformance: list[ViolationOut]
    ok: bool


class ExploreRequest(BaseModel):
    max_states: int = Field(default=10_000, ge=1)
    max_mailbox: int = Field(default=4, ge=1)
    max_depth: int = Field(default=1_000, ge=1)


class ChoiceOut(BaseModel):
    agent: str
    kind: str
    outcome: str | None = None


class AgentViewOut(BaseModel):
    agent: str
    state: str
    done: bool
    mailbox: list[list[str]]


class DeadlockOut(BaseModel):
    state: list[AgentViewOut]
    witness: list[ChoiceOut]


class ExploreReport(BaseModel):
    states_visited: int
    terminal_complete: bool
    deadlocks: list[DeadlockOut]
    end_reachability: dict[str, bool]
    terminal_statuses: list[str]


class InstanceCreate(BaseModel):
    model: str
    policy: str = "round-robin"
    seed: int = 0
    max_steps: int = Field(default=10_000, ge=1)
    multiplicities: dict[str, int] = Field(default_factory=dict)


class InstanceOut(BaseModel):
    instance: str
    status: str


class StepRequest(BaseModel):
    steps: int = Field(default=1, ge=1)


class EventOut(BaseModel):
    seq: int
    time: int
    agent: str
    kind: str
    details: dict[str, str]


class StepReport(BaseModel):
    events: list[EventOut]
    status: str
    clock: int


class InjectRequest(BaseModel):
    from_subject: str
    to_subject: str
    message: str
    payload: dict[str, str] = Field(default_factory=dict)


class LintOut(BaseModel):
    code: str
    detail: str


class AnomalyOut(BaseModel):
    deficits: list[str]
    redundancies: list[str]
    overloads: list[str]
    excesses: list[str]
    empty: bool


class AnalyzeReport(BaseModel):
    report: AnomalyOut
    lints: list[LintOut]
