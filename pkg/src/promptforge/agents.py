"""The four agent roles: prompt assembly from bundled knowledge, the
interview loop, requirements-specification drafting, and critique parsing.
"""

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Dict, List, Optional, Tuple, Union

from .cot import ChainOfThought, CritiqueReport, PromptKind
from .gateway import (
    ChatMessage,
    ChatRequest,
    ParseFailure,
    Role,
    SchemaViolation,
    extract_structured,
    register_schema,
)


class MalformedReplyError(Exception):
    """LLM reply failed schema or invariant checks; eligible for regeneration."""

    def __init__(self, failure: ParseFailure):
        super().__init__(str(failure))
        self.failure = failure


class AgentRole(str, Enum):
    INTERVIEWER = "Interviewer"
    INTERVIEWEE = "Interviewee"
    COTER = "CoTer"
    CRITIC = "Critic"


@dataclass(frozen=True)
class ScenarioContext:
    team_intro: str
    scenario_description: str
    prompt_kind: PromptKind
    initial_prompt: str

    def __post_init__(self):
        for name in ("team_intro", "scenario_description", "initial_prompt"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")


# --- bundled knowledge resources ---------------------------------------------

def load_resource(name: str) -> str:
    return resources.files("promptforge.knowledge").joinpath(name).read_text(
        encoding="utf-8"
    )


def load_manifest() -> List[Dict[str, Any]]:
    raw = json.loads(load_resource("manifest.json"))
    return raw["resources"]


def verify_manifest() -> List[str]:
    """Return the names of resources whose content hash mismatches."""
    bad = []
    for entry in load_manifest():
        content = load_resource(entry["file"]).encode("utf-8")
        if hashlib.sha256(content).hexdigest() != entry["sha256"]:
            bad.append(entry["file"])
    return bad


_ROLE_INSTRUCTIONS = {
    AgentRole.INTERVIEWER: (
        "You are the Interviewer. You elicit system requirements through "
        "structured questioning, one question at a time, following the "
        "interview protocol below. After the interview you will turn the "
        "record into a requirements-specification draft."
    ),
    AgentRole.INTERVIEWEE: (
        "You are the Interviewee, a simulator of the user's requirements. "
        "Answer the Interviewer's questions from the user's perspective, in "
        "the partially structured form defined by the requirement templates "
        "below. Use objective and precise language; avoid comparatives, "
        "adjectives and vague references."
    ),
    AgentRole.COTER: (
        "You are the CoTer. You transform the requirements-specification "
        "draft into a structured chain of thought: a dependency-ordered "
        "programming task list for user prompts, or a five-component system "
        "prompt for agent prompts. Follow the output schemas below exactly."
    ),
    AgentRole.CRITIC: (
        "You are the Critic. You review the chain of thought against the "
        "requirements-specification draft, assess every aspect listed below, "
        "summarize strengths and weaknesses, score each part from 1 to 5, "
        "and give actionable revision feedback."
    ),
}

_ROLE_KNOWLEDGE = {
    AgentRole.INTERVIEWER: ("interview_protocol.txt", "requirement_templates.txt"),
    AgentRole.INTERVIEWEE: ("interview_protocol.txt", "requirement_templates.txt"),
    AgentRole.COTER: ("prompt_engineering.txt", "output_schemas.txt"),
    AgentRole.CRITIC: ("review_aspects.txt", "prompt_engineering.txt"),
}


def build_agent_prompt(role: AgentRole, ctx: ScenarioContext) -> str:
    """Pure composition: shared context, role instructions, bundled knowledge."""
    parts = [
        ctx.team_intro,
        ctx.scenario_description,
        _ROLE_INSTRUCTIONS[role],
    ]
    for name in _ROLE_KNOWLEDGE[role]:
        parts.append(load_resource(name))
    return "\n\n".join(parts)


# --- interview data types ----------------------------------------------------

class InterviewStep(str, Enum):
    COMPONENTS = "components"
    CORE_FUNCTIONS = "core_functions"
    ENHANCEMENTS_AND_SCOPE = "enhancements_and_scope"
    FRONT_END = "front_end"
    USER_GUIDANCE = "user_guidance"


STEP_ORDER = (
    InterviewStep.COMPONENTS,
    InterviewStep.CORE_FUNCTIONS,
    InterviewStep.ENHANCEMENTS_AND_SCOPE,
    InterviewStep.FRONT_END,
    InterviewStep.USER_GUIDANCE,
)

_STEP_INDEX = {s: i for i, s in enumerate(STEP_ORDER)}

_STEP_TITLES = {
    InterviewStep.COMPONENTS: "Components",
    InterviewStep.CORE_FUNCTIONS: "Core functions",
    InterviewStep.ENHANCEMENTS_AND_SCOPE: "Enhancements and scope",
    InterviewStep.FRONT_END: "Front end",
    InterviewStep.USER_GUIDANCE: "User guidance",
}


@dataclass(frozen=True)
class InterviewQuestion:
    step: InterviewStep
    text: str
    purpose: str

    def __post_init__(self):
        if not self.text or not self.purpose:
            raise ValueError("question text and purpose must be non-empty")

    def to_dict(self) -> Dict[str, Any]:
        return {"step": self.step.value, "text": self.text, "purpose": self.purpose}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "InterviewQuestion":
        return cls(InterviewStep(d["step"]), d["text"], d["purpose"])


class RequirementTemplate(str, Enum):
    OVERALL_SYSTEM = "overall_system"
    COMPONENT_CONSTANT = "component_constant"
    COMPONENT_CONDITIONAL = "component_conditional"


@dataclass(frozen=True)
class RequirementStatement:
    template: RequirementTemplate
    subject: str
    statement: str
    condition: Optional[str] = None

    def __post_init__(self):
        if not self.statement:
            raise ValueError("statement must be non-empty")
        has_condition = bool(self.condition)
        if (self.template is RequirementTemplate.COMPONENT_CONDITIONAL) != has_condition:
            raise ValueError("condition present iff template is conditional")

    def to_dict(self) -> Dict[str, Any]:
        d = {
            "template": self.template.value,
            "subject": self.subject,
            "statement": self.statement,
        }
        if self.condition is not None:
            d["condition"] = self.condition
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RequirementStatement":
        return cls(
            RequirementTemplate(d["template"]),
            d.get("subject", ""),
            d["statement"],
            d.get("condition"),
        )

    def render(self) -> str:
        if self.template is RequirementTemplate.OVERALL_SYSTEM:
            return f"The system shall {self.statement}"
        if self.template is RequirementTemplate.COMPONENT_CONSTANT:
            return f"The {self.subject} shall {self.statement}"
        return f"When {self.condition}, the {self.subject} shall {self.statement}"


@dataclass(frozen=True)
class InterviewTurn:
    question: InterviewQuestion
    answers: Tuple[RequirementStatement, ...]

    def __post_init__(self):
        object.__setattr__(self, "answers", tuple(self.answers))
        if not self.answers:
            raise ValueError("every turn needs at least one answer")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "question": self.question.to_dict(),
            "answers": [a.to_dict() for a in self.answers],
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "InterviewTurn":
        return cls(
            InterviewQuestion.from_dict(d["question"]),
            tuple(RequirementStatement.from_dict(a) for a in d["answers"]),
        )


@dataclass(frozen=True)
class InterviewRecord:
    turns: Tuple[InterviewTurn, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        steps = [_STEP_INDEX[t.question.step] for t in self.turns]
        if any(a > b for a, b in zip(steps, steps[1:])):
            raise ValueError("interview steps must be non-decreasing")

    def with_turn(self, turn: InterviewTurn) -> "InterviewRecord":
        return InterviewRecord(self.turns + (turn,))

    def turn_ids(self) -> List[int]:
        return list(range(1, len(self.turns) + 1))

    def render_text(self) -> str:
        lines = []
        for i, turn in enumerate(self.turns, start=1):
            lines.append(f"Turn {i} [{_STEP_TITLES[turn.question.step]}]")
            lines.append(f"Q: {turn.question.text}")
            for ans in turn.answers:
                lines.append(f"A: {ans.render()}")
        return "\n".join(lines) if lines else "(no interview conducted)"

    def to_dict(self) -> Dict[str, Any]:
        return {"turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "InterviewRecord":
        return cls(tuple(InterviewTurn.from_dict(t) for t in d["turns"]))


@dataclass(frozen=True)
class SrsSection:
    heading: str
    body: str
    source_turn_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "source_turn_ids", tuple(self.source_turn_ids))
        if not self.heading:
            raise ValueError("section heading must be non-empty")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "heading": self.heading,
            "body": self.body,
            "source_turn_ids": list(self.source_turn_ids),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SrsSection":
        return cls(d["heading"], d["body"], tuple(d.get("source_turn_ids", ())))


@dataclass(frozen=True)
class SrsDraft:
    sections: Tuple[SrsSection, ...]

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        if not self.sections:
            raise ValueError("draft needs at least one section")
        headings = [s.heading for s in self.sections]
        if len(set(headings)) != len(headings):
            raise ValueError("section headings must be unique")

    def source_turn_ids(self) -> set:
        ids = set()
        for s in self.sections:
            ids.update(s.source_turn_ids)
        return ids

    def render_text(self) -> str:
        return "\n\n".join(f"# {s.heading}\n{s.body}" for s in self.sections)

    def to_dict(self) -> Dict[str, Any]:
        return {"sections": [s.to_dict() for s in self.sections]}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SrsDraft":
        return cls(tuple(SrsSection.from_dict(s) for s in d["sections"]))


# --- interviewer loop --------------------------------------------------------

@dataclass(frozen=True)
class StepComplete:
    step: InterviewStep


@dataclass(frozen=True)
class InterviewComplete:
    pass


@dataclass(frozen=True)
class _InterviewerReply:
    question: Optional[str] = None
    purpose: Optional[str] = None
    step_complete: bool = False


def _validate_interviewer_reply(obj: Any) -> _InterviewerReply:
    if not isinstance(obj, dict):
        raise SchemaViolation("reply-not-object")
    if obj.get("step_complete") is True:
        return _InterviewerReply(step_complete=True)
    if not (isinstance(obj.get("question"), str) and obj["question"]):
        raise SchemaViolation("missing-question")
    if not (isinstance(obj.get("purpose"), str) and obj["purpose"]):
        raise SchemaViolation("missing-purpose")
    return _InterviewerReply(question=obj["question"], purpose=obj["purpose"])


def _validate_requirement_batch(obj: Any) -> List[RequirementStatement]:
    if not isinstance(obj, dict):
        raise SchemaViolation("batch-not-object")
    reqs = obj.get("requirements")
    if not isinstance(reqs, list) or not reqs:
        raise SchemaViolation("requirements-empty")
    out = []
    for item in reqs:
        if not isinstance(item, dict):
            raise SchemaViolation("statement-not-object")
        template = item.get("template")
        if template not in {t.value for t in RequirementTemplate}:
            raise SchemaViolation("unknown-template")
        if not item.get("statement"):
            raise SchemaViolation("empty-statement")
        has_condition = bool(item.get("condition"))
        if (template == RequirementTemplate.COMPONENT_CONDITIONAL.value) != has_condition:
            raise SchemaViolation("condition-template-mismatch")
        out.append(RequirementStatement.from_dict(item))
    return out


def _validate_srs_sections(obj: Any) -> SrsDraft:
    if not isinstance(obj, dict):
        raise SchemaViolation("draft-not-object")
    sections = obj.get("sections")
    if not isinstance(sections, list) or not sections:
        raise SchemaViolation("sections-empty")
    headings = set()
    parsed = []
    for item in sections:
        if not isinstance(item, dict) or not item.get("heading"):
            raise SchemaViolation("section-missing-heading")
        if item["heading"] in headings:
            raise SchemaViolation("duplicate-heading")
        headings.add(item["heading"])
        ids = item.get("source_turn_ids", [])
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise SchemaViolation("bad-source-turn-ids")
        parsed.append(SrsSection.from_dict(item))
    return SrsDraft(tuple(parsed))


register_schema("InterviewerReply", _validate_interviewer_reply)
register_schema("RequirementBatch", _validate_requirement_batch)
register_schema("SrsSections", _validate_srs_sections)


def _request(system_text: str, user_text: str, model: str = "default") -> ChatRequest:
    return ChatRequest(
        messages=(
            ChatMessage(Role.SYSTEM, system_text),
            ChatMessage(Role.USER, user_text),
        ),
        model=model,
    )


def _extract_or_raise(provider, request: ChatRequest, schema: str):
    response = provider.complete(request)
    payload = extract_structured(response, schema)
    if isinstance(payload, ParseFailure):
        raise MalformedReplyError(payload)
    return payload


def next_interview_question(
    provider,
    record: InterviewRecord,
    ctx: ScenarioContext,
    budget: int,
    step: Optional[InterviewStep] = None,
    guidance_enabled: bool = False,
    feedback: Optional[str] = None,
) -> Union[InterviewQuestion, StepComplete, InterviewComplete]:
    """Ask the Interviewer for the next question in the current step.

    `step` overrides the step derived from the record; the elicitation driver
    passes the successor step after receiving a StepComplete.
    """
    enabled = [s for s in STEP_ORDER if guidance_enabled or s is not InterviewStep.USER_GUIDANCE]
    if step is None:
        step = record.turns[-1].question.step if record.turns else enabled[0]
    asked = sum(1 for t in record.turns if t.question.step is step)
    if asked >= budget:
        return _advance(step, enabled)
    system_text = build_agent_prompt(AgentRole.INTERVIEWER, ctx)
    user_lines = [
        f"Initial prompt:\n{ctx.initial_prompt}",
        f"Interview record so far:\n{record.render_text()}",
        f"CURRENT STEP: {_STEP_TITLES[step]}",
        "Ask the single next question for the current step. Reply with JSON "
        '{"question": "...", "purpose": "..."} or {"step_complete": true} if '
        "the step is covered.",
    ]
    if feedback:
        user_lines.append(f"Reviewer feedback on the previous attempt:\n{feedback}")
    reply = _extract_or_raise(provider, _request(system_text, "\n\n".join(user_lines)), "InterviewerReply")
    if reply.step_complete:
        return _advance(step, enabled)
    return InterviewQuestion(step=step, text=reply.question, purpose=reply.purpose)


def _advance(step: InterviewStep, enabled: List[InterviewStep]):
    idx = enabled.index(step)
    if idx + 1 >= len(enabled):
        return InterviewComplete()
    return StepComplete(step)


def successor_step(
    step: InterviewStep, guidance_enabled: bool = False
) -> Optional[InterviewStep]:
    enabled = [s for s in STEP_ORDER if guidance_enabled or s is not InterviewStep.USER_GUIDANCE]
    idx = enabled.index(step)
    return enabled[idx + 1] if idx + 1 < len(enabled) else None


def answer_question(
    provider,
    question: InterviewQuestion,
    ctx: ScenarioContext,
) -> List[RequirementStatement]:
    system_text = build_agent_prompt(AgentRole.INTERVIEWEE, ctx)
    user_text = (
        f"Initial prompt:\n{ctx.initial_prompt}\n\n"
        f"Interviewer question ({_STEP_TITLES[question.step]}): {question.text}\n\n"
        "Answer with one or more requirement statements in the JSON batch form."
    )
    return _extract_or_raise(provider, _request(system_text, user_text), "RequirementBatch")


def draft_srs(
    provider,
    record: InterviewRecord,
    ctx: ScenarioContext,
    feedback: Optional[str] = None,
) -> SrsDraft:
    """Analysis stage: full traceability back to interview turns is enforced."""
    system_text = build_agent_prompt(AgentRole.INTERVIEWER, ctx)
    user_lines = [
        load_resource("srs_guidance.txt"),
        f"Initial prompt:\n{ctx.initial_prompt}",
        f"Interview record:\n{record.render_text()}",
        "Draft the requirements specification now.",
    ]
    if feedback:
        user_lines.append(f"Reviewer feedback on the previous attempt:\n{feedback}")
    draft = _extract_or_raise(provider, _request(system_text, "\n\n".join(user_lines)), "SrsSections")
    expected = set(record.turn_ids())
    got = draft.source_turn_ids()
    if record.turns and got != expected:
        raise MalformedReplyError(
            ParseFailure(
                "traceability",
                f"sections trace {sorted(got)} but record has turns {sorted(expected)}",
            )
        )
    return draft


def critique(
    provider,
    cot: ChainOfThought,
    srs: SrsDraft,
    ctx: ScenarioContext,
) -> CritiqueReport:
    system_text = build_agent_prompt(AgentRole.CRITIC, ctx)
    parts = cot.part_ids()
    user_text = (
        f"Requirements specification draft:\n{srs.render_text()}\n\n"
        f"Chain of thought under review:\n{json.dumps(cot.to_dict(), indent=2)}\n\n"
        f"Score each of these parts (keys of part_scores): {parts}\n"
        "Reply with JSON: {\"aspect_notes\": {...}, \"summary_strengths\": "
        "\"...\", \"summary_weaknesses\": \"...\", \"part_scores\": {...}, "
        "\"feedback\": \"...\"}"
    )
    report = _extract_or_raise(provider, _request(system_text, user_text), "CritiqueReport")
    if set(report.part_scores) != set(parts):
        raise MalformedReplyError(
            ParseFailure(
                "part-score-coverage",
                f"scored {sorted(report.part_scores)} expected {sorted(parts)}",
            )
        )
    return report


def generate_cot(
    provider,
    srs: SrsDraft,
    ctx: ScenarioContext,
    prior_feedback: Optional[CritiqueReport] = None,
    gate_feedback: Optional[str] = None,
) -> ChainOfThought:
    """Specification stage: SRS draft to chain of thought, one LLM call.

    Raw task order from the model is advisory; it is repaired deterministically
    and only cycles or structural defects are rejected.
    """
    from .cot import OrderingError, order_tasks

    system_text = build_agent_prompt(AgentRole.COTER, ctx)
    mode = (
        "Produce the JSON task list (task-list mode)."
        if ctx.prompt_kind is PromptKind.USER
        else "Produce the five-component system prompt (system-prompt mode)."
    )
    user_lines = [
        f"Initial prompt:\n{ctx.initial_prompt}",
        f"Requirements specification draft:\n{srs.render_text()}",
        mode,
    ]
    if prior_feedback is not None:
        user_lines.append(f"Critic feedback to incorporate:\n{prior_feedback.feedback}")
    if gate_feedback:
        user_lines.append(f"Reviewer feedback on the previous attempt:\n{gate_feedback}")
    request = _request(system_text, "\n\n".join(user_lines))
    if ctx.prompt_kind is PromptKind.USER:
        raw = _extract_or_raise(provider, request, "TaskList")
        try:
            ordered = order_tasks(list(raw.tasks))
        except OrderingError as exc:
            raise MalformedReplyError(ParseFailure("ordering", str(exc)))
        return ChainOfThought(prompt_kind=PromptKind.USER, task_list=ordered)
    draft = _extract_or_raise(provider, request, "SystemPromptDraft")
    return ChainOfThought(prompt_kind=PromptKind.SYSTEM, system_prompt=draft)
