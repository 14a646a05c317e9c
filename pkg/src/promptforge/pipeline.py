"""Four-stage refinement state machine with human gates and a session store.

Stage order: elicitation -> analysis -> specification -> validation, minus any
skipped stages. Every stage output waits for an Approve/Reject gate decision;
a rejection re-runs the stage with the reviewer's feedback attached.
"""

import json
import os
import time
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Tuple, Union

from . import agents
from .agents import (
    InterviewComplete,
    InterviewRecord,
    InterviewTurn,
    MalformedReplyError,
    ScenarioContext,
    SrsDraft,
    SrsSection,
    StepComplete,
    successor_step,
)
from .cot import ChainOfThought, CritiqueReport, PromptKind, assemble_system_prompt, join_template, split_template
from .gateway import MockProvider, ProviderConfig, ScriptedTranscript

MAX_ATTEMPTS = 3

DEFAULT_TEAM_INTRO = (
    "You are part of a requirements-engineering team of four agents "
    "(Interviewer, Interviewee, CoTer, Critic) that together refine an "
    "initial prompt into a comprehensive one."
)


class StageId(str, Enum):
    ELICITATION = "elicitation"
    ANALYSIS = "analysis"
    SPECIFICATION = "specification"
    VALIDATION = "validation"


STAGE_ORDER = (
    StageId.ELICITATION,
    StageId.ANALYSIS,
    StageId.SPECIFICATION,
    StageId.VALIDATION,
)


class Verdict(str, Enum):
    APPROVE = "approve"
    REJECT = "reject"


@dataclass(frozen=True)
class GateDecision:
    verdict: Verdict
    feedback: Optional[str] = None

    def __post_init__(self):
        if self.verdict is Verdict.REJECT and not (self.feedback and self.feedback.strip()):
            raise ValueError("rejection requires non-empty feedback")

    def to_dict(self) -> Dict[str, Any]:
        return {"verdict": self.verdict.value, "feedback": self.feedback}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "GateDecision":
        return cls(Verdict(d["verdict"]), d.get("feedback"))


class GatePolicy(str, Enum):
    INTERACTIVE = "interactive"
    AUTO_APPROVE = "auto"
    SERVE = "serve"


class SessionStatus(str, Enum):
    RUNNING = "running"
    AWAITING_GATE = "awaiting_gate"
    FAILED = "failed"
    COMPLETED = "completed"


@dataclass(frozen=True)
class SessionConfig:
    prompt_kind: PromptKind
    initial_prompt: str
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    gate_policy: GatePolicy = GatePolicy.AUTO_APPROVE
    skip_stages: FrozenSet[StageId] = frozenset()
    question_budget: int = 3
    refinement_rounds: int = 1
    template_marker: Optional[str] = None
    team_intro: str = DEFAULT_TEAM_INTRO
    scenario_description: str = ""
    mock_transcript_path: Optional[str] = None

    def __post_init__(self):
        problems = self.validate()
        if problems:
            raise ValueError("invalid config: " + "; ".join(problems))
        if not self.scenario_description:
            object.__setattr__(
                self,
                "scenario_description",
                "The team is refining the following initial prompt into a "
                "well-specified one for software development.",
            )
        object.__setattr__(self, "skip_stages", frozenset(self.skip_stages))

    def validate(self) -> List[str]:
        problems = []
        if not self.initial_prompt:
            problems.append("initial_prompt must be non-empty")
        if not 1 <= self.question_budget <= 10:
            problems.append("question_budget must be in [1,10]")
        if not 0 <= self.refinement_rounds <= 3:
            problems.append("refinement_rounds must be in [0,3]")
        if set(self.skip_stages) >= set(STAGE_ORDER):
            problems.append("cannot skip all four stages")
        return problems

    def stages(self) -> List[StageId]:
        return [s for s in STAGE_ORDER if s not in self.skip_stages]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "prompt_kind": self.prompt_kind.value,
            "initial_prompt": self.initial_prompt,
            "provider": {
                "endpoint_url": self.provider.endpoint_url,
                "api_key_env_var": self.provider.api_key_env_var,
                "model": self.provider.model,
                "provider": self.provider.provider,
                "default_temperature": self.provider.default_temperature,
                "default_max_tokens": self.provider.default_max_tokens,
                "transport_timeout_s": self.provider.transport_timeout_s,
            },
            "gate_policy": self.gate_policy.value,
            "skip_stages": sorted(s.value for s in self.skip_stages),
            "question_budget": self.question_budget,
            "refinement_rounds": self.refinement_rounds,
            "template_marker": self.template_marker,
            "team_intro": self.team_intro,
            "scenario_description": self.scenario_description,
            "mock_transcript_path": self.mock_transcript_path,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SessionConfig":
        return cls(
            prompt_kind=PromptKind(d["prompt_kind"]),
            initial_prompt=d["initial_prompt"],
            provider=ProviderConfig(**d.get("provider", {})),
            gate_policy=GatePolicy(d.get("gate_policy", "auto")),
            skip_stages=frozenset(StageId(s) for s in d.get("skip_stages", [])),
            question_budget=d.get("question_budget", 3),
            refinement_rounds=d.get("refinement_rounds", 1),
            template_marker=d.get("template_marker"),
            team_intro=d.get("team_intro", DEFAULT_TEAM_INTRO),
            scenario_description=d.get("scenario_description", ""),
            mock_transcript_path=d.get("mock_transcript_path"),
        )


Payload = Union[InterviewRecord, SrsDraft, ChainOfThought, Tuple[ChainOfThought, CritiqueReport]]


@dataclass(frozen=True)
class StageArtifact:
    stage: StageId
    payload: Payload
    attempt: int = 1
    created_at: float = 0.0

    def __post_init__(self):
        if not 1 <= self.attempt <= MAX_ATTEMPTS:
            raise ValueError(f"attempt must be in [1,{MAX_ATTEMPTS}]")
        expected = {
            StageId.ELICITATION: InterviewRecord,
            StageId.ANALYSIS: SrsDraft,
            StageId.SPECIFICATION: ChainOfThought,
        }
        if self.stage is StageId.VALIDATION:
            if not (isinstance(self.payload, tuple) and len(self.payload) == 2):
                raise ValueError("validation payload must be (chain, critique)")
        elif not isinstance(self.payload, expected[self.stage]):
            raise ValueError(f"payload variant does not match stage {self.stage.value}")

    def payload_dict(self) -> Dict[str, Any]:
        if self.stage is StageId.VALIDATION:
            cot, report = self.payload
            return {"chain_of_thought": cot.to_dict(), "critique": report.to_dict()}
        return self.payload.to_dict()

    @classmethod
    def payload_from_dict(cls, stage: StageId, d: Dict[str, Any]) -> Payload:
        if stage is StageId.ELICITATION:
            return InterviewRecord.from_dict(d)
        if stage is StageId.ANALYSIS:
            return SrsDraft.from_dict(d)
        if stage is StageId.SPECIFICATION:
            return ChainOfThought.from_dict(d)
        return (
            ChainOfThought.from_dict(d["chain_of_thought"]),
            CritiqueReport.from_dict(d["critique"]),
        )


@dataclass
class HistoryEntry:
    artifact: StageArtifact
    decision: Optional[GateDecision] = None  # None = pending


@dataclass
class StageFailureInfo:
    stage: StageId
    attempts: int
    rule: str
    detail: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stage": self.stage.value,
            "attempts": self.attempts,
            "rule": self.rule,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "StageFailureInfo":
        return cls(StageId(d["stage"]), d["attempts"], d["rule"], d["detail"])


class StateError(Exception):
    """Operation invoked in the wrong session state."""


@dataclass
class PipelineSession:
    config: SessionConfig
    id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    history: List[HistoryEntry] = field(default_factory=list)
    status: SessionStatus = SessionStatus.RUNNING
    current_stage: Optional[StageId] = None
    pending_feedback: Optional[str] = None
    final_prompt: Optional[str] = None
    template: Optional[str] = None
    failure: Optional[StageFailureInfo] = None
    transcript_cursor: int = 0
    created_at: float = 0.0

    def context(self) -> ScenarioContext:
        body = self.config.initial_prompt
        if self.template is not None and self.config.template_marker:
            body, _ = split_template(body, self.config.template_marker)
        return ScenarioContext(
            team_intro=self.config.team_intro,
            scenario_description=self.config.scenario_description,
            prompt_kind=self.config.prompt_kind,
            initial_prompt=body,
        )

    def approved_payload(self, stage: StageId) -> Optional[Payload]:
        for entry in reversed(self.history):
            if (
                entry.artifact.stage is stage
                and entry.decision is not None
                and entry.decision.verdict is Verdict.APPROVE
            ):
                return entry.artifact.payload
        return None

    def stage_ids_in_history(self) -> set:
        return {e.artifact.stage for e in self.history}


def start_session(config: SessionConfig) -> PipelineSession:
    session = PipelineSession(config=config, created_at=time.time())
    session.current_stage = config.stages()[0]
    if (
        config.template_marker
        and config.prompt_kind is PromptKind.SYSTEM
    ):
        _, template = split_template(config.initial_prompt, config.template_marker)
        session.template = template
    return session


def _retrying(producer: Callable[[int, Optional[str]], Any], stage: StageId, feedback: Optional[str]):
    """Run an LLM-backed producer with the regeneration budget.

    Returns (result, attempts_used). Raises _StageFailed after MAX_ATTEMPTS.
    """
    last: Optional[MalformedReplyError] = None
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            return producer(attempt, feedback), attempt
        except MalformedReplyError as exc:
            last = exc
    raise _StageFailed(
        StageFailureInfo(
            stage=stage,
            attempts=MAX_ATTEMPTS,
            rule=last.failure.rule,
            detail=last.failure.span,
        )
    )


class _StageFailed(Exception):
    def __init__(self, info: StageFailureInfo):
        super().__init__(f"{info.stage.value} failed after {info.attempts} attempts: {info.rule}")
        self.info = info


def _elicitation_input_record(session: PipelineSession) -> InterviewRecord:
    payload = session.approved_payload(StageId.ELICITATION)
    if payload is not None:
        return payload
    # Skipped elicitation feeds an empty record downstream.
    return InterviewRecord()


def _analysis_input_srs(session: PipelineSession) -> SrsDraft:
    payload = session.approved_payload(StageId.ANALYSIS)
    if payload is not None:
        return payload
    record = _elicitation_input_record(session)
    # Skipped analysis wraps the raw interview record in a single section.
    return SrsDraft(
        sections=(
            SrsSection(
                heading="Interview Record",
                body=record.render_text(),
                source_turn_ids=tuple(record.turn_ids()),
            ),
        )
    )


def _specification_input_cot(session: PipelineSession) -> ChainOfThought:
    payload = session.approved_payload(StageId.SPECIFICATION)
    if payload is not None:
        return payload
    srs = _analysis_input_srs(session)
    # Skipped specification passes the SRS text through as the chain body.
    return ChainOfThought(
        prompt_kind=session.config.prompt_kind, raw_body=srs.render_text()
    )


def _run_elicitation(session, provider, ctx, feedback) -> Tuple[InterviewRecord, int]:
    record = InterviewRecord()
    step = None
    max_attempts = 1
    budget = session.config.question_budget
    while True:
        result, used = _retrying(
            lambda attempt, fb: agents.next_interview_question(
                provider, record, ctx, budget, step=step, feedback=fb
            ),
            StageId.ELICITATION,
            feedback,
        )
        max_attempts = max(max_attempts, used)
        if isinstance(result, InterviewComplete):
            return record, max_attempts
        if isinstance(result, StepComplete):
            step = successor_step(result.step)
            if step is None:
                return record, max_attempts
            continue
        question = result
        answers, used = _retrying(
            lambda attempt, fb: agents.answer_question(provider, question, ctx),
            StageId.ELICITATION,
            feedback,
        )
        max_attempts = max(max_attempts, used)
        record = record.with_turn(InterviewTurn(question=question, answers=tuple(answers)))
        step = question.step


def run_stage(session: PipelineSession, provider) -> StageArtifact:
    """Execute the current stage; ends AwaitingGate, or Failed after the
    regeneration budget is exhausted."""
    if session.status is not SessionStatus.RUNNING:
        raise StateError(f"cannot run stage while {session.status.value}")
    stage = session.current_stage
    ctx = session.context()
    feedback = session.pending_feedback
    try:
        if stage is StageId.ELICITATION:
            payload, attempts = _run_elicitation(session, provider, ctx, feedback)
        elif stage is StageId.ANALYSIS:
            record = _elicitation_input_record(session)
            payload, attempts = _retrying(
                lambda attempt, fb: agents.draft_srs(provider, record, ctx, feedback=fb),
                stage,
                feedback,
            )
        elif stage is StageId.SPECIFICATION:
            srs = _analysis_input_srs(session)
            payload, attempts = _retrying(
                lambda attempt, fb: agents.generate_cot(
                    provider, srs, ctx, gate_feedback=fb
                ),
                stage,
                feedback,
            )
        else:
            srs = _analysis_input_srs(session)
            cot = _specification_input_cot(session)
            report, attempts = _retrying(
                lambda attempt, fb: agents.critique(provider, cot, srs, ctx),
                stage,
                feedback,
            )
            for _ in range(session.config.refinement_rounds):
                cot, used = _retrying(
                    lambda attempt, fb: agents.generate_cot(
                        provider, srs, ctx, prior_feedback=report, gate_feedback=fb
                    ),
                    stage,
                    feedback,
                )
                attempts = max(attempts, used)
                report, used = _retrying(
                    lambda attempt, fb: agents.critique(provider, cot, srs, ctx),
                    stage,
                    feedback,
                )
                attempts = max(attempts, used)
            payload = (cot, report)
    except _StageFailed as exc:
        session.status = SessionStatus.FAILED
        session.failure = exc.info
        if isinstance(provider, MockProvider):
            session.transcript_cursor = provider.transcript.cursor
        raise
    artifact = StageArtifact(
        stage=stage, payload=payload, attempt=attempts, created_at=time.time()
    )
    session.history.append(HistoryEntry(artifact=artifact))
    session.status = SessionStatus.AWAITING_GATE
    session.pending_feedback = None
    if isinstance(provider, MockProvider):
        session.transcript_cursor = provider.transcript.cursor
    return artifact


def render_final_prompt(session: PipelineSession) -> str:
    cot = _specification_input_cot(session)
    validated = session.approved_payload(StageId.VALIDATION)
    if validated is not None:
        cot = validated[0]
    if session.config.prompt_kind is PromptKind.USER:
        body = cot.raw_body if cot.raw_body is not None else cot.task_list.to_json()
        preamble = (
            "Please build the software described by this initial request: "
            f"{session.context().initial_prompt.strip()}. "
            "Follow the dependency-ordered task plan below."
        )
        return preamble + "\n\n" + body
    if cot.raw_body is not None:
        rendered = cot.raw_body
    else:
        rendered = assemble_system_prompt(cot.system_prompt)
    if session.template is not None:
        rendered = join_template(rendered, session.template, session.config.template_marker)
    return rendered


def submit_gate(session: PipelineSession, decision: GateDecision) -> PipelineSession:
    if session.status is not SessionStatus.AWAITING_GATE:
        raise StateError(f"no pending gate (status {session.status.value})")
    entry = session.history[-1]
    if entry.decision is not None:
        raise StateError("gate already decided")
    entry.decision = decision
    if decision.verdict is Verdict.APPROVE:
        stages = session.config.stages()
        idx = stages.index(entry.artifact.stage)
        if idx + 1 < len(stages):
            session.current_stage = stages[idx + 1]
            session.status = SessionStatus.RUNNING
            session.pending_feedback = None
        else:
            session.status = SessionStatus.COMPLETED
            session.current_stage = None
            session.final_prompt = render_final_prompt(session)
    else:
        # Rejection re-queues the same stage; the attempt budget starts over.
        session.status = SessionStatus.RUNNING
        session.pending_feedback = decision.feedback
    return session


GateHandler = Callable[[PipelineSession, StageArtifact], GateDecision]


def run_to_completion(
    session: PipelineSession,
    provider,
    gate_handler: Optional[GateHandler] = None,
    store: Optional["SessionStore"] = None,
) -> PipelineSession:
    """Drive stages and gates until the session completes or fails.

    AutoApprove approves every gate; Interactive delegates to gate_handler.
    Serve-policy sessions are driven by the HTTP service, not this loop.
    """
    if session.status is not SessionStatus.RUNNING:
        raise StateError(f"cannot drive session in status {session.status.value}")
    while session.status in (SessionStatus.RUNNING, SessionStatus.AWAITING_GATE):
        if session.status is SessionStatus.RUNNING:
            try:
                run_stage(session, provider)
            except _StageFailed:
                break
            if store is not None:
                store.save(session)
        else:
            if session.config.gate_policy is GatePolicy.AUTO_APPROVE:
                decision = GateDecision(Verdict.APPROVE)
            elif gate_handler is not None:
                decision = gate_handler(session, session.history[-1].artifact)
            else:
                raise StateError("interactive gate requires a gate handler")
            submit_gate(session, decision)
            if store is not None:
                store.save(session)
    if store is not None:
        store.save(session)
    return session


# --- persistence -------------------------------------------------------------

class SessionNotFound(Exception):
    pass


class CorruptSessionError(Exception):
    def __init__(self, path: str, reason: str):
        super().__init__(f"corrupt session data at {path}: {reason}")
        self.path = path


class SessionStore:
    """Directory-per-session store: manifest.json plus one file per artifact."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def list_ids(self) -> List[str]:
        return sorted(
            p.name for p in self.root.iterdir()
            if p.is_dir() and (p / "manifest.json").exists()
        )

    def save(self, session: PipelineSession) -> None:
        sdir = self._dir(session.id)
        (sdir / "artifacts").mkdir(parents=True, exist_ok=True)
        entries = []
        for n, entry in enumerate(session.history, start=1):
            art = entry.artifact
            fname = f"{n:02d}-{art.stage.value}-{art.attempt}.json"
            with open(sdir / "artifacts" / fname, "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "stage": art.stage.value,
                        "attempt": art.attempt,
                        "created_at": art.created_at,
                        "payload": art.payload_dict(),
                    },
                    fh,
                    indent=2,
                )
            entries.append(
                {
                    "file": fname,
                    "stage": art.stage.value,
                    "attempt": art.attempt,
                    "decision": entry.decision.to_dict() if entry.decision else None,
                }
            )
        manifest = {
            "id": session.id,
            "config": session.config.to_dict(),
            "status": session.status.value,
            "current_stage": session.current_stage.value if session.current_stage else None,
            "pending_feedback": session.pending_feedback,
            "template": session.template,
            "failure": session.failure.to_dict() if session.failure else None,
            "transcript_cursor": session.transcript_cursor,
            "created_at": session.created_at,
            "history": entries,
        }
        with open(sdir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
        if session.final_prompt is not None:
            with open(sdir / "final_prompt.txt", "w", encoding="utf-8") as fh:
                fh.write(session.final_prompt)

    def load(self, session_id: str) -> PipelineSession:
        sdir = self._dir(session_id)
        manifest_path = sdir / "manifest.json"
        if not manifest_path.exists():
            raise SessionNotFound(session_id)
        try:
            with open(manifest_path, encoding="utf-8") as fh:
                manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorruptSessionError(str(manifest_path), str(exc))
        history = []
        for entry in manifest["history"]:
            apath = sdir / "artifacts" / entry["file"]
            if not apath.exists():
                raise CorruptSessionError(str(apath), "artifact file missing")
            try:
                with open(apath, encoding="utf-8") as fh:
                    raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CorruptSessionError(str(apath), str(exc))
            stage = StageId(raw["stage"])
            artifact = StageArtifact(
                stage=stage,
                payload=StageArtifact.payload_from_dict(stage, raw["payload"]),
                attempt=raw["attempt"],
                created_at=raw["created_at"],
            )
            decision = (
                GateDecision.from_dict(entry["decision"]) if entry["decision"] else None
            )
            history.append(HistoryEntry(artifact=artifact, decision=decision))
        session = PipelineSession(
            config=SessionConfig.from_dict(manifest["config"]),
            id=manifest["id"],
            history=history,
            status=SessionStatus(manifest["status"]),
            current_stage=(
                StageId(manifest["current_stage"]) if manifest["current_stage"] else None
            ),
            pending_feedback=manifest.get("pending_feedback"),
            template=manifest.get("template"),
            failure=(
                StageFailureInfo.from_dict(manifest["failure"])
                if manifest.get("failure")
                else None
            ),
            transcript_cursor=manifest.get("transcript_cursor", 0),
            created_at=manifest.get("created_at", 0.0),
        )
        final_path = sdir / "final_prompt.txt"
        if final_path.exists():
            session.final_prompt = final_path.read_text(encoding="utf-8")
        return session


def canonical_session_dict(session: PipelineSession) -> Dict[str, Any]:
    """Serialization for determinism comparisons; timestamps zeroed."""
    return {
        "id": session.id,
        "config": session.config.to_dict(),
        "status": session.status.value,
        "final_prompt": session.final_prompt,
        "template": session.template,
        "failure": session.failure.to_dict() if session.failure else None,
        "history": [
            {
                "stage": e.artifact.stage.value,
                "attempt": e.artifact.attempt,
                "created_at": 0.0,
                "payload": e.artifact.payload_dict(),
                "decision": e.decision.to_dict() if e.decision else None,
            }
            for e in session.history
        ],
    }


def canonical_session_bytes(session: PipelineSession) -> bytes:
    return json.dumps(canonical_session_dict(session), sort_keys=True).encode("utf-8")


def provider_for(config: SessionConfig, cursor: int = 0):
    """Build the provider a session's config calls for (mock or HTTP)."""
    from .gateway import HttpProvider

    if config.mock_transcript_path:
        transcript = ScriptedTranscript.from_file(config.mock_transcript_path, cursor=cursor)
        return MockProvider(transcript)
    return HttpProvider(config.provider)
