"""Specification-stage output forms: dependency-ordered task lists and
five-component system prompts, plus the critique report they are scored with.
"""

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from .gateway import SchemaViolation, register_schema


class TaskCategory(str, Enum):
    DOCS = "docs"
    ENV = "env"
    CODE = "code"
    ENTRY = "entry"


# Docs and Env work precedes Code; the Entry task closes the list.
_CATEGORY_RANK = {
    TaskCategory.DOCS: 0,
    TaskCategory.ENV: 1,
    TaskCategory.CODE: 2,
    TaskCategory.ENTRY: 3,
}


@dataclass(frozen=True)
class Task:
    id: str
    title: str
    description: str
    depends_on: Tuple[str, ...] = ()
    category: TaskCategory = TaskCategory.CODE

    def __post_init__(self):
        object.__setattr__(self, "depends_on", tuple(self.depends_on))
        if not isinstance(self.category, TaskCategory):
            object.__setattr__(self, "category", TaskCategory(self.category))
        if not self.id:
            raise ValueError("task id must be non-empty")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "depends_on": list(self.depends_on),
            "category": self.category.value,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Task":
        return cls(
            id=d["id"],
            title=d.get("title", ""),
            description=d.get("description", ""),
            depends_on=tuple(d.get("depends_on", ())),
            category=TaskCategory(d["category"]),
        )


@dataclass(frozen=True)
class TaskList:
    tasks: Tuple[Task, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    def to_dict(self) -> Dict[str, Any]:
        return {"tasks": [t.to_dict() for t in self.tasks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TaskList":
        return cls(tasks=tuple(Task.from_dict(t) for t in d["tasks"]))


class OrderingError(Exception):
    """Structural problem that makes a valid ordering impossible."""


class CycleError(OrderingError):
    def __init__(self, cycle: List[str]):
        super().__init__("dependency cycle: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


def _check_structure(tasks: List[Task]) -> None:
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise OrderingError("duplicate task ids")
    id_set = set(ids)
    entries = [t for t in tasks if t.category is TaskCategory.ENTRY]
    if len(entries) != 1:
        raise OrderingError(f"expected exactly one entry task, found {len(entries)}")
    entry_id = entries[0].id
    for t in tasks:
        for dep in t.depends_on:
            if dep not in id_set:
                raise OrderingError(f"task {t.id!r} depends on unknown id {dep!r}")
            if dep == entry_id:
                raise OrderingError(f"entry task has a dependent: {t.id!r}")


def _find_cycle(tasks: List[Task]) -> List[str]:
    by_id = {t.id: t for t in tasks}
    color: Dict[str, int] = {}
    stack: List[str] = []

    def dfs(tid: str) -> Optional[List[str]]:
        color[tid] = 1
        stack.append(tid)
        for dep in by_id[tid].depends_on:
            if color.get(dep, 0) == 1:
                return stack[stack.index(dep):]
            if color.get(dep, 0) == 0:
                found = dfs(dep)
                if found is not None:
                    return found
        color[tid] = 2
        stack.pop()
        return None

    for t in tasks:
        if color.get(t.id, 0) == 0:
            found = dfs(t.id)
            if found is not None:
                return found
    return []


def order_tasks(tasks: List[Task]) -> TaskList:
    """Deterministic dependency-respecting order.

    Among simultaneously-ready tasks: category rank (docs < env < code < entry)
    then lexicographic id.
    """
    tasks = list(tasks)
    _check_structure(tasks)
    by_id = {t.id: t for t in tasks}
    indegree = {t.id: len(set(t.depends_on)) for t in tasks}
    dependents: Dict[str, List[str]] = {t.id: [] for t in tasks}
    for t in tasks:
        for dep in set(t.depends_on):
            dependents[dep].append(t.id)
    ready = [
        (_CATEGORY_RANK[by_id[tid].category], tid)
        for tid, deg in indegree.items()
        if deg == 0
    ]
    heapq.heapify(ready)
    ordered: List[Task] = []
    while ready:
        _, tid = heapq.heappop(ready)
        ordered.append(by_id[tid])
        for dep_id in dependents[tid]:
            indegree[dep_id] -= 1
            if indegree[dep_id] == 0:
                heapq.heappush(
                    ready, (_CATEGORY_RANK[by_id[dep_id].category], dep_id)
                )
    if len(ordered) != len(tasks):
        raise CycleError(_find_cycle(tasks))
    result = TaskList(tasks=tuple(ordered))
    report = validate_task_list(result)
    if not report.ok:
        # Dependencies force a category-rule violation (e.g. docs after code).
        raise OrderingError(
            "no valid ordering: " + "; ".join(v.rule for v in report.violations)
        )
    return result


@dataclass(frozen=True)
class Violation:
    rule: str
    task_ids: Tuple[str, ...]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: Tuple[Violation, ...] = ()


def validate_task_list(task_list: TaskList) -> ValidationReport:
    """Total check of all TaskList invariants."""
    tasks = task_list.tasks
    violations: List[Violation] = []
    ids = [t.id for t in tasks]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        violations.append(Violation("duplicate-ids", tuple(dupes)))
    index = {t.id: i for i, t in enumerate(tasks)}
    for t in tasks:
        for dep in t.depends_on:
            if dep not in index:
                violations.append(Violation("unknown-dependency", (t.id, dep)))
            elif index[dep] >= index[t.id]:
                violations.append(Violation("dependency-after-dependent", (t.id, dep)))
    entries = [t.id for t in tasks if t.category is TaskCategory.ENTRY]
    if len(entries) != 1:
        violations.append(Violation("entry-count", tuple(entries)))
    elif tasks and tasks[-1].category is not TaskCategory.ENTRY:
        violations.append(Violation("entry-not-last", (entries[0],)))
    first_code = next(
        (i for i, t in enumerate(tasks) if t.category is TaskCategory.CODE), None
    )
    if first_code is not None:
        late_setup = [
            t.id
            for t in tasks[first_code:]
            if t.category in (TaskCategory.DOCS, TaskCategory.ENV)
        ]
        if late_setup:
            violations.append(Violation("setup-after-code", tuple(late_setup)))
    return ValidationReport(ok=not violations, violations=tuple(violations))


# --- system prompt drafts ----------------------------------------------------

@dataclass(frozen=True)
class WorkMode:
    name: str
    conduct: str
    examples: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if not (self.name and self.conduct):
            raise ValueError("work mode name and conduct must be non-empty")
        if not self.examples:
            raise ValueError("work mode needs at least one example")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "conduct": self.conduct,
            "examples": list(self.examples),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "WorkMode":
        return cls(d["name"], d["conduct"], tuple(d["examples"]))


SYSTEM_PROMPT_SECTIONS = (
    "Role Definition",
    "Knowledge",
    "Tools",
    "Context",
    "Work Modes",
)


@dataclass(frozen=True)
class SystemPromptDraft:
    role_definition: str
    knowledge: str
    tools: str
    context_info: str
    work_modes: Tuple[WorkMode, ...]
    attached_template: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "work_modes", tuple(self.work_modes))
        for name in ("role_definition", "knowledge", "tools", "context_info"):
            if not getattr(self, name).strip():
                raise ValueError(f"component {name} must be non-empty")
        if not self.work_modes:
            raise ValueError("at least one work mode required")

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {
            "role_definition": self.role_definition,
            "knowledge": self.knowledge,
            "tools": self.tools,
            "context_info": self.context_info,
            "work_modes": [w.to_dict() for w in self.work_modes],
        }
        if self.attached_template is not None:
            d["attached_template"] = self.attached_template
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SystemPromptDraft":
        return cls(
            role_definition=d["role_definition"],
            knowledge=d["knowledge"],
            tools=d["tools"],
            context_info=d["context_info"],
            work_modes=tuple(WorkMode.from_dict(w) for w in d["work_modes"]),
            attached_template=d.get("attached_template"),
        )

    def part_ids(self) -> List[str]:
        return ["role_definition", "knowledge", "tools", "context_info", "work_modes"]


class PromptKind(str, Enum):
    USER = "user"
    SYSTEM = "system"


@dataclass(frozen=True)
class ChainOfThought:
    prompt_kind: PromptKind
    task_list: Optional[TaskList] = None
    system_prompt: Optional[SystemPromptDraft] = None
    raw_body: Optional[str] = None  # only for the skip-Specification bypass

    def __post_init__(self):
        if self.raw_body is not None:
            return
        if self.prompt_kind is PromptKind.USER and self.task_list is None:
            raise ValueError("user-prompt chain requires a task list")
        if self.prompt_kind is PromptKind.SYSTEM and self.system_prompt is None:
            raise ValueError("system-prompt chain requires a system prompt draft")

    def part_ids(self) -> List[str]:
        if self.raw_body is not None:
            return ["body"]
        if self.task_list is not None:
            return [t.id for t in self.task_list.tasks]
        return self.system_prompt.part_ids()

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"prompt_kind": self.prompt_kind.value}
        if self.raw_body is not None:
            d["raw_body"] = self.raw_body
        elif self.task_list is not None:
            d["task_list"] = self.task_list.to_dict()
        else:
            d["system_prompt"] = self.system_prompt.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ChainOfThought":
        return cls(
            prompt_kind=PromptKind(d["prompt_kind"]),
            task_list=TaskList.from_dict(d["task_list"]) if "task_list" in d else None,
            system_prompt=(
                SystemPromptDraft.from_dict(d["system_prompt"])
                if "system_prompt" in d
                else None
            ),
            raw_body=d.get("raw_body"),
        )


# --- critique reports --------------------------------------------------------

CRITIQUE_ASPECTS = (
    "Completeness",
    "Correctness",
    "OrganizationTraceability",
    "QualityAttributes",
    "Clear",
    "Concise",
    "Consistency",
    "TechnicalDetailExecutability",
)


@dataclass(frozen=True)
class CritiqueReport:
    aspect_notes: Dict[str, str]
    summary_strengths: str
    summary_weaknesses: str
    part_scores: Dict[str, int]
    feedback: str

    def __post_init__(self):
        missing = [a for a in CRITIQUE_ASPECTS if a not in self.aspect_notes]
        if missing:
            raise ValueError(f"missing aspects: {missing}")
        for part, score in self.part_scores.items():
            if not 1 <= score <= 5:
                raise ValueError(f"score for {part!r} out of [1,5]: {score}")
        if not self.summary_strengths or not self.summary_weaknesses:
            raise ValueError("summary must cover strengths and weaknesses")

    def min_score(self) -> int:
        return min(self.part_scores.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "aspect_notes": dict(self.aspect_notes),
            "summary_strengths": self.summary_strengths,
            "summary_weaknesses": self.summary_weaknesses,
            "part_scores": dict(self.part_scores),
            "feedback": self.feedback,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "CritiqueReport":
        return cls(
            aspect_notes=dict(d["aspect_notes"]),
            summary_strengths=d["summary_strengths"],
            summary_weaknesses=d["summary_weaknesses"],
            part_scores={k: int(v) for k, v in d["part_scores"].items()},
            feedback=d["feedback"],
        )


# --- rendering and template separation ---------------------------------------

def assemble_system_prompt(draft: SystemPromptDraft) -> str:
    """Deterministic plain-text render with fixed section headers."""
    parts = [
        f"## Role Definition\n{draft.role_definition.strip()}",
        f"## Knowledge\n{draft.knowledge.strip()}",
        f"## Tools\n{draft.tools.strip()}",
        f"## Context\n{draft.context_info.strip()}",
    ]
    mode_lines = []
    for mode in draft.work_modes:
        examples = "\n".join(f"  - {e}" for e in mode.examples)
        mode_lines.append(f"### {mode.name}\n{mode.conduct.strip()}\nExamples:\n{examples}")
    parts.append("## Work Modes\n" + "\n".join(mode_lines))
    text = "\n\n".join(parts)
    if draft.attached_template is not None:
        text += "\n" + draft.attached_template
    return text


def parse_system_prompt(text: str) -> Dict[str, str]:
    """Recover the five component bodies from a render (template excluded)."""
    bodies: Dict[str, str] = {}
    current = None
    lines: Dict[str, List[str]] = {}
    for line in text.splitlines():
        if line.startswith("## ") and line[3:] in SYSTEM_PROMPT_SECTIONS:
            current = line[3:]
            lines[current] = []
        elif current is not None:
            lines[current].append(line)
    for heading, body in lines.items():
        bodies[heading] = "\n".join(body).strip()
    return bodies


def split_template(original_prompt: str, delimiter: str) -> Tuple[str, Optional[str]]:
    """Everything after the first delimiter is the protected template."""
    if delimiter and delimiter in original_prompt:
        body, _, template = original_prompt.partition(delimiter)
        return body, template
    return original_prompt, None


def join_template(body: str, template: Optional[str], delimiter: str) -> str:
    if template is None:
        return body
    return body + delimiter + template


# --- schema validators registered with the gateway ---------------------------

def _require(cond: bool, rule: str) -> None:
    if not cond:
        raise SchemaViolation(rule)


def _validate_task_payload(obj: Any) -> TaskList:
    _require(isinstance(obj, dict), "task-list-not-object")
    _require("tasks" in obj, "missing-tasks-field")
    _require(isinstance(obj["tasks"], list) and obj["tasks"], "tasks-empty")
    tasks = []
    for item in obj["tasks"]:
        _require(isinstance(item, dict), "task-not-object")
        _require("id" in item and isinstance(item["id"], str) and item["id"], "task-missing-id")
        _require(item.get("category") in {c.value for c in TaskCategory}, "bad-category")
        deps = item.get("depends_on", [])
        _require(
            isinstance(deps, list) and all(isinstance(d, str) for d in deps),
            "bad-depends-on",
        )
        tasks.append(Task.from_dict(item))
    ids = {t.id for t in tasks}
    _require(len(ids) == len(tasks), "duplicate-ids")
    for t in tasks:
        for dep in t.depends_on:
            _require(dep in ids, "unknown-dependency")
    _require(
        sum(1 for t in tasks if t.category is TaskCategory.ENTRY) == 1,
        "entry-count",
    )
    # Raw LLM ordering is advisory; the caller repairs it via order_tasks.
    return TaskList(tasks=tuple(tasks))


def _validate_system_prompt_payload(obj: Any) -> SystemPromptDraft:
    _require(isinstance(obj, dict), "draft-not-object")
    for name in ("role_definition", "knowledge", "tools", "context_info"):
        _require(
            isinstance(obj.get(name), str) and obj[name].strip() != "",
            f"missing-component-{name}",
        )
    modes = obj.get("work_modes")
    _require(isinstance(modes, list) and modes, "missing-component-work_modes")
    for m in modes:
        _require(isinstance(m, dict), "work-mode-not-object")
        _require(bool(m.get("name")) and bool(m.get("conduct")), "work-mode-incomplete")
        _require(
            isinstance(m.get("examples"), list) and m["examples"],
            "work-mode-needs-example",
        )
    return SystemPromptDraft.from_dict(obj)


def _validate_critique_payload(obj: Any) -> CritiqueReport:
    _require(isinstance(obj, dict), "critique-not-object")
    notes = obj.get("aspect_notes")
    _require(isinstance(notes, dict), "missing-aspect-notes")
    for aspect in CRITIQUE_ASPECTS:
        _require(aspect in notes, f"missing-aspect-{aspect}")
    _require(
        isinstance(obj.get("summary_strengths"), str) and obj["summary_strengths"],
        "missing summary",
    )
    _require(
        isinstance(obj.get("summary_weaknesses"), str) and obj["summary_weaknesses"],
        "missing summary",
    )
    scores = obj.get("part_scores")
    _require(isinstance(scores, dict) and scores, "missing-part-scores")
    for part, score in scores.items():
        _require(isinstance(score, int) and not isinstance(score, bool), "score-not-integer")
        _require(1 <= score <= 5, f"score-out-of-range-{part}")
    _require(isinstance(obj.get("feedback"), str) and obj["feedback"], "missing-feedback")
    return CritiqueReport.from_dict(obj)


register_schema("TaskList", _validate_task_payload)
register_schema("SystemPromptDraft", _validate_system_prompt_payload)
register_schema("CritiqueReport", _validate_critique_payload)
