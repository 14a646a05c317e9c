"""Rubric-based document scoring, multi-version aggregation, and CSUQ
questionnaire arithmetic, plus batch reporting with CSV/JSON/figure output.
"""

import csv
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .agents import MalformedReplyError, load_resource
from .gateway import (
    ChatMessage,
    ChatRequest,
    ParseFailure,
    Role,
    SchemaViolation,
    extract_structured,
    register_schema,
)

MAX_ATTEMPTS = 3


class DocKind(str, Enum):
    PRD = "prd"
    SDD = "sdd"


CRITERIA = {
    DocKind.PRD: ("Completeness", "Clarity", "Cohesiveness"),
    DocKind.SDD: ("Integrity", "Communicativeness", "Consistency"),
}

_RUBRIC_FILES = {DocKind.PRD: "rubric_prd.txt", DocKind.SDD: "rubric_sdd.txt"}


@dataclass(frozen=True)
class DocScore:
    doc_kind: DocKind
    criteria: Dict[str, int]
    justification: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        expected = set(CRITERIA[self.doc_kind])
        if set(self.criteria) != expected:
            raise ValueError(
                f"criteria must be exactly {sorted(expected)}, got {sorted(self.criteria)}"
            )
        for name, value in self.criteria.items():
            if not 1 <= value <= 5:
                raise ValueError(f"{name} out of [1,5]: {value}")

    def values(self) -> Tuple[int, ...]:
        return tuple(self.criteria[c] for c in CRITERIA[self.doc_kind])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "doc_kind": self.doc_kind.value,
            "criteria": dict(self.criteria),
            "justification": dict(self.justification),
        }


_SCORE_LINE_RE = re.compile(r"([A-Za-z]+)\s*[::]\s*(-?\d+)")


def _parse_doc_score_obj(obj: Any) -> Dict[str, Any]:
    if not isinstance(obj, dict):
        raise SchemaViolation("reply-not-object")
    criteria = obj.get("criteria", obj)
    if not isinstance(criteria, dict):
        raise SchemaViolation("missing-criteria")
    parsed: Dict[str, int] = {}
    for name, value in criteria.items():
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation("score-not-integer")
        if not 1 <= value <= 5:
            raise SchemaViolation(f"score-out-of-range-{name}")
        parsed[name] = value
    if not parsed:
        raise SchemaViolation("missing-criteria")
    return {
        "criteria": parsed,
        "justifications": obj.get("justifications", {}) if criteria is not obj else {},
    }


def _parse_doc_score_text(text: str) -> Dict[str, Any]:
    parsed: Dict[str, int] = {}
    for name, value in _SCORE_LINE_RE.findall(text):
        score = int(value)
        if not 1 <= score <= 5:
            raise SchemaViolation(f"score-out-of-range-{name}")
        parsed[name] = score
    if not parsed:
        raise SchemaViolation("no parseable block")
    return {"criteria": parsed, "justifications": {}}


register_schema("DocScoreReply", _parse_doc_score_obj, text_fallback=_parse_doc_score_text)


def rubric_text(kind: DocKind) -> str:
    return load_resource(_RUBRIC_FILES[kind])


def score_document(provider, doc: str, kind: DocKind) -> DocScore:
    """One rubric call per document, retried on parse failure up to 3 times."""
    if not doc.strip():
        raise ValueError("document must be non-empty")
    request = ChatRequest(
        messages=(
            ChatMessage(Role.SYSTEM, rubric_text(kind)),
            ChatMessage(Role.USER, f"Document to score:\n\n{doc}"),
        )
    )
    last: Optional[ParseFailure] = None
    for _ in range(MAX_ATTEMPTS):
        response = provider.complete(request)
        payload = extract_structured(response, "DocScoreReply")
        if isinstance(payload, ParseFailure):
            last = payload
            continue
        expected = CRITERIA[kind]
        if set(payload["criteria"]) != set(expected):
            last = ParseFailure(
                "criteria-mismatch",
                f"got {sorted(payload['criteria'])}, expected {sorted(expected)}",
            )
            continue
        return DocScore(
            doc_kind=kind,
            criteria=payload["criteria"],
            justification={k: str(v) for k, v in payload["justifications"].items()},
        )
    raise MalformedReplyError(last)


def aggregate_versions(scores: Sequence[DocScore]) -> DocScore:
    """Per-criterion elementwise maximum across document versions."""
    if not scores:
        raise ValueError("need at least one score")
    kind = scores[0].doc_kind
    if any(s.doc_kind is not kind for s in scores):
        raise TypeError("cannot aggregate scores of mixed document kinds")
    best: Dict[str, int] = {}
    contributors: Dict[str, List[int]] = {}
    for name in CRITERIA[kind]:
        values = [s.criteria[name] for s in scores]
        best[name] = max(values)
        contributors[name] = [i for i, v in enumerate(values) if v == best[name]]
    justification = {
        name: f"max over versions {contributors[name]}" for name in CRITERIA[kind]
    }
    return DocScore(doc_kind=kind, criteria=best, justification=justification)


# --- CSUQ --------------------------------------------------------------------

CSUQ_ITEM_COUNT = 19
CSUQ_REVERSED_ITEMS = frozenset({4, 5})

DEFAULT_CSUQ_MAPPING: Dict[str, Tuple[int, ...]] = {
    "overall": (19,),
    "usability": tuple(range(1, 9)),
    "information_quality": tuple(range(9, 14)),
    "interface_quality": tuple(range(14, 19)),
}


@dataclass(frozen=True)
class CsuqResponse:
    items: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) != CSUQ_ITEM_COUNT:
            raise ValueError(f"expected {CSUQ_ITEM_COUNT} items, got {len(self.items)}")
        for value in self.items:
            if not 1 <= value <= 7:
                raise ValueError(f"item value out of [1,7]: {value}")


@dataclass(frozen=True)
class CsuqScores:
    overall: float
    usability: float
    information_quality: float
    interface_quality: float

    def __post_init__(self):
        for name in ("overall", "usability", "information_quality", "interface_quality"):
            value = getattr(self, name)
            if not 1 <= value <= 7:
                raise ValueError(f"{name} out of [1,7]: {value}")


def reverse_item(value: int) -> int:
    """7-point Likert reversal; applying it twice is the identity."""
    return 8 - value


def score_csuq(
    resp: CsuqResponse,
    mapping: Optional[Dict[str, Sequence[int]]] = None,
) -> CsuqScores:
    """Subscale means over reverse-corrected items (1-based item indices)."""
    mapping = dict(mapping) if mapping else dict(DEFAULT_CSUQ_MAPPING)
    for name in ("overall", "usability", "information_quality", "interface_quality"):
        if name not in mapping or not mapping[name]:
            raise ValueError(f"mapping missing subscale {name!r}")
        for idx in mapping[name]:
            if not 1 <= idx <= CSUQ_ITEM_COUNT:
                raise ValueError(f"item index out of 1..{CSUQ_ITEM_COUNT}: {idx}")
    transformed = [
        reverse_item(v) if i + 1 in CSUQ_REVERSED_ITEMS else v
        for i, v in enumerate(resp.items)
    ]

    def mean(indices: Sequence[int]) -> float:
        return sum(transformed[i - 1] for i in indices) / len(indices)

    return CsuqScores(
        overall=mean(mapping["overall"]),
        usability=mean(mapping["usability"]),
        information_quality=mean(mapping["information_quality"]),
        interface_quality=mean(mapping["interface_quality"]),
    )


# --- batch reporting ---------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    scenario: str
    score: Optional[DocScore] = None
    error: Optional[str] = None


def batch_score(provider, directory: Union[str, Path], kind: DocKind) -> List[ReportRow]:
    """Score every document in a directory, one row per file in name order."""
    directory = Path(directory)
    rows: List[ReportRow] = []
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        try:
            doc = path.read_text(encoding="utf-8")
            score = score_document(provider, doc, kind)
            rows.append(ReportRow(scenario=path.name, score=score))
        except (OSError, UnicodeDecodeError, ValueError, MalformedReplyError) as exc:
            rows.append(ReportRow(scenario=path.name, error=str(exc)))
    return rows


def write_report_csv(rows: List[ReportRow], kind: DocKind, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "criterion_1", "criterion_2", "criterion_3"])
        for row in rows:
            if row.score is not None:
                writer.writerow([row.scenario, *row.score.values()])
            else:
                writer.writerow([row.scenario, "error", "error", "error"])


def write_report_json(rows: List[ReportRow], kind: DocKind, path: Union[str, Path]) -> None:
    payload = {
        "doc_kind": kind.value,
        "criteria": list(CRITERIA[kind]),
        "rows": [
            {
                "scenario": r.scenario,
                "scores": list(r.score.values()) if r.score else None,
                "error": r.error,
            }
            for r in rows
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_report_figure(rows: List[ReportRow], kind: DocKind, path: Union[str, Path]) -> None:
    """Grouped bar chart of per-scenario criterion scores next to the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scored = [r for r in rows if r.score is not None]
    names = [r.scenario for r in scored]
    criteria = CRITERIA[kind]
    fig, ax = plt.subplots(figsize=(max(6, len(scored) * 0.9), 4))
    width = 0.8 / len(criteria)
    for ci, criterion in enumerate(criteria):
        xs = [i + ci * width for i in range(len(scored))]
        ys = [r.score.criteria[criterion] for r in scored]
        ax.bar(xs, ys, width=width, label=criterion)
    ax.set_xticks([i + width for i in range(len(scored))])
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_ylim(0, 5.5)
    ax.set_ylabel("score (1-5)")
    ax.set_title(f"{kind.value.upper()} rubric scores")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
