"""Checklist prompt building, emphasis weights, and prompt-travel keyframes."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from .errors import (
    MissingSubjectError,
    NonIncreasingIndicesError,
    OverlappingPhrasesError,
    OverlapTooLowError,
    PhraseNotFoundError,
    WeightBoundsError,
)

CHECKLIST_ORDER = (
    "subject", "medium", "style", "artist", "website", "resolution",
    "additional_details", "color", "lighting",
)

CHECKLIST_INSTRUCTION = (
    "You write prompts for a text-to-image model. A strong prompt names, in "
    "order: the subject, the medium, the style, artists to emulate, a website "
    "known for the look, resolution keywords, additional details, the color "
    "scheme, and the lighting. Separate parts with commas. Mark an important "
    "phrase as (phrase:1.3) and a minor one as (phrase:0.8)."
)

DEFAULT_OVERLAP_THRESHOLD = 0.5
WEIGHT_MIN, WEIGHT_MAX = 0.1, 2.0


@dataclass(frozen=True)
class PromptSpec:
    subject: str | None = None
    medium: str | None = None
    style: str | None = None
    artist: str | None = None
    website: str | None = None
    resolution: str | None = None
    additional_details: str | None = None
    color: str | None = None
    lighting: str | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "PromptSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown prompt fields: {', '.join(sorted(unknown))}")
        return cls(**{k: v for k, v in obj.items() if v is not None})

    @classmethod
    def load(cls, path) -> "PromptSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _soften(text: str) -> str:
    """Lowercase a leading ordinary capitalized word ("Digital" -> "digital").

    Acronyms, initials and camel-case names ("DeviantArt", "H.R.") are kept.
    """
    m = re.match(r"[^\W\d_]+", text)
    if m:
        word = m.group()
        if len(word) > 1 and word[0].isupper() and word[1:].islower():
            return word[0].lower() + text[1:]
    return text


def build_prompt(spec: PromptSpec) -> str:
    if not spec.subject or not spec.subject.strip():
        raise MissingSubjectError("a prompt needs a subject")
    parts = [spec.subject.strip()]
    for name in CHECKLIST_ORDER[1:]:
        value = getattr(spec, name)
        if value and value.strip():
            parts.append(_soften(value.strip()))
    return ", ".join(parts)


@dataclass(frozen=True)
class EmphasisMap:
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        entries = tuple((str(p), float(w)) for p, w in self.entries)
        for phrase, weight in entries:
            if not phrase:
                raise PhraseNotFoundError("emphasis phrase is empty")
            if not WEIGHT_MIN <= weight <= WEIGHT_MAX:
                raise WeightBoundsError(
                    f"weight {weight} for {phrase!r} outside [{WEIGHT_MIN}, {WEIGHT_MAX}]")
        object.__setattr__(self, "entries", entries)


def apply_emphasis(prompt: str, emphasis: EmphasisMap | Iterable[tuple[str, float]]) -> str:
    """Wrap the first occurrence of each phrase as ``(phrase:W)``."""
    if not isinstance(emphasis, EmphasisMap):
        emphasis = EmphasisMap(tuple(emphasis))
    spans = []
    for phrase, weight in emphasis.entries:
        at = prompt.find(phrase)
        if at < 0:
            raise PhraseNotFoundError(f"{phrase!r} does not occur in the prompt")
        label = f"{weight:.1f}"
        if label != "1.0":
            spans.append((at, at + len(phrase), phrase, label))
    spans.sort()
    for (s1, e1, p1, _), (s2, e2, p2, _) in zip(spans, spans[1:]):
        if s2 < e1:
            raise OverlappingPhrasesError(f"{p1!r} overlaps {p2!r}")
    out, cursor = [], 0
    for start, end, phrase, label in spans:
        out.append(prompt[cursor:start])
        out.append(f"({phrase}:{label})")
        cursor = end
    out.append(prompt[cursor:])
    return "".join(out)


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def word_set(text: str) -> frozenset[str]:
    return frozenset(_WORD_RE.findall(text.lower()))


def lexical_overlap(a: str, b: str) -> float:
    """Jaccard index of the two lowercase word sets; 1.0 when both are empty."""
    wa, wb = word_set(a), word_set(b)
    union = wa | wb
    if not union:
        return 1.0
    return len(wa & wb) / len(union)


@dataclass(frozen=True)
class KeyframeSchedule:
    anchor: str
    frames: tuple[tuple[int, str], ...]

    def to_json(self) -> dict:
        return {"anchor": self.anchor,
                "frames": [{"index": i, "prompt": p} for i, p in self.frames]}


def schedule_problems(schedule: KeyframeSchedule,
                      overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD) -> list[str]:
    """Independent re-check of every schedule invariant; empty when valid."""
    problems = []
    indices = [i for i, _ in schedule.frames]
    if any(i < 0 for i in indices):
        problems.append("negative frame index")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        problems.append("frame indices not strictly increasing")
    for idx, prompt in schedule.frames:
        if schedule.anchor.lower() not in prompt.lower():
            problems.append(f"frame {idx} lacks the anchor")
    for (i1, p1), (i2, p2) in zip(schedule.frames, schedule.frames[1:]):
        value = lexical_overlap(p1, p2)
        if value < overlap_threshold:
            problems.append(f"frames {i1}/{i2} overlap {value:.4f}")
    return problems


def keyframe_schedule(anchor: str, stages: Sequence[str], frame_indices: Sequence[int],
                      overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD,
                      template: str = "{anchor} {stage}") -> KeyframeSchedule:
    """Frame prompts that share ``anchor`` verbatim.

    A stage containing ``{anchor}`` is used as its own template; otherwise
    ``template`` combines the anchor and the stage.
    """
    if not anchor or not anchor.strip():
        raise ValueError("anchor must be non-empty")
    if len(stages) != len(frame_indices):
        raise ValueError(f"{len(stages)} stages but {len(frame_indices)} frame indices")
    indices = [int(i) for i in frame_indices]
    if any(i < 0 for i in indices):
        raise NonIncreasingIndicesError("frame indices must be non-negative")
    for a, b in zip(indices, indices[1:]):
        if b <= a:
            raise NonIncreasingIndicesError(f"frame index {b} does not follow {a}")
    prompts = []
    for stage in stages:
        if "{anchor}" in stage:
            prompts.append(stage.replace("{anchor}", anchor))
        else:
            prompts.append(template.format(anchor=anchor, stage=stage))
    for idx, prompt in zip(indices, prompts):
        if anchor.lower() not in prompt.lower():
            raise ValueError(f"frame {idx} prompt does not contain the anchor")
    for (i1, p1), (i2, p2) in zip(zip(indices, prompts), list(zip(indices, prompts))[1:]):
        value = lexical_overlap(p1, p2)
        if value < overlap_threshold:
            raise OverlapTooLowError(i1, i2, value, overlap_threshold)
    return KeyframeSchedule(anchor, tuple(zip(indices, prompts)))


@dataclass(frozen=True)
class DirectOptions:
    grammar: object | None = None          # Grammar or CompiledGrammar
    gamma: float = 1.0
    negative_demos: object | None = None   # NegativeDemoStore
    n_negative: int = 3
    blacklist_words: tuple[str, ...] = ()
    k: int = 5
    seed: int = 0
    max_tokens: int = 48
    temperature: float = 1.0
    instruction: str = CHECKLIST_INSTRUCTION


def direct(provider, store, request: str, options: DirectOptions | dict | None = None) -> str:
    """Retrieve examples, build the few-shot context, and decode a prompt.

    With a grammar the output is a member of its language; otherwise guided
    sampling runs with any negative demos and banned words.
    """
    from .grammar import grammar_sample
    from .guidance import (
        GuidanceConfig,
        blacklist_for_words,
        build_negative_context,
        guided_decode,
        select_negative_demos,
    )
    from .retrieval import PromptStore, assemble_context
    from .sampling import SamplingParams

    if options is None:
        options = DirectOptions()
    elif isinstance(options, dict):
        options = DirectOptions(**options)
    store = store if store is not None else PromptStore()
    context_text = assemble_context(options.instruction, store, request, options.k) + "\n"
    ctx = provider.tokenize(context_text)
    params = SamplingParams(options.temperature, options.seed, options.max_tokens)
    if options.grammar is not None:
        return grammar_sample(provider, options.grammar, params, context=ctx)
    negative: list[int] = []
    if options.negative_demos is not None and len(options.negative_demos):
        demos = select_negative_demos(request, options.negative_demos, options.n_negative)
        negative = build_negative_context(demos, provider.vocab)
    config = GuidanceConfig(
        gamma=options.gamma,
        negative_context=tuple(negative),
        blacklist=blacklist_for_words(provider.vocab, options.blacklist_words),
        banned_words=tuple(options.blacklist_words),
    )
    return guided_decode(provider, ctx, config, params)
