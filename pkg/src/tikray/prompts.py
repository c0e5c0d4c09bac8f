"""Prompt assembly for the eight ablation conditions.

A prompt is a fixed Spanish task block, optionally preceded by a
``[CONTEXTO]`` block holding any combination of retrieved corpus examples,
grammar sections, and morpheme/dictionary lines. Context can come from
automatic retrieval or from a hand-curated override file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

from .morphology import FallbackLexicon, MorphemeAnalysis, analyze_sentence
from .resources import DatasetItem, ResourceBundle
from .retrieval import (
    CorpusContext,
    GrammarContext,
    LcsIndex,
    MorphContext,
    RetrievalConfig,
    build_lcs_index,
    retrieve_corpus_examples,
    retrieve_grammar_context,
    retrieve_morph_context,
)

TASK_TEMPLATE = (
    "[TAREA] Traduce la siguiente frase del quechua al español. "
    "Responde sólo con la traducción:\n"
    "quechua: {source}\n"
    "español:"
)

CONTEXT_HEADER = "[CONTEXTO]"


@dataclass(frozen=True)
class PromptCondition:
    """One of the eight context configurations; all flags off is the baseline."""

    use_corpus: bool = False
    use_grammar: bool = False
    use_morph: bool = False

    @property
    def code(self) -> str:
        if not (self.use_corpus or self.use_grammar or self.use_morph):
            return "base"
        return (
            ("c" if self.use_corpus else "")
            + ("g" if self.use_grammar else "")
            + ("m" if self.use_morph else "")
        )


BASELINE = PromptCondition()

# Fixed report order: baseline, single contexts, pairs, all three.
_CONDITION_ORDER = [
    PromptCondition(),
    PromptCondition(use_corpus=True),
    PromptCondition(use_grammar=True),
    PromptCondition(use_morph=True),
    PromptCondition(use_corpus=True, use_grammar=True),
    PromptCondition(use_corpus=True, use_morph=True),
    PromptCondition(use_grammar=True, use_morph=True),
    PromptCondition(use_corpus=True, use_grammar=True, use_morph=True),
]
CONDITION_CODES = [c.code for c in _CONDITION_ORDER]


def enumerate_conditions() -> list[PromptCondition]:
    """All eight conditions in canonical report order."""
    return list(_CONDITION_ORDER)


def condition_from_code(code: str) -> PromptCondition:
    for condition in _CONDITION_ORDER:
        if condition.code == code:
            return condition
    raise ValueError(f"unknown condition code {code!r} (expected one of {CONDITION_CODES})")


class RetrievalMode(str, Enum):
    AUTO = "auto"
    MANUAL = "manual"


class OverrideError(KeyError):
    """MANUAL mode was requested without a covering override."""


def parse_overrides(data: bytes) -> dict[tuple[str, str], str]:
    """Parse an override file: blocks of ``@item_id<TAB>condition-code``
    followed by raw context lines, each block terminated by ``---``."""
    overrides: dict[tuple[str, str], str] = {}
    current: tuple[str, str] | None = None
    buffer: list[str] = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if line.startswith("@"):
            if current is not None:
                raise ValueError(f"override block {current} not terminated before line {lineno}")
            head = line[1:].split("\t")
            if len(head) != 2:
                raise ValueError(f"override header needs item and condition (line {lineno})")
            condition_from_code(head[1].strip())
            current = (head[0].strip(), head[1].strip())
            buffer = []
        elif line.strip() == "---":
            if current is None:
                raise ValueError(f"stray block terminator (line {lineno})")
            overrides[current] = "\n".join(buffer)
            current = None
        elif current is not None:
            buffer.append(line)
        elif line.strip():
            raise ValueError(f"content outside an override block (line {lineno})")
    if current is not None:
        raise ValueError(f"override block {current} not terminated")
    return overrides


@dataclass(frozen=True)
class PromptBundle:
    """A fully assembled prompt for one (item, condition, mode) cell."""

    item_id: str
    condition: PromptCondition
    mode: RetrievalMode
    context_text: str
    task_text: str
    full_prompt: str


def prompt_digest(full_prompt: str) -> str:
    return hashlib.sha256(full_prompt.encode("utf-8")).hexdigest()


def render_task(source: str) -> str:
    """The fixed task block; byte-stable across runs and platforms."""
    if not source:
        raise ValueError("cannot render a task for an empty source")
    return TASK_TEMPLATE.format(source=source)


def _context_payload(
    cond: PromptCondition,
    corpus_ctx: CorpusContext | None,
    grammar_ctx: GrammarContext | None,
    morph_ctx: MorphContext | None,
) -> str:
    """Context lines without the header, enabled blocks in fixed order
    corpus -> grammar -> morph. Empty retrievals contribute nothing."""
    lines: list[str] = []
    if cond.use_corpus and corpus_ctx:
        for pair in corpus_ctx.examples:
            lines.append(f"quechua: {pair.source_text}")
            lines.append(f"español: {pair.target_text}")
    if cond.use_grammar and grammar_ctx:
        for key, section in grammar_ctx.sections:
            lines.append(f"{key}: {section.body}")
    if cond.use_morph and morph_ctx:
        lines.extend(morph_ctx.parser_lines)
        lines.extend(morph_ctx.dictionary_entries)
    return "\n".join(lines)


def render_context(
    cond: PromptCondition,
    corpus_ctx: CorpusContext | None = None,
    grammar_ctx: GrammarContext | None = None,
    morph_ctx: MorphContext | None = None,
) -> str:
    """Headered context block, or the empty string when nothing was retrieved."""
    payload = _context_payload(cond, corpus_ctx, grammar_ctx, morph_ctx)
    return f"{CONTEXT_HEADER}\n{payload}" if payload else ""


def _assemble(item_id: str, cond: PromptCondition, mode: RetrievalMode,
              context_text: str, task_text: str) -> PromptBundle:
    if context_text:
        full = f"{CONTEXT_HEADER}\n{context_text}\n\n{task_text}"
    else:
        full = task_text
    return PromptBundle(
        item_id=item_id,
        condition=cond,
        mode=mode,
        context_text=context_text,
        task_text=task_text,
        full_prompt=full,
    )


class PromptBuilder:
    """Builds prompts for every cell of a run, reusing the corpus index and
    per-sentence morphological analyses."""

    def __init__(
        self,
        bundle: ResourceBundle,
        lexicon: FallbackLexicon | None = None,
        analyzer=None,
        overrides: dict[tuple[str, str], str] | None = None,
        cfg: RetrievalConfig = RetrievalConfig(),
    ):
        self.bundle = bundle
        self.lexicon = lexicon or FallbackLexicon.empty()
        self.analyzer = analyzer
        self.overrides = overrides or {}
        self.cfg = cfg
        self._index: LcsIndex = build_lcs_index(list(bundle.corpus), cfg)
        self._analyses: dict[str, list[MorphemeAnalysis]] = {}

    def _analyze(self, sentence: str) -> list[MorphemeAnalysis]:
        if sentence not in self._analyses:
            if self.analyzer is not None:
                self._analyses[sentence] = self.analyzer(sentence)
            else:
                self._analyses[sentence] = analyze_sentence(sentence, self.lexicon)
        return self._analyses[sentence]

    def build(self, item: DatasetItem, cond: PromptCondition, mode: RetrievalMode) -> PromptBundle:
        task = render_task(item.source_text)
        if cond == BASELINE:
            return _assemble(item.item_id, cond, mode, "", task)

        if mode is RetrievalMode.MANUAL:
            key = (item.item_id, cond.code)
            if key not in self.overrides:
                raise OverrideError(f"no manual override for item {item.item_id!r}, condition {cond.code!r}")
            return _assemble(item.item_id, cond, mode, self.overrides[key], task)

        corpus_ctx = self._index.query(item.source_text) if cond.use_corpus else None
        analyses = self._analyze(item.source_text) if (cond.use_grammar or cond.use_morph) else []
        grammar_ctx = (
            retrieve_grammar_context(analyses, list(self.bundle.grammar)) if cond.use_grammar else None
        )
        morph_ctx = (
            retrieve_morph_context(analyses, list(self.bundle.dictionary)) if cond.use_morph else None
        )
        payload = _context_payload(cond, corpus_ctx, grammar_ctx, morph_ctx)
        return _assemble(item.item_id, cond, mode, payload, task)


def build_prompt(
    item: DatasetItem,
    cond: PromptCondition,
    mode: RetrievalMode,
    bundle: ResourceBundle,
    overrides: dict[tuple[str, str], str] | None = None,
    *,
    lexicon: FallbackLexicon | None = None,
    analyzer=None,
    cfg: RetrievalConfig = RetrievalConfig(),
) -> PromptBundle:
    """One-shot prompt build; use PromptBuilder when building many cells."""
    builder = PromptBuilder(bundle, lexicon=lexicon, analyzer=analyzer, overrides=overrides, cfg=cfg)
    return builder.build(item, cond, mode)


# Convenience for callers that have contexts in hand (shares the corpus
# retrieval entry points' naive path).
def auto_contexts(
    sentence: str,
    bundle: ResourceBundle,
    lexicon: FallbackLexicon,
    cfg: RetrievalConfig = RetrievalConfig(),
) -> tuple[CorpusContext, GrammarContext, MorphContext]:
    analyses = analyze_sentence(sentence, lexicon)
    return (
        retrieve_corpus_examples(sentence, list(bundle.corpus), cfg),
        retrieve_grammar_context(analyses, list(bundle.grammar)),
        retrieve_morph_context(analyses, list(bundle.dictionary)),
    )
