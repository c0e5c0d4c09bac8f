"""Context retrieval: corpus examples by longest common substring, dictionary
entries by exact morph-headword match, grammar sections by affix key.

Corpus ranking has two interchangeable engines with identical results: a
naive O(n*m) dynamic program (`lcs_length`) and a suffix-automaton index
(`build_lcs_index`) that answers each query in O(|query|) per corpus pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .morphology import MorphemeAnalysis
from .resources import CorpusPair, DictionaryEntry, GrammarSection, normalize_text


def _lcs_raw(a: str, b: str) -> int:
    """Longest common substring length of two raw strings (rolling-row DP)."""
    if not a or not b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    best = 0
    prev = [0] * (len(b) + 1)
    for ch_a in a:
        cur = [0] * (len(b) + 1)
        for j, ch_b in enumerate(b, start=1):
            if ch_a == ch_b:
                length = prev[j - 1] + 1
                cur[j] = length
                if length > best:
                    best = length
        prev = cur
    return best


def lcs_length(a: str, b: str) -> int:
    """Longest common substring length over normalized text, character level."""
    return _lcs_raw(normalize_text(a), normalize_text(b))


class _SuffixAutomaton:
    """Suffix automaton over one string; answers longest-common-substring
    queries against any other string in a single linear scan."""

    __slots__ = ("transitions", "link", "length", "_last")

    def __init__(self, text: str):
        self.transitions: list[dict[str, int]] = [{}]
        self.link: list[int] = [-1]
        self.length: list[int] = [0]
        self._last = 0
        for ch in text:
            self._extend(ch)

    def _extend(self, ch: str) -> None:
        trans, link, length = self.transitions, self.link, self.length
        cur = len(trans)
        trans.append({})
        link.append(-1)
        length.append(length[self._last] + 1)
        p = self._last
        while p != -1 and ch not in trans[p]:
            trans[p][ch] = cur
            p = link[p]
        if p == -1:
            link[cur] = 0
        else:
            q = trans[p][ch]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = len(trans)
                trans.append(dict(trans[q]))
                link.append(link[q])
                length.append(length[p] + 1)
                while p != -1 and trans[p].get(ch) == q:
                    trans[p][ch] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        self._last = cur

    def longest_match(self, query: str) -> int:
        """Length of the longest substring of ``query`` that occurs in the
        automaton's string."""
        trans, link, length = self.transitions, self.link, self.length
        state = 0
        current = 0
        best = 0
        for ch in query:
            while state != 0 and ch not in trans[state]:
                state = link[state]
                current = length[state]
            if ch in trans[state]:
                state = trans[state][ch]
                current += 1
                if current > best:
                    best = current
            else:
                state = 0
                current = 0
        return best


@dataclass(frozen=True)
class RetrievalConfig:
    """Corpus retrieval knobs: number of examples and whether LCS matching
    runs over normalized or raw text."""

    k: int = 3
    normalize: bool = True

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")


@dataclass(frozen=True)
class CorpusContext:
    """Top-ranked corpus pairs, best first, with their LCS scores."""

    examples: tuple[CorpusPair, ...]
    scores: tuple[int, ...]


@dataclass(frozen=True)
class GrammarContext:
    """Grammar sections keyed by the affix that retrieved them, morph order,
    each section at most once."""

    sections: tuple[tuple[str, GrammarSection], ...]


@dataclass(frozen=True)
class MorphContext:
    """Parser-style lines for every morph plus the rendered dictionary entries
    they retrieved (deduplicated, first-occurrence order)."""

    parser_lines: tuple[str, ...]
    dictionary_entries: tuple[str, ...]


def _rank(
    query_key: str, keyed: list[tuple[str, CorpusPair]], scorer, k: int
) -> CorpusContext:
    scored = []
    for key, pair in keyed:
        score = scorer(query_key, key)
        if score > 0:
            scored.append((score, pair))
    scored.sort(key=lambda entry: (-entry[0], len(entry[1].source_text), entry[1].index))
    top = scored[:k]
    return CorpusContext(
        examples=tuple(pair for _, pair in top), scores=tuple(score for score, _ in top)
    )


def retrieve_corpus_examples(
    sentence: str, corpus: list[CorpusPair], cfg: RetrievalConfig = RetrievalConfig()
) -> CorpusContext:
    """Rank corpus pairs by LCS against the full source sentence and keep the
    top k. Ties break toward the shorter source text, then the lower corpus
    index; pairs sharing no characters are dropped."""
    key = normalize_text(sentence) if cfg.normalize else sentence
    keyed = [
        (normalize_text(p.source_text) if cfg.normalize else p.source_text, p) for p in corpus
    ]
    return _rank(key, keyed, _lcs_raw, cfg.k)


@dataclass(frozen=True)
class LcsIndex:
    """Per-pair suffix automata over the corpus source texts.

    Results are contractually identical to ``retrieve_corpus_examples``; the
    automata only replace the inner DP with a linear scan.
    """

    cfg: RetrievalConfig
    _pairs: tuple[CorpusPair, ...] = field(repr=False)
    _automata: tuple[_SuffixAutomaton, ...] = field(repr=False)

    def query(self, sentence: str) -> CorpusContext:
        key = normalize_text(sentence) if self.cfg.normalize else sentence
        scored = []
        for automaton, pair in zip(self._automata, self._pairs):
            score = automaton.longest_match(key)
            if score > 0:
                scored.append((score, pair))
        scored.sort(key=lambda entry: (-entry[0], len(entry[1].source_text), entry[1].index))
        top = scored[: self.cfg.k]
        return CorpusContext(
            examples=tuple(pair for _, pair in top), scores=tuple(score for score, _ in top)
        )


def build_lcs_index(
    corpus: list[CorpusPair], cfg: RetrievalConfig = RetrievalConfig()
) -> LcsIndex:
    """Build the accelerated corpus index (one automaton per pair)."""
    keys = [normalize_text(p.source_text) if cfg.normalize else p.source_text for p in corpus]
    return LcsIndex(
        cfg=cfg,
        _pairs=tuple(corpus),
        _automata=tuple(_SuffixAutomaton(k) for k in keys),
    )


def retrieve_morph_context(
    analyses: list[MorphemeAnalysis], dictionary: list[DictionaryEntry]
) -> MorphContext:
    """One parser line per morph (word order, then morph order), plus every
    dictionary entry whose headword exactly matches a morph form.

    Verb roots additionally retry with an appended ``y`` because the
    dictionary cites verbs as infinitives.
    """
    by_headword: dict[str, list[DictionaryEntry]] = {}
    for entry in dictionary:
        by_headword.setdefault(entry.headword, []).append(entry)

    lines: list[str] = []
    rendered: list[str] = []
    seen: set[str] = set()
    for analysis in analyses:
        for morph in analysis.morphs:
            lines.append(morph.line())
            candidates = list(by_headword.get(morph.form, ()))
            if morph.is_verb_root:
                candidates.extend(by_headword.get(morph.form + "y", ()))
            for entry in candidates:
                text = entry.rendered()
                if text not in seen:
                    seen.add(text)
                    rendered.append(text)
    return MorphContext(parser_lines=tuple(lines), dictionary_entries=tuple(rendered))


def retrieve_grammar_context(
    analyses: list[MorphemeAnalysis], grammar: list[GrammarSection]
) -> GrammarContext:
    """Sections whose affix keys exactly match a non-root morph form, in morph
    order. The first morph of every word is its root and is skipped (the
    grammar document is affix-keyed)."""
    by_key: dict[str, list[tuple[int, GrammarSection]]] = {}
    for position, section in enumerate(grammar):
        for key in section.affix_keys:
            by_key.setdefault(key, []).append((position, section))

    out: list[tuple[str, GrammarSection]] = []
    used: set[int] = set()
    for analysis in analyses:
        for morph in analysis.morphs[1:]:
            for position, section in by_key.get(morph.form, ()):
                if position not in used:
                    used.add(position)
                    out.append((morph.form, section))
    return GrammarContext(sections=tuple(out))
