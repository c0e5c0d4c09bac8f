"""Morphological segmentation of source words.

Two analyzers share one output type: an adapter around an external parser
process, and a deterministic greedy fallback driven by a root/suffix lexicon.
Every analysis satisfies the coverage invariant: the morph forms, hyphens
ignored, concatenate back to the normalized, punctuation-stripped surface.
"""

from __future__ import annotations

import logging
import subprocess
from dataclasses import dataclass

from .resources import normalize_text

logger = logging.getLogger(__name__)

# Stripped before segmentation; never glossed.
_PUNCTUATION = ".,!?¿¡"
_STRIP_TABLE = str.maketrans("", "", _PUNCTUATION)

UNKNOWN_TAG = "UNK"


class LexiconError(ValueError):
    """A lexicon file violates its format."""


@dataclass(frozen=True)
class Morph:
    """One segmented morph with its gloss tags and candidate translations.

    Ambiguity is carried, not resolved: syncretic forms keep every gloss tag
    and polysemous roots keep every candidate translation.
    """

    form: str
    gloss_tags: tuple[str, ...]
    translations: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.form:
            raise ValueError("morph with empty form")
        if not self.gloss_tags:
            raise ValueError(f"morph {self.form!r} without gloss tags")

    def line(self) -> str:
        """Parser-style context line: ``form: translation1, translation2 [tag][tag]``."""
        tags = "".join(f"[{t}]" for t in self.gloss_tags)
        if self.translations:
            return f"{self.form}: {', '.join(self.translations)} {tags}"
        return f"{self.form}: {tags}"

    @property
    def is_verb_root(self) -> bool:
        return "VRoot" in self.gloss_tags


@dataclass(frozen=True)
class MorphemeAnalysis:
    """Segmentation of one surface word."""

    surface: str
    morphs: tuple[Morph, ...]
    analyzer_id: str = "fallback"

    def __post_init__(self):
        expected = strip_punctuation(normalize_text(self.surface))
        joined = "".join(m.form for m in self.morphs).replace("-", "")
        if joined != expected:
            raise ValueError(
                f"analysis of {self.surface!r} does not cover the surface: "
                f"{joined!r} != {expected!r}"
            )

    @property
    def is_unknown(self) -> bool:
        return any(UNKNOWN_TAG in m.gloss_tags for m in self.morphs)


def strip_punctuation(text: str) -> str:
    return text.translate(_STRIP_TABLE)


@dataclass(frozen=True)
class FallbackLexicon:
    """Root and suffix inventory for the greedy segmenter.

    ``suffixes`` is kept longest-form-first so the left-to-right scan always
    takes the longest match available at each position.
    """

    roots: dict[str, tuple[tuple[str, ...], tuple[str, ...]]]
    suffixes: tuple[tuple[str, tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self):
        if "" in self.roots:
            raise LexiconError("empty root form")
        ordered = tuple(sorted(self.suffixes, key=lambda s: -len(s[0])))
        object.__setattr__(self, "suffixes", ordered)

    @classmethod
    def empty(cls) -> "FallbackLexicon":
        return cls(roots={}, suffixes=())

    @classmethod
    def from_tsv(cls, data: bytes) -> "FallbackLexicon":
        """Parse ``kind<TAB>form<TAB>tag1,tag2<TAB>tr1||tr2`` lines
        (kind is ``root`` or ``suffix``; translations may be empty)."""
        roots: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {}
        suffixes: list[tuple[str, tuple[str, ...], tuple[str, ...]]] = []
        for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) < 3:
                raise LexiconError(f"lexicon line {lineno} needs kind, form and tags")
            kind, raw_form = cells[0].strip(), cells[1]
            form = normalize_text(raw_form)
            tags = tuple(t.strip() for t in cells[2].split(",") if t.strip())
            translations = tuple(
                t for t in (p.strip() for p in (cells[3] if len(cells) > 3 else "").split("||")) if t
            )
            if not form or not tags:
                raise LexiconError(f"lexicon line {lineno} has empty form or tags")
            if kind == "root":
                roots[form] = (tags, translations)
            elif kind == "suffix":
                suffixes.append((form, tags, translations))
            else:
                raise LexiconError(f"lexicon line {lineno}: unknown kind {kind!r}")
        return cls(roots=roots, suffixes=tuple(suffixes))


def _unknown_analysis(surface: str, core: str, analyzer_id: str = "fallback") -> MorphemeAnalysis:
    morphs = (Morph(form=core, gloss_tags=(UNKNOWN_TAG,)),) if core else ()
    return MorphemeAnalysis(surface=surface, morphs=morphs, analyzer_id=analyzer_id)


def segment(word: str, lexicon: FallbackLexicon) -> MorphemeAnalysis:
    """Greedy segmentation: longest matching root at the word start, then
    repeated longest-suffix matches left to right. No backtracking; a word
    this cannot cover comes back as a single UNK morph so runs never abort.
    """
    if not word:
        raise ValueError("cannot segment an empty word")
    core = strip_punctuation(normalize_text(word))
    if not core:
        return MorphemeAnalysis(surface=word, morphs=(), analyzer_id="fallback")

    root = ""
    for length in range(len(core), 0, -1):
        if core[:length] in lexicon.roots:
            root = core[:length]
            break
    if not root:
        return _unknown_analysis(word, core)

    tags, translations = lexicon.roots[root]
    morphs = [Morph(form=root, gloss_tags=tags, translations=translations)]
    pos = len(root)
    while pos < len(core):
        for form, suffix_tags, suffix_tr in lexicon.suffixes:
            if core.startswith(form, pos):
                morphs.append(Morph(form=form, gloss_tags=suffix_tags, translations=suffix_tr))
                pos += len(form)
                break
        else:
            return _unknown_analysis(word, core)
    return MorphemeAnalysis(surface=word, morphs=tuple(morphs), analyzer_id="fallback")


def analyze_sentence(sentence: str, lexicon: FallbackLexicon) -> list[MorphemeAnalysis]:
    """Segment every whitespace-delimited word; punctuation-only tokens are dropped."""
    analyses = []
    for token in sentence.split():
        analysis = segment(token, lexicon)
        if analysis.morphs:
            analyses.append(analysis)
    return analyses


@dataclass(frozen=True)
class AnalyzerAdapter:
    """Handle for an external analyzer child process.

    Protocol: the process is invoked once per sentence with one input word per
    line; for each word it prints ``morphform<TAB>comma-separated-tags<TAB>tr1||tr2``
    lines and a blank line to terminate that word's analysis.
    """

    command: tuple[str, ...]
    timeout: float = 30.0


def _parse_adapter_output(words: list[str], output: str) -> list[list[Morph]]:
    # Each blank line terminates one word's analysis; a trailing group without
    # its terminator is accepted, and missing trailing groups mean UNK words.
    lines = output.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    groups: list[list[Morph]] = []
    current: list[Morph] = []
    for line in lines:
        if not line.strip():
            groups.append(current)
            current = []
            continue
        cells = line.split("\t")
        form = normalize_text(cells[0]).strip("-")
        tags = tuple(t.strip() for t in (cells[1] if len(cells) > 1 else "").split(",") if t.strip())
        translations = tuple(
            t for t in (p.strip() for p in (cells[2] if len(cells) > 2 else "").split("||")) if t
        )
        current.append(Morph(form=form, gloss_tags=tags or (UNKNOWN_TAG,), translations=translations))
    if current:
        groups.append(current)
    if len(groups) > len(words):
        raise ValueError(f"analyzer returned {len(groups)} analyses for {len(words)} words")
    groups.extend([] for _ in range(len(words) - len(groups)))
    return groups


def analyze_external(
    word: str, adapter: AnalyzerAdapter, lexicon: FallbackLexicon | None = None
) -> MorphemeAnalysis:
    """Run the external analyzer on one word, falling back to ``segment`` on
    any process, protocol or coverage failure. Zero output lines mean the
    analyzer could not segment the word (UNK)."""
    return analyze_sentence_external(word, adapter, lexicon)[0]


def analyze_sentence_external(
    sentence: str, adapter: AnalyzerAdapter, lexicon: FallbackLexicon | None = None
) -> list[MorphemeAnalysis]:
    """Analyze a whole sentence with one adapter invocation."""
    fallback = lexicon or FallbackLexicon.empty()
    words = sentence.split()

    def fall_back(reason: str) -> list[MorphemeAnalysis]:
        logger.warning("external analyzer failed (%s); using fallback segmenter", reason)
        return [segment(w, fallback) for w in words]

    try:
        proc = subprocess.run(
            list(adapter.command),
            input="\n".join(words) + "\n",
            capture_output=True,
            text=True,
            timeout=adapter.timeout,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        return fall_back(str(exc))
    if proc.returncode != 0:
        return fall_back(f"exit status {proc.returncode}")

    try:
        groups = _parse_adapter_output(words, proc.stdout)
        analyses = []
        for w, morphs in zip(words, groups):
            if morphs:
                analyses.append(
                    MorphemeAnalysis(surface=w, morphs=tuple(morphs), analyzer_id="external")
                )
            else:
                core = strip_punctuation(normalize_text(w))
                analyses.append(_unknown_analysis(w, core, analyzer_id="external"))
        return analyses
    except ValueError as exc:
        return fall_back(f"protocol error: {exc}")
