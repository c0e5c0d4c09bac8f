"""Parsing and persistence for the pedagogical resources and the evaluation dataset.

Four plain-text formats feed the pipeline:

- dictionary: one record per line,
  ``headword<TAB>pos<TAB>sense1||sense2<TAB>example1||example2<TAB>variant1||variant2``
  (trailing fields may be empty or omitted)
- grammar: blocks separated by a line containing only ``---``; first line of a
  block is the comma-separated affix keys, second line the title, the rest the body
- corpus: ``source<TAB>target`` per line
- dataset: ``id<TAB>source<TAB>reference`` per line

All text is UTF-8. Matching keys (headwords, affix keys) are normalized;
text that gets quoted into prompts is kept verbatim apart from trimming.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

_WHITESPACE_RE = re.compile(r"\s+")

# Apostrophe-like code points folded to U+0027. Quechua ejectives (p', t', k',
# q', ch') show up with any of these depending on the source document.
# U+2018 left single quote, U+2019 right single quote, U+201A low-9 quote,
# U+201B high-reversed-9 quote, U+02BC modifier letter apostrophe,
# U+02BB modifier letter turned comma, U+0060 grave, U+00B4 acute,
# U+2032 prime.
_APOSTROPHES = "‘’‚‛ʼʻ`´′"
_APOSTROPHE_RE = re.compile(f"[{_APOSTROPHES}]")


class ResourceError(ValueError):
    """A resource file violates its format or an entry invariant."""

    def __init__(self, message: str, *, line: int | None = None, section: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif section is not None:
            loc = f" (section {section})"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.section = section


def normalize_text(raw: str) -> str:
    """Normalize text for matching: NFC, apostrophes folded to U+0027,
    lowercased, whitespace runs collapsed, ends trimmed.

    Total and idempotent. Applied to match keys only, never to text quoted
    into prompts.
    """
    text = unicodedata.normalize("NFC", raw)
    text = _APOSTROPHE_RE.sub("'", text)
    text = text.lower()
    text = unicodedata.normalize("NFC", text)
    text = _WHITESPACE_RE.sub(" ", text)
    return text.strip()


@dataclass(frozen=True)
class DictionaryEntry:
    """One dictionary record; ``headword`` is stored normalized."""

    headword: str
    pos: str
    senses: tuple[str, ...]
    examples: tuple[str, ...] = ()
    variants: tuple[str, ...] = ()
    source_id: str = ""

    def __post_init__(self):
        if not self.headword:
            raise ResourceError("dictionary entry with empty headword")
        if not self.senses:
            raise ResourceError(f"dictionary entry {self.headword!r} has no senses")

    def rendered(self) -> str:
        """Entry text as quoted into prompts: ``headword. pos sense1; sense2. EJEM: ...``

        ``pos`` carries its own punctuation (``adj.``, ``s. Gram.``); senses and
        examples get a closing period appended.
        """
        parts = [f"{self.headword}."]
        if self.pos:
            parts.append(self.pos)
        parts.append("; ".join(self.senses) + ".")
        text = " ".join(parts)
        if self.examples:
            text += " EJEM: " + "; ".join(self.examples) + "."
        return text


@dataclass(frozen=True)
class GrammarSection:
    """One affix-keyed section of the grammar document."""

    affix_keys: tuple[str, ...]
    title: str
    body: str
    source_id: str = ""

    def __post_init__(self):
        if not self.affix_keys:
            raise ResourceError("grammar section without affix keys")
        for key in self.affix_keys:
            if not key or _WHITESPACE_RE.search(key):
                raise ResourceError(f"bad affix key {key!r}")
        if not self.body:
            raise ResourceError("grammar section without body")


@dataclass(frozen=True)
class CorpusPair:
    """One sentence pair of the parallel corpus; texts verbatim apart from trimming."""

    source_text: str
    target_text: str
    origin: str = ""
    index: int = 0


@dataclass(frozen=True)
class DatasetItem:
    """One evaluation item: source sentence plus its reference translation."""

    item_id: str
    source_text: str
    reference_text: str


def _decode_lines(data: bytes) -> list[str]:
    return data.decode("utf-8").replace("\r\n", "\n").split("\n")


def _split_multi(cell: str) -> tuple[str, ...]:
    return tuple(part for part in (p.strip() for p in cell.split("||")) if part)


def parse_dictionary(data: bytes, source_id: str = "") -> list[DictionaryEntry]:
    """Parse dictionary records, preserving file order.

    Raises ResourceError with the line number for malformed records and for
    exact duplicates of (headword, pos, first sense).
    """
    entries: list[DictionaryEntry] = []
    seen: set[tuple[str, str, str]] = set()
    for lineno, line in enumerate(_decode_lines(data), start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) < 3:
            raise ResourceError("dictionary record needs headword, pos and senses", line=lineno)
        headword = normalize_text(cells[0])
        if not headword:
            raise ResourceError("empty headword", line=lineno)
        senses = _split_multi(cells[2])
        if not senses:
            raise ResourceError(f"entry {headword!r} has no senses", line=lineno)
        key = (headword, cells[1].strip(), senses[0])
        if key in seen:
            raise ResourceError(f"duplicate dictionary entry {headword!r}", line=lineno)
        seen.add(key)
        entries.append(
            DictionaryEntry(
                headword=headword,
                pos=cells[1].strip(),
                senses=senses,
                examples=_split_multi(cells[3]) if len(cells) > 3 else (),
                variants=_split_multi(cells[4]) if len(cells) > 4 else (),
                source_id=source_id,
            )
        )
    return entries


def parse_grammar(data: bytes, source_id: str = "") -> list[GrammarSection]:
    """Parse grammar section blocks, preserving file order."""
    text = data.decode("utf-8").replace("\r\n", "\n")
    sections: list[GrammarSection] = []
    blocks = [b for b in re.split(r"^---$", text, flags=re.MULTILINE) if b.strip()]
    for ordinal, block in enumerate(blocks, start=1):
        lines = block.strip("\n").split("\n")
        keys = tuple(k for k in (normalize_text(key).lstrip("-") for key in lines[0].split(",")) if k)
        if not keys:
            raise ResourceError("section missing affix keys", section=ordinal)
        if len(lines) < 3 or not "\n".join(lines[2:]).strip():
            raise ResourceError("section missing body", section=ordinal)
        sections.append(
            GrammarSection(
                affix_keys=keys,
                title=lines[1].strip(),
                body="\n".join(lines[2:]),
                source_id=source_id,
            )
        )
    return sections


def load_corpus(data: bytes, origin: str = "") -> list[CorpusPair]:
    """Parse ``source<TAB>target`` lines into corpus pairs with contiguous indices."""
    pairs: list[CorpusPair] = []
    for lineno, line in enumerate(_decode_lines(data), start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise ResourceError("corpus line needs exactly one tab", line=lineno)
        source, target = cells[0].strip(), cells[1].strip()
        if not source or not target:
            raise ResourceError("corpus line with empty side", line=lineno)
        pairs.append(CorpusPair(source_text=source, target_text=target, origin=origin, index=len(pairs)))
    return pairs


def load_dataset(data: bytes) -> list[DatasetItem]:
    """Parse ``id<TAB>source<TAB>reference`` lines; ids must be unique."""
    items: list[DatasetItem] = []
    seen: set[str] = set()
    for lineno, line in enumerate(_decode_lines(data), start=1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 3:
            raise ResourceError("dataset line needs id, source and reference", line=lineno)
        item_id, source, reference = (c.strip() for c in cells)
        if not item_id or not source or not reference:
            raise ResourceError("dataset line with empty field", line=lineno)
        if item_id in seen:
            raise ResourceError(f"duplicate dataset id {item_id!r}", line=lineno)
        seen.add(item_id)
        items.append(DatasetItem(item_id=item_id, source_text=source, reference_text=reference))
    if not items:
        raise ResourceError("empty dataset")
    return items


def _bundle_digest(
    dictionary: tuple[DictionaryEntry, ...],
    grammar: tuple[GrammarSection, ...],
    corpus: tuple[CorpusPair, ...],
    dataset: tuple[DatasetItem, ...],
) -> str:
    payload = {
        "dictionary": [
            [e.headword, e.pos, list(e.senses), list(e.examples), list(e.variants)] for e in dictionary
        ],
        "grammar": [[list(s.affix_keys), s.title, s.body] for s in grammar],
        "corpus": [[p.source_text, p.target_text] for p in corpus],
        "dataset": [[i.item_id, i.source_text, i.reference_text] for i in dataset],
    }
    blob = json.dumps(payload, ensure_ascii=True, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


@dataclass(frozen=True)
class ResourceBundle:
    """Immutable snapshot of all four resources plus a content digest.

    The digest depends only on record contents, so re-loading a persisted
    bundle reproduces it exactly.
    """

    dictionary: tuple[DictionaryEntry, ...]
    grammar: tuple[GrammarSection, ...]
    corpus: tuple[CorpusPair, ...]
    dataset: tuple[DatasetItem, ...]
    bundle_hash: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.dataset:
            raise ResourceError("bundle requires a non-empty dataset")
        digest = _bundle_digest(self.dictionary, self.grammar, self.corpus, self.dataset)
        if self.bundle_hash and self.bundle_hash != digest:
            raise ResourceError("bundle hash does not match contents")
        object.__setattr__(self, "bundle_hash", digest)

    @classmethod
    def from_files(
        cls,
        dictionary_path: str | Path | None,
        grammar_path: str | Path | None,
        corpus_path: str | Path | None,
        dataset_path: str | Path,
    ) -> "ResourceBundle":
        def read(p: str | Path | None) -> bytes:
            return Path(p).read_bytes() if p else b""

        return cls(
            dictionary=tuple(parse_dictionary(read(dictionary_path))),
            grammar=tuple(parse_grammar(read(grammar_path))),
            corpus=tuple(load_corpus(read(corpus_path))),
            dataset=tuple(load_dataset(Path(dataset_path).read_bytes())),
        )

    def save(self, directory: str | Path) -> None:
        """Persist as one file per resource plus a manifest with the hash."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        dict_lines = [
            "\t".join(
                [e.headword, e.pos, "||".join(e.senses), "||".join(e.examples), "||".join(e.variants)]
            )
            for e in self.dictionary
        ]
        (out / "dictionary.tsv").write_text("\n".join(dict_lines) + ("\n" if dict_lines else ""), "utf-8")
        blocks = [f"{','.join(s.affix_keys)}\n{s.title}\n{s.body}" for s in self.grammar]
        (out / "grammar.txt").write_text("\n---\n".join(blocks) + ("\n" if blocks else ""), "utf-8")
        corpus_lines = [f"{p.source_text}\t{p.target_text}" for p in self.corpus]
        (out / "corpus.tsv").write_text("\n".join(corpus_lines) + ("\n" if corpus_lines else ""), "utf-8")
        data_lines = [f"{i.item_id}\t{i.source_text}\t{i.reference_text}" for i in self.dataset]
        (out / "dataset.tsv").write_text("\n".join(data_lines) + "\n", "utf-8")
        manifest = {
            "bundle_hash": self.bundle_hash,
            "counts": {
                "dictionary": len(self.dictionary),
                "grammar": len(self.grammar),
                "corpus": len(self.corpus),
                "dataset": len(self.dataset),
            },
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", "utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "ResourceBundle":
        """Load a persisted bundle and verify its manifest hash."""
        src = Path(directory)
        bundle = cls.from_files(
            src / "dictionary.tsv", src / "grammar.txt", src / "corpus.tsv", src / "dataset.tsv"
        )
        manifest_path = src / "manifest.json"
        if manifest_path.exists():
            recorded = json.loads(manifest_path.read_text("utf-8")).get("bundle_hash")
            if recorded and recorded != bundle.bundle_hash:
                raise ResourceError(f"bundle at {src} does not match its manifest hash")
        return bundle
