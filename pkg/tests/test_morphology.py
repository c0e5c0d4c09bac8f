from __future__ import annotations

import sys

import pytest

from tikray.morphology import (
    AnalyzerAdapter,
    FallbackLexicon,
    LexiconError,
    Morph,
    MorphemeAnalysis,
    analyze_external,
    analyze_sentence,
    analyze_sentence_external,
    segment,
    strip_punctuation,
)
from tikray.resources import normalize_text


def coverage_holds(analysis: MorphemeAnalysis) -> bool:
    joined = "".join(m.form for m in analysis.morphs).replace("-", "")
    return joined == strip_punctuation(normalize_text(analysis.surface))


class TestSegment:
    def test_verb_with_two_suffixes(self, lexicon):
        analysis = segment("rantikuq", lexicon)
        assert [m.form for m in analysis.morphs] == ["ranti", "ku", "q"]
        assert analysis.morphs[0].translations == ("comprar",)

    def test_possessive(self, lexicon):
        analysis = segment("ñañay", lexicon)
        assert [m.form for m in analysis.morphs] == ["ñaña", "y"]

    def test_unknown_word_single_unk_morph(self, lexicon):
        analysis = segment("zzz", lexicon)
        assert [m.form for m in analysis.morphs] == ["zzz"]
        assert analysis.morphs[0].gloss_tags == ("UNK",)
        assert analysis.is_unknown

    def test_punctuation_stripped_and_never_glossed(self, lexicon):
        analysis = segment("tukuptiyki,", lexicon)
        assert [m.form for m in analysis.morphs] == ["tuku", "pti", "yki"]

    def test_punctuation_only_token_empty_analysis(self, lexicon):
        analysis = segment("¡!", lexicon)
        assert analysis.morphs == ()

    def test_longest_root_wins(self, lexicon):
        # "runasimi" is in the lexicon as a compound root; greedy matching
        # must prefer it over the shorter "runa".
        analysis = segment("runasimita", lexicon)
        assert [m.form for m in analysis.morphs] == ["runasimi", "ta"]

    def test_dead_end_falls_back_to_unk(self, lexicon):
        # root matches but the tail is not a suffix sequence
        analysis = segment("rantixyz", lexicon)
        assert analysis.is_unknown
        assert coverage_holds(analysis)

    def test_deterministic(self, lexicon):
        first = segment("pichachkanki", lexicon)
        second = segment("pichachkanki", lexicon)
        assert first == second

    def test_empty_word_rejected(self, lexicon):
        with pytest.raises(ValueError):
            segment("", lexicon)

    def test_greedy_suffix_cannot_extend(self, lexicon):
        # brute check on one word: every chosen suffix is the longest match
        # available at its position
        analysis = segment("wasiykita", lexicon)
        core = "wasiykita"
        pos = len(analysis.morphs[0].form)
        suffix_forms = [s[0] for s in lexicon.suffixes]
        for morph in analysis.morphs[1:]:
            longer = [
                f for f in suffix_forms if len(f) > len(morph.form) and core.startswith(f, pos)
            ]
            assert not longer
            pos += len(morph.form)

    def test_coverage_on_fixture_dataset(self, bundle, lexicon):
        for item in bundle.dataset:
            for analysis in analyze_sentence(item.source_text, lexicon):
                assert coverage_holds(analysis)


class TestMorphRendering:
    def test_line_with_translation(self):
        morph = Morph(form="allin", gloss_tags=("^DB", "NRoot"), translations=("bueno",))
        assert morph.line() == "allin: bueno [^DB][NRoot]"

    def test_line_without_translation(self):
        morph = Morph(form="qam", gloss_tags=("PrnPers+2sg",))
        assert morph.line() == "qam: [PrnPers+2sg]"

    def test_line_with_multiple_candidates(self):
        morph = Morph(form="taki", gloss_tags=("NRoot",), translations=("canción", "cantar"))
        assert morph.line() == "taki: canción, cantar [NRoot]"


class TestLexicon:
    def test_suffixes_ordered_longest_first(self, lexicon):
        lengths = [len(s[0]) for s in lexicon.suffixes]
        assert lengths == sorted(lengths, reverse=True)

    def test_bad_kind_rejected(self):
        with pytest.raises(LexiconError):
            FallbackLexicon.from_tsv(b"infix\tx\tT\t\n")

    def test_missing_tags_rejected(self):
        with pytest.raises(LexiconError):
            FallbackLexicon.from_tsv(b"root\tx\t\t\n")

    def test_comments_and_blanks_skipped(self):
        lex = FallbackLexicon.from_tsv(b"# comment\n\nroot\twasi\tNRoot\tcasa\n")
        assert "wasi" in lex.roots


ADAPTER_OK = (
    "import sys\n"
    "for word in sys.stdin.read().split():\n"
    "    if word == 'rantikuq':\n"
    "        sys.stdout.write('ranti\\tVRoot,^DB\\tcomprar\\nku\\t+RflxInt,VDeriv\\t\\n"
    "q\\t+Ag,NS\\t\\n\\n')\n"
    "    else:\n"
    "        sys.stdout.write('\\n')\n"
)


class TestExternalAdapter:
    def test_adapter_lines_parsed(self):
        adapter = AnalyzerAdapter(command=(sys.executable, "-c", ADAPTER_OK))
        analysis = analyze_external("rantikuq", adapter)
        assert analysis.analyzer_id == "external"
        assert [m.form for m in analysis.morphs] == ["ranti", "ku", "q"]
        assert coverage_holds(analysis)

    def test_zero_lines_mean_unk(self):
        adapter = AnalyzerAdapter(command=(sys.executable, "-c", ADAPTER_OK))
        analysis = analyze_external("zzz", adapter)
        assert analysis.is_unknown
        assert analysis.analyzer_id == "external"

    def test_unavailable_adapter_matches_fallback(self, lexicon):
        adapter = AnalyzerAdapter(command=("/nonexistent/analyzer",))
        external = analyze_external("rantikuq", adapter, lexicon)
        assert external == segment("rantikuq", lexicon)

    def test_crashing_adapter_falls_back(self, lexicon):
        adapter = AnalyzerAdapter(command=(sys.executable, "-c", "import sys; sys.exit(9)"))
        analysis = analyze_external("ñañay", adapter, lexicon)
        assert analysis == segment("ñañay", lexicon)

    def test_bad_coverage_falls_back(self, lexicon):
        # adapter output that does not concatenate back to the word
        bad = "print('xx\\tVRoot\\t')"
        adapter = AnalyzerAdapter(command=(sys.executable, "-c", bad))
        analysis = analyze_external("ñañay", adapter, lexicon)
        assert analysis == segment("ñañay", lexicon)

    def test_sentence_level_grouping(self):
        script = (
            "import sys\n"
            "words = sys.stdin.read().split()\n"
            "out = {'ñañay': 'ñaña\\tNRoot\\thermana\\ny\\t+1sg.Poss\\t\\n\\n'}\n"
            "for w in words:\n"
            "    sys.stdout.write(out.get(w, '\\n'))\n"
        )
        adapter = AnalyzerAdapter(command=(sys.executable, "-c", script))
        analyses = analyze_sentence_external("ñañay zzz", adapter)
        assert [m.form for m in analyses[0].morphs] == ["ñaña", "y"]
        assert analyses[1].is_unknown
