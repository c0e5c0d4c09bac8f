from __future__ import annotations

import pytest

from conftest import golden
from tikray.morphology import analyze_sentence
from tikray.prompts import (
    BASELINE,
    CONDITION_CODES,
    OverrideError,
    PromptBuilder,
    PromptCondition,
    RetrievalMode,
    condition_from_code,
    enumerate_conditions,
    parse_overrides,
    render_context,
    render_task,
)
from tikray.retrieval import retrieve_corpus_examples, retrieve_grammar_context, retrieve_morph_context


class TestConditions:
    def test_eight_distinct(self):
        conditions = enumerate_conditions()
        assert len(conditions) == 8
        assert len(set(conditions)) == 8

    def test_first_is_baseline(self):
        assert enumerate_conditions()[0] == BASELINE

    def test_last_has_all_flags(self):
        last = enumerate_conditions()[-1]
        assert last.use_corpus and last.use_grammar and last.use_morph

    def test_codes_fixed_order(self):
        assert CONDITION_CODES == ["base", "c", "g", "m", "cg", "cm", "gm", "cgm"]

    def test_code_roundtrip(self):
        for condition in enumerate_conditions():
            assert condition_from_code(condition.code) == condition

    def test_unknown_code_rejected(self):
        with pytest.raises(ValueError):
            condition_from_code("x")


class TestRenderTask:
    def test_figure_template(self):
        assert render_task("kay wasiqa turiypam") == (
            "[TAREA] Traduce la siguiente frase del quechua al español. "
            "Responde sólo con la traducción:\n"
            "quechua: kay wasiqa turiypam\n"
            "español:"
        )

    def test_single_char_source(self):
        assert "quechua: x\nespañol:" in render_task("x")

    def test_empty_source_rejected(self):
        with pytest.raises(ValueError):
            render_task("")


class TestRenderContext:
    def test_baseline_empty(self):
        assert render_context(BASELINE) == ""

    def test_all_empty_contexts_empty(self, bundle, lexicon):
        cond = PromptCondition(use_corpus=True, use_grammar=True, use_morph=True)
        ctx = retrieve_corpus_examples("qqqq", [])
        assert render_context(cond, corpus_ctx=ctx) == ""

    def test_corpus_block_lines(self, bundle):
        cond = PromptCondition(use_corpus=True)
        ctx = retrieve_corpus_examples("qam allinta tusunki", list(bundle.corpus))
        text = render_context(cond, corpus_ctx=ctx)
        lines = text.split("\n")
        assert lines[0] == "[CONTEXTO]"
        assert lines[1].startswith("quechua: ") and lines[2].startswith("español: ")
        assert len(ctx.examples) == 3

    def test_morph_block_matches_parser_then_entries(self, bundle, lexicon):
        cond = PromptCondition(use_morph=True)
        analyses = analyze_sentence("qam allinta tusunki", lexicon)
        ctx = retrieve_morph_context(analyses, list(bundle.dictionary))
        text = render_context(cond, morph_ctx=ctx)
        assert text.startswith("[CONTEXTO]\nqam: [PrnPers+2sg]\n")
        assert "allin. adj. Bueno" in text

    def test_block_order_corpus_grammar_morph(self, bundle, lexicon):
        cond = PromptCondition(use_corpus=True, use_grammar=True, use_morph=True)
        analyses = analyze_sentence("qam allinta tusunki", lexicon)
        text = render_context(
            cond,
            corpus_ctx=retrieve_corpus_examples("qam allinta tusunki", list(bundle.corpus)),
            grammar_ctx=retrieve_grammar_context(analyses, list(bundle.grammar)),
            morph_ctx=retrieve_morph_context(analyses, list(bundle.dictionary)),
        )
        i_corpus = text.index("quechua: ")
        i_grammar = text.index("ta: CASO ACUSATIVO")
        i_morph = text.index("qam: [PrnPers+2sg]")
        assert i_corpus < i_grammar < i_morph


class TestBuildPrompt:
    @pytest.fixture()
    def builder(self, bundle, lexicon):
        return PromptBuilder(bundle, lexicon=lexicon)

    def test_baseline_reproduces_task(self, builder, items_by_id):
        built = builder.build(items_by_id["q02"], BASELINE, RetrievalMode.AUTO)
        assert built.full_prompt == golden("prompt_q02_base_auto.txt")
        assert built.context_text == ""

    def test_baseline_equivalence_every_item_and_mode(self, builder, bundle):
        for item in bundle.dataset:
            for mode in RetrievalMode:
                built = builder.build(item, BASELINE, mode)
                assert built.full_prompt == render_task(item.source_text)

    def test_morph_golden(self, builder, items_by_id):
        built = builder.build(items_by_id["q01"], condition_from_code("m"), RetrievalMode.AUTO)
        assert built.full_prompt == golden("prompt_q01_m_auto.txt")

    def test_grammar_golden(self, builder, items_by_id):
        built = builder.build(items_by_id["q01"], condition_from_code("g"), RetrievalMode.AUTO)
        assert built.full_prompt == golden("prompt_q01_g_auto.txt")

    def test_corpus_golden(self, builder, items_by_id):
        built = builder.build(items_by_id["q01"], condition_from_code("c"), RetrievalMode.AUTO)
        assert built.full_prompt == golden("prompt_q01_c_auto.txt")

    def test_deterministic(self, builder, items_by_id):
        cond = condition_from_code("cgm")
        a = builder.build(items_by_id["q01"], cond, RetrievalMode.AUTO)
        b = builder.build(items_by_id["q01"], cond, RetrievalMode.AUTO)
        assert a == b

    def test_enabled_blocks_match_flags(self, builder, items_by_id):
        built = builder.build(items_by_id["q01"], condition_from_code("gm"), RetrievalMode.AUTO)
        assert "quechua: rimanakunapaq" not in built.context_text  # no corpus block
        assert "ta: CASO ACUSATIVO" in built.context_text
        assert "qam: [PrnPers+2sg]" in built.context_text

    def test_manual_mode_substitutes_override(self, bundle, lexicon, items_by_id):
        overrides = {("q01", "m"): "X"}
        builder = PromptBuilder(bundle, lexicon=lexicon, overrides=overrides)
        built = builder.build(items_by_id["q01"], condition_from_code("m"), RetrievalMode.MANUAL)
        assert built.context_text == "X"
        assert built.full_prompt.startswith("[CONTEXTO]\nX\n\n[TAREA]")

    def test_manual_without_override_names_cell(self, bundle, lexicon, items_by_id):
        builder = PromptBuilder(bundle, lexicon=lexicon)
        with pytest.raises(OverrideError, match="q01.*'m'"):
            builder.build(items_by_id["q01"], condition_from_code("m"), RetrievalMode.MANUAL)


class TestOverridesFile:
    def test_parse_blocks(self):
        data = "@q01\tm\nline one\nline two\n---\n@q02\tcgm\nonly\n---\n".encode()
        overrides = parse_overrides(data)
        assert overrides[("q01", "m")] == "line one\nline two"
        assert overrides[("q02", "cgm")] == "only"

    def test_empty_context_block(self):
        overrides = parse_overrides(b"@q01\tg\n---\n")
        assert overrides[("q01", "g")] == ""

    def test_unterminated_block_rejected(self):
        with pytest.raises(ValueError, match="not terminated"):
            parse_overrides(b"@q01\tm\ntext\n")

    def test_bad_condition_code_rejected(self):
        with pytest.raises(ValueError):
            parse_overrides(b"@q01\tbogus\n---\n")

    def test_stray_content_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            parse_overrides(b"floating text\n")
