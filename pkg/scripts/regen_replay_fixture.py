#!/usr/bin/env python3
"""Regenerate the replay-backend fixture and its frozen summary golden.

Outputs are a fixed function of each item's reference translation and the
condition (more context -> closer to the reference), so the whole replay run
is deterministic. Run from the repository root after changing the fixture
bundle or the prompt format:

    python3 scripts/regen_replay_fixture.py

The prompt goldens under tests/data/golden/prompt_*.txt are hand-authored
oracles — this script must never rewrite them.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from tikray.evaluation import aggregate, score_bleu, summaries_to_csv  # noqa: E402
from tikray.llm import ModelSpec, ReplayBackend, run_matrix  # noqa: E402
from tikray.morphology import FallbackLexicon  # noqa: E402
from tikray.prompts import PromptBuilder, RetrievalMode, enumerate_conditions, prompt_digest  # noqa: E402
from tikray.resources import ResourceBundle  # noqa: E402

DATA = ROOT / "tests" / "data"


def fixture_output(reference: str, condition_code: str) -> str:
    words = reference.split()
    if "m" in condition_code and condition_code != "base":
        return reference
    if condition_code == "base":
        return " ".join(words[1:-1]) if len(words) >= 3 else reference
    return " ".join(words[:-1]) if len(words) >= 2 else reference


def main() -> None:
    bundle = ResourceBundle.from_files(
        DATA / "bundle_src" / "dictionary.tsv",
        DATA / "bundle_src" / "grammar.txt",
        DATA / "bundle_src" / "corpus.tsv",
        DATA / "bundle_src" / "dataset.tsv",
    )
    lexicon = FallbackLexicon.from_tsv((DATA / "lexicon.tsv").read_bytes())
    builder = PromptBuilder(bundle, lexicon=lexicon)
    references = {i.item_id: i.reference_text for i in bundle.dataset}

    prompts = [
        builder.build(item, condition, RetrievalMode.AUTO)
        for item in bundle.dataset
        for condition in enumerate_conditions()
    ]
    lines = []
    fixture = {}
    for p in prompts:
        output = fixture_output(references[p.item_id], p.condition.code)
        digest = prompt_digest(p.full_prompt)
        fixture[digest] = output
        lines.append(f"{digest}\t{ReplayBackend.escape(output)}")
    (DATA / "replay_fixture.tsv").write_text("\n".join(lines) + "\n", "utf-8")

    records = run_matrix(prompts, [ModelSpec(model_id="replay-model")], ReplayBackend(fixture))
    scores = score_bleu(records, references)
    summary_csv = summaries_to_csv(aggregate(scores))
    (DATA / "golden" / "summary_replay.csv").write_text(summary_csv, "utf-8")
    print(f"{len(lines)} fixture outputs, summary golden written")


if __name__ == "__main__":
    main()
