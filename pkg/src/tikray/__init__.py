"""Retrieval-augmented LLM translation experiments for Southern Quechua -> Spanish.

Pipeline stages: ingest pedagogical resources, segment source words into
morphemes, retrieve dictionary/grammar/corpus context, assemble ablation
prompts, query an LLM backend, score the outputs, and run a human MQM
annotation workflow with agreement statistics.
"""

__version__ = "0.1.0"
