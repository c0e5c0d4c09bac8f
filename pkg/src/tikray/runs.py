"""Run configuration, manifests, and the file-backed pipeline stages.

Stages communicate through files under ``<runs_dir>/<run_id>/`` so every step
is independently inspectable and re-runnable:

- ``prompts.jsonl``     one assembled prompt per (item, condition, mode)
- ``prompts/*.txt``     the same prompts as individual text files
- ``records.jsonl``     one translation record per (prompt, model)
- ``scores.csv``        per-item metric values
- ``summary.csv``       per-cell means
- ``report_*.txt``      rendered report tables
- ``manifest.json``     config snapshot, bundle hash, per-stage checksums

Checksums are computed over timestamp-free canonical content, so a re-run
with unchanged inputs reproduces them exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .evaluation import (
    CellSummary,
    EvaluationScore,
    ExternalScorer,
    ReportLayout,
    aggregate,
    emit_report,
    score_bleu,
    score_external,
    summaries_to_csv,
)
from .llm import (
    Backend,
    IdentityMockBackend,
    ModelSpec,
    RemoteBackend,
    ReplayBackend,
    ResponseCache,
    TranslationRecord,
    load_records,
    run_matrix,
    save_records,
    strip_timestamps,
)
from .morphology import FallbackLexicon
from .prompts import (
    CONDITION_CODES,
    PromptBuilder,
    PromptBundle,
    RetrievalMode,
    condition_from_code,
    parse_overrides,
    prompt_digest,
)
from .resources import ResourceBundle
from .retrieval import RetrievalConfig


class ConfigError(ValueError):
    """The run configuration is unusable."""


def _parse_scalar(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str) -> dict:
    """Parse the ``key = value`` run-config format (``#`` starts a comment).

    ``param.<name>`` keys collect into the generation-parameter mapping;
    everything else is a flat key. Values parse as JSON scalars when they can.
    """
    out: dict = {"params": {}}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"config line {lineno} is not key = value")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key.startswith("param."):
            out["params"][key[len("param."):]] = _parse_scalar(value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """Everything a run needs; validated against the filesystem up front."""

    bundle_dir: str = ""
    dataset: str = ""
    dictionary: str = ""
    grammar: str = ""
    corpus: str = ""
    lexicon: str = ""
    overrides: str = ""
    backend: str = "mock-identity"
    replay: str = ""
    models: tuple[str, ...] = ("mock",)
    endpoint: str = ""
    auth_env: str = ""
    params: Mapping[str, object] = field(default_factory=dict)
    conditions: tuple[str, ...] = tuple(CONDITION_CODES)
    modes: tuple[str, ...] = ("auto",)
    k: int = 3
    normalize_lcs: bool = True
    cache: str = ""
    runs_dir: str = "runs"
    run_id: str = ""
    max_in_flight: int = 4

    def __post_init__(self):
        unknown = [c for c in self.conditions if c not in CONDITION_CODES]
        if unknown:
            raise ConfigError(f"unknown conditions {unknown}; valid: {CONDITION_CODES}")
        for mode in self.modes:
            RetrievalMode(mode)
        if self.backend not in ("mock-identity", "replay", "remote"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "replay" and not self.replay:
            raise ConfigError("replay backend needs a replay fixture file")
        for path_attr in ("bundle_dir", "dataset", "dictionary", "grammar", "corpus",
                          "lexicon", "overrides", "replay"):
            value = getattr(self, path_attr)
            if value and not Path(value).exists():
                raise ConfigError(f"{path_attr} path does not exist: {value}")
        if not self.bundle_dir and not self.dataset:
            raise ConfigError("config needs either bundle_dir or a dataset file")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        raw = parse_config_text(Path(path).read_text("utf-8"))
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        def split_list(value: str) -> tuple[str, ...]:
            return tuple(v.strip() for v in value.split(",") if v.strip())

        kwargs: dict = {"params": raw.get("params", {})}
        for name in ("bundle_dir", "dataset", "dictionary", "grammar", "corpus", "lexicon",
                     "overrides", "backend", "replay", "endpoint", "auth_env", "cache",
                     "runs_dir", "run_id"):
            if name in raw:
                kwargs[name] = str(raw[name])
        if "models" in raw:
            kwargs["models"] = split_list(str(raw["models"]))
        if "conditions" in raw:
            kwargs["conditions"] = split_list(str(raw["conditions"]))
        if "modes" in raw:
            kwargs["modes"] = split_list(str(raw["modes"]))
        if "k" in raw:
            kwargs["k"] = int(str(raw["k"]))
        if "normalize_lcs" in raw:
            kwargs["normalize_lcs"] = str(raw["normalize_lcs"]).lower() in ("1", "true", "yes", "on")
        if "max_in_flight" in raw:
            kwargs["max_in_flight"] = int(str(raw["max_in_flight"]))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "bundle_dir": self.bundle_dir,
            "dataset": self.dataset,
            "dictionary": self.dictionary,
            "grammar": self.grammar,
            "corpus": self.corpus,
            "lexicon": self.lexicon,
            "overrides": self.overrides,
            "backend": self.backend,
            "replay": self.replay,
            "models": list(self.models),
            "endpoint": self.endpoint,
            "auth_env": self.auth_env,
            "params": dict(self.params),
            "conditions": list(self.conditions),
            "modes": list(self.modes),
            "k": self.k,
            "normalize_lcs": self.normalize_lcs,
            "cache": self.cache,
            "runs_dir": self.runs_dir,
            "max_in_flight": self.max_in_flight,
        }

    def load_bundle(self) -> ResourceBundle:
        if self.bundle_dir:
            return ResourceBundle.load(self.bundle_dir)
        return ResourceBundle.from_files(
            self.dictionary or None, self.grammar or None, self.corpus or None, self.dataset
        )

    def load_lexicon(self) -> FallbackLexicon:
        if not self.lexicon:
            return FallbackLexicon.empty()
        return FallbackLexicon.from_tsv(Path(self.lexicon).read_bytes())

    def load_overrides(self) -> dict[tuple[str, str], str]:
        if not self.overrides:
            return {}
        return parse_overrides(Path(self.overrides).read_bytes())

    def model_specs(self) -> list[ModelSpec]:
        return [
            ModelSpec(model_id=m, endpoint=self.endpoint, params=dict(self.params),
                      auth_env=self.auth_env)
            for m in self.models
        ]

    def make_backend(self) -> Backend:
        if self.backend == "mock-identity":
            return IdentityMockBackend()
        if self.backend == "replay":
            return ReplayBackend.from_file(self.replay)
        return RemoteBackend()


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def make_run_id(bundle_hash: str, config: RunConfig) -> str:
    config_digest = _sha256(json.dumps(config.to_dict(), sort_keys=True))
    return f"run-{bundle_hash[:10]}-{config_digest[:8]}"


@dataclass
class RunPaths:
    root: Path

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.json"

    @property
    def prompts_jsonl(self) -> Path:
        return self.root / "prompts.jsonl"

    @property
    def prompts_dir(self) -> Path:
        return self.root / "prompts"

    @property
    def records(self) -> Path:
        return self.root / "records.jsonl"

    @property
    def scores(self) -> Path:
        return self.root / "scores.csv"

    @property
    def summary(self) -> Path:
        return self.root / "summary.csv"

    @property
    def annotations_log(self) -> Path:
        return self.root / "annotations.log"

    def report(self, layout: ReportLayout) -> Path:
        return self.root / f"report_{layout.value}.txt"


class Run:
    """One experiment run: lazily loads inputs, executes stages, keeps the
    manifest current."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.bundle = config.load_bundle()
        self.lexicon = config.load_lexicon()
        self.overrides = config.load_overrides()
        self.run_id = config.run_id or make_run_id(self.bundle.bundle_hash, config)
        self.paths = RunPaths(Path(config.runs_dir) / self.run_id)

    # -- manifest ---------------------------------------------------------------

    def _load_manifest(self) -> dict:
        if self.paths.manifest.exists():
            return json.loads(self.paths.manifest.read_text("utf-8"))
        return {
            "run_id": self.run_id,
            "bundle_hash": self.bundle.bundle_hash,
            "tool_version": __version__,
            "config": self.config.to_dict(),
            "stages": {},
        }

    def _record_stage(self, stage: str, checksums: dict[str, str]) -> None:
        manifest = self._load_manifest()
        manifest["stages"][stage] = checksums
        self.paths.root.mkdir(parents=True, exist_ok=True)
        self.paths.manifest.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")

    # -- stage: prompts -----------------------------------------------------------

    def _cells(self) -> list[tuple]:
        items = list(self.bundle.dataset)
        conditions = [condition_from_code(c) for c in self.config.conditions]
        modes = [RetrievalMode(m) for m in self.config.modes]
        return [(item, cond, mode) for item in items for cond in conditions for mode in modes]

    def build_prompts(self) -> list[PromptBundle]:
        builder = PromptBuilder(
            self.bundle,
            lexicon=self.lexicon,
            overrides=self.overrides,
            cfg=RetrievalConfig(k=self.config.k, normalize=self.config.normalize_lcs),
        )
        prompts = [builder.build(item, cond, mode) for item, cond, mode in self._cells()]
        self.paths.prompts_dir.mkdir(parents=True, exist_ok=True)
        lines = []
        for p in prompts:
            name = f"{p.item_id}_{p.condition.code}_{p.mode.value}.txt"
            (self.paths.prompts_dir / name).write_text(p.full_prompt, "utf-8")
            lines.append(
                json.dumps(
                    {
                        "item_id": p.item_id,
                        "condition": p.condition.code,
                        "mode": p.mode.value,
                        "context_text": p.context_text,
                        "task_text": p.task_text,
                        "full_prompt": p.full_prompt,
                        "prompt_hash": prompt_digest(p.full_prompt),
                    },
                    ensure_ascii=False,
                )
            )
        content = "\n".join(lines) + ("\n" if lines else "")
        self.paths.prompts_jsonl.write_text(content, "utf-8")
        files_digest = hashlib.sha256()
        for path in sorted(self.paths.prompts_dir.iterdir()):
            files_digest.update(path.name.encode("utf-8"))
            files_digest.update(path.read_bytes())
        self._record_stage(
            "build-prompts",
            {"prompts.jsonl": _sha256(content), "prompts/": files_digest.hexdigest()},
        )
        return prompts

    def load_prompts(self) -> list[PromptBundle]:
        if not self.paths.prompts_jsonl.exists():
            raise ConfigError("no prompts built yet: run the build-prompts stage first")
        prompts = []
        for line in self.paths.prompts_jsonl.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            data = json.loads(line)
            prompts.append(
                PromptBundle(
                    item_id=data["item_id"],
                    condition=condition_from_code(data["condition"]),
                    mode=RetrievalMode(data["mode"]),
                    context_text=data["context_text"],
                    task_text=data["task_text"],
                    full_prompt=data["full_prompt"],
                )
            )
        return prompts

    # -- stage: translate ----------------------------------------------------------

    def translate(self, dry_run: bool = False) -> list[TranslationRecord]:
        prompts = self.load_prompts()
        specs = self.config.model_specs()
        if dry_run:
            return []
        backend = self.config.make_backend()
        cache = ResponseCache(self.config.cache) if self.config.cache else None
        records = run_matrix(
            prompts, specs, backend, cache, max_in_flight=self.config.max_in_flight
        )
        save_records(records, self.paths.records)
        canonical = json.dumps(
            [strip_timestamps(r).to_dict() for r in records], sort_keys=True
        )
        self._record_stage("translate", {"records.jsonl": _sha256(canonical)})
        return records

    def dry_run_matrix(self) -> list[str]:
        prompts = self.load_prompts()
        return [
            f"{spec.model_id}\t{p.item_id}\t{p.condition.code}\t{p.mode.value}"
            for spec in self.config.model_specs()
            for p in prompts
        ]

    def load_run_records(self) -> list[TranslationRecord]:
        if not self.paths.records.exists():
            raise ConfigError("no records yet: run the translate stage first")
        return load_records(self.paths.records)

    # -- stage: evaluate -------------------------------------------------------------

    def evaluate(self, scorer: ExternalScorer | None = None) -> list[EvaluationScore]:
        records = self.load_run_records()
        references = {i.item_id: i.reference_text for i in self.bundle.dataset}
        scores = score_bleu(records, references)
        if scorer is not None:
            scores.extend(score_external(records, references, scorer))
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["model", "item", "condition", "mode", "metric", "value"])
        for s in scores:
            writer.writerow([s.model_id, s.item_id, s.condition, s.mode, s.metric, repr(s.value)])
        content = buffer.getvalue()
        self.paths.scores.write_text(content, "utf-8")
        self._record_stage("evaluate", {"scores.csv": _sha256(content)})
        return scores

    def load_scores(self) -> list[EvaluationScore]:
        if not self.paths.scores.exists():
            raise ConfigError("no scores yet: run the evaluate stage first")
        reader = csv.reader(io.StringIO(self.paths.scores.read_text("utf-8")))
        next(reader)
        return [
            EvaluationScore(
                model_id=row[0], item_id=row[1], condition=row[2], mode=row[3],
                metric=row[4], value=float(row[5]),
            )
            for row in reader
        ]

    # -- stage: report ----------------------------------------------------------------

    def report(self, layout: ReportLayout, metric: str | None = None) -> str:
        scores = self.load_scores()
        records = self.load_run_records()
        excluded: dict[tuple, tuple[str, ...]] = {}
        for r in records:
            if r.status != "ok":
                key = (r.model_id, r.condition, r.mode)
                excluded[key] = excluded.get(key, ()) + (r.item_id,)
        summaries = aggregate(scores, excluded)
        table = emit_report(summaries, layout, metric)
        summary_csv = summaries_to_csv(summaries)
        self.paths.summary.write_text(summary_csv, "utf-8")
        self.paths.report(layout).write_text(table + "\n", "utf-8")
        self._record_stage(
            f"report-{layout.value}",
            {"summary.csv": _sha256(summary_csv), "report.txt": _sha256(table)},
        )
        return table

    def summaries(self) -> list[CellSummary]:
        scores = self.load_scores()
        return aggregate(scores)
