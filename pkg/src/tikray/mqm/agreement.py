"""Inter-annotator agreement statistics.

Quality judgments use unweighted Cohen's kappa over the four quality
categories. Error-category agreement uses nominal Krippendorff's alpha over
binary presence indicators: one unit per (record, subtype), valued 1 when the
annotator tagged that subtype on that record at least once.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .schema import SUBTYPES


class AgreementError(ValueError):
    """Agreement is undefined for the given data (e.g. no shared items)."""


def cohen_kappa(ratings_a: Mapping[Hashable, str], ratings_b: Mapping[Hashable, str]) -> float:
    """Unweighted Cohen's kappa: (p_o - p_e) / (1 - p_e) over the items both
    annotators rated. Total agreement concentrated on a single category
    (p_o = p_e = 1) is defined as 1."""
    shared = sorted(set(ratings_a) & set(ratings_b), key=str)
    if not shared:
        raise AgreementError("annotators share no rated items")
    n = len(shared)
    observed = sum(1 for item in shared if ratings_a[item] == ratings_b[item]) / n
    marginals_a = Counter(ratings_a[item] for item in shared)
    marginals_b = Counter(ratings_b[item] for item in shared)
    expected = sum(
        (marginals_a[cat] / n) * (marginals_b[cat] / n) for cat in set(marginals_a) | set(marginals_b)
    )
    if expected >= 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def krippendorff_alpha(values_by_unit: Mapping[Hashable, Sequence[Hashable]]) -> float:
    """Nominal Krippendorff's alpha, 1 - D_o/D_e from the coincidence matrix.

    ``values_by_unit`` maps each unit to the values assigned by its
    annotators; units with fewer than two values are ignored (they carry no
    agreement information). Zero expected disagreement (all values identical)
    is defined as 1.
    """
    # Coincidence matrix: each pairable unit with m values contributes
    # 1/(m-1) for every ordered value pair within it.
    coincidences: Counter[tuple[Hashable, Hashable]] = Counter()
    n_total = 0.0
    for values in values_by_unit.values():
        m = len(values)
        if m < 2:
            continue
        weight = 1.0 / (m - 1)
        for i, v in enumerate(values):
            for j, w in enumerate(values):
                if i != j:
                    coincidences[(v, w)] += weight
        n_total += m
    if n_total == 0:
        raise AgreementError("no unit has two or more values")

    totals: Counter[Hashable] = Counter()
    for (v, _), count in coincidences.items():
        totals[v] += count

    d_observed = sum(count for (v, w), count in coincidences.items() if v != w) / n_total
    d_expected = sum(
        totals[v] * totals[w] for v in totals for w in totals if v != w
    ) / (n_total * (n_total - 1.0))
    if d_expected == 0.0:
        return 1.0
    return 1.0 - d_observed / d_expected


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    alpha: float
    n_items: int
    n_annotators: int


def compute_agreement(
    ratings: Mapping[str, Mapping[str, str]],
    subtype_sets: Mapping[str, Mapping[str, frozenset[str]]],
) -> AgreementReport:
    """Agreement over a run's annotation state.

    ``ratings`` maps annotator -> {record ref -> quality category};
    ``subtype_sets`` maps annotator -> {record ref -> tagged subtypes}.
    Kappa is computed over shared rated records (averaged pairwise when more
    than two annotators overlap); alpha over (record, subtype) presence
    indicators for records evaluated by two or more annotators.
    """
    annotators = sorted(set(ratings) | set(subtype_sets))
    if len(annotators) < 2:
        raise AgreementError("agreement needs at least two annotators")

    kappas: list[float] = []
    shared_items: set[str] = set()
    for i, a in enumerate(annotators):
        for b in annotators[i + 1 :]:
            shared = set(ratings.get(a, {})) & set(ratings.get(b, {}))
            if shared:
                shared_items.update(shared)
                kappas.append(cohen_kappa(ratings[a], ratings[b]))
    if not kappas:
        raise AgreementError("no two annotators rated a common record")
    kappa = sum(kappas) / len(kappas)

    coverage: dict[str, list[str]] = {}
    for annotator in annotators:
        refs = set(ratings.get(annotator, {})) | set(subtype_sets.get(annotator, {}))
        for ref in refs:
            coverage.setdefault(ref, []).append(annotator)
    units: dict[tuple[str, str], list[int]] = {}
    for ref, who in coverage.items():
        if len(who) < 2:
            continue
        for subtype in SUBTYPES:
            units[(ref, subtype)] = [
                1 if subtype in subtype_sets.get(annotator, {}).get(ref, frozenset()) else 0
                for annotator in who
            ]
    if not units:
        raise AgreementError("no record was evaluated by two or more annotators")
    alpha = krippendorff_alpha(units)

    return AgreementReport(
        kappa=kappa,
        alpha=alpha,
        n_items=len({ref for ref, _ in units} | shared_items),
        n_annotators=len(annotators),
    )
