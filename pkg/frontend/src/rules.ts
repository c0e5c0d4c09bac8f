/** Client-side mirrors of the server's validation rules.
 *
 * Strictly a subset: the server remains the authority, these exist only to
 * give the annotator immediate feedback before a round trip.
 */

import type { AnnotationPayload, QualityValue, TypologyEntry } from "./types.js";

export const MAX_COUNTED_ERRORS = 3;

const STRUCTURAL_DIMENSIONS = new Set(["non_translation", "model_error"]);

export function countedErrors(
  annotations: AnnotationPayload[],
  typology: TypologyEntry[],
): number {
  const counts = new Map(typology.map((t) => [t.subtype, t.counts_toward_limit]));
  return annotations.filter((a) => counts.get(a.subtype) !== false).length;
}

/** Would adding `subtype` exceed the non-target-error cap? */
export function addBlocked(
  annotations: AnnotationPayload[],
  subtype: string,
  typology: TypologyEntry[],
): boolean {
  const entry = typology.find((t) => t.subtype === subtype);
  if (entry && !entry.counts_toward_limit) return false;
  return countedErrors(annotations, typology) >= MAX_COUNTED_ERRORS;
}

export function spanWithinBounds(span: [number, number], outputLength: number): boolean {
  const [start, end] = span;
  return start >= 0 && start < end && end <= outputLength;
}

/** Inline warning for a quality of "none" without a structural error tag
 * (mirrors the server rule; empty annotation sets are fine). */
export function qualityWarning(
  quality: QualityValue | null,
  annotations: AnnotationPayload[],
  typology: TypologyEntry[],
): string | null {
  if (quality !== "none" || annotations.length === 0) return null;
  const dims = new Map(typology.map((t) => [t.subtype, t.dimension]));
  const structural = annotations.some((a) => STRUCTURAL_DIMENSIONS.has(dims.get(a.subtype) ?? ""));
  return structural
    ? null
    : 'quality "none" needs a non-translation or model-error tag (or no tags)';
}
