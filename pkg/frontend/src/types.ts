/** Payload types for the annotation service API. */

export type Dimension = "accuracy" | "target_error" | "non_translation" | "model_error";

export type QualityValue = "none" | "low" | "med" | "high";

export interface TypologyEntry {
  subtype: string;
  dimension: Dimension;
  description: string;
  counts_toward_limit: boolean;
}

export interface SchemaPayload {
  typology: TypologyEntry[];
  quality: { value: QualityValue; description: string }[];
}

export interface AnnotationPayload {
  subtype: string;
  span: [number, number] | null;
  note: string;
}

/** One translation record plus its current annotation state. */
export interface ItemState {
  ref: string;
  run: string;
  item_id: string;
  model_id: string;
  condition: string;
  mode: string;
  source: string;
  reference: string;
  output: string;
  prompt: string;
  status: string;
  version: number;
  annotations: Record<string, AnnotationPayload[]>;
  quality: Record<string, QualityValue>;
}

export interface AgreementPayload {
  kappa: number;
  alpha: number;
  n_items: number;
  n_annotators: number;
}

/** Outcome of pushing one record's edits to the server. */
export type SubmitResult =
  | { kind: "saved"; version: number }
  | { kind: "conflict"; server: ItemState }
  | { kind: "rejected"; violations: string[] }
  | { kind: "queued" };
