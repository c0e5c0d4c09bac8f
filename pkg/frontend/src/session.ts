/** Annotation session: cursor over a run's records, per-record pending
 * edits tracked against the version they were loaded from, and an offline
 * queue so no edit is ever dropped silently. */

import { AnnotationApi, ApiError, ConflictError } from "./api.js";
import { addBlocked, qualityWarning, spanWithinBounds } from "./rules.js";
import type {
  AnnotationPayload,
  ItemState,
  QualityValue,
  SchemaPayload,
  SubmitResult,
  TypologyEntry,
} from "./types.js";

export interface PendingEdit {
  ref: string;
  /** Version of the record the edit was loaded against. */
  baseVersion: number;
  annotations: AnnotationPayload[];
  quality: QualityValue | null;
}

export class AnnotationSession {
  runId = "";
  items: ItemState[] = [];
  cursor = 0;
  schema: SchemaPayload = { typology: [], quality: [] };
  /** Edits not yet accepted by the server, keyed by record ref. */
  pending = new Map<string, PendingEdit>();
  /** Edits that failed on transport and await a reconnect. */
  queue: PendingEdit[] = [];

  constructor(
    readonly api: AnnotationApi,
    readonly annotatorId: string,
  ) {}

  async open(runId: string): Promise<void> {
    this.schema = await this.api.getSchema();
    this.items = await this.api.getRunItems(runId);
    this.runId = runId;
    this.cursor = 0;
  }

  get typology(): TypologyEntry[] {
    return this.schema.typology;
  }

  current(): ItemState {
    const item = this.items[this.cursor];
    if (!item) throw new Error("session has no items");
    return item;
  }

  next(): void {
    if (this.cursor < this.items.length - 1) this.cursor += 1;
  }

  prev(): void {
    if (this.cursor > 0) this.cursor -= 1;
  }

  /** Pending edit for the current record, created from server state on
   * first touch so edits always carry the version they saw. */
  edit(): PendingEdit {
    const item = this.current();
    let edit = this.pending.get(item.ref);
    if (!edit) {
      edit = {
        ref: item.ref,
        baseVersion: item.version,
        annotations: [...(item.annotations[this.annotatorId] ?? [])],
        quality: item.quality[this.annotatorId] ?? null,
      };
      this.pending.set(item.ref, edit);
    }
    return edit;
  }

  /** Add an error tag; returns false (and changes nothing) when the
   * non-target cap or span bounds would be violated. */
  addError(subtype: string, span: [number, number] | null = null, note = ""): boolean {
    const item = this.current();
    const edit = this.edit();
    if (addBlocked(edit.annotations, subtype, this.typology)) return false;
    if (span && !spanWithinBounds(span, item.output.length)) return false;
    edit.annotations.push({ subtype, span, note });
    return true;
  }

  removeError(index: number): void {
    this.edit().annotations.splice(index, 1);
  }

  setQuality(quality: QualityValue): void {
    this.edit().quality = quality;
  }

  /** Inline warnings mirroring server validation for the current edit. */
  warnings(): string[] {
    const edit = this.pending.get(this.current().ref);
    if (!edit) return [];
    const warning = qualityWarning(edit.quality, edit.annotations, this.typology);
    return warning ? [warning] : [];
  }

  /** Push the current record's edit. Every failure path is surfaced in the
   * result; transport failures keep the edit in the offline queue. */
  async submit(): Promise<SubmitResult> {
    const item = this.current();
    const edit = this.pending.get(item.ref);
    if (!edit) return { kind: "saved", version: item.version };
    return this.push(edit);
  }

  private async push(edit: PendingEdit): Promise<SubmitResult> {
    try {
      let version = edit.baseVersion;
      const saved = await this.api.postAnnotations(
        edit.ref,
        this.annotatorId,
        version,
        edit.annotations,
      );
      version = saved.version;
      edit.baseVersion = version; // a rejected quality post can retry from here
      if (edit.quality !== null) {
        const rated = await this.api.postQuality(
          edit.ref,
          this.annotatorId,
          version,
          edit.quality,
        );
        version = rated.version;
      }
      await this.refresh(edit.ref);
      this.pending.delete(edit.ref);
      return { kind: "saved", version };
    } catch (error) {
      if (error instanceof ConflictError) {
        const server = await this.api.getItem(edit.ref);
        this.replaceItem(server);
        return { kind: "conflict", server };
      }
      if (error instanceof ApiError) {
        return { kind: "rejected", violations: error.violations() };
      }
      // transport failure: keep the edit for a later flush
      if (!this.queue.includes(edit)) this.queue.push(edit);
      return { kind: "queued" };
    }
  }

  /** Retry queued edits after a reconnect; stops if still offline. Edits
   * that come back rejected or conflicted leave the queue but stay pending
   * so the annotator can fix and resubmit — nothing is dropped silently. */
  async flushQueue(): Promise<SubmitResult[]> {
    const results: SubmitResult[] = [];
    while (this.queue.length > 0) {
      const edit = this.queue[0]!;
      const result = await this.push(edit);
      results.push(result);
      if (result.kind === "queued") break; // still offline
      this.queue.shift();
    }
    return results;
  }

  async refresh(ref: string): Promise<ItemState> {
    const fresh = await this.api.getItem(ref);
    this.replaceItem(fresh);
    return fresh;
  }

  /** Adopt the server state after a conflict: pending edit is rebased onto
   * the new version but keeps the annotator's unsaved content for manual
   * merge. */
  adoptServerVersion(ref: string): void {
    const item = this.items.find((i) => i.ref === ref);
    const edit = this.pending.get(ref);
    if (item && edit) edit.baseVersion = item.version;
  }

  private replaceItem(fresh: ItemState): void {
    const index = this.items.findIndex((i) => i.ref === fresh.ref);
    if (index >= 0) this.items[index] = fresh;
  }
}
