import { beforeEach, describe, expect, it } from "vitest";

import type { AnnotationApi } from "../src/api.js";
import { ApiError, ConflictError } from "../src/api.js";
import { AnnotationSession } from "../src/session.js";
import type {
  AnnotationPayload,
  ItemState,
  QualityValue,
  SchemaPayload,
} from "../src/types.js";

const SCHEMA: SchemaPayload = {
  typology: [
    { subtype: "Addition", dimension: "accuracy", description: "", counts_toward_limit: true },
    { subtype: "Omission", dimension: "accuracy", description: "", counts_toward_limit: true },
    { subtype: "Substitution-TAM", dimension: "accuracy", description: "", counts_toward_limit: true },
    { subtype: "Overtranslation", dimension: "accuracy", description: "", counts_toward_limit: true },
    { subtype: "TE-Grammar", dimension: "target_error", description: "", counts_toward_limit: false },
    { subtype: "Refusal", dimension: "non_translation", description: "", counts_toward_limit: true },
  ],
  quality: [
    { value: "none", description: "" },
    { value: "low", description: "" },
    { value: "med", description: "" },
    { value: "high", description: "" },
  ],
};

function item(ref: string, output = "tú bailarás bien"): ItemState {
  const [item_id, model_id, condition, mode] = ref.split("~") as [string, string, string, string];
  return {
    ref,
    run: "run-1",
    item_id,
    model_id,
    condition,
    mode,
    source: "qam allinta tusunki",
    reference: "tu bailas bien",
    output,
    prompt: "",
    status: "ok",
    version: 0,
    annotations: {},
    quality: {},
  };
}

/** In-memory service with the same versioning and validation behavior. */
class FakeApi implements AnnotationApi {
  items = new Map<string, ItemState>();
  offline = false;
  requests = 0;

  constructor(refs: string[]) {
    for (const ref of refs) this.items.set(ref, item(ref));
  }

  private check(): void {
    this.requests += 1;
    if (this.offline) throw new TypeError("fetch failed");
  }

  async getSchema(): Promise<SchemaPayload> {
    this.check();
    return SCHEMA;
  }

  async getRunItems(): Promise<ItemState[]> {
    this.check();
    return [...this.items.values()].map((i) => structuredClone(i));
  }

  async getItem(ref: string): Promise<ItemState> {
    this.check();
    const state = this.items.get(ref);
    if (!state) throw new ApiError(404, "unknown record");
    return structuredClone(state);
  }

  async postAnnotations(
    ref: string,
    annotator: string,
    version: number,
    annotations: AnnotationPayload[],
  ): Promise<{ version: number }> {
    this.check();
    const state = this.items.get(ref)!;
    if (version !== state.version) throw new ConflictError(state.version);
    const counted = annotations.filter((a) => a.subtype !== "TE-Grammar").length;
    if (counted > 3) throw new ApiError(422, ["max 3 non-target errors per record"]);
    state.annotations[annotator] = structuredClone(annotations);
    state.version += 1;
    return { version: state.version };
  }

  async postQuality(
    ref: string,
    annotator: string,
    version: number,
    quality: QualityValue,
  ): Promise<{ version: number }> {
    this.check();
    const state = this.items.get(ref)!;
    if (version !== state.version) throw new ConflictError(state.version);
    state.quality[annotator] = quality;
    state.version += 1;
    return { version: state.version };
  }
}

describe("AnnotationSession", () => {
  let api: FakeApi;
  let session: AnnotationSession;

  beforeEach(async () => {
    api = new FakeApi(["q01~m~base~auto", "q02~m~base~auto", "q03~m~base~auto"]);
    session = new AnnotationSession(api, "a1");
    await session.open("run-1");
  });

  it("opens a run and exposes the first record", () => {
    expect(session.items).toHaveLength(3);
    expect(session.current().item_id).toBe("q01");
  });

  it("cursor stays within run bounds", () => {
    session.prev();
    expect(session.cursor).toBe(0);
    session.next();
    session.next();
    session.next();
    session.next();
    expect(session.cursor).toBe(2);
  });

  it("blocks the fourth counted error client-side", () => {
    expect(session.addError("Addition")).toBe(true);
    expect(session.addError("Omission")).toBe(true);
    expect(session.addError("Substitution-TAM")).toBe(true);
    expect(session.addError("Overtranslation")).toBe(false);
    expect(session.edit().annotations).toHaveLength(3);
    expect(session.addError("TE-Grammar")).toBe(true); // exempt dimension
  });

  it("rejects spans outside the output", () => {
    const length = session.current().output.length;
    expect(session.addError("Addition", [0, length + 1])).toBe(false);
    expect(session.addError("Addition", [0, length])).toBe(true);
  });

  it("submits annotations and quality with the loaded version", async () => {
    session.addError("Addition", [0, 2]);
    session.setQuality("med");
    const result = await session.submit();
    expect(result.kind).toBe("saved");
    const server = api.items.get("q01~m~base~auto")!;
    expect(server.annotations["a1"]).toEqual([{ subtype: "Addition", span: [0, 2], note: "" }]);
    expect(server.quality["a1"]).toBe("med");
    expect(session.pending.size).toBe(0);
  });

  it("surfaces a conflict with the newer server state", async () => {
    // another session moves the record forward
    await api.postQuality("q01~m~base~auto", "a2", 0, "low");
    session.addError("Addition");
    const result = await session.submit();
    expect(result.kind).toBe("conflict");
    if (result.kind === "conflict") {
      expect(result.server.version).toBe(1);
      expect(result.server.quality["a2"]).toBe("low");
    }
    // pending edit survives for manual merge, rebasing enables resubmit
    expect(session.pending.has("q01~m~base~auto")).toBe(true);
    session.adoptServerVersion("q01~m~base~auto");
    const retry = await session.submit();
    expect(retry.kind).toBe("saved");
  });

  it("surfaces server-side rejections verbatim", async () => {
    // bypass the client cap to prove the server still rejects
    session.edit().annotations = ["Addition", "Omission", "Substitution-TAM", "Overtranslation"].map(
      (subtype) => ({ subtype, span: null, note: "" }),
    );
    const result = await session.submit();
    expect(result.kind).toBe("rejected");
    if (result.kind === "rejected") {
      expect(result.violations.join(" ")).toMatch(/max 3/);
    }
  });

  it("queues edits while offline and flushes on reconnect", async () => {
    session.addError("Addition");
    session.setQuality("low");
    api.offline = true;
    const result = await session.submit();
    expect(result.kind).toBe("queued");
    expect(session.queue).toHaveLength(1);

    api.offline = false;
    const flushed = await session.flushQueue();
    expect(flushed.map((r) => r.kind)).toEqual(["saved"]);
    expect(session.queue).toHaveLength(0);
    expect(api.items.get("q01~m~base~auto")!.quality["a1"]).toBe("low");
  });

  it("keeps a still-offline edit queued instead of dropping it", async () => {
    session.addError("Addition");
    api.offline = true;
    await session.submit();
    const flushed = await session.flushQueue();
    expect(flushed.map((r) => r.kind)).toEqual(["queued"]);
    expect(session.queue).toHaveLength(1);
  });

  it("reload sees persisted state", async () => {
    session.setQuality("high");
    await session.submit();
    const fresh = new AnnotationSession(api, "a1");
    await fresh.open("run-1");
    expect(fresh.current().quality["a1"]).toBe("high");
  });

  it("inline warning for none without structural tag mirrors the server", () => {
    session.addError("Addition");
    session.setQuality("none");
    expect(session.warnings()).toHaveLength(1);
    session.removeError(0);
    session.addError("Refusal");
    expect(session.warnings()).toHaveLength(0);
  });
});
