/** DOM layer of the workbench. Keyboard-first: arrows (or n/p) move between
 * records, 1..4 set the quality rating, s submits. All rule enforcement here
 * is cosmetic; the server re-validates every write. */

import type { AnnotationSession } from "./session.js";
import type { Dimension, ItemState, QualityValue, SubmitResult } from "./types.js";

const DIMENSION_LABELS: Record<Dimension, string> = {
  accuracy: "Accuracy",
  target_error: "Target error (uncapped)",
  non_translation: "Non-translation",
  model_error: "Model error",
};

const QUALITY_KEYS: Record<string, QualityValue> = {
  "1": "none",
  "2": "low",
  "3": "med",
  "4": "high",
};

export class WorkbenchView {
  private status = "";

  constructor(
    readonly root: HTMLElement,
    readonly session: AnnotationSession,
  ) {}

  /** Character offsets of the current text selection inside the output
   * element, or null when the selection lies elsewhere. */
  selectedSpan(): [number, number] | null {
    const output = this.root.querySelector<HTMLElement>("#output-text");
    const selection = this.root.ownerDocument.defaultView?.getSelection();
    if (!output || !selection || selection.rangeCount === 0 || selection.isCollapsed) {
      return null;
    }
    const range = selection.getRangeAt(0);
    const textNode = output.firstChild;
    if (!textNode || range.startContainer !== textNode || range.endContainer !== textNode) {
      return null;
    }
    return [range.startOffset, range.endOffset];
  }

  bindKeyboard(): void {
    this.root.ownerDocument.addEventListener("keydown", (event) => {
      const target = event.target as HTMLElement | null;
      if (target && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName)) return;
      if (event.key === "ArrowRight" || event.key === "n") {
        this.session.next();
        this.render();
      } else if (event.key === "ArrowLeft" || event.key === "p") {
        this.session.prev();
        this.render();
      } else if (event.key in QUALITY_KEYS) {
        this.session.setQuality(QUALITY_KEYS[event.key]!);
        this.render();
      } else if (event.key === "s") {
        void this.submit();
      }
    });
  }

  async submit(): Promise<SubmitResult> {
    const result = await this.session.submit();
    if (result.kind === "saved") this.status = `saved (version ${result.version})`;
    else if (result.kind === "conflict")
      this.status = `edit conflict: record moved to version ${result.server.version}; review the newer state below`;
    else if (result.kind === "rejected") this.status = `rejected: ${result.violations.join("; ")}`;
    else this.status = "offline: edit queued, will retry on reconnect";
    this.render();
    return result;
  }

  render(): void {
    const doc = this.root.ownerDocument;
    const item = this.session.current();
    const edit = this.session.pending.get(item.ref);
    const annotations = edit ? edit.annotations : (item.annotations[this.session.annotatorId] ?? []);
    const quality = edit ? edit.quality : (item.quality[this.session.annotatorId] ?? null);

    this.root.textContent = "";
    const panel = doc.createElement("section");
    panel.id = "item-panel";

    const header = doc.createElement("header");
    header.id = "item-header";
    header.textContent =
      `${item.item_id} · ${item.model_id} · ${item.condition} · ${item.mode}` +
      ` — record ${this.session.cursor + 1}/${this.session.items.length}` +
      ` (version ${item.version})`;
    panel.append(header);

    panel.append(this.textBlock(doc, "source", "Source", item.source));
    panel.append(this.textBlock(doc, "reference", "Reference", item.reference));

    const outputBlock = doc.createElement("div");
    outputBlock.className = "block";
    const outputLabel = doc.createElement("h3");
    outputLabel.textContent = "Output";
    const outputText = doc.createElement("p");
    outputText.id = "output-text";
    outputText.textContent = item.output;
    outputBlock.append(outputLabel, outputText);
    panel.append(outputBlock);

    // prompt hidden behind a toggle to limit bias
    const promptToggle = doc.createElement("details");
    promptToggle.id = "prompt-toggle";
    const summary = doc.createElement("summary");
    summary.textContent = "Show prompt";
    const promptPre = doc.createElement("pre");
    promptPre.textContent = item.prompt || "(prompt not recorded)";
    promptToggle.append(summary, promptPre);
    panel.append(promptToggle);

    panel.append(this.palette(doc));
    panel.append(this.annotationList(doc, annotations));
    panel.append(this.qualitySelector(doc, quality));

    const warnings = this.session.warnings();
    const statusLine = doc.createElement("p");
    statusLine.id = "status-line";
    statusLine.textContent = [this.status, ...warnings].filter(Boolean).join(" | ");
    panel.append(statusLine);

    const submitButton = doc.createElement("button");
    submitButton.id = "submit-button";
    submitButton.textContent = "Submit (s)";
    submitButton.addEventListener("click", () => void this.submit());
    panel.append(submitButton);

    this.root.append(panel);
  }

  private textBlock(doc: Document, id: string, label: string, text: string): HTMLElement {
    const block = doc.createElement("div");
    block.className = "block";
    const heading = doc.createElement("h3");
    heading.textContent = label;
    const body = doc.createElement("p");
    body.id = `${id}-text`;
    body.textContent = text;
    block.append(heading, body);
    return block;
  }

  /** Error palette grouped by dimension; clicking tags the current output
   * selection (span optional). Blocked additions surface in the status line
   * and change nothing. */
  private palette(doc: Document): HTMLElement {
    const container = doc.createElement("div");
    container.id = "error-palette";
    const groups = new Map<Dimension, HTMLElement>();
    for (const entry of this.session.typology) {
      let group = groups.get(entry.dimension);
      if (!group) {
        group = doc.createElement("fieldset");
        group.dataset.dimension = entry.dimension;
        const legend = doc.createElement("legend");
        legend.textContent = DIMENSION_LABELS[entry.dimension];
        group.append(legend);
        groups.set(entry.dimension, group);
        container.append(group);
      }
      const button = doc.createElement("button");
      button.textContent = entry.subtype;
      button.title = entry.description;
      button.dataset.subtype = entry.subtype;
      button.addEventListener("click", () => {
        const added = this.session.addError(entry.subtype, this.selectedSpan());
        this.status = added ? "" : `blocked: at most 3 errors outside the target-error dimension`;
        this.render();
      });
      group.append(button);
    }
    return container;
  }

  private annotationList(
    doc: Document,
    annotations: { subtype: string; span: [number, number] | null }[],
  ): HTMLElement {
    const list = doc.createElement("ul");
    list.id = "annotation-list";
    annotations.forEach((annotation, index) => {
      const entry = doc.createElement("li");
      const spanText = annotation.span ? ` [${annotation.span[0]}, ${annotation.span[1]})` : "";
      entry.textContent = `${annotation.subtype}${spanText} `;
      const remove = doc.createElement("button");
      remove.textContent = "remove";
      remove.addEventListener("click", () => {
        this.session.removeError(index);
        this.render();
      });
      entry.append(remove);
      list.append(entry);
    });
    return list;
  }

  private qualitySelector(doc: Document, current: QualityValue | null): HTMLElement {
    const container = doc.createElement("div");
    container.id = "quality-selector";
    for (const option of this.session.schema.quality) {
      const label = doc.createElement("label");
      label.title = option.description; // scale description as tooltip
      const radio = doc.createElement("input");
      radio.type = "radio";
      radio.name = "quality";
      radio.value = option.value;
      radio.checked = current === option.value;
      radio.addEventListener("change", () => {
        this.session.setQuality(option.value);
        this.render();
      });
      label.append(radio, doc.createTextNode(option.value));
      container.append(label);
    }
    return container;
  }
}
