/** Entry point: `index.html?api=http://127.0.0.1:8787&run=<id>&annotator=<id>`. */

import { ApiClient } from "./api.js";
import { AnnotationSession } from "./session.js";
import { WorkbenchView } from "./view.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const apiBase = params.get("api") ?? "http://127.0.0.1:8787";
  const annotator = params.get("annotator") ?? "anonymous";

  const api = new ApiClient(apiBase);
  const session = new AnnotationSession(api, annotator);
  const runId = params.get("run") ?? (await api.getRuns())[0];
  if (!runId) throw new Error("service has no runs loaded");
  await session.open(runId);

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const view = new WorkbenchView(root, session);
  view.bindKeyboard();
  view.render();

  window.addEventListener("online", () => void session.flushQueue());
}

boot().catch((error) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to start: ${error}`;
  console.error(error);
});
