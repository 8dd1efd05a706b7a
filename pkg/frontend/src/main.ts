import { HelpClient } from "./api.js";
import { setupUi } from "./ui.js";

// Service origin defaults to the page's own host; override with ?api=URL
// when the UI is served separately from the API (e.g. a static dev server).
function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  if (override) return override;
  return window.location.origin;
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  setupUi(root, new HelpClient(apiBase()));
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", boot);
} else {
  boot();
}
