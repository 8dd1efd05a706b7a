import type { HelpClient } from "./api.js";
import { ChatSession } from "./chat.js";
import type { ChatMessage } from "./chat.js";

export interface UiHandles {
  session: ChatSession;
  form: HTMLFormElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  threshold: HTMLInputElement;
  thresholdLabel: HTMLSpanElement;
  kSelect: HTMLSelectElement;
  transcript: HTMLElement;
  status: HTMLElement;
  skillsPanel: HTMLElement;
  /** Submit programmatically, resolving when the reply is rendered. */
  submit(text: string): Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function messageNode(msg: ChatMessage, onReask: (text: string) => void): HTMLElement {
  const row = el("div", `msg msg-${msg.role}`);
  const body = el("div", "msg-body");
  body.textContent = msg.text;
  row.appendChild(body);
  if (msg.role === "user") {
    const again = el("button", "reask", "ask again");
    again.type = "button";
    again.addEventListener("click", () => onReask(msg.text));
    row.appendChild(again);
  }
  if (msg.detail) {
    const meta = el(
      "div",
      "msg-meta",
      `p_help ${msg.detail.p_help.toFixed(3)} · ${msg.detail.latency_ms.toFixed(1)} ms`,
    );
    row.appendChild(meta);
  }
  return row;
}

/**
 * Build the chat interface inside `root` and wire it to the service.
 *
 * Rendering is append-only: each exchange adds nodes, nothing is rewritten,
 * so the transcript is a faithful log of what the service said.
 */
export function setupUi(root: HTMLElement, client: HelpClient): UiHandles {
  const session = new ChatSession(client);

  root.innerHTML = "";
  const status = el("div", "status", "checking service…");
  const transcript = el("div", "transcript");
  const skillsPanel = el("div", "skills");

  const form = el("form", "ask-form");
  const input = el("input", "ask-input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "Ask a how-to question…";
  input.autocomplete = "off";
  const send = el("button", "ask-send", "Ask") as HTMLButtonElement;
  send.type = "submit";

  const threshold = el("input", "threshold") as HTMLInputElement;
  threshold.type = "range";
  threshold.min = "0.50";
  threshold.max = "0.95";
  threshold.step = "0.05";
  threshold.value = "0.75";
  const thresholdLabel = el("span", "threshold-value", "0.75");
  threshold.addEventListener("input", () => {
    thresholdLabel.textContent = Number(threshold.value).toFixed(2);
  });

  const kSelect = el("select", "k-select") as HTMLSelectElement;
  for (let k = 1; k <= 5; k++) {
    const opt = el("option", undefined, String(k)) as HTMLOptionElement;
    opt.value = String(k);
    kSelect.appendChild(opt);
  }
  kSelect.value = "1";

  const controls = el("div", "controls");
  controls.appendChild(el("label", "control-label", "match threshold"));
  controls.appendChild(threshold);
  controls.appendChild(thresholdLabel);
  controls.appendChild(el("label", "control-label", "neighbors"));
  controls.appendChild(kSelect);

  form.appendChild(input);
  form.appendChild(send);

  root.appendChild(status);
  root.appendChild(transcript);
  root.appendChild(form);
  root.appendChild(controls);
  root.appendChild(skillsPanel);

  const setBusy = (busy: boolean) => {
    input.disabled = busy;
    send.disabled = busy;
  };

  const reask = (text: string) => {
    input.value = text;
    input.focus();
  };

  const render = (from: number) => {
    const msgs = session.messages;
    for (let i = from; i < msgs.length; i++) {
      const msg = msgs[i];
      if (msg) transcript.appendChild(messageNode(msg, reask));
    }
    transcript.scrollTop = transcript.scrollHeight;
  };

  const submit = async (text: string): Promise<void> => {
    if (session.busy || text.trim().length === 0) return;
    setBusy(true);
    const before = session.messages.length;
    try {
      await session.ask(text, {
        threshold: Number(threshold.value),
        k: Number(kSelect.value),
      });
    } finally {
      render(before);
      setBusy(false);
    }
    input.value = "";
  };

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submit(input.value);
  });

  void client
    .health()
    .then((h) => {
      status.textContent = `${h.model_kind} · ${h.index_size} indexed questions · v${h.version}`;
    })
    .catch(() => {
      status.textContent = "service unavailable";
    });

  void client
    .skills()
    .then((skills) => {
      const title = el("div", "skills-title", "Things you can ask about");
      skillsPanel.appendChild(title);
      for (const s of skills) {
        const chip = el("button", "skill-chip", s.skill);
        chip.type = "button";
        chip.title = s.actions.join(", ");
        chip.addEventListener("click", () => {
          if (s.sample_query) reask(s.sample_query);
        });
        skillsPanel.appendChild(chip);
      }
    })
    .catch(() => {
      // panel stays empty when the service has no index loaded
    });

  return {
    session,
    form,
    input,
    send,
    threshold,
    thresholdLabel,
    kSelect,
    transcript,
    status,
    skillsPanel,
    submit,
  };
}
