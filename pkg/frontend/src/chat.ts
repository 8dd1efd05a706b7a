import { ApiError, HelpClient } from "./api.js";
import type { QueryResponse } from "./types.js";

export type Role = "user" | "assistant" | "error";

export interface ChatMessage {
  role: Role;
  text: string;
  /** Server payload behind an assistant message, for detail views. */
  detail?: QueryResponse;
}

export interface AskOptions {
  threshold: number;
  k: number;
}

function fmt(x: number): string {
  return x.toFixed(3);
}

/**
 * Turn a service answer into the assistant's reply text.
 *
 * Every number shown comes straight from the payload; the threshold is
 * echoed only to explain an abstention, never recomputed client side.
 */
export function renderAnswer(detail: QueryResponse, threshold: number): string {
  if (!detail.is_help) {
    return `That doesn't look like a help question (help probability ${fmt(detail.p_help)}).`;
  }
  if (detail.match) {
    const m = detail.match;
    return (
      `${m.response_text}\n` +
      `Matched "${m.matched_query}" (similarity ${fmt(m.similarity)}).`
    );
  }
  const lines = [
    `I couldn't find a confident answer: no indexed question cleared ${fmt(threshold)}.`,
  ];
  const pos = detail.pos_baseline;
  if (pos && pos.response_id) {
    lines.push(
      `A keyword lookup suggests ${pos.response_id}` +
        (pos.skill ? ` (skill: ${pos.skill})` : "") +
        `.`,
    );
  }
  return lines.join("\n");
}

/**
 * Append-only conversation state over a HelpClient.
 *
 * At most one question may be in flight; ask() rejects re-entry so the UI
 * can simply disable its form while busy.
 */
export class ChatSession {
  private readonly client: HelpClient;
  private readonly log: ChatMessage[] = [];
  private inFlight = false;

  constructor(client: HelpClient) {
    this.client = client;
  }

  get messages(): readonly ChatMessage[] {
    return this.log;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  async ask(text: string, opts: AskOptions): Promise<ChatMessage> {
    const trimmed = text.trim();
    if (trimmed.length === 0) {
      throw new Error("question must be non-empty");
    }
    if (this.inFlight) {
      throw new Error("a question is already in flight");
    }
    this.inFlight = true;
    this.log.push({ role: "user", text: trimmed });
    try {
      const detail = await this.client.query({
        text: trimmed,
        threshold: opts.threshold,
        k: opts.k,
      });
      const reply: ChatMessage = {
        role: "assistant",
        text: renderAnswer(detail, opts.threshold),
        detail,
      };
      this.log.push(reply);
      return reply;
    } catch (err) {
      const text =
        err instanceof ApiError
          ? `Service error (${err.status}): ${err.message}`
          : `Request failed: ${err instanceof Error ? err.message : String(err)}`;
      const reply: ChatMessage = { role: "error", text };
      this.log.push(reply);
      return reply;
    } finally {
      this.inFlight = false;
    }
  }
}
