/**
 * Chat surface for the answer service: sign in as a user, ask questions,
 * read answers with their five grounding badges, inspect the executed SQL
 * and per-stage timings. Everything rendered comes from API payloads.
 */

import { ApiClient, ApiError } from "./api.js";
import { badgeStates } from "./badges.js";
import type { SessionInfo, TracePayload } from "./types.js";

const KIND_TEXT: Record<TracePayload["kind"], string> = {
  answer: "answer",
  access_error: "access",
  no_data: "no data",
  irrelevant: "irrelevant",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function formatMs(seconds: number): string {
  return `${(seconds * 1000).toFixed(1)}ms`;
}

/** User bubble (right-aligned). */
function renderUserMessage(text: string): HTMLElement {
  const wrap = el("div", "msg msg-user");
  wrap.appendChild(el("div", "bubble", text));
  return wrap;
}

/** Five score badges; clicking one toggles its verbatim evidence list. */
function renderBadges(trace: TracePayload): HTMLElement {
  const row = el("div", "badge-row");
  if (trace.scores === null) return row;
  for (const badge of badgeStates(trace.scores, trace.evidence)) {
    const holder = el("span", "badge-holder");
    const button = el("button", `badge badge-${badge.state}`, `${badge.flag} ${badge.value}`);
    button.type = "button";
    button.title = badge.label;
    const popover = el("div", "popover hidden");
    popover.appendChild(el("div", "popover-title", badge.label));
    if (badge.evidence.length === 0) {
      popover.appendChild(el("div", "popover-line popover-empty", "no findings recorded"));
    }
    for (const line of badge.evidence) {
      popover.appendChild(el("div", "popover-line", line));
    }
    button.addEventListener("click", () => popover.classList.toggle("hidden"));
    holder.appendChild(button);
    holder.appendChild(popover);
    row.appendChild(holder);
  }
  return row;
}

/** Collapsible panel showing the statement that actually ran. */
function renderSqlPanel(trace: TracePayload): HTMLElement | null {
  const sql = trace.sql_executed ?? trace.sql_model;
  if (!sql) return null;
  const details = el("details", "sql-panel");
  details.appendChild(el("summary", "sql-summary", "SQL"));
  const pre = el("pre", "sql-text", sql);
  details.appendChild(pre);
  return details;
}

function renderTimings(trace: TracePayload): HTMLElement {
  const strip = el("div", "timings");
  const stages: Array<keyof TracePayload["stage_timings"]> = [
    "route",
    "sql_gen",
    "run_query",
    "answer",
    "score",
  ];
  for (const stage of stages) {
    strip.appendChild(el("span", "timing", `${stage} ${formatMs(trace.stage_timings[stage])}`));
  }
  strip.appendChild(el("span", "timing timing-calls", `${trace.llm_calls} llm calls`));
  return strip;
}

/** System bubble for one trace: kind, answer, badges, SQL, timings. */
function renderTraceMessage(trace: TracePayload): HTMLElement {
  const wrap = el("div", "msg msg-system");
  const bubble = el("div", "bubble");
  const head = el("div", "bubble-head");
  head.appendChild(el("span", `kind kind-${trace.kind}`, KIND_TEXT[trace.kind]));
  if (trace.intention) head.appendChild(el("span", "intention", trace.intention));
  bubble.appendChild(head);
  bubble.appendChild(el("div", "answer-text", trace.answer));
  if (trace.kind === "answer") {
    bubble.appendChild(renderBadges(trace));
  }
  if (trace.sources.length > 0) {
    bubble.appendChild(el("div", "sources", `sources: ${trace.sources.join(", ")}`));
  }
  const sqlPanel = renderSqlPanel(trace);
  if (sqlPanel) bubble.appendChild(sqlPanel);
  bubble.appendChild(renderTimings(trace));
  wrap.appendChild(bubble);
  return wrap;
}

export class ChatApp {
  session: SessionInfo | null = null;
  pending = false;

  private readonly loginPanel: HTMLElement;
  private readonly loginInput: HTMLInputElement;
  private readonly loginError: HTMLElement;
  private readonly sessionBar: HTMLElement;
  private readonly messageList: HTMLElement;
  private readonly input: HTMLInputElement;
  private readonly sendButton: HTMLButtonElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {
    root.className = "tqa-app";
    root.replaceChildren();

    this.loginPanel = el("form", "login");
    const label = el("label", "login-label", "Sign in as");
    label.setAttribute("for", "user-id");
    this.loginInput = el("input", "login-input");
    this.loginInput.id = "user-id";
    this.loginInput.placeholder = "user id, e.g. analyst";
    const loginButton = el("button", "login-button", "Start session");
    loginButton.type = "submit";
    this.loginError = el("div", "login-error hidden");
    this.loginPanel.append(label, this.loginInput, loginButton, this.loginError);
    this.loginPanel.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.login(this.loginInput.value.trim());
    });

    this.sessionBar = el("div", "session-bar hidden");
    this.messageList = el("div", "messages");

    const composer = el("form", "composer");
    this.input = el("input", "composer-input");
    this.input.placeholder = "Ask about the tables you can see";
    this.input.disabled = true;
    this.sendButton = el("button", "composer-send", "Send");
    this.sendButton.type = "submit";
    this.sendButton.disabled = true;
    composer.append(this.input, this.sendButton);
    composer.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.input.value.trim();
      if (text) void this.send(text);
    });

    root.append(this.loginPanel, this.sessionBar, this.messageList, composer);
  }

  /** Open a session and show the granted tables from its profile. */
  async login(userId: string): Promise<void> {
    if (!userId || this.pending) return;
    this.loginError.classList.add("hidden");
    try {
      this.session = await this.client.openSession(userId);
    } catch (err) {
      this.loginError.textContent = err instanceof ApiError ? err.message : String(err);
      this.loginError.classList.remove("hidden");
      return;
    }
    this.renderSessionBar(this.session);
    this.loginPanel.classList.add("hidden");
    this.input.disabled = false;
    this.sendButton.disabled = false;
  }

  /** One in-flight question at a time; input stays disabled while pending. */
  async send(text: string, echoUser = true): Promise<void> {
    if (!this.session || this.pending) return;
    this.pending = true;
    this.input.disabled = true;
    this.sendButton.disabled = true;
    if (echoUser) this.messageList.appendChild(renderUserMessage(text));
    this.input.value = "";
    try {
      const trace = await this.client.ask(this.session.session_id, text);
      this.messageList.appendChild(renderTraceMessage(trace));
    } catch (err) {
      this.messageList.appendChild(this.renderFailure(text, err));
    } finally {
      this.pending = false;
      this.input.disabled = false;
      this.sendButton.disabled = false;
      this.messageList.scrollTop = this.messageList.scrollHeight;
    }
  }

  private renderSessionBar(session: SessionInfo): void {
    this.sessionBar.classList.remove("hidden");
    this.sessionBar.replaceChildren();
    this.sessionBar.appendChild(
      el("span", "session-user", `${session.user_id} (${session.role})`),
    );
    const chips = el("span", "chips");
    for (const table of session.tables) {
      chips.appendChild(el("span", "chip", table));
    }
    this.sessionBar.appendChild(chips);
    if (session.tables.length === 0) {
      this.sessionBar.appendChild(
        el("span", "warn-empty", "no tables granted; questions will be refused"),
      );
    }
  }

  /** Transport failures get a retry button that re-sends the same text. */
  private renderFailure(text: string, err: unknown): HTMLElement {
    const wrap = el("div", "msg msg-system msg-error");
    const bubble = el("div", "bubble");
    const message = err instanceof ApiError ? err.message : String(err);
    bubble.appendChild(el("div", "error-text", message));
    const retry = el("button", "retry", "Retry");
    retry.type = "button";
    retry.addEventListener("click", () => {
      wrap.remove();
      // the user bubble is already on screen from the first attempt
      void this.send(text, false);
    });
    bubble.appendChild(retry);
    wrap.appendChild(bubble);
    return wrap;
  }
}

export function mountApp(root: HTMLElement, client: ApiClient): ChatApp {
  return new ChatApp(root, client);
}
