import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatApp, mountApp } from "../src/app.js";
import type { SessionInfo, TracePayload } from "../src/types.js";
import { fakeServer, loadFixture, type Route } from "./fakeServer.js";

const analyst = loadFixture<SessionInfo>("session_analyst.json");
const visitor = loadFixture<SessionInfo>("session_visitor.json");
const rankTrace = loadFixture<TracePayload>("query_rank_answer.json");
const faqTrace = loadFixture<TracePayload>("query_faq.json");
const accessTrace = loadFixture<TracePayload>("query_access_error.json");
const flaggedTrace = loadFixture<TracePayload>("query_flagged_number.json");

function queryPath(session: SessionInfo): string {
  return `/sessions/${session.session_id}/query`;
}

function makeApp(routes: Route[]): { app: ChatApp; root: HTMLElement } {
  const server = fakeServer(routes);
  const client = new ApiClient("http://fixtures", server.fetch);
  const root = document.createElement("div");
  document.body.appendChild(root);
  return { app: mountApp(root, client), root };
}

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}

beforeEach(() => {
  document.body.replaceChildren();
});

describe("login", () => {
  it("shows the granted tables after sign-in", async () => {
    const { app, root } = makeApp([{ method: "POST", path: "/sessions", body: analyst }]);
    await app.login("analyst");
    const chips = [...root.querySelectorAll(".chip")].map((c) => c.textContent);
    expect(chips).toEqual(analyst.tables);
    expect(root.querySelector(".login")?.classList.contains("hidden")).toBe(true);
  });

  it("shows an error banner for an unknown user", async () => {
    const { app, root } = makeApp([
      { method: "POST", path: "/sessions", body: { detail: "no user 'nobody' in policy" }, status: 404 },
    ]);
    await app.login("nobody");
    const banner = root.querySelector(".login-error");
    expect(banner?.classList.contains("hidden")).toBe(false);
    expect(banner?.textContent).toContain("nobody");
    expect(app.session).toBeNull();
  });

  it("warns on a zero-grant profile", async () => {
    const { app, root } = makeApp([{ method: "POST", path: "/sessions", body: visitor }]);
    await app.login("visitor");
    expect(root.querySelectorAll(".chip")).toHaveLength(0);
    expect(root.querySelector(".warn-empty")).not.toBeNull();
  });

  it("signs in through the form as well", async () => {
    const { root } = makeApp([{ method: "POST", path: "/sessions", body: analyst }]);
    const input = root.querySelector<HTMLInputElement>("#user-id");
    const form = root.querySelector<HTMLFormElement>(".login");
    if (!input || !form) throw new Error("login controls missing");
    input.value = "analyst";
    form.dispatchEvent(new Event("submit", { cancelable: true }));
    await flush();
    expect(root.querySelectorAll(".chip").length).toBeGreaterThan(0);
  });
});

describe("asking questions", () => {
  it("renders an answer bubble whose badges match the score vector", async () => {
    const { app, root } = makeApp([
      { method: "POST", path: "/sessions", body: analyst },
      { method: "POST", path: queryPath(analyst), body: rankTrace },
    ]);
    await app.login("analyst");
    await app.send(rankTrace.query);

    const userBubble = root.querySelector(".msg-user .bubble");
    expect(userBubble?.textContent).toBe(rankTrace.query);
    expect(root.querySelector(".answer-text")?.textContent).toBe(rankTrace.answer);
    expect(root.querySelector(".kind")?.textContent).toBe("answer");

    // fixture vector is [1, 1, 1, 1, -1]: four clean flags, one not applicable
    const badges = [...root.querySelectorAll(".badge")];
    expect(badges).toHaveLength(5);
    expect(badges.map((b) => b.className)).toEqual([
      "badge badge-ok",
      "badge badge-ok",
      "badge badge-ok",
      "badge badge-ok",
      "badge badge-na",
    ]);
    expect(badges[4]?.textContent).toBe("s5 n/a");
  });

  it("shows the executed SQL and the five stage timings", async () => {
    const { app, root } = makeApp([
      { method: "POST", path: "/sessions", body: analyst },
      { method: "POST", path: queryPath(analyst), body: rankTrace },
    ]);
    await app.login("analyst");
    await app.send(rankTrace.query);
    expect(root.querySelector(".sql-text")?.textContent).toBe(rankTrace.sql_executed);
    const timings = [...root.querySelectorAll(".timing")].map((t) => t.textContent ?? "");
    expect(timings.some((t) => t.startsWith("route "))).toBe(true);
    expect(timings.some((t) => t.startsWith("score "))).toBe(true);
    expect(timings.at(-1)).toBe(`${rankTrace.llm_calls} llm calls`);
  });

  it("marks an ungrounded number red and lists it in the popover", async () => {
    const { app, root } = makeApp([
      { method: "POST", path: "/sessions", body: analyst },
      { method: "POST", path: queryPath(analyst), body: flaggedTrace },
    ]);
    await app.login("analyst");
    await app.send(flaggedTrace.query);

    const badges = [...root.querySelectorAll(".badge")];
    expect(badges[0]?.className).toBe("badge badge-warn");
    (badges[0] as HTMLButtonElement).click();
    const popover = root.querySelector(".popover:not(.hidden)");
    expect(popover?.textContent).toContain("3.2");
  });

  it("renders the access message without any score badges", async () => {
    const { app, root } = makeApp([
      { method: "POST", path: "/sessions", body: visitor },
      { method: "POST", path: queryPath(visitor), body: accessTrace },
    ]);
    await app.login("visitor");
    await app.send(accessTrace.query);
    expect(root.querySelector(".answer-text")?.textContent).toBe(accessTrace.answer);
    expect(root.querySelector(".kind")?.textContent).toBe("access");
    expect(root.querySelectorAll(".badge")).toHaveLength(0);
  });

  it("lists FAQ sources under the answer", async () => {
    const { app, root } = makeApp([
      { method: "POST", path: "/sessions", body: analyst },
      { method: "POST", path: queryPath(analyst), body: faqTrace },
    ]);
    await app.login("analyst");
    await app.send(faqTrace.query);
    expect(root.querySelector(".sources")?.textContent).toBe(
      `sources: ${faqTrace.sources.join(", ")}`,
    );
  });

  it("disables the input while a question is in flight", async () => {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    const server = fakeServer([
      { method: "POST", path: "/sessions", body: analyst },
      { method: "POST", path: queryPath(analyst), body: rankTrace },
    ]);
    const gated: typeof server.fetch = async (input, init) => {
      if (String(input).endsWith("/query")) await gate;
      return server.fetch(input, init);
    };
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = mountApp(root, new ApiClient("http://fixtures", gated));
    await app.login("analyst");

    const input = root.querySelector<HTMLInputElement>(".composer-input");
    const pending = app.send(rankTrace.query);
    expect(app.pending).toBe(true);
    expect(input?.disabled).toBe(true);
    release();
    await pending;
    expect(app.pending).toBe(false);
    expect(input?.disabled).toBe(false);
  });

  it("offers a retry that re-sends after a transport failure", async () => {
    const server = fakeServer([
      { method: "POST", path: "/sessions", body: analyst },
      { method: "POST", path: queryPath(analyst), body: rankTrace },
    ]);
    let failures = 1;
    const flaky: typeof server.fetch = async (input, init) => {
      if (String(input).endsWith("/query") && failures > 0) {
        failures -= 1;
        throw new TypeError("connection reset");
      }
      return server.fetch(input, init);
    };
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = mountApp(root, new ApiClient("http://fixtures", flaky));
    await app.login("analyst");
    await app.send(rankTrace.query);

    const retry = root.querySelector<HTMLButtonElement>(".retry");
    expect(root.querySelector(".msg-error")).not.toBeNull();
    expect(retry).not.toBeNull();
    retry?.click();
    await flush();

    expect(root.querySelector(".msg-error")).toBeNull();
    expect(root.querySelector(".answer-text")?.textContent).toBe(rankTrace.answer);
    // the original user bubble is kept; the retry does not duplicate it
    expect(root.querySelectorAll(".msg-user")).toHaveLength(1);
  });
});
