import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { SessionInfo, TracePayload } from "../src/types.js";
import { fakeServer, loadFixture } from "./fakeServer.js";

const session = loadFixture<SessionInfo>("session_analyst.json");
const trace = loadFixture<TracePayload>("query_rank_answer.json");

describe("ApiClient", () => {
  it("opens a session and returns the granted tables", async () => {
    const server = fakeServer([{ method: "POST", path: "/sessions", body: session }]);
    const client = new ApiClient("http://fixtures", server.fetch);
    const opened = await client.openSession("analyst");
    expect(opened.tables).toContain("water_consumption");
    expect(server.calls[0]?.body).toEqual({ user_id: "analyst" });
  });

  it("returns the trace payload for a question", async () => {
    const server = fakeServer([
      { method: "POST", path: `/sessions/${session.session_id}/query`, body: trace },
    ]);
    const client = new ApiClient("http://fixtures", server.fetch);
    const result = await client.ask(session.session_id, trace.query);
    expect(result.kind).toBe("answer");
    expect(result.scores).toHaveLength(5);
    expect(server.calls[0]?.body).toEqual({ query: trace.query });
  });

  it("surfaces the server's error detail", async () => {
    const server = fakeServer([
      { method: "POST", path: "/sessions", body: { detail: "no user 'nobody' in policy" }, status: 404 },
    ]);
    const client = new ApiClient("http://fixtures", server.fetch);
    const failure = await client.openSession("nobody").catch((err: unknown) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(404);
    expect((failure as ApiError).message).toBe("no user 'nobody' in policy");
  });

  it("marks unreachable hosts as transport failures", async () => {
    const client = new ApiClient("http://fixtures", async () => {
      throw new TypeError("fetch failed");
    });
    const failure = await client.health().catch((err: unknown) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).transport).toBe(true);
  });
});
