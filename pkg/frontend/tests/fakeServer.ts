/** Fixture-backed fetch: captured service payloads served by route. */

import { readFileSync } from "node:fs";
import { resolve } from "node:path";

import type { FetchLike } from "../src/api.js";

// import.meta.url points at the DOM shim's origin under vitest, so resolve
// fixtures from the package root instead
export function loadFixture<T>(name: string): T {
  const file = resolve(process.cwd(), "tests", "fixtures", name);
  return JSON.parse(readFileSync(file, "utf-8")) as T;
}

export interface Route {
  method: string;
  path: string;
  body: unknown;
  status?: number;
}

export interface RecordedCall {
  method: string;
  path: string;
  body: unknown;
}

export interface FakeServer {
  fetch: FetchLike;
  calls: RecordedCall[];
}

function json(body: unknown, status: number): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function fakeServer(routes: Route[]): FakeServer {
  const calls: RecordedCall[] = [];
  const fetchImpl: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const path = new URL(input, "http://fixtures").pathname;
    calls.push({
      method,
      path,
      body: init?.body === undefined ? undefined : JSON.parse(String(init.body)),
    });
    const route = routes.find((r) => r.method === method && r.path === path);
    if (!route) {
      return json({ detail: `no fixture for ${method} ${path}` }, 404);
    }
    return json(route.body, route.status ?? 200);
  };
  return { fetch: fetchImpl, calls };
}
