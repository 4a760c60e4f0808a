import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { GatewayClient, WebSocketLike } from "../src/client";
import { GatewayState, LogRecord } from "../src/types";

class FakeSocket implements WebSocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  closed = false;

  close(): void {
    this.closed = true;
  }

  open(): void {
    this.onopen?.();
  }

  push(message: unknown): void {
    this.onmessage?.({ data: JSON.stringify(message) });
  }

  drop(): void {
    this.onclose?.();
  }
}

function snapshot(partial: Partial<GatewayState> = {}): GatewayState {
  return {
    mode: "observation",
    pose: { x: 1, y: 1, heading: 0 },
    sim_time: 0,
    wall_clock: "09:00",
    wait_timer: 0,
    blocked_cycles: 0,
    summary: "",
    degraded: false,
    backend: "mock",
    scenario: "test",
    entities: [],
    last_record_id: 0,
    ...partial,
  };
}

function record(id: number, kind: LogRecord["kind"], payload: Record<string, unknown> = {}): LogRecord {
  return { v: 1, id, sim_time: 0, wall_clock: "09:00", kind, payload };
}

interface Route {
  status?: number;
  body: unknown;
}

function makeFetch(routes: Record<string, Route | ((url: string, init?: unknown) => Route)>) {
  const calls: Array<{ url: string; init?: Record<string, unknown> }> = [];
  const impl = async (url: string, init?: Record<string, unknown>) => {
    calls.push({ url, init });
    const path = url.replace(/^[a-z]+:\/\/[^/]+/, "");
    for (const [prefix, route] of Object.entries(routes)) {
      if (path.startsWith(prefix)) {
        const resolved = typeof route === "function" ? route(url, init) : route;
        return {
          ok: (resolved.status ?? 200) < 400,
          status: resolved.status ?? 200,
          json: async () => resolved.body,
        };
      }
    }
    throw new Error(`no route for ${url}`);
  };
  return { impl, calls };
}

describe("GatewayClient", () => {
  let sockets: FakeSocket[];
  const wsFactory = () => {
    const socket = new FakeSocket();
    sockets.push(socket);
    return socket;
  };

  beforeEach(() => {
    sockets = [];
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("hydrates from /state and /log, then subscribes", async () => {
    const { impl, calls } = makeFetch({
      "/state": { body: snapshot({ summary: "hello" }) },
      "/log": { body: { records: [record(1, "event", { event: "run_started" })] } },
    });
    const client = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await client.connect();
    expect(client.state.summary).toBe("hello");
    expect(client.state.scrollback.map((r) => r.id)).toEqual([1]);
    expect(calls[0].url).toContain("/state");
    expect(calls[1].url).toContain("/log?since=0");
    expect(sockets.length).toBe(1);
  });

  it("applies websocket pushes to the view state", async () => {
    const { impl } = makeFetch({
      "/state": { body: snapshot() },
      "/log": { body: { records: [] } },
    });
    const client = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await client.connect();
    const socket = sockets[0];
    socket.push({ type: "log", record: record(5, "mode_change", { from: "observation", to: "cleaning", cause: 4 }) });
    expect(client.state.mode).toBe("cleaning");
    expect(client.state.lastRecordId).toBe(5);
  });

  it("marks stale on drop and backfills since the last id on reconnect", async () => {
    let logCalls: string[] = [];
    const { impl } = makeFetch({
      "/state": { body: snapshot() },
      "/log": (url) => {
        logCalls.push(url);
        return { body: { records: [record(9, "event", { event: "late" })] } };
      },
    });
    const client = new GatewayClient({
      baseUrl: "http://gw",
      fetchImpl: impl,
      wsFactory,
      backoffInitialMs: 100,
    });
    await client.connect();
    sockets[0].push({ type: "log", record: record(7, "event", { event: "x" }) });
    logCalls = [];

    sockets[0].drop();
    expect(client.state.connection).toBe("stale");

    await vi.advanceTimersByTimeAsync(100);
    expect(sockets.length).toBe(2);
    sockets[1].open();
    await vi.advanceTimersByTimeAsync(1);
    expect(logCalls.some((u) => u.includes("since=7") || u.includes("since=9"))).toBe(true);
    expect(client.state.scrollback.map((r) => r.id)).toContain(9);
  });

  it("backs off exponentially while the gateway is down", async () => {
    let stateCalls = 0;
    const { impl } = makeFetch({
      "/state": () => {
        stateCalls += 1;
        throw new Error("connection refused");
      },
      "/log": { body: { records: [] } },
    });
    const client = new GatewayClient({
      baseUrl: "http://gw",
      fetchImpl: impl,
      wsFactory,
      backoffInitialMs: 100,
      backoffMaxMs: 800,
    });
    await client.connect();
    expect(client.state.connection).toBe("stale");
    expect(stateCalls).toBe(1);
    await vi.advanceTimersByTimeAsync(100); // retry 1 after 100ms
    expect(stateCalls).toBe(2);
    await vi.advanceTimersByTimeAsync(200); // retry 2 after 200ms
    expect(stateCalls).toBe(3);
    await vi.advanceTimersByTimeAsync(400); // retry 3 after 400ms
    expect(stateCalls).toBe(4);
    expect(client.backoffMs).toBe(800); // capped
    client.close();
  });

  it("sends overrides and reports acceptance", async () => {
    const { impl, calls } = makeFetch({
      "/state": { body: snapshot() },
      "/log": { body: { records: [] } },
      "/override": { body: { accepted: true, token: "DOCK" } },
    });
    const client = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await client.connect();
    const accepted = await client.sendOverride("DOCK");
    expect(accepted).toBe(true);
    expect(client.state.pendingOverride).toBe("DOCK");
    const overrideCall = calls.find((c) => c.url.includes("/override"));
    expect(JSON.parse(String(overrideCall?.init?.body))).toMatchObject({ token: "DOCK" });
    // ... the badge flips when the push arrives, and the pending flag clears
    sockets[0].push({ type: "log", record: record(11, "override", { decision: { token: "DOCK" } }) });
    sockets[0].push({ type: "log", record: record(12, "mode_change", { from: "cleaning", to: "docking", cause: 11 }) });
    expect(client.state.pendingOverride).toBeNull();
    expect(client.state.mode).toBe("docking");
  });

  it("renders rejections verbatim and frees the pending slot", async () => {
    const { impl } = makeFetch({
      "/state": { body: snapshot() },
      "/log": { body: { records: [] } },
      "/override": { status: 409, body: { detail: "token CONTINUE not valid in mode observation" } },
    });
    const client = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await client.connect();
    const accepted = await client.sendOverride("CONTINUE");
    expect(accepted).toBe(false);
    expect(client.state.pendingOverride).toBeNull();
    expect(client.state.lastError).toBe("token CONTINUE not valid in mode observation");
  });

  it("blocks a second override while one is pending", async () => {
    const { impl } = makeFetch({
      "/state": { body: snapshot() },
      "/log": { body: { records: [] } },
      "/override": { body: { accepted: true } },
    });
    const client = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await client.connect();
    await client.sendOverride("DOCK");
    await expect(client.sendOverride("CLEAN")).rejects.toThrow(/pending/);
  });

  it("injects scenario events and surfaces schema rejections inline", async () => {
    const { impl } = makeFetch({
      "/state": { body: snapshot() },
      "/log": { body: { records: [] } },
      "/scenario/event": (url, init) => {
        const body = JSON.parse(String((init as { body: string }).body));
        if (!body.entity) {
          return { status: 422, body: { detail: "event.entity: spawn requires an entity mapping" } };
        }
        return { body: { accepted: true } };
      },
    });
    const client = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await client.connect();
    expect(await client.injectEvent({ action: "spawn", entity: { id: "d", kind: "pet", at: [1, 1, 0] } })).toBe(true);
    expect(client.state.lastError).toBe("");
    expect(await client.injectEvent({ action: "spawn" })).toBe(false);
    expect(client.state.lastError).toMatch(/entity/);
  });

  it("a reload reconstructs the same view from /state + /log", async () => {
    const records = [
      record(1, "event", { event: "run_started" }),
      record(2, "decision", { decision: { token: "CLEAN", source: "model" }, mode: "observation", summary: "go" }),
      record(3, "mode_change", { from: "observation", to: "cleaning", cause: 2 }),
    ];
    const { impl } = makeFetch({
      "/state": { body: snapshot({ mode: "cleaning", summary: "go", last_record_id: 3 }) },
      "/log": { body: { records } },
    });
    const first = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await first.connect();
    const second = new GatewayClient({ baseUrl: "http://gw", fetchImpl: impl, wsFactory });
    await second.connect();
    expect(second.state.mode).toBe(first.state.mode);
    expect(second.state.summary).toBe(first.state.summary);
    expect(second.state.scrollback).toEqual(first.state.scrollback);
  });
});
