/**
 * Round-trip test against a live gateway: boots `valuevac serve` (the Python
 * package) on a free port, then drives the real client over HTTP + WS.
 *
 * Skips itself when the gateway CLI is not importable in this environment.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { GatewayClient, WebSocketLike } from "../src/client";
import { DecisionPayload, LogRecord } from "../src/types";

function gatewayAvailable(): boolean {
  try {
    execFileSync("python3", ["-c", "import valuevac.gateway.cli"], { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

const available = gatewayAvailable();
const suite = available ? describe : describe.skip;

function pythonPath(expr: string): string {
  return execFileSync("python3", ["-c", expr], { encoding: "utf-8" }).trim();
}

async function wait(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function until<T>(fn: () => Promise<T | null | undefined | false>, timeoutMs: number, stepMs = 50): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = await fn();
    if (value) return value as T;
    if (Date.now() > deadline) throw new Error("condition not reached in time");
    await wait(stepMs);
  }
}

suite("console against a live gateway", () => {
  let proc: ChildProcess;
  let base: string;
  let client: GatewayClient;

  beforeAll(async () => {
    const scenario = pythonPath(
      "from valuevac.harness.scenario import data_path; print(data_path('phone_user.yaml'))",
    );
    const floorplan = pythonPath(
      "from valuevac.harness.scenario import data_path; print(data_path('living_room.json'))",
    );
    const port = 8800 + Math.floor(Math.random() * 400);
    base = `http://127.0.0.1:${port}`;
    const dir = mkdtempSync(join(tmpdir(), "valuevac-console-"));
    const config = join(dir, "gateway.yaml");
    writeFileSync(
      config,
      [
        "backend:",
        "  kind: mock",
        `floorplan: ${floorplan}`,
        `scenario: ${scenario}`,
        `listen: 127.0.0.1:${port}`,
        `log_path: ${join(dir, "log.jsonl")}`,
        "clock_acceleration: 20",
        "",
      ].join("\n"),
    );
    proc = spawn("python3", ["-m", "valuevac.gateway.cli", "serve", "--config", config], {
      stdio: "ignore",
    });
    await until(async () => {
      try {
        const resp = await fetch(`${base}/state`);
        return resp.ok;
      } catch {
        return false;
      }
    }, 30_000, 100);

    client = new GatewayClient({
      baseUrl: base,
      wsFactory: (url) => new WebSocket(url) as unknown as WebSocketLike,
    });
    await client.connect();
  }, 45_000);

  afterAll(() => {
    client?.close();
    proc?.kill("SIGTERM");
  });

  it("renders the CLEAN summary card within 2s of the decision record", async () => {
    // watch the gateway log directly for the first decision...
    const decision = await until(async () => {
      const resp = await fetch(`${base}/log?since=0`);
      const body = (await resp.json()) as { records: LogRecord[] };
      return body.records.find((r) => r.kind === "decision");
    }, 20_000);
    const seenAt = Date.now();
    const payload = decision.payload as unknown as DecisionPayload;
    expect(payload.decision.token).toBe("CLEAN");

    // ...and require the console's card (summary included) within 2s of it
    await until(async () => {
      const card = client.state.scrollback.find((r) => r.id === decision.id);
      return card && client.state.summary ? card : null;
    }, 2_000, 20);
    expect(Date.now() - seenAt).toBeLessThan(2_000);
    expect(client.state.summary.length).toBeGreaterThan(0);
  }, 30_000);

  it("operator DOCK override flips the rendered mode promptly", async () => {
    await until(async () => (client.state.mode === "cleaning" ? true : null), 20_000, 20);
    const accepted = await client.sendOverride("DOCK", "integration");
    expect(accepted).toBe(true);
    const t0 = Date.now();
    await until(async () => (client.state.mode === "docking" ? true : null), 5_000, 10);
    const flipMs = Date.now() - t0;
    // one event-push interval is 100ms real; allow scheduling noise
    expect(flipMs).toBeLessThan(1_000);
    expect(client.state.pendingOverride).toBeNull();
  }, 30_000);

  it("spawning a pet changes the next mock decision to a safety deferral", async () => {
    // leave the dock and resume cleaning
    await client.sendOverride("CLEAN", "integration");
    await until(async () => (client.state.mode === "cleaning" ? true : null), 10_000, 20);

    // a dog patrolling the room's central band crosses the robot's cleaning
    // path no matter where the accelerated run has taken it
    const markerId = client.state.lastRecordId;
    const ok = await client.injectEvent({
      action: "spawn",
      entity: {
        id: "intruder_dog",
        kind: "pet",
        at: [3.0, 2.0, 0],
        activity: "playing",
        motion_speed: 0.45,
        waypoints: [
          [1.0, 2.0],
          [5.0, 2.0],
        ],
      },
    });
    expect(ok).toBe(true);

    const deferral = await until(async () => {
      const hit = client.state.scrollback.find((r) => {
        if (r.id <= markerId || r.kind !== "decision") return false;
        const payload = r.payload as unknown as DecisionPayload;
        const pets = payload.features?.entities?.filter((e) => e.kind === "pet") ?? [];
        return (
          pets.length > 0 &&
          (payload.decision.token === "INTERRUPT" || payload.decision.token === "WAIT")
        );
      });
      return hit ?? null;
    }, 40_000, 50);

    const payload = deferral.payload as unknown as DecisionPayload;
    // pet-safety rule: "not advisable for the pet's safety, ... could scare";
    // cautious fallback when the pet only grazed the burst: "safer choice"
    expect(payload.trace?.rationale ?? "").toMatch(/safe|scare|caution/i);
  }, 60_000);
});
