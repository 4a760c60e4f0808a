import { describe, expect, it } from "vitest";

import {
  applyMessage,
  applyRecord,
  beginOverride,
  decisionCards,
  hydrate,
  initialState,
  markStale,
  overrideRejected,
  SCROLLBACK_LIMIT,
} from "../src/store";
import { cardModels } from "../src/render";
import { GatewayState, LogRecord } from "../src/types";

function record(id: number, kind: LogRecord["kind"], payload: Record<string, unknown>): LogRecord {
  return { v: 1, id, sim_time: id * 0.05, wall_clock: "10:00", kind, payload };
}

function snapshot(partial: Partial<GatewayState> = {}): GatewayState {
  return {
    mode: "observation",
    pose: { x: 1, y: 2, heading: 90 },
    sim_time: 0,
    wall_clock: "10:00",
    wait_timer: 0,
    blocked_cycles: 0,
    summary: "",
    degraded: false,
    backend: "mock",
    scenario: "phone_user",
    entities: [],
    last_record_id: 0,
    ...partial,
  };
}

describe("hydration", () => {
  it("adopts the snapshot and goes live", () => {
    const state = hydrate(initialState(), snapshot({ mode: "cleaning", summary: "hi" }));
    expect(state.mode).toBe("cleaning");
    expect(state.summary).toBe("hi");
    expect(state.connection).toBe("live");
  });
});

describe("scrollback ordering", () => {
  it("keeps records ordered by id under out-of-order arrival", () => {
    let state = initialState();
    state = applyRecord(state, record(3, "event", { event: "c" }));
    state = applyRecord(state, record(1, "event", { event: "a" }));
    state = applyRecord(state, record(2, "event", { event: "b" }));
    expect(state.scrollback.map((r) => r.id)).toEqual([1, 2, 3]);
  });

  it("drops duplicates from overlapping backfills", () => {
    let state = initialState();
    state = applyRecord(state, record(1, "event", { event: "a" }));
    state = applyRecord(state, record(2, "event", { event: "b" }));
    state = applyRecord(state, record(1, "event", { event: "a" }));
    expect(state.scrollback.length).toBe(2);
  });

  it("caps the scrollback", () => {
    let state = initialState();
    for (let i = 1; i <= SCROLLBACK_LIMIT + 50; i++) {
      state = applyRecord(state, record(i, "event", { event: "x" }));
    }
    expect(state.scrollback.length).toBe(SCROLLBACK_LIMIT);
    expect(state.scrollback[0].id).toBe(51);
    expect(state.lastRecordId).toBe(SCROLLBACK_LIMIT + 50);
  });
});

describe("mode handling", () => {
  it("renders mode only from mode_change records, never inferred", () => {
    let state = hydrate(initialState(), snapshot());
    // a decision alone must not move the badge
    state = applyRecord(
      state,
      record(1, "decision", { decision: { token: "CLEAN", source: "model" }, mode: "observation" }),
    );
    expect(state.mode).toBe("observation");
    state = applyRecord(state, record(2, "mode_change", { from: "observation", to: "cleaning", cause: 1 }));
    expect(state.mode).toBe("cleaning");
  });

  it("ignores malformed mode_change targets", () => {
    let state = hydrate(initialState(), snapshot());
    state = applyRecord(state, record(1, "mode_change", { from: "observation", to: "flying" }));
    expect(state.mode).toBe("observation");
  });
});

describe("summary and cards", () => {
  it("keeps the latest decision summary", () => {
    let state = initialState();
    state = applyRecord(
      state,
      record(1, "decision", { decision: { token: "WAIT", source: "model" }, mode: "observation", summary: "first" }),
    );
    state = applyRecord(
      state,
      record(2, "decision", { decision: { token: "CLEAN", source: "model" }, mode: "observation", summary: "second" }),
    );
    expect(state.summary).toBe("second");
    expect(decisionCards(state).map((r) => r.id)).toEqual([2, 1]);
  });

  it("card models expose verbatim trace aspects in fixed order", () => {
    let state = initialState();
    state = applyRecord(
      state,
      record(7, "decision", {
        decision: { token: "WAIT", source: "model" },
        mode: "observation",
        summary: "quiet time",
        trace: {
          value_alignment: "V",
          time_context: "T",
          action_choice_and_consequences: "A",
          rationale: "R",
          purpose_reflection: "P",
          raw_text: "raw",
        },
      }),
    );
    const [card] = cardModels(state);
    expect(card.token).toBe("WAIT");
    expect(card.summary).toBe("quiet time");
    expect(card.aspects.map((a) => a.label)).toEqual([
      "Value alignment",
      "Time context",
      "Action choice and consequences",
      "Rationale",
      "Purpose reflection",
    ]);
    expect(card.aspects.map((a) => a.text)).toEqual(["V", "T", "A", "R", "P"]);
  });
});

describe("override pendings", () => {
  it("allows at most one pending override", () => {
    let state = beginOverride(initialState(), "DOCK");
    expect(state.pendingOverride).toBe("DOCK");
    expect(() => beginOverride(state, "CLEAN")).toThrow(/pending/);
  });

  it("clears on the override record from the server", () => {
    let state = beginOverride(initialState(), "DOCK");
    state = applyRecord(state, record(4, "override", { decision: { token: "DOCK" } }));
    expect(state.pendingOverride).toBeNull();
  });

  it("clears with the reason on rejection", () => {
    let state = beginOverride(initialState(), "CONTINUE");
    state = overrideRejected(state, "token CONTINUE not valid in mode observation");
    expect(state.pendingOverride).toBeNull();
    expect(state.lastError).toMatch(/not valid/);
  });
});

describe("connection status", () => {
  it("pose pushes mark the feed live again", () => {
    let state = markStale(hydrate(initialState(), snapshot()));
    expect(state.connection).toBe("stale");
    state = applyMessage(state, {
      type: "pose",
      pose: { x: 0, y: 0, heading: 0 },
      mode: "observation",
      sim_time: 1,
      wall_clock: "10:00",
      entities: [],
    });
    expect(state.connection).toBe("live");
  });

  it("server disconnect message marks stale", () => {
    let state = hydrate(initialState(), snapshot());
    state = applyMessage(state, { type: "disconnect", reason: "slow" });
    expect(state.connection).toBe("stale");
  });
});
