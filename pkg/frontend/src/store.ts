/**
 * Console view state and its pure update functions.
 *
 * The rendered mode always comes from the last mode_change record (or the
 * initial hydrated state); nothing here infers modes client-side. Scrollback
 * stays ordered by record id and deduplicated, so hydration, websocket
 * pushes, and reconnect backfills can overlap safely.
 */

import {
  EntityMarker,
  GatewayState,
  LogRecord,
  ModeName,
  Pose,
  ServerMessage,
} from "./types";

export type ConnectionStatus = "connecting" | "live" | "stale";

export interface ViewState {
  mode: ModeName;
  pose: Pose | null;
  entities: EntityMarker[];
  simTime: number;
  wallClock: string;
  waitTimer: number;
  scrollback: LogRecord[];
  lastRecordId: number;
  summary: string;
  connection: ConnectionStatus;
  degraded: boolean;
  scenario: string;
  backend: string;
  /** At most one override may be awaiting its acknowledgement. */
  pendingOverride: string | null;
  lastError: string;
}

export const SCROLLBACK_LIMIT = 500;

export function initialState(): ViewState {
  return {
    mode: "observation",
    pose: null,
    entities: [],
    simTime: 0,
    wallClock: "",
    waitTimer: 0,
    scrollback: [],
    lastRecordId: 0,
    summary: "",
    connection: "connecting",
    degraded: false,
    scenario: "",
    backend: "",
    pendingOverride: null,
    lastError: "",
  };
}

export function hydrate(state: ViewState, snapshot: GatewayState): ViewState {
  return {
    ...state,
    mode: snapshot.mode,
    pose: snapshot.pose,
    entities: snapshot.entities ?? [],
    simTime: snapshot.sim_time,
    wallClock: snapshot.wall_clock,
    waitTimer: snapshot.wait_timer,
    summary: snapshot.summary ?? "",
    degraded: snapshot.degraded,
    scenario: snapshot.scenario,
    backend: snapshot.backend,
    connection: "live",
  };
}

function insertRecord(scrollback: LogRecord[], record: LogRecord): LogRecord[] {
  const last = scrollback[scrollback.length - 1];
  let next: LogRecord[];
  if (!last || record.id > last.id) {
    next = [...scrollback, record];
  } else if (scrollback.some((r) => r.id === record.id)) {
    return scrollback;
  } else {
    next = [...scrollback, record].sort((a, b) => a.id - b.id);
  }
  return next.length > SCROLLBACK_LIMIT ? next.slice(next.length - SCROLLBACK_LIMIT) : next;
}

export function applyRecord(state: ViewState, record: LogRecord): ViewState {
  const scrollback = insertRecord(state.scrollback, record);
  if (scrollback === state.scrollback) {
    return state;
  }
  let next: ViewState = {
    ...state,
    scrollback,
    lastRecordId: Math.max(state.lastRecordId, record.id),
  };
  if (record.kind === "mode_change") {
    const to = (record.payload as { to?: string }).to;
    if (to === "observation" || to === "cleaning" || to === "docking") {
      next = { ...next, mode: to };
    }
  } else if (record.kind === "decision") {
    const summary = (record.payload as { summary?: string }).summary;
    if (summary) {
      next = { ...next, summary };
    }
  } else if (record.kind === "override") {
    // the server has recorded our override; the ack is complete
    next = { ...next, pendingOverride: null };
  }
  return next;
}

export function applyMessage(state: ViewState, message: ServerMessage): ViewState {
  switch (message.type) {
    case "hello":
      return hydrate(state, message.state);
    case "log":
      return applyRecord(state, message.record);
    case "pose":
      return {
        ...state,
        pose: message.pose,
        entities: message.entities ?? state.entities,
        simTime: message.sim_time,
        wallClock: message.wall_clock,
        connection: "live",
      };
    case "disconnect":
      return { ...state, connection: "stale" };
    default:
      return state;
  }
}

export function markStale(state: ViewState): ViewState {
  return { ...state, connection: "stale" };
}

export function beginOverride(state: ViewState, token: string): ViewState {
  if (state.pendingOverride !== null) {
    throw new Error(`override ${state.pendingOverride} still pending`);
  }
  return { ...state, pendingOverride: token, lastError: "" };
}

export function overrideRejected(state: ViewState, reason: string): ViewState {
  return { ...state, pendingOverride: null, lastError: reason };
}

/** Decision records shaped for card rendering, newest first. */
export function decisionCards(state: ViewState): LogRecord[] {
  return state.scrollback.filter((r) => r.kind === "decision").reverse();
}
