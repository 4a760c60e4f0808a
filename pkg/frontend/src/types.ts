/** Wire types for the gateway HTTP/WS API. */

export type ModeName = "observation" | "cleaning" | "docking";

export interface Pose {
  x: number;
  y: number;
  heading: number;
}

export interface EntityMarker {
  id: string;
  kind: string;
  activity: string;
  x: number;
  y: number;
}

export interface DecisionPayload {
  decision: { token: string; source: string };
  mode: string;
  summary?: string;
  trace?: Record<string, string>;
  features?: {
    entities: Array<{
      id: string;
      kind: string;
      activity: string;
      motion_speed: number;
      presence_ratio: number;
      transient: boolean;
    }>;
    clues: string[];
  };
  latencies_ms?: Record<string, number>;
  frame_seqs?: number[];
}

export interface LogRecord {
  v: number;
  id: number;
  sim_time: number;
  wall_clock: string;
  kind: "decision" | "mode_change" | "override" | "event" | "error";
  payload: Record<string, unknown>;
}

export interface GatewayState {
  mode: ModeName;
  pose: Pose;
  sim_time: number;
  wall_clock: string;
  wait_timer: number;
  blocked_cycles: number;
  summary: string;
  degraded: boolean;
  backend: string;
  scenario: string;
  entities: EntityMarker[];
  last_record_id: number;
}

export type ServerMessage =
  | { type: "hello"; state: GatewayState }
  | { type: "log"; record: LogRecord }
  | {
      type: "pose";
      pose: Pose;
      mode: ModeName;
      sim_time: number;
      wall_clock: string;
      entities: EntityMarker[];
    }
  | { type: "disconnect"; reason: string };

/** Trace aspects in the order decision cards display them. */
export const TRACE_ASPECTS: Array<[key: string, label: string]> = [
  ["value_alignment", "Value alignment"],
  ["time_context", "Time context"],
  ["action_choice_and_consequences", "Action choice and consequences"],
  ["rationale", "Rationale"],
  ["purpose_reflection", "Purpose reflection"],
];
