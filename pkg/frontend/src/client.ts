/**
 * Gateway client: REST hydration, websocket subscription with
 * exponential-backoff reconnect, override and event-injection calls.
 *
 * fetch and the WebSocket constructor are injectable so the logic runs
 * identically in the browser and under test fakes.
 */

import { applyMessage, beginOverride, hydrate, initialState, markStale, overrideRejected, ViewState } from "./store";
import { GatewayState, LogRecord, ServerMessage } from "./types";

export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;
export type FetchLike = (url: string, init?: Record<string, unknown>) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export interface ClientOptions {
  baseUrl: string;
  fetchImpl?: FetchLike;
  wsFactory?: WebSocketFactory;
  /** initial reconnect delay in ms; doubles per failure up to the max */
  backoffInitialMs?: number;
  backoffMaxMs?: number;
  onChange?: (state: ViewState) => void;
}

export class GatewayClient {
  state: ViewState = initialState();
  backoffMs: number;
  private readonly baseUrl: string;
  private readonly wsUrl: string;
  private readonly fetchImpl: FetchLike;
  private readonly wsFactory: WebSocketFactory;
  private readonly backoffInitialMs: number;
  private readonly backoffMaxMs: number;
  private readonly onChange?: (state: ViewState) => void;
  private socket: WebSocketLike | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.wsUrl = this.baseUrl.replace(/^http/, "ws") + "/events";
    this.fetchImpl = options.fetchImpl ?? (fetch as unknown as FetchLike);
    this.wsFactory =
      options.wsFactory ?? ((url: string) => new WebSocket(url) as unknown as WebSocketLike);
    this.backoffInitialMs = options.backoffInitialMs ?? 500;
    this.backoffMaxMs = options.backoffMaxMs ?? 8000;
    this.backoffMs = this.backoffInitialMs;
    this.onChange = options.onChange;
  }

  private update(next: ViewState): void {
    this.state = next;
    this.onChange?.(next);
  }

  /** Hydrate from /state and /log, then subscribe to /events. */
  async connect(): Promise<void> {
    this.closed = false;
    try {
      const stateResp = await this.fetchImpl(`${this.baseUrl}/state`);
      const snapshot = (await stateResp.json()) as GatewayState;
      this.update(hydrate(this.state, snapshot));
      await this.backfill(0);
      this.openSocket();
    } catch {
      this.update(markStale(this.state));
      this.scheduleReconnect();
    }
  }

  /** Fetch records newer than sinceId and fold them into the scrollback. */
  async backfill(sinceId: number): Promise<void> {
    const resp = await this.fetchImpl(`${this.baseUrl}/log?since=${sinceId}`);
    const body = (await resp.json()) as { records: LogRecord[] };
    let next = this.state;
    for (const record of body.records) {
      next = applyMessage(next, { type: "log", record });
    }
    this.update(next);
  }

  private openSocket(): void {
    if (this.closed) return;
    const socket = this.wsFactory(this.wsUrl);
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = this.backoffInitialMs;
      // a gap may have opened between hydration and the subscription
      void this.backfill(this.state.lastRecordId).catch(() => undefined);
    };
    socket.onmessage = (event) => {
      let message: ServerMessage;
      try {
        message = JSON.parse(String(event.data)) as ServerMessage;
      } catch {
        return;
      }
      this.update(applyMessage(this.state, message));
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.closed) {
        this.update(markStale(this.state));
        this.scheduleReconnect();
      }
    };
    socket.onerror = () => {
      // onclose follows; nothing extra to do
    };
  }

  private scheduleReconnect(): void {
    if (this.closed || this.reconnectTimer) return;
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, this.backoffMaxMs);
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      void this.reconnect();
    }, delay);
  }

  private async reconnect(): Promise<void> {
    if (this.closed) return;
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/state`);
      const snapshot = (await resp.json()) as GatewayState;
      this.update(hydrate(this.state, snapshot));
      await this.backfill(this.state.lastRecordId);
      this.openSocket();
    } catch {
      this.update(markStale(this.state));
      this.scheduleReconnect();
    }
  }

  /**
   * Send one override. Rejections surface in state.lastError verbatim; a
   * second call while one is pending throws without touching the server.
   */
  async sendOverride(token: string, operator = "console"): Promise<boolean> {
    this.update(beginOverride(this.state, token));
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/override`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ token, operator }),
      });
      if (!resp.ok) {
        const body = (await resp.json()) as { detail?: string };
        this.update(overrideRejected(this.state, body.detail ?? `HTTP ${resp.status}`));
        return false;
      }
      // accepted: pendingOverride clears when the override record arrives
      return true;
    } catch (err) {
      this.update(overrideRejected(this.state, String(err)));
      return false;
    }
  }

  /** Inject a scenario event; validation problems surface in lastError. */
  async injectEvent(event: Record<string, unknown>): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/scenario/event`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(event),
      });
      if (!resp.ok) {
        const body = (await resp.json()) as { detail?: string };
        this.update({ ...this.state, lastError: body.detail ?? `HTTP ${resp.status}` });
        return false;
      }
      this.update({ ...this.state, lastError: "" });
      return true;
    } catch (err) {
      this.update({ ...this.state, lastError: String(err) });
      return false;
    }
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
  }
}
