/** Browser bootstrap: wire the gateway client to the DOM. */

import { GatewayClient } from "./client";
import { drawFloorplan, FloorplanGeometry, modeBadgeText, renderCards, renderEventLine } from "./render";
import { ViewState } from "./store";
import { GatewayState } from "./types";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function gatewayBase(): string {
  const override = new URLSearchParams(window.location.search).get("gateway");
  return override ?? `${window.location.protocol}//${window.location.host}`;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("floorplan");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas unsupported");
  const badge = el<HTMLSpanElement>("mode-badge");
  const banner = el<HTMLDivElement>("stale-banner");
  const cards = el<HTMLDivElement>("cards");
  const errorBox = el<HTMLDivElement>("error-box");
  const eventLog = el<HTMLUListElement>("event-log");
  const clock = el<HTMLSpanElement>("clock");

  let plan: FloorplanGeometry | null = null;
  let fov = 70;
  let renderedEventCount = 0;

  const base = gatewayBase();
  const stateResp = await fetch(`${base}/state`);
  const snapshot = (await stateResp.json()) as GatewayState & {
    floorplan: FloorplanGeometry;
    camera_fov_deg: number;
  };
  plan = snapshot.floorplan;
  fov = snapshot.camera_fov_deg ?? 70;

  const client = new GatewayClient({
    baseUrl: base,
    onChange: (state) => render(state),
  });

  function render(state: ViewState): void {
    badge.textContent = modeBadgeText(state);
    badge.dataset.mode = state.mode;
    banner.hidden = state.connection !== "stale";
    clock.textContent = state.wallClock;
    errorBox.textContent = state.lastError;
    errorBox.hidden = !state.lastError;
    if (plan) {
      drawFloorplan(ctx!, canvas.width, canvas.height, plan, state, fov);
    }
    renderCards(cards, state);
    const interesting = state.scrollback.filter((r) => r.kind !== "decision");
    for (; renderedEventCount < interesting.length; renderedEventCount++) {
      const item = document.createElement("li");
      const record = interesting[renderedEventCount];
      item.textContent = `#${record.id} [${record.wall_clock}] ${renderEventLine(record)}`;
      eventLog.prepend(item);
    }
    while (eventLog.childElementCount > 80) {
      eventLog.lastElementChild?.remove();
    }
    for (const button of document.querySelectorAll<HTMLButtonElement>("button[data-token]")) {
      button.disabled = state.pendingOverride !== null || state.connection === "stale";
    }
  }

  for (const button of document.querySelectorAll<HTMLButtonElement>("button[data-token]")) {
    button.addEventListener("click", () => {
      void client.sendOverride(button.dataset.token!);
    });
  }

  el<HTMLFormElement>("spawn-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const kind = el<HTMLSelectElement>("spawn-kind").value;
    const entityId = el<HTMLInputElement>("spawn-id").value || `${kind}_${Date.now() % 10000}`;
    const x = parseFloat(el<HTMLInputElement>("spawn-x").value);
    const y = parseFloat(el<HTMLInputElement>("spawn-y").value);
    const activity = el<HTMLInputElement>("spawn-activity").value;
    const speed = parseFloat(el<HTMLInputElement>("spawn-speed").value || "0");
    const entity: Record<string, unknown> = {
      id: entityId,
      kind,
      at: [x, y, 0],
      activity,
      motion_speed: speed,
    };
    if (speed > 0) {
      entity.waypoints = [
        [x + 0.4, y],
        [x - 0.4, y],
      ];
    }
    void client.injectEvent({ action: "spawn", entity });
  });

  el<HTMLFormElement>("activity-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void client.injectEvent({
      action: "set_activity",
      id: el<HTMLInputElement>("activity-id").value,
      activity: el<HTMLInputElement>("activity-value").value,
    });
  });

  await client.connect();
}

void boot();
