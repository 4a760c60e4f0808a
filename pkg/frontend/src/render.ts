/**
 * DOM and canvas rendering. Pure draw/build functions over ViewState so the
 * card structure is testable without a browser.
 */

import { decisionCards, ViewState } from "./store";
import { DecisionPayload, GatewayState, LogRecord, TRACE_ASPECTS } from "./types";

export interface FloorplanGeometry {
  walls: number[][];
  dock: number[];
  bounds: number[];
}

const MODE_COLORS: Record<string, string> = {
  observation: "#2b6cb0",
  cleaning: "#2f855a",
  docking: "#b7791f",
};

export function drawFloorplan(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  plan: FloorplanGeometry,
  state: ViewState,
  fovDeg: number,
): void {
  const [xmin, ymin, xmax, ymax] = plan.bounds;
  const margin = 16;
  const scale = Math.min(
    (width - 2 * margin) / (xmax - xmin),
    (height - 2 * margin) / (ymax - ymin),
  );
  const toX = (x: number) => margin + (x - xmin) * scale;
  const toY = (y: number) => height - margin - (y - ymin) * scale; // +y is up

  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#f7fafc";
  ctx.fillRect(0, 0, width, height);

  ctx.strokeStyle = "#1a202c";
  ctx.lineWidth = 3;
  for (const [x1, y1, x2, y2] of plan.walls) {
    ctx.beginPath();
    ctx.moveTo(toX(x1), toY(y1));
    ctx.lineTo(toX(x2), toY(y2));
    ctx.stroke();
  }

  // dock marker
  const [dx, dy] = plan.dock;
  ctx.fillStyle = "#b7791f";
  ctx.fillRect(toX(dx) - 6, toY(dy) - 6, 12, 12);

  for (const entity of state.entities) {
    ctx.beginPath();
    ctx.fillStyle = entity.kind === "pet" ? "#c05621" : "#6b46c1";
    ctx.arc(toX(entity.x), toY(entity.y), entity.kind === "pet" ? 6 : 9, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#2d3748";
    ctx.font = "11px sans-serif";
    ctx.fillText(entity.id, toX(entity.x) + 10, toY(entity.y) - 6);
  }

  if (state.pose) {
    const { x, y, heading } = state.pose;
    const px = toX(x);
    const py = toY(y);
    // camera field of view as a wedge from the robot heading
    const headingRad = (-heading * Math.PI) / 180; // canvas y is flipped
    const half = (fovDeg / 2) * (Math.PI / 180);
    const reach = 1.6 * scale;
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.arc(px, py, reach, headingRad - half, headingRad + half);
    ctx.closePath();
    ctx.fillStyle = "rgba(49, 130, 206, 0.18)";
    ctx.fill();

    ctx.beginPath();
    ctx.fillStyle = MODE_COLORS[state.mode] ?? "#4a5568";
    ctx.arc(px, py, Math.max(5, 0.17 * scale), 0, Math.PI * 2);
    ctx.fill();
  }
}

export function modeBadgeText(state: ViewState): string {
  const base = state.mode.toUpperCase();
  if (state.mode === "observation" && state.waitTimer > 0) {
    return `${base} (waiting ${Math.ceil(state.waitTimer)}s)`;
  }
  return base;
}

export interface CardModel {
  recordId: number;
  wallClock: string;
  token: string;
  source: string;
  mode: string;
  summary: string;
  aspects: Array<{ label: string; text: string }>;
}

/** Decision records shaped for display; aspect order is fixed. */
export function cardModels(state: ViewState): CardModel[] {
  const models: CardModel[] = [];
  for (const record of decisionCards(state)) {
    const payload = record.payload as unknown as DecisionPayload;
    const trace = payload.trace ?? {};
    models.push({
      recordId: record.id,
      wallClock: record.wall_clock,
      token: payload.decision?.token ?? "?",
      source: payload.decision?.source ?? "?",
      mode: payload.mode ?? "?",
      summary: payload.summary ?? "",
      aspects: TRACE_ASPECTS.map(([key, label]) => ({
        label,
        text: trace[key] ?? "",
      })),
    });
  }
  return models;
}

export function renderCards(container: HTMLElement, state: ViewState): void {
  container.textContent = "";
  for (const model of cardModels(state).slice(0, 25)) {
    const card = document.createElement("article");
    card.className = `card card-${model.token.toLowerCase()}`;
    const head = document.createElement("header");
    head.textContent = `#${model.recordId} [${model.wallClock}] ${model.mode}: ${model.token}` +
      (model.source !== "model" ? ` (${model.source})` : "");
    card.appendChild(head);
    if (model.summary) {
      const summary = document.createElement("p");
      summary.className = "summary";
      summary.textContent = model.summary;
      card.appendChild(summary);
    }
    const details = document.createElement("details");
    const label = document.createElement("summary");
    label.textContent = "reasoning trace";
    details.appendChild(label);
    for (const aspect of model.aspects) {
      if (!aspect.text) continue;
      const row = document.createElement("p");
      const strong = document.createElement("strong");
      strong.textContent = `${aspect.label}: `;
      row.appendChild(strong);
      row.appendChild(document.createTextNode(aspect.text));
      details.appendChild(row);
    }
    card.appendChild(details);
    container.appendChild(card);
  }
}

export function renderEventLine(record: LogRecord): string {
  const payload = record.payload as Record<string, unknown>;
  switch (record.kind) {
    case "mode_change":
      return `mode ${payload.from} -> ${payload.to}`;
    case "override":
      return `override ${(payload.decision as { token?: string })?.token ?? "?"}`;
    case "error":
      return `error: ${payload.error}`;
    default:
      return String(payload.event ?? record.kind);
  }
}

export function describeState(snapshot: GatewayState): string {
  return `${snapshot.scenario} on ${snapshot.backend}`;
}
