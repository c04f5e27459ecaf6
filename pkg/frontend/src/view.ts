// DOM rendering helpers. Pure functions of (element, payload): no fetching,
// no state, and no arithmetic beyond formatting numbers for display.

import type { DiagnosisPayload, DistributionPayload, TraceDoc } from "./api.js";

export function labelFor(diseaseId: string): string {
  return diseaseId.replace(/_/g, " ");
}

export function formatPercent(probability: number): string {
  return `${(probability * 100).toFixed(1)}%`;
}

export function appendMessage(
  list: HTMLElement,
  role: "assistant" | "patient",
  text: string,
): void {
  const item = list.ownerDocument.createElement("li");
  item.className = `message ${role}`;
  item.dataset.role = role;
  const who = list.ownerDocument.createElement("span");
  who.className = "who";
  who.textContent = role === "assistant" ? "Doctor" : "You";
  const body = list.ownerDocument.createElement("span");
  body.className = "text";
  body.textContent = text;
  item.append(who, body);
  list.appendChild(item);
  item.scrollIntoView?.({ block: "end" });
}

export function renderDistribution(
  container: HTMLElement,
  distribution: DistributionPayload,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const rows: [string, number][] = Object.entries(distribution.entries);
  rows.push(["(other conditions)", distribution.other_mass]);
  for (const [key, probability] of rows) {
    const row = doc.createElement("div");
    row.className = "dist-row";
    const label = doc.createElement("span");
    label.className = "dist-label";
    label.textContent = key === "(other conditions)" ? key : labelFor(key);
    const track = doc.createElement("div");
    track.className = "dist-track";
    const bar = doc.createElement("div");
    bar.className = "dist-bar";
    bar.style.width = `${probability * 100}%`;
    track.appendChild(bar);
    const value = doc.createElement("span");
    value.className = "dist-value";
    value.textContent = formatPercent(probability);
    row.append(label, track, value);
    container.appendChild(row);
  }
}

export function renderSparkline(container: HTMLElement, values: number[]): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  if (values.length === 0) return;
  const width = 220;
  const height = 48;
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "sparkline");
  svg.setAttribute("role", "img");
  svg.setAttribute("aria-label", `entropy over ${values.length} points`);
  // scale to the largest seen value; display geometry only
  const top = Math.max(...values, 1e-9);
  const points = values
    .map((v, i) => {
      const x = values.length === 1 ? 0 : (i / (values.length - 1)) * (width - 8) + 4;
      const y = height - 6 - (v / top) * (height - 12);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const line = doc.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  svg.appendChild(line);
  container.appendChild(svg);
  const latest = doc.createElement("span");
  latest.className = "entropy-now";
  latest.textContent = `H = ${values[values.length - 1].toFixed(3)} nats`;
  container.appendChild(latest);
}

export function renderDiagnosis(card: HTMLElement, diagnosis: DiagnosisPayload): void {
  const doc = card.ownerDocument;
  card.textContent = "";
  const title = doc.createElement("h3");
  title.textContent = diagnosis.name;
  const detail = doc.createElement("p");
  detail.textContent =
    `Probability ${formatPercent(diagnosis.probability)} after ` +
    `${diagnosis.turns} follow-ups (stopped on ${diagnosis.stop_reason}).`;
  card.append(title, detail);
  card.hidden = false;
}

export function renderTrace(container: HTMLElement, trace: TraceDoc): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const heading = doc.createElement("h3");
  heading.textContent = "Question selection per turn";
  container.appendChild(heading);
  for (const selection of trace.selections) {
    const block = doc.createElement("section");
    block.className = "trace-turn";
    const caption = doc.createElement("h4");
    caption.textContent = `Turn ${selection.iteration + 1}`;
    block.appendChild(caption);
    const table = doc.createElement("table");
    const head = doc.createElement("tr");
    for (const column of ["Candidate question", "Expected entropy"]) {
      const th = doc.createElement("th");
      th.textContent = column;
      head.appendChild(th);
    }
    table.appendChild(head);
    const textById = new Map(selection.pool.map((q) => [q.id, q.text]));
    for (const [questionId, expected] of selection.report.entries) {
      const row = doc.createElement("tr");
      if (questionId === selection.report.selected_id) row.className = "selected";
      const qCell = doc.createElement("td");
      qCell.textContent = textById.get(questionId) ?? `question ${questionId}`;
      const hCell = doc.createElement("td");
      hCell.textContent = expected.toFixed(4);
      row.append(qCell, hCell);
      table.appendChild(row);
    }
    block.appendChild(table);
    container.appendChild(block);
  }
  container.hidden = false;
}
