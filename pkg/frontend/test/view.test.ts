import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import type { DiagnosisPayload, DistributionPayload, TraceDoc } from "../src/api.js";
import {
  appendMessage,
  formatPercent,
  labelFor,
  renderDiagnosis,
  renderDistribution,
  renderSparkline,
  renderTrace,
} from "../src/view.js";

// vitest runs with the package root as cwd
const fixture = JSON.parse(
  readFileSync(join(process.cwd(), "..", "tests", "golden", "http_conversation.json"), "utf8"),
) as { exchanges: { response: Record<string, unknown> }[] };

const firstDistribution = fixture.exchanges[0].response
  .distribution as DistributionPayload;

function box(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

describe("formatting helpers", () => {
  it("turns disease ids into readable labels", () => {
    expect(labelFor("allergic_rhinitis")).toBe("allergic rhinitis");
    expect(labelFor("flu")).toBe("flu");
  });

  it("formats probabilities as one-decimal percentages", () => {
    expect(formatPercent(0.45391133848493215)).toBe("45.4%");
    expect(formatPercent(0)).toBe("0.0%");
    expect(formatPercent(1)).toBe("100.0%");
  });
});

describe("renderDistribution", () => {
  it("renders one labelled bar per disease plus the residual row", () => {
    const container = box();
    renderDistribution(container, firstDistribution);
    const rows = container.querySelectorAll(".dist-row");
    expect(rows).toHaveLength(Object.keys(firstDistribution.entries).length + 1);
    const labels = Array.from(container.querySelectorAll(".dist-label")).map(
      (node) => node.textContent,
    );
    expect(labels).toContain("allergic rhinitis");
    expect(labels[labels.length - 1]).toBe("(other conditions)");
    const bar = rows[0].querySelector(".dist-bar") as HTMLElement;
    expect(bar.style.width.endsWith("%")).toBe(true);
  });

  it("renders values that sum to 100 percent within one point", () => {
    const container = box();
    renderDistribution(container, firstDistribution);
    const sum = Array.from(container.querySelectorAll(".dist-value")).reduce(
      (acc, node) => acc + parseFloat(node.textContent ?? "0"),
      0,
    );
    expect(sum).toBeGreaterThan(99);
    expect(sum).toBeLessThan(101);
  });

  it("replaces previous rows when called again", () => {
    const container = box();
    renderDistribution(container, firstDistribution);
    renderDistribution(container, { entries: { flu: 0.9 }, other_mass: 0.1 });
    expect(container.querySelectorAll(".dist-row")).toHaveLength(2);
  });
});

describe("renderSparkline", () => {
  it("draws a polyline over the series and reports the latest value", () => {
    const container = box();
    renderSparkline(container, [1.58, 1.21, 0.9]);
    const svg = container.querySelector("svg.sparkline");
    expect(svg).not.toBeNull();
    expect(svg?.getAttribute("aria-label")).toBe("entropy over 3 points");
    const points = svg?.querySelector("polyline")?.getAttribute("points") ?? "";
    expect(points.split(" ")).toHaveLength(3);
    expect(container.querySelector(".entropy-now")?.textContent).toBe("H = 0.900 nats");
  });

  it("stays empty for an empty series", () => {
    const container = box();
    renderSparkline(container, []);
    expect(container.children).toHaveLength(0);
  });
});

describe("renderDiagnosis", () => {
  it("unhides the card with the disease name and stop summary", () => {
    const card = box();
    card.hidden = true;
    const diagnosis: DiagnosisPayload = {
      disease_id: "allergic_rhinitis",
      name: "Allergic Rhinitis",
      probability: 0.45391133848493215,
      turns: 6,
      stop_reason: "max_turns",
      distribution: firstDistribution,
    };
    renderDiagnosis(card, diagnosis);
    expect(card.hidden).toBe(false);
    expect(card.querySelector("h3")?.textContent).toBe("Allergic Rhinitis");
    const detail = card.querySelector("p")?.textContent ?? "";
    expect(detail).toContain("45.4%");
    expect(detail).toContain("6 follow-ups");
    expect(detail).toContain("max_turns");
  });
});

describe("appendMessage", () => {
  it("tags each bubble with its speaker", () => {
    const list = box();
    appendMessage(list, "assistant", "Do your symptoms follow a season?");
    appendMessage(list, "patient", "Yes, every spring");
    const items = Array.from(list.querySelectorAll("li.message")) as HTMLElement[];
    expect(items.map((item) => item.dataset.role)).toEqual(["assistant", "patient"]);
    expect(items[0].querySelector(".who")?.textContent).toBe("Doctor");
    expect(items[1].querySelector(".who")?.textContent).toBe("You");
    expect(items[1].querySelector(".text")?.textContent).toBe("Yes, every spring");
  });
});

describe("renderTrace", () => {
  it("renders one candidate table per turn with the chosen row marked", () => {
    const trace = fixture.exchanges[fixture.exchanges.length - 1]
      .response as unknown as TraceDoc;
    const container = box();
    container.hidden = true;
    renderTrace(container, trace);
    expect(container.hidden).toBe(false);
    const captions = Array.from(container.querySelectorAll("h4")).map(
      (node) => node.textContent,
    );
    expect(captions).toEqual(["Turn 1", "Turn 2", "Turn 3", "Turn 4", "Turn 5", "Turn 6"]);
    const tables = container.querySelectorAll("table");
    expect(tables).toHaveLength(trace.selections.length);
    trace.selections.forEach((selection, i) => {
      const rows = tables[i].querySelectorAll("tr");
      expect(rows).toHaveLength(selection.report.entries.length + 1);
      const marked = tables[i].querySelector("tr.selected td");
      const chosen = selection.pool.find((q) => q.id === selection.report.selected_id);
      expect(marked?.textContent).toBe(chosen?.text);
    });
  });
});
