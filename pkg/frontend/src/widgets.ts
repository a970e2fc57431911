import type { RenderMode, WidgetPayload, WidgetRow } from "./types";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "text") node.textContent = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

// Matches the CSV export encoding: absent values become empty cells,
// everything else is rendered verbatim.
export function cellText(value: unknown): string {
  if (value === null || value === undefined) return "";
  return String(value);
}

// chart shape per widget; anything unlisted charts as bars
const CHART_KINDS: Record<string, "bar" | "line" | "pie"> = {
  total_po_volume: "bar",
  po_volume_forecast: "line",
  material_group_share: "pie",
};

function numericValue(value: unknown): number | null {
  if (typeof value === "number" && Number.isFinite(value)) return value;
  if (typeof value === "string" && value !== "" && Number.isFinite(Number(value))) return Number(value);
  return null;
}

function seriesColumn(columns: string[], rows: WidgetRow[]): string | null {
  for (const column of columns.slice(1)) {
    if (rows.length > 0 && rows.every((row) => numericValue(row[column]) !== null)) return column;
  }
  return null;
}

function renderTable(payload: WidgetPayload): HTMLTableElement {
  const head = el("tr", {}, payload.columns.map((c) => el("th", {}, [c])));
  const body = payload.rows.map((row) =>
    el("tr", {}, payload.columns.map((c) => el("td", {}, [cellText(row[c])]))),
  );
  return el("table", { class: "widget-table" }, [
    el("thead", {}, [head]),
    el("tbody", {}, body),
  ]);
}

const SVG_NS = "http://www.w3.org/2000/svg";
const CHART_W = 320;
const CHART_H = 160;

function svgRoot(kind: string): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${CHART_W} ${CHART_H}`);
  svg.setAttribute("class", `widget-chart chart-${kind}`);
  return svg;
}

function shape(name: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

function renderChart(payload: WidgetPayload): SVGSVGElement | HTMLElement {
  const kind = CHART_KINDS[payload.widgetId] ?? "bar";
  const labelColumn = payload.columns[0];
  const valueColumn = seriesColumn(payload.columns, payload.rows);
  if (!labelColumn || !valueColumn) {
    return el("p", { class: "chart-empty" }, ["nothing to chart"]);
  }
  const points = payload.rows.map((row) => ({
    label: cellText(row[labelColumn]),
    value: numericValue(row[valueColumn]) ?? 0,
  }));
  const svg = svgRoot(kind);
  const max = Math.max(...points.map((p) => p.value), 1);

  if (kind === "pie") {
    const total = points.reduce((sum, p) => sum + p.value, 0) || 1;
    let angle = -Math.PI / 2;
    const cx = CHART_W / 2;
    const cy = CHART_H / 2;
    const r = Math.min(cx, cy) - 4;
    points.forEach((p, i) => {
      const sweep = (p.value / total) * 2 * Math.PI;
      const x1 = cx + r * Math.cos(angle);
      const y1 = cy + r * Math.sin(angle);
      angle += sweep;
      const x2 = cx + r * Math.cos(angle);
      const y2 = cy + r * Math.sin(angle);
      const large = sweep > Math.PI ? 1 : 0;
      // a single full-circle slice degenerates to a dot, draw a circle instead
      const d =
        sweep >= 2 * Math.PI - 1e-9
          ? `M ${cx - r} ${cy} A ${r} ${r} 0 1 1 ${cx + r} ${cy} A ${r} ${r} 0 1 1 ${cx - r} ${cy}`
          : `M ${cx} ${cy} L ${x1} ${y1} A ${r} ${r} 0 ${large} 1 ${x2} ${y2} Z`;
      const slice = shape("path", { d, class: `slice slice-${i}` });
      slice.append(shape("title", {}));
      slice.querySelector("title")!.textContent = `${p.label}: ${p.value}`;
      svg.append(slice);
    });
    return svg;
  }

  if (kind === "line") {
    const step = points.length > 1 ? CHART_W / (points.length - 1) : 0;
    const coords = points.map((p, i) => `${i * step},${CHART_H - (p.value / max) * (CHART_H - 10)}`);
    svg.append(shape("polyline", { points: coords.join(" "), fill: "none", class: "series" }));
    points.forEach((p, i) => {
      const dot = shape("circle", {
        cx: String(i * step),
        cy: String(CHART_H - (p.value / max) * (CHART_H - 10)),
        r: "3",
        class: "point",
        "data-label": p.label,
      });
      svg.append(dot);
    });
    return svg;
  }

  const slot = CHART_W / Math.max(points.length, 1);
  points.forEach((p, i) => {
    const h = (p.value / max) * (CHART_H - 10);
    svg.append(
      shape("rect", {
        x: String(i * slot + slot * 0.1),
        y: String(CHART_H - h),
        width: String(slot * 0.8),
        height: String(h),
        class: "bar",
        "data-label": p.label,
        "data-value": String(p.value),
      }),
    );
  });
  return svg;
}

export interface WidgetHandlers {
  onToggle?: (widgetId: string) => void;
}

/** Replace container content with one widget card in the given mode. */
export function renderWidget(
  container: HTMLElement,
  payload: WidgetPayload,
  mode: RenderMode,
  handlers: WidgetHandlers = {},
): void {
  container.replaceChildren();
  container.dataset.widgetId = payload.widgetId;
  container.dataset.mode = mode;

  const toggle = el("button", { class: "mode-toggle", type: "button" }, [
    mode === "TABLE" ? "chart" : "table",
  ]);
  toggle.addEventListener("click", () => handlers.onToggle?.(payload.widgetId));

  container.append(
    el("div", { class: "widget-head" }, [el("h3", {}, [payload.title]), toggle]),
    mode === "TABLE" ? renderTable(payload) : renderChart(payload),
  );
}

/** Inline failure card; the rest of the grid stays untouched. */
export function renderErrorCard(container: HTMLElement, widgetId: string, message: string): void {
  container.replaceChildren();
  container.dataset.widgetId = widgetId;
  container.append(
    el("div", { class: "widget-error" }, [
      el("h3", {}, [widgetId]),
      el("p", { class: "error-message" }, [message]),
    ]),
  );
}
