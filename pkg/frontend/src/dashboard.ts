import type { ApiClient, WidgetQuery } from "./api";
import { ApiError } from "./api";
import { layoutKey, moveEntry, resizeEntry } from "./grid";
import type { ClientViewState } from "./session";
import type { LayoutEntry, WidgetPayload } from "./types";
import { el, renderErrorCard, renderWidget } from "./widgets";
import { attachHelp } from "./help";

/**
 * The widget grid. Loads the stored layout, fetches every widget on it,
 * and persists layout changes (the only optimistic mutation: the grid
 * moves first, the PUT follows).
 *
 * Drag and resize commits funnel through moveWidget/resizeWidget; invalid
 * targets are dropped client-side with the old grid intact, so the server
 * never sees an overlapping layout.
 */
export class Dashboard {
  private cells = new Map<string, HTMLElement>();
  private payloads = new Map<string, WidgetPayload>();
  widgetParams = new Map<string, WidgetQuery>();

  constructor(
    private readonly api: ApiClient,
    private readonly state: ClientViewState,
    private readonly root: HTMLElement,
  ) {}

  async load(): Promise<void> {
    const layout = await this.api.getLayout();
    this.state.layout = layout.entries;
    this.renderGrid();
    await Promise.all(layout.entries.map((entry) => this.fetchInto(entry.widgetId)));
  }

  private queryFor(widgetId: string): WidgetQuery {
    return { ...this.state.scopeQuery(), ...(this.widgetParams.get(widgetId) ?? {}) };
  }

  private renderGrid(): void {
    this.root.replaceChildren();
    this.cells.clear();
    const grid = el("div", { class: "dashboard-grid" });
    for (const entry of this.state.layout) {
      const cell = el("div", { class: "grid-cell" });
      this.placeCell(cell, entry);
      cell.dataset.widgetId = entry.widgetId;
      grid.append(cell);
      this.cells.set(entry.widgetId, cell);
    }
    this.root.append(grid);
  }

  private placeCell(cell: HTMLElement, entry: LayoutEntry): void {
    cell.style.gridColumn = `${entry.x + 1} / span ${entry.width}`;
    cell.style.gridRow = `${entry.y + 1} / span ${entry.height}`;
  }

  private async fetchInto(widgetId: string): Promise<void> {
    const cell = this.cells.get(widgetId);
    if (!cell) return;
    try {
      const payload = await this.api.getWidget(widgetId, this.queryFor(widgetId));
      this.payloads.set(widgetId, payload);
      this.renderCell(widgetId);
    } catch (err) {
      const message = err instanceof ApiError ? err.message : "widget failed to load";
      renderErrorCard(cell, widgetId, message);
    }
  }

  private renderCell(widgetId: string): void {
    const cell = this.cells.get(widgetId);
    const payload = this.payloads.get(widgetId);
    if (!cell || !payload) return;
    const mode = this.state.renderModeFor(widgetId, payload.defaultView);
    renderWidget(cell, payload, mode, {
      onToggle: (id) => this.toggleWidget(id),
    });
    attachHelp(cell, widgetId);
  }

  /** Flip table/chart; pure re-render, no request. */
  toggleWidget(widgetId: string): void {
    const payload = this.payloads.get(widgetId);
    if (!payload) return;
    this.state.toggleRenderMode(widgetId, payload.defaultView);
    this.renderCell(widgetId);
  }

  /** Re-fetch one widget, e.g. after a bot run changed its rows. */
  refreshWidget(widgetId: string): Promise<void> {
    return this.fetchInto(widgetId);
  }

  async moveWidget(widgetId: string, x: number, y: number): Promise<boolean> {
    const next = moveEntry(this.state.layout, widgetId, x, y);
    return this.commitLayout(next);
  }

  async resizeWidget(widgetId: string, width: number, height: number): Promise<boolean> {
    const next = resizeEntry(this.state.layout, widgetId, width, height);
    return this.commitLayout(next);
  }

  private async commitLayout(next: LayoutEntry[] | null): Promise<boolean> {
    if (next === null) return false;
    if (layoutKey(next) === layoutKey(this.state.layout)) return false;
    this.state.layout = next;
    for (const entry of next) {
      const cell = this.cells.get(entry.widgetId);
      if (cell) this.placeCell(cell, entry);
    }
    await this.api.putLayout(next);
    return true;
  }

  /** x/y/width/height per widget as currently rendered, for tests. */
  gridSnapshot(): Record<string, { column: string; row: string }> {
    const snapshot: Record<string, { column: string; row: string }> = {};
    for (const [widgetId, cell] of this.cells) {
      snapshot[widgetId] = { column: cell.style.gridColumn, row: cell.style.gridRow };
    }
    return snapshot;
  }
}
