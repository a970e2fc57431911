import type { LayoutEntry, RenderMode } from "./types";

export type ActiveView = "HOME" | "SUPPLIER" | "MATERIAL_GROUP" | "NEWS" | "PROCESSES" | "ADMIN";

export interface ViewModeState {
  mode: "USER" | "TEAM" | "ALIAS";
  aliasUserId?: string;
}

/**
 * Client-side mirror of what the user is looking at. The layout mirror is
 * the source for PUT /api/me/layout; render modes are per widget and not
 * persisted server-side.
 */
export class ClientViewState {
  activeView: ActiveView = "HOME";
  viewMode: ViewModeState = { mode: "USER" };
  layout: LayoutEntry[] = [];
  private renderModes = new Map<string, RenderMode>();

  setAlias(aliasUserId: string): void {
    this.viewMode = { mode: "ALIAS", aliasUserId };
  }

  setMode(mode: "USER" | "TEAM"): void {
    this.viewMode = { mode };
  }

  /** Query params implied by the current view mode. */
  scopeQuery(): { viewMode: string; aliasUserId?: string } {
    if (this.viewMode.mode === "ALIAS") {
      return { viewMode: "ALIAS_VIEW", aliasUserId: this.viewMode.aliasUserId };
    }
    return { viewMode: this.viewMode.mode === "TEAM" ? "TEAM_VIEW" : "USER_VIEW" };
  }

  renderModeFor(widgetId: string, fallback: RenderMode): RenderMode {
    return this.renderModes.get(widgetId) ?? fallback;
  }

  toggleRenderMode(widgetId: string, fallback: RenderMode): RenderMode {
    const next: RenderMode = this.renderModeFor(widgetId, fallback) === "TABLE" ? "CHART" : "TABLE";
    this.renderModes.set(widgetId, next);
    return next;
  }
}
