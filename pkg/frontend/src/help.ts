import { el } from "./widgets";

// static catalog; one entry per widget the grid can host
export const HELP_TEXTS: Record<string, string> = {
  total_po_volume:
    "Ordered volume per period for the suppliers in scope. Switch to the chart for the trend; export matches the table columns.",
  po_volume_forecast:
    "Projection of order volume from past periods. The horizon setting controls how far ahead it looks.",
  supplier_rfqs:
    "Open and recent requests for quotation. Bundled requests appear as one cross-department line after a bot run is approved.",
  supplier_auctions: "Reverse auctions involving the suppliers in scope, with their current best bid.",
  material_group_share:
    "How purchasing volume in a material group splits across its suppliers. Shares close to one flag a dependency.",
};

/**
 * Adds the context-help toggle to a widget card: a small "?" button that
 * shows a dismissible popover with the catalog text. Widgets without a
 * catalog entry get no button.
 */
export function attachHelp(cell: HTMLElement, widgetId: string): void {
  const text = HELP_TEXTS[widgetId];
  if (!text) return;
  const head = cell.querySelector(".widget-head");
  if (!head) return;
  const button = el("button", { class: "help-toggle", text: "?" });
  button.setAttribute("aria-label", `what does ${widgetId} show`);
  button.addEventListener("click", () => {
    const existing = cell.querySelector(".help-popover");
    if (existing) {
      existing.remove();
      return;
    }
    const popover = el("div", { class: "help-popover" });
    popover.append(el("p", { text }));
    const dismiss = el("button", { class: "help-dismiss", text: "got it" });
    dismiss.addEventListener("click", () => popover.remove());
    popover.append(dismiss);
    cell.append(popover);
  });
  head.append(button);
}
