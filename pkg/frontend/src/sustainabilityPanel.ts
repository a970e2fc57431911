import type { ApiClient } from "./api";
import { ApiError } from "./api";
import type { AlternativesPayload, ScorePayload } from "./types";
import { el } from "./widgets";

// data basis of the served score, keyed by stage number
export const STAGE_LABELS: Record<number, string> = {
  1: "spend",
  2: "sector",
  3: "product",
  4: "measured",
};

export function stageBadge(stage: number): string {
  return `${stage} · ${STAGE_LABELS[stage] ?? "unknown"}`;
}

export interface SustainabilityHandlers {
  /** Click on an alternative supplier navigates there. */
  onNavigate?: (supplierId: string) => void;
}

function renderScore(score: ScorePayload): HTMLElement {
  const section = el("div", { class: "score" });
  section.append(el("span", { class: "stage-badge", text: stageBadge(score.stage) }));
  section.append(el("span", { class: "score-value", text: `${score.valueTCO2e} tCO2e` }));
  const breakdown = el("ul", { class: "breakdown" });
  for (const entry of score.breakdown) {
    const item = el("li", {
      class: entry.gap ? "breakdown-entry gap" : "breakdown-entry",
    });
    item.append(el("span", { class: "component", text: entry.component }));
    if (entry.gap) {
      // a gap is absent data, not a zero contribution
      item.append(el("span", { class: "gap-label", text: "no data" }));
    } else {
      item.append(el("span", { class: "contribution", text: entry.contribution }));
      if (entry.stage !== null) {
        item.append(el("span", { class: "entry-stage", text: stageBadge(entry.stage) }));
      }
    }
    breakdown.append(item);
  }
  section.append(breakdown);
  return section;
}

function renderAlternatives(
  payload: AlternativesPayload,
  handlers: SustainabilityHandlers,
): HTMLElement {
  const section = el("div", { class: "alternatives" });
  section.append(el("h4", { text: `alternatives in ${payload.materialGroupId}` }));
  if (!payload.alternatives.length) {
    section.append(
      el("p", {
        class: "empty-state",
        text: "no alternative suppliers serve this material group",
      }),
    );
    return section;
  }
  const list = el("ol", { class: "alternative-list" });
  for (const alt of payload.alternatives) {
    const item = el("li", { class: "alternative" });
    const link = el("a", { class: "alt-supplier", text: alt.supplierId });
    link.setAttribute("href", "#");
    link.addEventListener("click", (ev) => {
      ev.preventDefault();
      if (handlers.onNavigate) handlers.onNavigate(alt.supplierId);
    });
    item.append(link);
    item.append(
      el("span", {
        class: "alt-score",
        text: alt.valueTCO2e === null ? "no score" : `${alt.valueTCO2e} tCO2e`,
      }),
    );
    item.append(el("span", { class: "alt-rating", text: `rating ${alt.rating}` }));
    list.append(item);
  }
  section.append(list);
  return section;
}

/**
 * Supplier CO2e view: staged score with its breakdown, and greener
 * alternatives within a material group. A supplier without enough data
 * for any stage gets an explicit no-data card; it must never read as
 * zero emissions.
 */
export class SustainabilityPanel {
  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly handlers: SustainabilityHandlers = {},
  ) {}

  async show(supplierId: string, options: { chain?: boolean; materialGroupId?: string } = {}) {
    this.root.replaceChildren();
    const panel = el("div", { class: "sustainability" });
    panel.dataset.supplierId = supplierId;
    try {
      const score = await this.api.getScore(supplierId, { chain: options.chain });
      panel.append(renderScore(score));
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        panel.append(
          el("p", {
            class: "no-data",
            text: `no emission data available for ${supplierId} at any stage`,
          }),
        );
      } else {
        throw err;
      }
    }
    if (options.materialGroupId) {
      const alternatives = await this.api.getAlternatives(supplierId, options.materialGroupId);
      panel.append(renderAlternatives(alternatives, this.handlers));
    }
    this.root.append(panel);
  }
}
