import type { ApiClient } from "./api";
import type { FeedEntryPayload } from "./types";
import { el } from "./widgets";

function renderEntry(
  entry: FeedEntryPayload,
  actions: { onRead: (clusterId: string) => void; onSuggest: (clusterId: string) => void },
): HTMLElement {
  const item = el("article", { class: "feed-entry" });
  item.dataset.clusterId = entry.clusterId;
  const cluster = entry.cluster;
  item.append(
    el("h4", { text: cluster.topics.length ? cluster.topics.join(", ") : cluster.clusterId }),
  );
  const summary = el("ul", { class: "cluster-summary" });
  for (const line of cluster.summary) {
    summary.append(el("li", { text: line }));
  }
  item.append(summary);
  item.append(
    el("span", {
      class: "entry-meta",
      text: `${cluster.memberIds.length} articles · score ${entry.score}`,
    }),
  );
  const read = el("button", { class: "mark-read", text: "mark read" });
  read.addEventListener("click", () => actions.onRead(entry.clusterId));
  const suggest = el("button", { class: "suggest", text: "suggest to colleague" });
  suggest.addEventListener("click", () => actions.onSuggest(entry.clusterId));
  item.append(read, suggest);
  return item;
}

/**
 * Personalized news list. Reading an entry is reported back so the
 * interest profile learns from it; suggesting forwards a cluster to the
 * recipient picked server-side.
 */
export class FeedPanel {
  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  async load(limit?: number): Promise<void> {
    const feed = await this.api.getFeed(limit);
    this.root.replaceChildren();
    const list = el("div", { class: "feed" });
    if (!feed.entries.length) {
      list.append(el("p", { class: "empty-state", text: "no news for your profile yet" }));
    }
    for (const entry of feed.entries) {
      list.append(
        renderEntry(entry, {
          onRead: (clusterId) => void this.markRead(clusterId),
          onSuggest: (clusterId) => void this.suggest(clusterId),
        }),
      );
    }
    this.root.append(list);
  }

  async markRead(clusterId: string): Promise<void> {
    await this.api.markRead(clusterId);
    const entry = this.root.querySelector<HTMLElement>(`[data-cluster-id="${clusterId}"]`);
    if (entry) entry.classList.add("read");
  }

  async suggest(clusterId: string): Promise<void> {
    await this.api.suggestCluster(clusterId);
    const entry = this.root.querySelector<HTMLElement>(`[data-cluster-id="${clusterId}"]`);
    if (entry) entry.classList.add("suggested");
  }
}
