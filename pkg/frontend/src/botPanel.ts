import type { ApiClient } from "./api";
import { ApiError } from "./api";
import type { BotProposal, BotRunPayload } from "./types";
import { el } from "./widgets";

export interface BotPanelHandlers {
  /** Called after a successful approve so affected widgets can re-fetch. */
  onApplied?: (run: BotRunPayload) => void;
}

function proposalSummary(proposal: BotProposal): string {
  const p = proposal.payload;
  switch (proposal.kind) {
    case "BUNDLE":
      return `bundle ${proposal.memberRfqIds.length} RFQs, qty ${p.combinedQuantity}`;
    case "ACCEPT":
      return `accept ${p.rfqId ?? proposal.memberRfqIds[0] ?? ""} at ${p.offerPrice}`;
    case "COUNTER":
      return `counter ${p.rfqId ?? proposal.memberRfqIds[0] ?? ""} at ${p.counterPrice}`;
    case "ESCALATE":
      return `escalate ${p.rfqId ?? proposal.memberRfqIds[0] ?? ""} to a buyer`;
  }
}

function renderProposal(proposal: BotProposal): HTMLElement {
  const item = el("li", { class: `proposal proposal-${proposal.kind.toLowerCase()}` });
  item.append(el("span", { class: "proposal-kind", text: proposal.kind }));
  item.append(el("span", { class: "proposal-summary", text: proposalSummary(proposal) }));
  if (proposal.memberRfqIds.length) {
    const members = el("ul", { class: "proposal-members" });
    for (const rfqId of proposal.memberRfqIds) {
      members.append(el("li", { text: rfqId }));
    }
    item.append(members);
  }
  return item;
}

/**
 * Review card for one bot run: the proposal list plus approve/reject.
 *
 * Both actions wait for the server before touching anything else. A 409
 * means someone else already resolved the run (or an RFQ in it moved on);
 * the card switches to a stale notice and leaves the widgets alone.
 */
export class BotPanel {
  private run: BotRunPayload | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly handlers: BotPanelHandlers = {},
  ) {}

  show(run: BotRunPayload): void {
    this.run = run;
    this.render();
  }

  private render(notice?: string): void {
    this.root.replaceChildren();
    const run = this.run;
    if (!run) return;
    const card = el("div", { class: "bot-run" });
    card.dataset.runId = run.runId;
    card.dataset.status = run.status;
    card.append(el("h3", { text: `${run.botId} run ${run.runId}` }));
    card.append(el("span", { class: "run-status", text: run.status }));
    if (notice) {
      card.append(el("p", { class: "conflict-notice", text: notice }));
    }
    const list = el("ul", { class: "proposal-list" });
    for (const proposal of run.proposals) {
      list.append(renderProposal(proposal));
    }
    card.append(list);
    if (run.status === "PROPOSED") {
      const approve = el("button", { class: "approve", text: "approve" });
      approve.addEventListener("click", () => void this.approve());
      const reject = el("button", { class: "reject", text: "reject" });
      reject.addEventListener("click", () => void this.reject());
      card.append(approve, reject);
    }
    this.root.append(card);
  }

  async approve(): Promise<void> {
    await this.resolve((runId) => this.api.approveRun(runId), true);
  }

  async reject(): Promise<void> {
    await this.resolve((runId) => this.api.rejectRun(runId), false);
  }

  private async resolve(
    call: (runId: string) => Promise<BotRunPayload>,
    applied: boolean,
  ): Promise<void> {
    if (!this.run) return;
    try {
      const updated = await call(this.run.runId);
      this.run = updated;
      this.render();
      if (applied && this.handlers.onApplied) this.handlers.onApplied(updated);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // stale run; keep the proposals visible, add the notice, change nothing else
        this.render("this run was already resolved elsewhere; reload to see the outcome");
        return;
      }
      throw err;
    }
  }
}
