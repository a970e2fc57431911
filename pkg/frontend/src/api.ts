import type {
  AlertPayload,
  AlternativesPayload,
  BotRunPayload,
  ErrorEnvelope,
  FeedPayload,
  LayoutEntry,
  LayoutPayload,
  ProcessPayload,
  ScorePayload,
  SharePayload,
  SupplierPayload,
  TokenResponse,
  WidgetPayload,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(envelope.message);
    this.status = status;
    this.code = envelope.code;
    this.details = envelope.details ?? {};
  }
}

export interface WidgetQuery {
  viewMode?: string;
  aliasUserId?: string;
  focus?: string;
  focusId?: string;
  filter?: string;
  search?: string;
  from?: string;
  to?: string;
  bucketing?: string;
  horizon?: number;
  method?: string;
}

function queryString(params: Record<string, string | number | undefined>): string {
  const search = new URLSearchParams();
  for (const [key, value] of Object.entries(params)) {
    if (value !== undefined && value !== "") search.set(key, String(value));
  }
  const qs = search.toString();
  return qs ? `?${qs}` : "";
}

/**
 * Thin typed client over the workspace API. Holds the bearer token;
 * onUnauthorized fires once per 401 so the shell can fall back to the
 * token entry screen.
 */
export class ApiClient {
  private token: string | null = null;
  onUnauthorized: (() => void) | null = null;

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => globalThis.fetch(url, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  hasToken(): boolean {
    return this.token !== null;
  }

  async login(userId: string): Promise<TokenResponse> {
    const res = await this.request("POST", "/api/auth/token", { userId });
    const body = (await res.json()) as TokenResponse;
    this.token = body.token;
    return body;
  }

  private async request(method: string, path: string, body?: unknown): Promise<Response> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const res = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let envelope: ErrorEnvelope;
      try {
        envelope = (await res.json()) as ErrorEnvelope;
      } catch {
        envelope = { code: "error", message: res.statusText, details: {} };
      }
      if (res.status === 401 && this.onUnauthorized) this.onUnauthorized();
      throw new ApiError(res.status, envelope);
    }
    return res;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.request("GET", path);
    return (await res.json()) as T;
  }

  private async postJson<T>(path: string, body?: unknown): Promise<T> {
    const res = await this.request("POST", path, body ?? {});
    return (await res.json()) as T;
  }

  getLayout(): Promise<LayoutPayload> {
    return this.getJson("/api/me/layout");
  }

  async putLayout(entries: LayoutEntry[]): Promise<LayoutPayload> {
    const res = await this.request("PUT", "/api/me/layout", { entries });
    return (await res.json()) as LayoutPayload;
  }

  getWidget(widgetId: string, query: WidgetQuery = {}): Promise<WidgetPayload> {
    return this.getJson(`/api/widgets/${widgetId}${queryString({ ...query })}`);
  }

  async getExportCsv(widgetId: string, query: WidgetQuery = {}): Promise<string> {
    const res = await this.request("GET", `/api/export/${widgetId}.csv${queryString({ ...query })}`);
    return await res.text();
  }

  runBot(botId: string, params: Record<string, unknown> = {}, dryRun = false): Promise<BotRunPayload> {
    return this.postJson(`/api/bots/${botId}/run`, { params, dryRun });
  }

  approveRun(runId: string): Promise<BotRunPayload> {
    return this.postJson(`/api/bots/runs/${runId}/approve`);
  }

  rejectRun(runId: string): Promise<BotRunPayload> {
    return this.postJson(`/api/bots/runs/${runId}/reject`);
  }

  getSupplier(supplierId: string): Promise<SupplierPayload> {
    return this.getJson(`/api/suppliers/${supplierId}`);
  }

  getScore(supplierId: string, opts: { chain?: boolean; year?: number } = {}): Promise<ScorePayload> {
    const qs = queryString({ chain: opts.chain ? "true" : undefined, year: opts.year });
    return this.getJson(`/api/suppliers/${supplierId}/score${qs}`);
  }

  getAlternatives(supplierId: string, group: string): Promise<AlternativesPayload> {
    return this.getJson(`/api/suppliers/${supplierId}/alternatives${queryString({ group })}`);
  }

  getGroupShare(groupId: string): Promise<SharePayload> {
    return this.getJson(`/api/materialgroups/${groupId}/share`);
  }

  getAlerts(): Promise<{ alerts: AlertPayload[] }> {
    return this.getJson("/api/alerts");
  }

  getFeed(limit?: number, offset?: number): Promise<FeedPayload> {
    return this.getJson(`/api/feed${queryString({ limit, offset })}`);
  }

  markRead(clusterId: string): Promise<{ clusterId: string; historyLength: number }> {
    return this.postJson("/api/feed/read", { clusterId });
  }

  suggestCluster(clusterId: string): Promise<Record<string, unknown>> {
    return this.postJson("/api/feed/suggest", { clusterId });
  }

  toggleFavorite(subjectRef: string): Promise<Record<string, unknown>> {
    return this.postJson("/api/me/favorites", { subjectRef });
  }

  getProcess(processId: string): Promise<ProcessPayload> {
    return this.getJson(`/api/processes/${processId}`);
  }
}
