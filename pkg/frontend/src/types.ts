// Backend payload shapes, camelCase JSON as served over the wire.
// Money values are euro cents (integers), emission masses decimal strings.

export interface TokenResponse {
  token: string;
  userId: string;
  issuedAt: string;
  expiresAt: string;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface LayoutEntry {
  widgetId: string;
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface LayoutPayload {
  entries: LayoutEntry[];
}

export type RenderMode = "TABLE" | "CHART";

export type WidgetRow = Record<string, unknown>;

export interface WidgetPayload {
  widgetId: string;
  title: string;
  defaultView: RenderMode;
  columns: string[];
  rows: WidgetRow[];
  meta: {
    scope: {
      focus: string;
      focusId: string | null;
      viewMode: string;
      aliasUserId: string | null;
    };
    storeRevision: number;
  };
}

export interface BotProposal {
  kind: "BUNDLE" | "ACCEPT" | "COUNTER" | "ESCALATE";
  memberRfqIds: string[];
  payload: Record<string, unknown>;
}

export interface BotRunPayload {
  runId: string;
  botId: string;
  status: "PROPOSED" | "APPROVED" | "REJECTED" | "APPLIED";
  triggeredBy: string;
  startedAt: string;
  proposals: BotProposal[];
  dryRun?: boolean;
}

export interface BreakdownEntry {
  component: string;
  stage: number | null;
  contribution: string;
  gap: boolean;
}

export interface ScorePayload {
  subject: string;
  stage: number;
  valueTCO2e: string;
  breakdown: BreakdownEntry[];
  computedAt: string | null;
}

export interface RatingPayload {
  supplierId: string;
  score: number;
  contributions: Record<string, number>;
}

export interface SupplierPayload {
  id: string;
  name: string;
  sectorCode: string;
  characteristics: Record<string, number>;
  rating: RatingPayload | null;
  reportedCcf: string | null;
  reportedPcfByMaterial: Record<string, string>;
}

export interface Alternative {
  supplierId: string;
  valueTCO2e: string | null;
  rating: number | null;
}

export interface AlternativesPayload {
  supplierId: string;
  materialGroupId: string;
  alternatives: Alternative[];
}

export interface SharePayload {
  materialGroupIds: string[];
  shares: Record<string, number>;
}

export interface AlertPayload {
  kind: string;
  subject: string;
  severity: "INFO" | "WARNING" | "CRITICAL";
  message: string;
}

export interface ClusterPayload {
  clusterId: string;
  memberIds: string[];
  representativeId: string;
  summary: string[];
  topics: string[];
  newestPublishedAt: string;
  sourceIds: string[];
}

export interface FeedEntryPayload {
  clusterId: string;
  score: number;
  reasons: string[];
  cluster: ClusterPayload;
}

export interface FeedPayload {
  entries: FeedEntryPayload[];
}

export interface ProcessStepPayload {
  stepName: string;
  responsibleUserId: string;
  state: string;
  active: boolean;
  yourTask: boolean;
}

export interface ProcessPayload {
  processId: string;
  processType: string;
  completed: boolean;
  steps: ProcessStepPayload[];
}
