// Typed client for the workbench API. All reads and writes go through
// /api/v1; nothing is computed here beyond request plumbing.

import type { AnnotationPayload } from "./rules.js";

export interface ApiError {
  code: string;
  message: string;
  field: string | null;
  status: number;
}

export interface PostView {
  n: number;
  id: string;
  text: string;
}

export interface TaskView {
  topic_id: string;
  parent_id: string | null;
  stage: number;
  posts: PostView[];
  terms: string[];
  parent_context: { topic_id: string; posts: PostView[]; terms: string[] } | null;
}

export interface AgreementRow {
  task: string;
  kappa: number | null;
  all_agree: number;
  two_agree: number;
  no_agreement: number;
  total: number;
}

export interface AgreementView {
  stages: AgreementRow[][];
  pooled: AgreementRow[];
  two_or_more_rate: number;
}

export interface FinalTopicsView {
  retained: {
    topic_id: string;
    parent_id: string | null;
    label: string | null;
    label_candidates: string[];
    orphan_risk: boolean;
  }[];
  excluded: { topic_id: string; parent_id: string | null; reason: string }[];
  category_counts: Record<string, Record<string, number>>;
  two_or_more_rate?: number;
}

export interface HistogramView {
  total: number;
  entries: { label: string; count: number; fraction: number }[];
  failures: number;
}

export class Api {
  constructor(
    private readonly base: string,
    private token: string
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(`${this.base}/api/v1${path}`, {
      method,
      headers: {
        "Content-Type": "application/json",
        Authorization: `Bearer ${this.token}`,
      },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let payload: Partial<ApiError> = {};
      try {
        payload = (await res.json()) as Partial<ApiError>;
      } catch {
        payload = { message: res.statusText };
      }
      const error: ApiError = {
        code: payload.code ?? "error",
        message: payload.message ?? res.statusText,
        field: payload.field ?? null,
        status: res.status,
      };
      throw error;
    }
    return (await res.json()) as T;
  }

  status(): Promise<{ artifacts: string[]; session: unknown; events: number }> {
    return this.request("GET", "/status");
  }

  tasks(): Promise<{ annotator: string; tasks: TaskView[] }> {
    return this.request("GET", "/tasks");
  }

  submitAnnotation(payload: AnnotationPayload): Promise<{ accepted: boolean; remaining: number }> {
    return this.request("POST", "/annotations", payload);
  }

  agreement(): Promise<AgreementView> {
    return this.request("GET", "/agreement");
  }

  adjudication(): Promise<FinalTopicsView> {
    return this.request("GET", "/adjudication");
  }

  alignment(): Promise<{ matrix: unknown; report: AlignmentReport }> {
    return this.request("GET", "/alignment");
  }

  putAlignment(payload: unknown): Promise<{ roster_size: number; matched_codes: number }> {
    return this.request("PUT", "/alignment", payload);
  }

  querySets(): Promise<{ topics: QueryTermSetView[] }> {
    return this.request("GET", "/query-sets");
  }

  putQuerySets(payload: {
    removals: [string, string][];
    proposed: Record<string, string[]>;
  }): Promise<{ topics: number }> {
    return this.request("PUT", "/query-sets", payload);
  }

  histogram(): Promise<HistogramView> {
    return this.request("GET", "/sampling/histogram");
  }

  draw(label: string, n: number, seed: number): Promise<{ label: string; doc_ids: string[] }> {
    return this.request("POST", "/sampling/draws", { label, n, seed });
  }

  sheets(): Promise<{ sheets: SheetView[] }> {
    return this.request("GET", "/coding/sheets");
  }

  sheet(topicId: string): Promise<SheetView> {
    return this.request("GET", `/coding/sheets/${topicId}`);
  }

  addCodingEntry(
    topicId: string,
    entry: { post_id: string; focused_code?: string; sub_codes?: string[]; memo?: string }
  ): Promise<{ entries: number }> {
    return this.request("POST", `/coding/sheets/${topicId}/entries`, {
      entries: [entry],
    });
  }
}

export interface AlignmentReport {
  comparable_codes: number;
  matched_codes: number;
  gt_only: string[];
  lda_only: string[];
  many_to_one: unknown[];
  roster: { id: string; label: string; kind: string; matched_topics: [string, number][] }[];
}

export interface QueryTermSetView {
  topic_id: string;
  label: string;
  common: string[];
  unique: Record<string, string[]>;
  proposed: string[];
  removed: { term: string; origin: string; removed: boolean }[];
  out_of_vocabulary: string[];
}

export interface SheetView {
  topic_id: string;
  group: string;
  group_label: string;
  posts: [string, string][];
  entries: {
    post_id: string;
    focused_code: string;
    sub_codes: string[];
    memo: string;
    timestamp: string;
  }[];
  status: string;
}
