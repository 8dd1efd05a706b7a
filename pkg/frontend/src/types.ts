// Wire shapes for the help service JSON API. Field names and nullability
// mirror the server exactly; keep these in sync with /v1/query, /v1/health
// and /v1/skills.

export interface MatchInfo {
  matched_query: string;
  similarity: number;
  response_id: string;
  response_text: string;
}

export interface PosBaseline {
  action: string | null;
  skill: string | null;
  response_id: string | null;
}

export interface QueryResponse {
  normalized_tokens: string[];
  is_help: boolean;
  p_help: number;
  match: MatchInfo | null;
  pos_baseline: PosBaseline | null;
  latency_ms: number;
}

export interface QueryRequest {
  text: string;
  threshold?: number;
  k?: number;
}

export interface HealthResponse {
  model_kind: string;
  index_size: number;
  version: string;
}

export interface SkillInfo {
  skill: string;
  actions: string[];
  sample_query: string | null;
}

export interface ErrorBody {
  error: string;
}
