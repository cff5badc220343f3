/** Payload shapes of the answer service, mirrored field for field. */

export type AnswerKind = "answer" | "access_error" | "no_data" | "irrelevant";

/** [s1 numbers, s2 entities, s3 filters, s4 copy, s5 direction] */
export type ScoreVector = [number, number, number, number, number];

export type FlagName = "s1" | "s2" | "s3" | "s4" | "s5";

/** Per-flag finding strings, verbatim from the scorer. */
export type Evidence = Record<FlagName, string[]>;

export interface HealthInfo {
  status: string;
  tables: string[];
}

/** POST /sessions response: the session plus its granted tables. */
export interface SessionInfo {
  session_id: string;
  user_id: string;
  role: string;
  tables: string[];
}

export interface StageTimings {
  route: number;
  sql_gen: number;
  run_query: number;
  answer: number;
  score: number;
}

/** POST /sessions/{id}/query response: one full trace. */
export interface TracePayload {
  query: string;
  session_id: string;
  query_index: number;
  kind: AnswerKind;
  intention: string | null;
  rewritten: string | null;
  target_tables: string[];
  answer: string;
  sources: string[];
  sql_model: string | null;
  sql_executed: string | null;
  primary_table: string | null;
  staged_ref: string | null;
  scores: ScoreVector | null;
  evidence: Evidence | null;
  llm_calls: number;
  stage_timings: StageTimings;
}

export interface CloseInfo {
  closed: boolean;
  queries_asked: number;
}
