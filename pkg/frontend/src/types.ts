/** Wire types mirroring the service's versioned snapshot/event schemas. */

export type NodeStateName = "active" | "completed" | "discarded";

export interface EvidenceItem {
  kind: "corpus" | "kb" | "search" | "analysis";
  content: Record<string, unknown>;
  citation: Record<string, unknown>;
  flags: Record<string, unknown>;
}

export interface NodeSnapshot {
  node_id: string;
  hypothesis: string;
  method: string;
  tools: string[];
  lookups: string[][];
  state: NodeStateName;
  evidence_trail: EvidenceItem[];
  report: string | null;
  annotations: string[];
}

export interface EdgeSnapshot {
  parent: string | null;
  child: string;
}

export interface FinalResponse {
  prediction: Record<string, unknown>;
  citations: Record<string, unknown>[];
  rationale: string;
  uncertainty: number[] | null;
}

export interface Snapshot {
  schema_version: number;
  conversation_id: string;
  query: Record<string, unknown>;
  turns: number;
  nodes: NodeSnapshot[];
  edges: EdgeSnapshot[];
  final_response: FinalResponse | null;
  in_flight?: boolean;
}

export interface WireEvent {
  seq: number;
  type: string;
  payload: Record<string, unknown>;
}

export interface EventsResponse {
  conversation_id: string;
  events: WireEvent[];
  next_cursor: number;
}

export interface QueryRequest {
  text: string;
  task: string;
  language?: string | null;
  model_family?: string | null;
  query_type?: string;
}
