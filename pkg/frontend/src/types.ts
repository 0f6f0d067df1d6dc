/** Wire types mirroring the engine service's JSON payloads. */

export type EventKind =
  | "user_input"
  | "state_output"
  | "trigger_eval"
  | "transition"
  | "display"
  | "terminated"
  | "warning";

export interface EngineEvent {
  seq: number;
  kind: EventKind;
  state: string | null;
  payload: unknown;
}

export interface TriggerEvalPayload {
  edge: string;
  to: string;
  priority: number;
  value: number;
  results: [string, number][];
}

export interface TransitionPayload {
  from: string;
  to: string;
  edge: string;
}

export interface TerminatedPayload {
  reason: string;
  status: "ended" | "error";
}

export interface GraphNode {
  id: string;
  kind: "user" | "dialer" | "writer";
  final: boolean;
  display: "always" | "never" | "auto" | null;
}

export interface GraphEdge {
  id: string;
  from: string;
  to: string;
  triggers: string[];
  priority: number;
}

export interface GraphAttachment {
  owner: string;
  archive: string;
  mode: "r" | "w" | "rw";
}

export interface GraphPayload {
  name: string;
  initial: string;
  nodes: GraphNode[];
  edges: GraphEdge[];
  archives: string[];
  attachments: GraphAttachment[];
}

export interface AutomatonSummary {
  automaton_id: string;
  name: string;
}

export interface SessionHandle {
  session_id: string;
  automaton: string;
  automaton_id: string;
  status: "awaiting_user" | "running" | "ended" | "error";
  current: string;
  awaiting_user: boolean;
  seed: number;
}

export interface MessageResult {
  displayed: string[];
  handle: SessionHandle;
}
