/** Pure session view-model: folds engine events into what the UI shows.
 *
 * Everything rendered derives from the event stream: chat bubbles from
 * display events, the state highlight from input/output/transition events,
 * edge annotations from trigger evaluations, and the inspector's internal
 * lane from machine outputs that were never displayed (the bias-catching
 * pattern). Applying an event twice (replay after reconnect) is a no-op.
 */

import type {
  EngineEvent,
  GraphPayload,
  TerminatedPayload,
  TransitionPayload,
  TriggerEvalPayload,
} from "./types.js";

export interface ChatMessage {
  role: "user" | "machine";
  state: string;
  text: string;
}

export interface InternalMessage {
  state: string;
  text: string;
}

export interface EdgeAnnotation {
  edge: string;
  fired: boolean;
  value: number;
  priority: number;
  results: [string, number][];
}

export interface ArchivePair {
  origin: string;
  input: string;
  output: string;
}

export interface SessionView {
  seq: number; // last applied event seq
  chat: ChatMessage[];
  internal: InternalMessage[];
  current: string;
  visits: string[]; // states where a message happened, in order
  lastTransition: TransitionPayload | null;
  annotations: Map<string, EdgeAnnotation>; // latest evaluation per edge
  archives: Map<string, ArchivePair[]>;
  warnings: string[];
  status: "live" | "ended" | "error";
  endReason: string | null;
  pendingOutput: { state: string; text: string; displayed: boolean } | null;
  lastMessage: string;
}

export function newSessionView(graph: GraphPayload): SessionView {
  const archives = new Map<string, ArchivePair[]>();
  for (const archive of graph.archives) archives.set(archive, []);
  return {
    seq: -1,
    chat: [],
    internal: [],
    current: graph.initial,
    visits: [],
    lastTransition: null,
    annotations: new Map(),
    archives,
    warnings: [],
    status: "live",
    endReason: null,
    pendingOutput: null,
    lastMessage: "",
  };
}

function writableArchiveOf(graph: GraphPayload, state: string): string | null {
  for (const attachment of graph.attachments) {
    if (attachment.owner === state && attachment.mode !== "r") return attachment.archive;
  }
  return null;
}

function flushPending(view: SessionView): void {
  if (view.pendingOutput && !view.pendingOutput.displayed) {
    view.internal.push({ state: view.pendingOutput.state, text: view.pendingOutput.text });
  }
  view.pendingOutput = null;
}

export function applyEvent(view: SessionView, graph: GraphPayload, event: EngineEvent): SessionView {
  if (event.seq <= view.seq) return view; // replayed duplicate
  view.seq = event.seq;

  switch (event.kind) {
    case "user_input": {
      flushPending(view);
      const text = event.payload as string;
      view.chat.push({ role: "user", state: event.state ?? "", text });
      view.current = event.state ?? view.current;
      view.visits.push(event.state ?? "");
      view.lastMessage = text;
      break;
    }
    case "state_output": {
      flushPending(view);
      const state = event.state ?? "";
      const text = event.payload as string;
      view.current = state;
      view.visits.push(state);
      view.pendingOutput = { state, text, displayed: false };
      const archive = writableArchiveOf(graph, state);
      if (archive !== null) {
        view.archives.get(archive)?.push({ origin: state, input: view.lastMessage, output: text });
      }
      view.lastMessage = text;
      break;
    }
    case "display": {
      const text = event.payload as string;
      view.chat.push({ role: "machine", state: event.state ?? "", text });
      if (view.pendingOutput && view.pendingOutput.state === event.state && view.pendingOutput.text === text) {
        view.pendingOutput.displayed = true;
      }
      break;
    }
    case "trigger_eval": {
      const payload = event.payload as TriggerEvalPayload;
      view.annotations.set(payload.edge, {
        edge: payload.edge,
        fired: payload.value > 0,
        value: payload.value,
        priority: payload.priority,
        results: payload.results,
      });
      break;
    }
    case "transition": {
      flushPending(view);
      const payload = event.payload as TransitionPayload;
      view.lastTransition = payload;
      view.current = payload.to;
      break;
    }
    case "terminated": {
      flushPending(view);
      const payload = event.payload as TerminatedPayload;
      view.status = payload.status === "error" ? "error" : "ended";
      view.endReason = payload.reason;
      break;
    }
    case "warning": {
      const payload = event.payload as { code: string; message: string };
      view.warnings.push(`${payload.code}: ${payload.message}`);
      break;
    }
  }
  return view;
}

export function applyAll(view: SessionView, graph: GraphPayload, events: EngineEvent[]): SessionView {
  for (const event of events) applyEvent(view, graph, event);
  return view;
}
