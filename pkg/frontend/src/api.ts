/** Thin typed client for the engine's HTTP API. */

import type { AutomatonSummary, GraphPayload, MessageResult, SessionHandle } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    const body = await response.text().catch(() => "");
    throw new ApiError(response.status, `${init?.method ?? "GET"} ${url}: ${response.status} ${body}`);
  }
  return (await response.json()) as T;
}

export class EngineApi {
  constructor(readonly baseUrl: string) {}

  listAutomata(): Promise<AutomatonSummary[]> {
    return request(`${this.baseUrl}/automata`);
  }

  graph(automatonId: string): Promise<GraphPayload> {
    return request(`${this.baseUrl}/automata/${encodeURIComponent(automatonId)}/graph`);
  }

  createSession(automatonId: string, seed?: number): Promise<SessionHandle> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(seed === undefined ? { automaton_id: automatonId } : { automaton_id: automatonId, seed }),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageResult> {
    return request(`${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  eventsUrl(sessionId: string, after: number): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(sessionId)}/events?after=${after}`;
  }
}
