/** Application wiring: automata picker, chat panel, graph and inspector. */

import { EngineApi } from "./api.js";
import { renderGraph } from "./graph.js";
import { applyEvent, newSessionView, type SessionView } from "./model.js";
import { openEventStream, type StreamHandle } from "./stream.js";
import type { EngineEvent, GraphPayload, SessionHandle } from "./types.js";

interface AppElements {
  root: HTMLElement;
  picker: HTMLSelectElement;
  openButton: HTMLButtonElement;
  graphPanel: HTMLElement;
  chatLog: HTMLElement;
  chatInput: HTMLInputElement;
  sendButton: HTMLButtonElement;
  statusChip: HTMLElement;
  internalLane: HTMLElement;
  archivePanel: HTMLElement;
  warningsPanel: HTMLElement;
}

export class App {
  private api: EngineApi;
  private elements: AppElements;
  private graph: GraphPayload | null = null;
  private view: SessionView | null = null;
  private handle: SessionHandle | null = null;
  private stream: StreamHandle | null = null;
  private sending = false;

  constructor(baseUrl: string, root: HTMLElement) {
    this.api = new EngineApi(baseUrl);
    this.elements = buildSkeleton(root);
    this.elements.openButton.addEventListener("click", () => void this.openSession());
    this.elements.sendButton.addEventListener("click", () => void this.send());
    this.elements.chatInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void this.send();
    });
  }

  async init(): Promise<void> {
    try {
      const automata = await this.api.listAutomata();
      this.elements.picker.textContent = "";
      for (const automaton of automata) {
        const option = document.createElement("option");
        option.value = automaton.automaton_id;
        option.textContent = `${automaton.name} (${automaton.automaton_id})`;
        this.elements.picker.appendChild(option);
      }
      this.setStatus(automata.length ? "pick an automaton" : "no automata uploaded", "idle");
    } catch (error) {
      this.setStatus(`cannot reach engine: ${String(error)}`, "error");
    }
  }

  async openSession(): Promise<void> {
    const automatonId = this.elements.picker.value;
    if (!automatonId) return;
    this.stream?.close();
    try {
      this.graph = await this.api.graph(automatonId);
      this.handle = await this.api.createSession(automatonId);
      this.view = newSessionView(this.graph);
      this.render();
      this.setStatus(`session ${this.handle.session_id.slice(0, 8)} seed ${this.handle.seed}`, "live");
      this.stream = openEventStream(
        (after) => this.api.eventsUrl(this.handle!.session_id, after),
        (event) => this.onEvent(event),
      );
    } catch (error) {
      this.setStatus(String(error), "error");
    }
  }

  private onEvent(event: EngineEvent): void {
    if (!this.view || !this.graph) return;
    applyEvent(this.view, this.graph, event);
    this.render();
  }

  async send(): Promise<void> {
    const text = this.elements.chatInput.value.trim();
    if (!text || !this.handle || this.sending) return;
    this.sending = true;
    this.elements.chatInput.value = "";
    this.updateInputState();
    try {
      const result = await this.api.sendMessage(this.handle.session_id, text);
      this.handle = result.handle;
    } catch (error) {
      this.setStatus(String(error), "error");
    } finally {
      this.sending = false;
      this.updateInputState();
    }
  }

  private setStatus(text: string, tone: "idle" | "live" | "error"): void {
    this.elements.statusChip.textContent = text;
    this.elements.statusChip.dataset.tone = tone;
  }

  private updateInputState(): void {
    const awaiting = this.view !== null && this.view.status === "live" && !this.sending;
    this.elements.chatInput.disabled = !awaiting;
    this.elements.sendButton.disabled = !awaiting;
  }

  render(): void {
    const { view, graph } = this;
    if (!view || !graph) return;

    renderGraph(this.elements.graphPanel, graph, {
      current: view.current,
      lastEdge: view.lastTransition?.edge ?? null,
      annotations: view.annotations,
    });

    const log = this.elements.chatLog;
    log.textContent = "";
    for (const message of view.chat) {
      const bubble = document.createElement("div");
      bubble.className = `bubble bubble-${message.role}`;
      bubble.dataset.state = message.state;
      bubble.textContent = message.text;
      log.appendChild(bubble);
    }
    if (view.status !== "live") {
      const note = document.createElement("div");
      note.className = "bubble bubble-end";
      note.textContent = `— ${view.endReason ?? view.status} —`;
      log.appendChild(note);
    }
    log.scrollTop = log.scrollHeight;

    const lane = this.elements.internalLane;
    lane.textContent = "";
    for (const message of view.internal) {
      const item = document.createElement("div");
      item.className = "internal-item";
      item.dataset.state = message.state;
      item.textContent = `[${message.state}] ${message.text}`;
      lane.appendChild(item);
    }

    const archives = this.elements.archivePanel;
    archives.textContent = "";
    for (const [archiveId, pairs] of view.archives) {
      const block = document.createElement("div");
      block.className = "archive";
      const title = document.createElement("h4");
      title.textContent = `history ${archiveId} (${pairs.length})`;
      block.appendChild(title);
      for (const pair of pairs) {
        const row = document.createElement("div");
        row.className = "archive-pair";
        row.textContent = `${pair.origin}: ${pair.input} → ${pair.output}`;
        block.appendChild(row);
      }
      archives.appendChild(block);
    }

    const warnings = this.elements.warningsPanel;
    warnings.textContent = "";
    for (const warning of view.warnings) {
      const item = document.createElement("div");
      item.className = "warning-item";
      item.textContent = warning;
      warnings.appendChild(item);
    }

    if (view.status !== "live") {
      this.setStatus(view.endReason ?? view.status, view.status === "error" ? "error" : "idle");
    }
    this.updateInputState();
  }
}

function panel(title: string, className: string): { section: HTMLElement; body: HTMLElement } {
  const section = document.createElement("section");
  section.className = className;
  const heading = document.createElement("h3");
  heading.textContent = title;
  section.appendChild(heading);
  const body = document.createElement("div");
  body.className = `${className}-body`;
  section.appendChild(body);
  return { section, body };
}

function buildSkeleton(root: HTMLElement): AppElements {
  root.textContent = "";

  const toolbar = document.createElement("header");
  toolbar.className = "toolbar";
  const picker = document.createElement("select");
  picker.className = "automaton-picker";
  const openButton = document.createElement("button");
  openButton.textContent = "open session";
  const statusChip = document.createElement("span");
  statusChip.className = "status-chip";
  toolbar.append(picker, openButton, statusChip);
  root.appendChild(toolbar);

  const main = document.createElement("main");
  main.className = "columns";
  root.appendChild(main);

  const chatColumn = document.createElement("div");
  chatColumn.className = "column column-chat";
  const chat = panel("chat", "chat");
  const chatLog = chat.body;
  chatLog.classList.add("chat-log");
  chatColumn.appendChild(chat.section);
  const inputRow = document.createElement("div");
  inputRow.className = "input-row";
  const chatInput = document.createElement("input");
  chatInput.placeholder = "say something… (/quit to end)";
  const sendButton = document.createElement("button");
  sendButton.textContent = "send";
  inputRow.append(chatInput, sendButton);
  chatColumn.appendChild(inputRow);
  main.appendChild(chatColumn);

  const graphColumn = document.createElement("div");
  graphColumn.className = "column column-graph";
  const graph = panel("automaton", "graph");
  graphColumn.appendChild(graph.section);
  main.appendChild(graphColumn);

  const inspectorColumn = document.createElement("div");
  inspectorColumn.className = "column column-inspector";
  const internal = panel("internal outputs", "internal");
  const archivesPanel = panel("shared histories", "archives");
  const warnings = panel("warnings", "warnings");
  inspectorColumn.append(internal.section, archivesPanel.section, warnings.section);
  main.appendChild(inspectorColumn);

  return {
    root,
    picker,
    openButton,
    graphPanel: graph.body,
    chatLog,
    chatInput,
    sendButton,
    statusChip,
    internalLane: internal.body,
    archivePanel: archivesPanel.body,
    warningsPanel: warnings.body,
  };
}
