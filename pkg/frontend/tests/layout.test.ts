import { describe, expect, it } from "vitest";

import arpsGraph from "./fixtures/arps_graph.json";
import ethicsGraph from "./fixtures/ethics_graph.json";

import { layers, layoutGraph } from "../src/layout.js";
import type { GraphPayload } from "../src/types.js";

const arps = arpsGraph as GraphPayload;
const ethics = ethicsGraph as GraphPayload;

describe("layered layout", () => {
  it("keeps the rendered graph isomorphic to the service payload", () => {
    const view = layoutGraph(arps);
    expect(view.nodes.map((n) => n.id).sort()).toEqual(arps.nodes.map((n) => n.id).sort());
    expect(view.edges.map((e) => e.id).sort()).toEqual(arps.edges.map((e) => e.id).sort());
    expect(view.nodes).toHaveLength(5);
    expect(view.edges).toHaveLength(6);
    for (const edge of view.edges) {
      const original = arps.edges.find((e) => e.id === edge.id)!;
      expect([edge.from, edge.to]).toEqual([original.from, original.to]);
      expect(edge.priority).toBe(original.priority);
    }
  });

  it("places every node at a distinct position", () => {
    for (const graph of [arps, ethics]) {
      const view = layoutGraph(graph);
      const positions = new Set(view.nodes.map((n) => `${n.x},${n.y}`));
      expect(positions.size).toBe(graph.nodes.length);
    }
  });

  it("starts layering at the initial state", () => {
    const columns = layers(arps);
    expect(columns[0]).toEqual(["q0"]);
    expect(columns.flat().sort()).toEqual(arps.nodes.map((n) => n.id).sort());
  });

  it("bows opposite edges apart so both stay visible", () => {
    const view = layoutGraph(arps);
    const there = view.edges.find((e) => e.from === "q0" && e.to === "l1")!;
    const back = view.edges.find((e) => e.from === "l1" && e.to === "q0")!;
    expect(there.bend).not.toBe(back.bend);
  });

  it("labels edges with trigger and priority", () => {
    const view = layoutGraph(arps);
    const anger = view.edges.find((e) => e.to === "l2")!;
    expect(anger.label).toBe("t0, 2");
    const always = view.edges.find((e) => e.from === "l1")!;
    expect(always.label).toContain("1");
  });
});
