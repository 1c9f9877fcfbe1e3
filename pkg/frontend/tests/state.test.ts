import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { indexBundle } from "../src/bundle.js";
import {
  initialState,
  isVisible,
  reduce,
  stateInvariantHolds,
  type ViewEvent,
  type ViewState,
} from "../src/state.js";
import type { Bundle, TreeIndex } from "../src/types.js";

const HERE = dirname(fileURLToPath(import.meta.url));

function loadIndex(): TreeIndex {
  const raw = readFileSync(join(HERE, "fixtures", "bundle_b.json"), "utf-8");
  return indexBundle(JSON.parse(raw) as Bundle);
}

/** Small deterministic PRNG for event fuzzing. */
function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

function randomEvent(index: TreeIndex, rand: () => number): ViewEvent {
  const ids = index.bundle.nodes.map((n) => n.id);
  const nodeId = ids[Math.floor(rand() * ids.length)];
  const roll = rand();
  if (roll < 0.4) return { kind: "toggle", nodeId };
  if (roll < 0.7) return { kind: "select", nodeId };
  if (roll < 0.8) return { kind: "setTau", tau: rand() };
  if (roll < 0.88) return { kind: "setMode", mode: (["weakness", "strength", "off"] as const)[Math.floor(rand() * 3)] };
  if (roll < 0.95) return { kind: "setPage", page: Math.floor(rand() * 5) };
  return { kind: "clearSelection" };
}

describe("view state", () => {
  const index = loadIndex();

  it("starts with the root collapsed to depth one", () => {
    const state = initialState(index);
    expect(state.expanded).toEqual(new Set([index.bundle.root]));
    expect(isVisible(index, state, index.bundle.root)).toBe(true);
    for (const child of index.byId.get(index.bundle.root)?.children ?? []) {
      expect(isVisible(index, state, child)).toBe(true);
      for (const grandchild of index.byId.get(child)?.children ?? []) {
        expect(isVisible(index, state, grandchild)).toBe(false);
      }
    }
  });

  it("expanding reveals children; selection opens on visible nodes only", () => {
    let state = initialState(index);
    const [firstChild] = index.byId.get(index.bundle.root)?.children ?? [];
    state = reduce(index, state, { kind: "toggle", nodeId: firstChild });
    for (const grandchild of index.byId.get(firstChild)?.children ?? []) {
      expect(isVisible(index, state, grandchild)).toBe(true);
    }
    const deep = index.bundle.nodes.find((n) => n.depth > 2)?.id as string;
    const unchanged = reduce(index, state, { kind: "select", nodeId: deep });
    expect(unchanged.selected).toBe(null);
  });

  it("collapsing an expanded ancestor of the selection clears it", () => {
    let state = initialState(index);
    const [firstChild] = index.byId.get(index.bundle.root)?.children ?? [];
    state = reduce(index, state, { kind: "toggle", nodeId: firstChild });
    const grandchild = index.byId.get(firstChild)?.children[0] as string;
    state = reduce(index, state, { kind: "select", nodeId: grandchild });
    expect(state.selected).toBe(grandchild);
    state = reduce(index, state, { kind: "toggle", nodeId: firstChild });
    expect(state.selected).toBe(null);
  });

  it("keeps a selected node selected when the node itself is collapsed", () => {
    let state = initialState(index);
    const [firstChild] = index.byId.get(index.bundle.root)?.children ?? [];
    state = reduce(index, state, { kind: "toggle", nodeId: firstChild });
    state = reduce(index, state, { kind: "select", nodeId: firstChild });
    state = reduce(index, state, { kind: "toggle", nodeId: firstChild });
    expect(state.selected).toBe(firstChild); // still visible, just collapsed
    expect(stateInvariantHolds(index, state)).toBe(true);
  });

  it.each([1, 2, 3, 4, 5, 6, 7, 8])(
    "holds the visibility invariant under fuzzed event sequences (seed %i)",
    (seed) => {
      const rand = lcg(seed * 7919);
      let state: ViewState = initialState(index);
      for (let step = 0; step < 400; step++) {
        state = reduce(index, state, randomEvent(index, rand));
        expect(stateInvariantHolds(index, state)).toBe(true);
        expect(state.tau).toBeGreaterThanOrEqual(0);
        expect(state.tau).toBeLessThanOrEqual(1);
        for (const nodeId of state.expanded) {
          expect(index.byId.has(nodeId)).toBe(true);
        }
      }
    },
  );
});
