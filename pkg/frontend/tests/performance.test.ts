import { describe, expect, it } from "vitest";

import { indexBundle } from "../src/bundle.js";
import { extractNodes } from "../src/extraction.js";
import type { Bundle, BundleNode } from "../src/types.js";

/** Synthetic ~5k-node bundle: a branching hierarchy with plausible metrics. */
function syntheticBundle(targetNodes: number): Bundle {
  const nodes: BundleNode[] = [];
  let counter = 0;
  let seed = 12345;
  const rand = () => {
    seed = (seed * 1103515245 + 12345) % 2 ** 31;
    return seed / 2 ** 31;
  };

  const build = (depth: number, size: number): string => {
    const id = `n${counter++}`;
    const children: string[] = [];
    if (size > 1 && counter < targetNodes) {
      const fanout = Math.min(2 + Math.floor(rand() * 3), size);
      const base = Math.floor(size / fanout);
      let remaining = size;
      for (let i = 0; i < fanout; i++) {
        const childSize = i === fanout - 1 ? remaining : Math.max(1, base);
        remaining -= childSize;
        children.push(build(depth + 1, childSize));
      }
    }
    const successes = Math.round(size * (0.25 + 0.5 * rand()));
    nodes.push({
      id,
      description: `synthetic capability ${id}`,
      children,
      size,
      depth,
      fallback: false,
      metrics: { target: { successes, trials: size, value: successes / size } },
    });
    return id;
  };

  const root = build(0, 3200);
  return { format: "captree-bundle-v1", root, nodes, previews: {}, profiles: [] };
}

describe("interaction budgets on a large bundle", () => {
  const bundle = syntheticBundle(10_000);

  it("indexes a 5k-node bundle well inside the load budget", () => {
    const started = performance.now();
    const index = indexBundle(bundle);
    const elapsed = performance.now() - started;
    expect(index.bundle.nodes.length).toBeGreaterThanOrEqual(5000);
    expect(elapsed).toBeLessThan(2000);
  });

  it("re-runs extraction in under 100 ms", () => {
    const index = indexBundle(bundle);
    extractNodes(index, { tau: 0.4, model: "target", direction: "below" }); // warm-up
    let best = Infinity;
    for (const tau of [0.2, 0.35, 0.5, 0.65, 0.8]) {
      const started = performance.now();
      extractNodes(index, { tau, model: "target", direction: "below" });
      best = Math.min(best, performance.now() - started);
    }
    expect(best).toBeLessThan(100);
  });
});
