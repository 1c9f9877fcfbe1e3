/**
 * Client-side weakness/strength extraction over a loaded bundle: the exact
 * binomial test at every node, then a root-to-leaf pass that keeps a node
 * only when it and all of its sufficiently large children are significant,
 * skipping the subtree below every kept node. Produces the same node sets as
 * the pipeline's own extraction for the same parameters.
 */

import { testAbove, testBelow } from "./binomial.js";
import type { TreeIndex } from "./types.js";

export interface ExtractionParams {
  tau: number;
  model: string;
  direction: "below" | "above";
  alpha?: number;
  minNodeSize?: number;
  minChildSize?: number;
}

export const DEFAULT_ALPHA = 0.05;
export const DEFAULT_MIN_NODE_SIZE = 5;
export const DEFAULT_MIN_CHILD_SIZE = 20;

export function extractNodes(index: TreeIndex, params: ExtractionParams): Set<string> {
  const alpha = params.alpha ?? DEFAULT_ALPHA;
  const minNode = params.minNodeSize ?? DEFAULT_MIN_NODE_SIZE;
  const minChild = params.minChildSize ?? DEFAULT_MIN_CHILD_SIZE;
  const run = params.direction === "below" ? testBelow : testAbove;

  const significant = new Map<string, boolean>();
  for (const node of index.bundle.nodes) {
    const metric = node.metrics[params.model];
    if (!metric) {
      throw new Error(`node ${node.id} has no metrics for model ${params.model}`);
    }
    significant.set(node.id, run(metric.successes, metric.trials, params.tau, alpha).significant);
  }

  const extracted = new Set<string>();
  const stack = [index.bundle.root];
  while (stack.length > 0) {
    const nodeId = stack.pop() as string;
    const node = index.byId.get(nodeId);
    if (!node) throw new Error(`unknown node id ${nodeId}`);
    if (node.size >= minNode && significant.get(nodeId)) {
      const blocked = node.children.some((child) => {
        const childNode = index.byId.get(child) as typeof node;
        return childNode.size >= minChild && !significant.get(child);
      });
      if (!blocked) {
        extracted.add(nodeId);
        continue; // skip the subtree so extracted sets never overlap
      }
    }
    stack.push(...node.children);
  }
  return extracted;
}

/** Node ids whose subtree intersects the extracted set (for row styling). */
export function coveredBy(index: TreeIndex, extracted: Set<string>): Set<string> {
  const covered = new Set<string>();
  const mark = (nodeId: string) => {
    covered.add(nodeId);
    for (const child of index.byId.get(nodeId)?.children ?? []) mark(child);
  };
  for (const nodeId of extracted) mark(nodeId);
  return covered;
}
