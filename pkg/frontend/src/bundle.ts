/** Bundle loading and indexing. */

import type { Bundle, TreeIndex } from "./types.js";

export function indexBundle(bundle: Bundle): TreeIndex {
  if (!bundle || bundle.format !== "captree-bundle-v1") {
    throw new Error(`unsupported bundle format: ${bundle?.format}`);
  }
  const byId = new Map(bundle.nodes.map((node) => [node.id, node]));
  if (!byId.has(bundle.root)) throw new Error("bundle root is missing from nodes");
  const parent = new Map<string, string>();
  const models = new Set<string>();
  for (const node of bundle.nodes) {
    for (const child of node.children) {
      if (!byId.has(child)) throw new Error(`node ${node.id} references unknown child ${child}`);
      parent.set(child, node.id);
    }
    for (const model of Object.keys(node.metrics)) models.add(model);
  }
  return { bundle, byId, parent, models: [...models].sort() };
}

export async function loadBundle(url: string): Promise<TreeIndex> {
  const response = await fetch(url);
  if (!response.ok) throw new Error(`fetching ${url} failed: HTTP ${response.status}`);
  return indexBundle((await response.json()) as Bundle);
}
