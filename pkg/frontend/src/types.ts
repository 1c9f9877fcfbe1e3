/** Schema of the bundle emitted by `captree export-ui`. */

export interface MetricEntry {
  successes: number;
  trials: number;
  value: number;
  rank?: number;
}

export interface BundleNode {
  id: string;
  description: string;
  children: string[];
  size: number;
  depth: number;
  fallback: boolean;
  metrics: Record<string, MetricEntry>;
}

export interface InstancePreview {
  instance_id: string;
  input: string;
  output: string;
}

export interface BundleProfile {
  method: string;
  direction: string;
  tau: number | null;
  node_ids: string[];
}

export interface Bundle {
  format: string;
  root: string;
  nodes: BundleNode[];
  previews: Record<string, InstancePreview>;
  profiles: BundleProfile[];
}

/** Bundle plus the lookups every interaction needs. */
export interface TreeIndex {
  bundle: Bundle;
  byId: Map<string, BundleNode>;
  parent: Map<string, string>;
  models: string[];
}
