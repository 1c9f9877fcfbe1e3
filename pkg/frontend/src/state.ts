/**
 * View state and its reducer. Invariant maintained after every event: the
 * selected node, if any, is visible, i.e. all of its ancestors are expanded.
 */

import type { TreeIndex } from "./types.js";

export type HighlightMode = "weakness" | "strength" | "off";

export interface ViewState {
  expanded: Set<string>;
  selected: string | null;
  model: string;
  tau: number;
  mode: HighlightMode;
  page: number; // instance-preview page of the selected subtree
}

export type ViewEvent =
  | { kind: "toggle"; nodeId: string }
  | { kind: "select"; nodeId: string }
  | { kind: "clearSelection" }
  | { kind: "setTau"; tau: number }
  | { kind: "setModel"; model: string }
  | { kind: "setMode"; mode: HighlightMode }
  | { kind: "setPage"; page: number };

export function initialState(index: TreeIndex): ViewState {
  return {
    expanded: new Set([index.bundle.root]), // root collapsed to depth 1
    selected: null,
    model: index.models[0] ?? "",
    tau: 0.4,
    mode: "off",
    page: 0,
  };
}

export function isVisible(index: TreeIndex, state: ViewState, nodeId: string): boolean {
  let current = nodeId;
  while (current !== index.bundle.root) {
    const parent = index.parent.get(current);
    if (parent === undefined || !state.expanded.has(parent)) return false;
    current = parent;
  }
  return true;
}

function isAncestor(index: TreeIndex, maybeAncestor: string, nodeId: string): boolean {
  let current = nodeId;
  while (true) {
    const parent = index.parent.get(current);
    if (parent === undefined) return false;
    if (parent === maybeAncestor) return true;
    current = parent;
  }
}

export function reduce(index: TreeIndex, state: ViewState, event: ViewEvent): ViewState {
  switch (event.kind) {
    case "toggle": {
      if (!index.byId.has(event.nodeId)) return state;
      const expanded = new Set(state.expanded);
      let selected = state.selected;
      if (expanded.has(event.nodeId)) {
        expanded.delete(event.nodeId);
        // collapsing an ancestor of the selection hides it: clear selection
        if (
          selected !== null &&
          (selected === event.nodeId || isAncestor(index, event.nodeId, selected))
        ) {
          if (selected !== event.nodeId) selected = null;
        }
        if (selected !== null && !isVisibleWith(index, expanded, selected)) selected = null;
      } else if (isVisibleWith(index, expanded, event.nodeId)) {
        expanded.add(event.nodeId);
      } else {
        return state; // cannot expand a node that is not itself visible
      }
      return { ...state, expanded, selected };
    }
    case "select": {
      if (!index.byId.has(event.nodeId)) return state;
      if (!isVisibleWith(index, state.expanded, event.nodeId)) return state;
      return { ...state, selected: event.nodeId, page: 0 };
    }
    case "clearSelection":
      return { ...state, selected: null, page: 0 };
    case "setTau": {
      const tau = Math.min(1, Math.max(0, event.tau));
      return { ...state, tau };
    }
    case "setModel":
      if (!index.models.includes(event.model)) return state;
      return { ...state, model: event.model };
    case "setMode":
      return { ...state, mode: event.mode };
    case "setPage":
      return { ...state, page: Math.max(0, event.page) };
  }
}

function isVisibleWith(index: TreeIndex, expanded: Set<string>, nodeId: string): boolean {
  let current = nodeId;
  while (current !== index.bundle.root) {
    const parent = index.parent.get(current);
    if (parent === undefined || !expanded.has(parent)) return false;
    current = parent;
  }
  return true;
}

/** The invariant checked by the property tests. */
export function stateInvariantHolds(index: TreeIndex, state: ViewState): boolean {
  return state.selected === null || isVisible(index, state, state.selected);
}
