/**
 * DOM rendering: a pure projection of (index, state, highlighted set) into
 * the container. Only visible rows materialize, so collapsed subtrees cost
 * nothing regardless of bundle size.
 */

import type { TreeIndex, BundleNode } from "./types.js";
import type { ViewState, ViewEvent } from "./state.js";

export const PREVIEW_PAGE_SIZE = 20;

export type Dispatch = (event: ViewEvent) => void;

function valueColor(value: number): string {
  const hue = Math.round(120 * Math.min(1, Math.max(0, value))); // red -> green
  return `hsl(${hue}, 70%, 42%)`;
}

function visibleRows(index: TreeIndex, state: ViewState): BundleNode[] {
  const rows: BundleNode[] = [];
  const walk = (nodeId: string) => {
    const node = index.byId.get(nodeId);
    if (!node) return;
    rows.push(node);
    if (state.expanded.has(nodeId)) {
      for (const child of node.children) walk(child);
    }
  };
  walk(index.bundle.root);
  return rows;
}

export function leavesUnder(index: TreeIndex, nodeId: string): string[] {
  const leaves: string[] = [];
  const walk = (id: string) => {
    const node = index.byId.get(id);
    if (!node) return;
    if (node.children.length === 0) leaves.push(id);
    else for (const child of node.children) walk(child);
  };
  walk(nodeId);
  return leaves;
}

function renderRow(
  index: TreeIndex,
  state: ViewState,
  node: BundleNode,
  highlighted: Set<string>,
  dispatch: Dispatch,
): HTMLElement {
  const row = document.createElement("div");
  row.className = "row";
  row.style.paddingLeft = `${node.depth * 18 + 6}px`;
  if (highlighted.has(node.id)) row.classList.add(state.mode === "strength" ? "strong" : "weak");
  if (state.selected === node.id) row.classList.add("selected");

  const caret = document.createElement("span");
  caret.className = "caret";
  caret.textContent = node.children.length === 0 ? "•" : state.expanded.has(node.id) ? "▾" : "▸";
  if (node.children.length > 0) {
    caret.addEventListener("click", (ev) => {
      ev.stopPropagation();
      dispatch({ kind: "toggle", nodeId: node.id });
    });
  }
  row.appendChild(caret);

  const label = document.createElement("span");
  label.className = "label";
  label.textContent = node.description;
  row.appendChild(label);

  const size = document.createElement("span");
  size.className = "badge";
  size.textContent = `${node.size}`;
  row.appendChild(size);

  const metric = node.metrics[state.model];
  if (metric) {
    const value = document.createElement("span");
    value.className = "badge value";
    value.style.background = valueColor(metric.value);
    value.textContent = metric.value.toFixed(2);
    row.appendChild(value);
    if (metric.rank !== undefined) {
      const rank = document.createElement("span");
      rank.className = "badge";
      rank.textContent = `#${metric.rank}`;
      row.appendChild(rank);
    }
  }
  row.addEventListener("click", () => dispatch({ kind: "select", nodeId: node.id }));
  return row;
}

function renderPanel(
  index: TreeIndex,
  state: ViewState,
  dispatch: Dispatch,
): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "panel";
  if (state.selected === null) {
    panel.textContent = "Select a node to inspect its capability, metrics, and instances.";
    return panel;
  }
  const node = index.byId.get(state.selected);
  if (!node) return panel;

  const title = document.createElement("h2");
  title.textContent = node.description;
  panel.appendChild(title);

  const meta = document.createElement("p");
  meta.className = "meta";
  meta.textContent = `${node.size} instance${node.size === 1 ? "" : "s"} · depth ${node.depth}` +
    (node.fallback ? " · fallback split" : "");
  panel.appendChild(meta);

  const table = document.createElement("table");
  table.innerHTML = "<tr><th>model</th><th>successes</th><th>trials</th><th>value</th><th>rank</th></tr>";
  for (const [model, metric] of Object.entries(node.metrics).sort()) {
    const tr = document.createElement("tr");
    tr.innerHTML =
      `<td>${model}</td><td>${metric.successes}</td><td>${metric.trials}</td>` +
      `<td>${metric.value.toFixed(3)}</td><td>${metric.rank ?? ""}</td>`;
    table.appendChild(tr);
  }
  panel.appendChild(table);

  const leaves = leavesUnder(index, node.id);
  const pages = Math.max(1, Math.ceil(leaves.length / PREVIEW_PAGE_SIZE));
  const page = Math.min(state.page, pages - 1);
  const header = document.createElement("h3");
  header.textContent = `Instances (page ${page + 1}/${pages})`;
  panel.appendChild(header);
  for (const leafId of leaves.slice(page * PREVIEW_PAGE_SIZE, (page + 1) * PREVIEW_PAGE_SIZE)) {
    const preview = index.bundle.previews[leafId];
    if (!preview) continue;
    const card = document.createElement("div");
    card.className = "preview";
    const input = document.createElement("div");
    input.textContent = preview.input;
    const output = document.createElement("div");
    output.className = "output";
    output.textContent = preview.output;
    card.append(input, output);
    panel.appendChild(card);
  }
  if (pages > 1) {
    const pager = document.createElement("div");
    pager.className = "pager";
    const prev = document.createElement("button");
    prev.textContent = "prev";
    prev.disabled = page === 0;
    prev.addEventListener("click", () => dispatch({ kind: "setPage", page: page - 1 }));
    const next = document.createElement("button");
    next.textContent = "next";
    next.disabled = page >= pages - 1;
    next.addEventListener("click", () => dispatch({ kind: "setPage", page: page + 1 }));
    pager.append(prev, next);
    panel.appendChild(pager);
  }
  return panel;
}

export function render(
  container: HTMLElement,
  index: TreeIndex,
  state: ViewState,
  highlighted: Set<string>,
  dispatch: Dispatch,
): void {
  container.replaceChildren();
  const tree = document.createElement("div");
  tree.className = "tree";
  for (const node of visibleRows(index, state)) {
    tree.appendChild(renderRow(index, state, node, highlighted, dispatch));
  }
  container.append(tree, renderPanel(index, state, dispatch));
}
