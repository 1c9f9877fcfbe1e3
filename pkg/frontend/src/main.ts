/** Application wiring: fetch the bundle, hold the view state, re-render. */

import { loadBundle } from "./bundle.js";
import { extractNodes } from "./extraction.js";
import { initialState, reduce, type ViewEvent, type ViewState } from "./state.js";
import { render } from "./render.js";
import type { TreeIndex } from "./types.js";

function highlightSet(index: TreeIndex, state: ViewState): Set<string> {
  if (state.mode === "off" || !state.model) return new Set();
  return extractNodes(index, {
    tau: state.tau,
    model: state.model,
    direction: state.mode === "weakness" ? "below" : "above",
  });
}

function buildControls(
  index: TreeIndex,
  state: ViewState,
  highlighted: Set<string>,
  dispatch: (event: ViewEvent) => void,
): HTMLElement {
  const bar = document.createElement("div");
  bar.className = "controls";

  const modelSelect = document.createElement("select");
  for (const model of index.models) {
    const option = document.createElement("option");
    option.value = model;
    option.textContent = model;
    option.selected = model === state.model;
    modelSelect.appendChild(option);
  }
  modelSelect.addEventListener("change", () =>
    dispatch({ kind: "setModel", model: modelSelect.value }),
  );

  const modeSelect = document.createElement("select");
  for (const mode of ["off", "weakness", "strength"] as const) {
    const option = document.createElement("option");
    option.value = mode;
    option.textContent = mode === "off" ? "highlight: off" : `highlight: ${mode}`;
    option.selected = mode === state.mode;
    modeSelect.appendChild(option);
  }
  modeSelect.addEventListener("change", () =>
    dispatch({ kind: "setMode", mode: modeSelect.value as ViewState["mode"] }),
  );

  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = "1";
  slider.step = "0.01";
  slider.value = String(state.tau);
  slider.addEventListener("input", () => dispatch({ kind: "setTau", tau: Number(slider.value) }));

  const readout = document.createElement("span");
  readout.className = "readout";
  readout.textContent = `τ = ${state.tau.toFixed(2)} · ${highlighted.size} node(s)`;

  bar.append(modelSelect, modeSelect, slider, readout);
  return bar;
}

async function start(): Promise<void> {
  const app = document.getElementById("app");
  if (!app) return;
  let index: TreeIndex;
  try {
    index = await loadBundle("./bundle.json");
  } catch (error) {
    const banner = document.createElement("div");
    banner.className = "error";
    banner.textContent = `Could not load bundle: ${error}`;
    app.replaceChildren(banner);
    return;
  }
  let state = initialState(index);

  const redraw = () => {
    const highlighted = highlightSet(index, state);
    app.replaceChildren();
    app.appendChild(buildControls(index, state, highlighted, dispatch));
    const body = document.createElement("div");
    body.className = "body";
    render(body, index, state, highlighted, dispatch);
    app.appendChild(body);
  };

  const dispatch = (event: ViewEvent) => {
    state = reduce(index, state, event);
    redraw();
  };
  redraw();
}

start();
