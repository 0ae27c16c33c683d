/** DOM wiring for the attribute editor; all behavior lives in core.ts. */

import { ApiClient, Editor, EditorState, FILMSTRIP_THETAS, THETA_STEP } from "./core.js";

const SERVICE_URL = (window as unknown as { SERVICE_URL?: string }).SERVICE_URL
  ?? "http://127.0.0.1:8765";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(state: EditorState): void {
  el<HTMLDivElement>("banner").style.display = state.error ? "block" : "none";
  el<HTMLDivElement>("banner").textContent = state.error ?? "";
  el<HTMLSpanElement>("theta-label").textContent = state.theta.toFixed(2);
  el<HTMLSpanElement>("busy").style.display = state.inFlight ? "inline" : "none";

  const img = el<HTMLImageElement>("result");
  if (state.imageB64) img.src = `data:image/png;base64,${state.imageB64}`;

  const bars = el<HTMLDivElement>("confidence");
  if (state.confidence && state.meta) {
    bars.innerHTML = "";
    state.confidence.forEach((c, i) => {
      const row = document.createElement("div");
      row.className = "conf-row";
      const label = document.createElement("span");
      label.textContent = state.meta!.attribute_names[i];
      const bar = document.createElement("div");
      bar.className = "conf-bar";
      bar.style.width = `${Math.round(c * 160)}px`;
      bar.title = c.toFixed(3);
      row.append(label, bar);
      bars.append(row);
    });
  }

  const fieldset = el<HTMLFieldSetElement>("controls");
  fieldset.disabled = !(state.meta !== null && state.error === null);
}

async function start(): Promise<void> {
  const client = new ApiClient(SERVICE_URL);
  const editor = new Editor(client, render);
  await editor.init();
  const meta = editor.state.meta;
  if (!meta) return;

  const toggles = el<HTMLDivElement>("toggles");
  meta.attribute_names.forEach((name, i) => {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.addEventListener("change", () => editor.toggleBit(i));
    label.append(box, document.createTextNode(name));
    toggles.append(label);
  });

  const slider = el<HTMLInputElement>("theta");
  slider.min = "0";
  slider.max = "1";
  slider.step = String(THETA_STEP);
  slider.value = "1";
  slider.addEventListener("input", () => editor.setTheta(Number(slider.value)));

  const sampleInput = el<HTMLInputElement>("sample-id");
  sampleInput.max = String(Math.max(0, meta.sample_count - 1));
  sampleInput.addEventListener("change", () => {
    const id = Number(sampleInput.value);
    editor.selectSample(id);
    el<HTMLImageElement>("source").src = client.sampleUrl(id);
  });
  el<HTMLImageElement>("source").src = client.sampleUrl(0);

  el<HTMLButtonElement>("filmstrip-btn").addEventListener("click", async () => {
    const strip = el<HTMLDivElement>("filmstrip");
    strip.innerHTML = "";
    const frames = await editor.filmstrip();
    frames.forEach((frame) => {
      const cell = document.createElement("figure");
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${frame.imageB64}`;
      img.width = 96;
      const cap = document.createElement("figcaption");
      cap.textContent = `θ=${frame.theta.toFixed(1)}`;
      cell.append(img, cap);
      strip.append(cell);
    });
  });

  editor.selectSample(0);
}

void start();
export { FILMSTRIP_THETAS };
