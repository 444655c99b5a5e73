/** Browser entry point: the studio shell.
 *
 * Wires the sketch canvas (draw / erase / box tools), the scene form,
 * the object panel, and the render deck to a StudioApp instance, and
 * keeps a long-poll loop on the service event feed (falling back to
 * plain 2 s polling when the stream errors). */

import { StudioClient } from "./api.js";
import type { CanvasSession } from "./session.js";
import { EVENT_POLL_FALLBACK_MS, StudioApp } from "./studio.js";
import type { BoxDoc, Stroke } from "./types.js";
import {
  renderConflictBanner,
  renderGallery,
  renderJobStrip,
  renderObjectPanel,
} from "./view.js";

type Tool = "draw" | "erase" | "box";

const $ = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
};

const apiBaseInput = $<HTMLInputElement>("api-base");
const connectButton = $<HTMLButtonElement>("connect");
const statusLine = $<HTMLElement>("status-line");
const sceneIdInput = $<HTMLInputElement>("scene-id");
const backgroundInput = $<HTMLInputElement>("background-text");
const canvasSizeInput = $<HTMLInputElement>("canvas-size");
const newSceneButton = $<HTMLButtonElement>("new-scene");
const openSceneButton = $<HTMLButtonElement>("open-scene");
const saveButton = $<HTMLButtonElement>("save-scene");
const revisionBadge = $<HTMLElement>("revision-badge");
const conflictRoot = $<HTMLElement>("conflict-root");
const sketchCanvas = $<HTMLCanvasElement>("sketch-canvas");
const toolButtons = Array.from(
  document.querySelectorAll<HTMLButtonElement>("button[data-tool]"),
);
const clearStrokesButton = $<HTMLButtonElement>("clear-strokes");
const uploadInput = $<HTMLInputElement>("upload-sketch");
const objectLabelInput = $<HTMLInputElement>("object-label");
const objectPromptInput = $<HTMLInputElement>("object-prompt");
const objectPanelRoot = $<HTMLElement>("object-panel");
const rerollAllButton = $<HTMLButtonElement>("reroll-all");
const trainButton = $<HTMLButtonElement>("train");
const alphaSlider = $<HTMLInputElement>("alpha");
const alphaValue = $<HTMLElement>("alpha-value");
const seedInput = $<HTMLInputElement>("seed");
const stepsInput = $<HTMLInputElement>("steps");
const renderButton = $<HTMLButtonElement>("render");
const sweepButton = $<HTMLButtonElement>("sweep");
const galleryRoot = $<HTMLElement>("gallery");
const jobStripRoot = $<HTMLElement>("job-strip");

let app = new StudioApp(new StudioClient(apiBaseInput.value));
let tool: Tool = "draw";
let selectedObjectId: string | null = null;
let maskOverlay: ImageBitmap | null = null;
let maskOverlayOn = false;
let eventLoopToken = 0;

apiBaseInput.value =
  localStorage.getItem("sketchscene-api") ?? "http://127.0.0.1:8787";

function setStatus(text: string, kind: "ok" | "busy" | "error" = "ok"): void {
  statusLine.textContent = text;
  statusLine.className = `status ${kind}`;
}

function session(): CanvasSession | null {
  return app.session;
}

// -- canvas drawing -----------------------------------------------------

function canvasScale(): number {
  const s = session();
  if (!s) return 1;
  return Math.max(1, Math.floor(512 / Math.max(s.width, s.height)));
}

function toScene(event: PointerEvent): [number, number] {
  const rect = sketchCanvas.getBoundingClientRect();
  const scale = canvasScale();
  const s = session()!;
  const x = Math.min(s.width, Math.max(0, (event.clientX - rect.left) / scale));
  const y = Math.min(s.height, Math.max(0, (event.clientY - rect.top) / scale));
  return [Math.round(x * 2) / 2, Math.round(y * 2) / 2];
}

function redrawCanvas(): void {
  const s = session();
  const scale = canvasScale();
  const ctx = sketchCanvas.getContext("2d")!;
  if (!s) {
    sketchCanvas.width = 512;
    sketchCanvas.height = 512;
    ctx.fillStyle = "#f4f4f4";
    ctx.fillRect(0, 0, 512, 512);
    return;
  }
  sketchCanvas.width = s.width * scale;
  sketchCanvas.height = s.height * scale;
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, sketchCanvas.width, sketchCanvas.height);

  ctx.strokeStyle = "#111111";
  ctx.lineWidth = Math.max(1, scale);
  ctx.lineCap = "round";
  for (const stroke of s.allStrokes()) {
    if (stroke.length === 0) continue;
    ctx.beginPath();
    ctx.moveTo(stroke[0]![0] * scale, stroke[0]![1] * scale);
    for (const [x, y] of stroke.slice(1)) ctx.lineTo(x * scale, y * scale);
    ctx.stroke();
  }

  for (const record of s.objects) {
    const { left, top, width, height } = record.box;
    const selected = record.objectId === selectedObjectId;
    ctx.strokeStyle = selected ? "#d2691e" : "#4682b4";
    ctx.lineWidth = selected ? 2 : 1;
    ctx.strokeRect(left * scale, top * scale, width * scale, height * scale);
    ctx.fillStyle = ctx.strokeStyle;
    ctx.font = `${10 + 2 * scale}px sans-serif`;
    ctx.fillText(record.classLabel || record.objectId, left * scale + 2, top * scale - 2);
  }

  if (maskOverlayOn && maskOverlay) {
    ctx.globalAlpha = 0.35;
    ctx.drawImage(maskOverlay, 0, 0, sketchCanvas.width, sketchCanvas.height);
    ctx.globalAlpha = 1;
  }
}

let activeStroke: Stroke | null = null;
let boxStart: [number, number] | null = null;

sketchCanvas.addEventListener("pointerdown", (event) => {
  if (!session()) return;
  sketchCanvas.setPointerCapture(event.pointerId);
  const point = toScene(event);
  if (tool === "draw") {
    activeStroke = [point];
  } else if (tool === "erase") {
    session()!.eraseAt(point[0], point[1], 3);
    redrawCanvas();
  } else {
    boxStart = point;
  }
});

sketchCanvas.addEventListener("pointermove", (event) => {
  if (!session()) return;
  const point = toScene(event);
  if (tool === "draw" && activeStroke) {
    const last = activeStroke[activeStroke.length - 1]!;
    if (Math.hypot(point[0] - last[0], point[1] - last[1]) >= 0.5) {
      activeStroke.push(point);
      previewStroke();
    }
  } else if (tool === "erase" && event.buttons) {
    if (session()!.eraseAt(point[0], point[1], 3) > 0) redrawCanvas();
  }
});

function previewStroke(): void {
  redrawCanvas();
  if (!activeStroke || activeStroke.length < 2) return;
  const scale = canvasScale();
  const ctx = sketchCanvas.getContext("2d")!;
  ctx.strokeStyle = "#111111";
  ctx.lineWidth = Math.max(1, scale);
  ctx.beginPath();
  ctx.moveTo(activeStroke[0]![0] * scale, activeStroke[0]![1] * scale);
  for (const [x, y] of activeStroke.slice(1)) ctx.lineTo(x * scale, y * scale);
  ctx.stroke();
}

sketchCanvas.addEventListener("pointerup", (event) => {
  const s = session();
  if (!s) return;
  const point = toScene(event);
  if (tool === "draw" && activeStroke) {
    activeStroke.push(point);
    s.addStroke(selectedObjectId, activeStroke);
    activeStroke = null;
    redrawCanvas();
  } else if (tool === "box" && boxStart) {
    const box: BoxDoc = {
      left: Math.round(Math.min(boxStart[0], point[0])),
      top: Math.round(Math.min(boxStart[1], point[1])),
      width: Math.max(1, Math.round(Math.abs(point[0] - boxStart[0]))),
      height: Math.max(1, Math.round(Math.abs(point[1] - boxStart[1]))),
    };
    const record = s.addObject({
      classLabel: objectLabelInput.value.trim(),
      promptText: objectPromptInput.value.trim() || null,
      box,
    });
    selectedObjectId = record.objectId;
    boxStart = null;
    refreshPanels();
    redrawCanvas();
  }
});

for (const button of toolButtons) {
  button.addEventListener("click", () => {
    tool = button.dataset.tool as Tool;
    for (const other of toolButtons) {
      other.classList.toggle("active", other === button);
    }
  });
}

clearStrokesButton.addEventListener("click", () => {
  const s = session();
  if (!s) return;
  s.looseStrokes = [];
  for (const record of s.objects) record.strokes = [];
  s.dirty = true;
  redrawCanvas();
});

uploadInput.addEventListener("change", async () => {
  // Uploaded PNGs become the visual reference layer; strokes drawn on
  // top still rasterize into the saved sketch.
  const file = uploadInput.files?.[0];
  if (!file) return;
  const bitmap = await createImageBitmap(file);
  maskOverlay = bitmap;
  maskOverlayOn = true;
  redrawCanvas();
});

// -- scene form ----------------------------------------------------------

connectButton.addEventListener("click", async () => {
  localStorage.setItem("sketchscene-api", apiBaseInput.value);
  app = new StudioApp(new StudioClient(apiBaseInput.value));
  try {
    const caps = await app.boot();
    canvasSizeInput.value = String(caps.defaults.canvas);
    alphaSlider.value = String(caps.defaults.alpha);
    alphaValue.textContent = alphaSlider.value;
    stepsInput.value = String(caps.defaults.steps);
    setStatus(`connected: ${caps.backend_profile.name} backend`);
    startEventLoop();
  } catch (error) {
    setStatus(`connection failed: ${String(error)}`, "error");
  }
});

newSceneButton.addEventListener("click", () => {
  const size = Number(canvasSizeInput.value) || 512;
  app.newScene({
    sceneId: sceneIdInput.value.trim() || "scene-1",
    width: size,
    height: size,
    backgroundText: backgroundInput.value.trim() || "a plain background",
  });
  selectedObjectId = null;
  maskOverlay = null;
  refreshAll();
});

openSceneButton.addEventListener("click", async () => {
  try {
    await app.reloadScene(sceneIdInput.value.trim());
    backgroundInput.value = app.session!.backgroundText;
    canvasSizeInput.value = String(app.session!.width);
    selectedObjectId = null;
    refreshAll();
    setStatus(`loaded ${app.session!.sceneId} @ r${app.session!.revision}`);
  } catch (error) {
    setStatus(`open failed: ${String(error)}`, "error");
  }
});

saveButton.addEventListener("click", async () => {
  const s = session();
  if (!s) return;
  s.backgroundText = backgroundInput.value.trim() || s.backgroundText;
  setStatus("saving…", "busy");
  const outcome = await app.saveScene();
  refreshAll();
  if (outcome.ok) {
    setStatus(`saved ${s.sceneId} @ r${s.revision}`);
  } else if (outcome.conflict) {
    setStatus("revision conflict — reload to merge", "error");
  } else {
    setStatus("validation failed — see object panel", "error");
  }
});

// -- object panel ----------------------------------------------------------

function refreshPanels(): void {
  const s = session();
  revisionBadge.textContent = s
    ? `${s.sceneId} @ ${s.revision === null ? "unsaved" : `r${s.revision}`}${s.dirty ? " *" : ""}`
    : "no scene";
  renderConflictBanner(conflictRoot, app.conflict, {
    onReload: async () => {
      await app.reloadScene();
      refreshAll();
      setStatus(`reloaded @ r${app.session!.revision}`);
    },
    onDismiss: () => {
      app.conflict = null;
      refreshPanels();
    },
  });
  if (s) {
    renderObjectPanel(objectPanelRoot, s, app.objectHistory, app.violations, {
      onReroll: () => void rerollAll(),
      onRemove: (objectId) => {
        s.removeObject(objectId);
        if (selectedObjectId === objectId) selectedObjectId = null;
        refreshPanels();
        redrawCanvas();
      },
      onToggleMask: () => void toggleMask(),
    });
  }
  renderJobStrip(jobStripRoot, app);
}

async function rerollAll(): Promise<void> {
  setStatus("generating objects…", "busy");
  try {
    const job = await app.generateObjects();
    refreshPanels();
    setStatus(
      job.status === "succeeded"
        ? "objects generated"
        : `objects job ${job.status}`,
      job.status === "succeeded" ? "ok" : "error",
    );
  } catch (error) {
    setStatus(`objects job failed: ${String(error)}`, "error");
  }
}

rerollAllButton.addEventListener("click", () => void rerollAll());

trainButton.addEventListener("click", async () => {
  setStatus("training identities…", "busy");
  try {
    const job = await app.trainIdentities(
      Number(stepsInput.value) || 50,
      Number(seedInput.value) || 0,
    );
    setStatus(
      job.status === "succeeded" ? "identities trained" : `train ${job.status}`,
      job.status === "succeeded" ? "ok" : "error",
    );
    refreshPanels();
  } catch (error) {
    setStatus(`train failed: ${String(error)}`, "error");
  }
});

async function toggleMask(): Promise<void> {
  if (maskOverlayOn) {
    maskOverlayOn = false;
    redrawCanvas();
    return;
  }
  const s = session();
  if (!s) return;
  try {
    const renders = await app.client.listRenders(s.sceneId);
    const latest = renders[renders.length - 1];
    const digest = (latest?.guide as { mask_sha256?: string } | undefined)
      ?.mask_sha256;
    if (!digest) {
      setStatus("no stored mask yet — render first", "error");
      return;
    }
    const bytes = await app.client.getArtifact(digest);
    maskOverlay = await createImageBitmap(
      new Blob([bytes as BlobPart], { type: "image/png" }),
    );
    maskOverlayOn = true;
    redrawCanvas();
  } catch (error) {
    setStatus(`mask fetch failed: ${String(error)}`, "error");
  }
}

// -- render deck -----------------------------------------------------------

alphaSlider.addEventListener("input", () => {
  alphaValue.textContent = Number(alphaSlider.value).toFixed(2);
});

function deckParams(): { alpha: number; seed: number; steps: number } {
  return {
    alpha: Number(alphaSlider.value),
    seed: Number(seedInput.value) || 0,
    steps: Number(stepsInput.value) || 50,
  };
}

function repaintGallery(): void {
  renderGallery(galleryRoot, app.gallery, {
    onPin: (key) => {
      app.pinTile(key);
      repaintGallery();
    },
  });
}

renderButton.addEventListener("click", async () => {
  if (!session()) return;
  setStatus("rendering…", "busy");
  try {
    const tile = await app.renderOne(deckParams());
    repaintGallery();
    refreshPanels();
    setStatus(
      tile.status === "done" ? `rendered ${tile.label}` : `render failed`,
      tile.status === "done" ? "ok" : "error",
    );
  } catch (error) {
    setStatus(`render failed: ${String(error)}`, "error");
  }
});

sweepButton.addEventListener("click", async () => {
  if (!session()) return;
  setStatus("sweeping α presets…", "busy");
  try {
    const { seed, steps } = deckParams();
    const tiles = await app.runSweep({ seed, steps });
    repaintGallery();
    refreshPanels();
    const done = tiles.filter((t) => t.status === "done").length;
    setStatus(`sweep finished: ${done}/${tiles.length} tiles`);
  } catch (error) {
    setStatus(`sweep failed: ${String(error)}`, "error");
  }
});

// -- event feed -------------------------------------------------------------

function startEventLoop(): void {
  const token = ++eventLoopToken;
  const loop = async (): Promise<void> => {
    while (token === eventLoopToken) {
      try {
        // Long-poll; the service caps the wait server-side.
        const events = await app.pumpEvents(25);
        if (events.length > 0) {
          for (const event of events) {
            const known = app.jobStatus.get(event.job_id);
            if (known) known.status = event.status;
          }
          refreshPanels();
        }
      } catch {
        // Stream unavailable: fall back to plain polling cadence.
        await new Promise((resolve) =>
          setTimeout(resolve, EVENT_POLL_FALLBACK_MS),
        );
      }
    }
  };
  void loop();
}

// -- boot --------------------------------------------------------------------

redrawCanvas();
refreshPanels();
repaintGallery();
setStatus("not connected — set the service URL and press connect");

function refreshAll(): void {
  refreshPanels();
  repaintGallery();
  redrawCanvas();
}
