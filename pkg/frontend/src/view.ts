/** DOM views.  Pure render-into-container functions so the shell (and
 * the tests) can re-render any region from studio state without a
 * framework. */

import type { CanvasSession } from "./session.js";
import type {
  ConflictState,
  GalleryTile,
  ObjectAssetRecord,
  StudioApp,
} from "./studio.js";
import type { ViolationDoc } from "./types.js";

function clear(root: HTMLElement): void {
  while (root.firstChild) root.removeChild(root.firstChild);
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface GalleryHandlers {
  onPin?: (key: string) => void;
}

/** Side-by-side render gallery: tiles ordered by (alpha, seed), each with
 * its fidelity/seam badges; failed tiles keep their slot with an error
 * state instead of clearing the gallery. */
export function renderGallery(
  root: HTMLElement,
  tiles: GalleryTile[],
  handlers: GalleryHandlers = {},
): void {
  const doc = root.ownerDocument;
  clear(root);
  for (const tile of tiles) {
    const figure = el(doc, "figure", "tile");
    figure.dataset.key = tile.key;
    figure.dataset.alpha = String(tile.alpha);
    figure.dataset.seed = String(tile.seed);
    figure.dataset.status = tile.status;
    if (tile.pinned) figure.classList.add("pinned");

    if (tile.status === "done" && tile.imageBytes) {
      const img = el(doc, "img", "tile-image");
      img.alt = tile.label;
      img.src = `data:image/png;base64,${toBase64(tile.imageBytes)}`;
      figure.appendChild(img);
    } else if (tile.status === "failed") {
      figure.appendChild(el(doc, "div", "tile-error", tile.error ?? "failed"));
    } else {
      figure.appendChild(el(doc, "div", "tile-busy", "rendering…"));
    }

    const caption = el(doc, "figcaption");
    caption.appendChild(el(doc, "span", "tile-label", tile.label));
    caption.appendChild(el(doc, "span", "badge seed", `seed ${tile.seed}`));
    if (tile.fgFidelity !== undefined) {
      caption.appendChild(
        el(doc, "span", "badge fg", `fg ${tile.fgFidelity.toFixed(4)}`),
      );
    }
    if (tile.seamScore !== undefined) {
      caption.appendChild(
        el(doc, "span", "badge seam", `seam ${tile.seamScore.toFixed(4)}`),
      );
    }
    figure.appendChild(caption);

    const pin = el(doc, "button", "pin", tile.pinned ? "pinned" : "pin");
    pin.type = "button";
    pin.disabled = tile.status !== "done";
    if (handlers.onPin) {
      pin.addEventListener("click", () => handlers.onPin!(tile.key));
    }
    figure.appendChild(pin);
    root.appendChild(figure);
  }
}

function toBase64(bytes: Uint8Array): string {
  let binary = "";
  for (let i = 0; i < bytes.length; i += 0x8000) {
    binary += String.fromCharCode(...bytes.subarray(i, i + 0x8000));
  }
  return btoa(binary);
}

export interface ObjectPanelHandlers {
  onReroll?: (objectId: string) => void;
  onToggleMask?: (objectId: string) => void;
  onRemove?: (objectId: string) => void;
}

/** Per-object panel: label/prompt summary, inline validation messages,
 * reroll button, and the history strip of past generations. */
export function renderObjectPanel(
  root: HTMLElement,
  session: CanvasSession,
  history: Map<string, ObjectAssetRecord[]>,
  violations: ViolationDoc[],
  handlers: ObjectPanelHandlers = {},
): void {
  const doc = root.ownerDocument;
  clear(root);
  for (const record of session.objects) {
    const card = el(doc, "section", "object-card");
    card.dataset.objectId = record.objectId;

    const head = el(doc, "header");
    head.appendChild(el(doc, "strong", "object-label", record.classLabel || "(unlabeled)"));
    head.appendChild(el(doc, "code", "object-id", record.objectId));
    card.appendChild(head);
    if (record.promptText) {
      card.appendChild(el(doc, "p", "object-prompt", record.promptText));
    }

    const related = violations.filter((v) => v.object_id === record.objectId);
    if (related.length > 0) {
      const list = el(doc, "ul", "violations");
      for (const violation of related) {
        list.appendChild(
          el(doc, "li", `violation ${violation.code}`, violation.message),
        );
      }
      card.appendChild(list);
    }

    const strip = el(doc, "ol", "history-strip");
    for (const asset of history.get(record.objectId) ?? []) {
      strip.appendChild(
        el(doc, "li", "history-entry", `seed ${asset.seed} (${asset.jobId})`),
      );
    }
    card.appendChild(strip);

    const actions = el(doc, "div", "object-actions");
    const reroll = el(doc, "button", "reroll", "reroll");
    reroll.type = "button";
    if (handlers.onReroll) {
      reroll.addEventListener("click", () => handlers.onReroll!(record.objectId));
    }
    actions.appendChild(reroll);
    const mask = el(doc, "button", "mask-toggle", "mask");
    mask.type = "button";
    if (handlers.onToggleMask) {
      mask.addEventListener("click", () => handlers.onToggleMask!(record.objectId));
    }
    actions.appendChild(mask);
    const remove = el(doc, "button", "remove", "remove");
    remove.type = "button";
    if (handlers.onRemove) {
      remove.addEventListener("click", () => handlers.onRemove!(record.objectId));
    }
    actions.appendChild(remove);
    card.appendChild(actions);

    root.appendChild(card);
  }

  const sceneLevel = violations.filter((v) => v.object_id === undefined);
  if (sceneLevel.length > 0) {
    const list = el(doc, "ul", "violations scene-level");
    for (const violation of sceneLevel) {
      list.appendChild(
        el(doc, "li", `violation ${violation.code}`, violation.message),
      );
    }
    root.appendChild(list);
  }
}

export interface ConflictHandlers {
  onReload?: () => void;
  onDismiss?: () => void;
}

/** 409 banner: someone else saved this scene first; offer reload. */
export function renderConflictBanner(
  root: HTMLElement,
  conflict: ConflictState | null,
  handlers: ConflictHandlers = {},
): void {
  const doc = root.ownerDocument;
  clear(root);
  if (!conflict) return;
  const banner = el(doc, "div", "conflict-banner");
  banner.appendChild(
    el(
      doc,
      "span",
      "conflict-message",
      `Scene ${conflict.sceneId} changed on the server: ${conflict.message}`,
    ),
  );
  const reload = el(doc, "button", "conflict-reload", "reload server copy");
  reload.type = "button";
  if (handlers.onReload) reload.addEventListener("click", () => handlers.onReload!());
  banner.appendChild(reload);
  const dismiss = el(doc, "button", "conflict-dismiss", "keep editing");
  dismiss.type = "button";
  if (handlers.onDismiss) {
    dismiss.addEventListener("click", () => handlers.onDismiss!());
  }
  banner.appendChild(dismiss);
  root.appendChild(banner);
}

/** Job status strip driven from the event feed. */
export function renderJobStrip(root: HTMLElement, app: StudioApp): void {
  const doc = root.ownerDocument;
  clear(root);
  const jobs = [...app.jobStatus.values()].sort((a, b) => a.seq - b.seq);
  for (const job of jobs) {
    const item = el(doc, "span", `job-chip ${job.status}`);
    item.dataset.jobId = job.job_id;
    item.textContent = `${job.kind} ${job.job_id}: ${job.status}`;
    root.appendChild(item);
  }
}
