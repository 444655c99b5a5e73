/** Editing state for one scene: the stroke buffer, the annotation
 * overlays (boxes + labels + prompts), the dirty flag, and the revision
 * the state was loaded from.
 *
 * Every overlay lives on the object it annotates, so overlays can never
 * reference a missing object; strokes drawn with no object selected stay
 * in a loose buffer that is rasterized into the sketch PNG and carried in
 * the scene document under an extra key the service round-trips as-is. */

import { encodeGrayPng, bytesToBase64 } from "./png.js";
import { rasterizeStrokes, strokeDistance } from "./raster.js";
import type {
  BoxDoc,
  SceneDocument,
  SceneObjectDoc,
  Stroke,
} from "./types.js";
import { SCHEMA_VERSION } from "./types.js";

export const LOOSE_STROKES_KEY = "studio_loose_strokes";
export const STROKE_THICKNESS = 2;

const ID_PATTERN = /^[A-Za-z0-9][A-Za-z0-9_.-]*$/;

export interface SceneObjectState {
  objectId: string;
  classLabel: string;
  promptText: string | null;
  box: BoxDoc;
  strokes: Stroke[];
  /** Whether the source document carried a strokes field; kept so
   * loading and re-saving an untouched scene is byte-stable. */
  hadStrokes: boolean;
}

export interface SessionInit {
  sceneId: string;
  width: number;
  height: number;
  backgroundText: string;
  createdAt: string;
}

function cloneStrokes(strokes: Stroke[]): Stroke[] {
  return strokes.map((stroke) => stroke.map(([x, y]) => [x, y] as [number, number]));
}

export class CanvasSession {
  readonly sceneId: string;
  readonly width: number;
  readonly height: number;
  backgroundText: string;
  createdAt: string;
  sketchPath = "sketch.png";
  /** Annotation order doubles as z-order: later objects win overlaps. */
  readonly objects: SceneObjectState[] = [];
  looseStrokes: Stroke[] = [];
  dirty = false;
  /** Revision this state was loaded from; null before the first save. */
  revision: number | null = null;
  private nextId = 1;
  private extras: Record<string, unknown> = {};

  constructor(init: SessionInit) {
    if (!ID_PATTERN.test(init.sceneId)) {
      throw new Error(`invalid scene id ${JSON.stringify(init.sceneId)}`);
    }
    this.sceneId = init.sceneId;
    this.width = init.width;
    this.height = init.height;
    this.backgroundText = init.backgroundText;
    this.createdAt = init.createdAt;
  }

  objectById(objectId: string): SceneObjectState {
    const found = this.objects.find((o) => o.objectId === objectId);
    if (!found) throw new Error(`unknown object ${JSON.stringify(objectId)}`);
    return found;
  }

  hasObject(objectId: string): boolean {
    return this.objects.some((o) => o.objectId === objectId);
  }

  addObject(fields: {
    classLabel: string;
    box: BoxDoc;
    promptText?: string | null;
    objectId?: string;
  }): SceneObjectState {
    let objectId = fields.objectId;
    if (objectId === undefined) {
      do {
        objectId = `obj-${this.nextId++}`;
      } while (this.hasObject(objectId));
    } else if (!ID_PATTERN.test(objectId)) {
      throw new Error(`invalid object id ${JSON.stringify(objectId)}`);
    } else if (this.hasObject(objectId)) {
      throw new Error(`duplicate object id ${JSON.stringify(objectId)}`);
    }
    const record: SceneObjectState = {
      objectId,
      classLabel: fields.classLabel,
      promptText: fields.promptText ?? null,
      box: { ...fields.box },
      strokes: [],
      hadStrokes: true,
    };
    this.objects.push(record);
    this.dirty = true;
    return record;
  }

  updateObject(
    objectId: string,
    patch: Partial<Pick<SceneObjectState, "classLabel" | "promptText" | "box">>,
  ): void {
    const record = this.objectById(objectId);
    if (patch.classLabel !== undefined) record.classLabel = patch.classLabel;
    if (patch.promptText !== undefined) record.promptText = patch.promptText;
    if (patch.box !== undefined) record.box = { ...patch.box };
    this.dirty = true;
  }

  /** Removing an object also removes its overlay and strokes, so nothing
   * can be left pointing at a missing id. */
  removeObject(objectId: string): void {
    const index = this.objects.findIndex((o) => o.objectId === objectId);
    if (index < 0) throw new Error(`unknown object ${JSON.stringify(objectId)}`);
    this.objects.splice(index, 1);
    this.dirty = true;
  }

  /** Append a stroke to an object's buffer, or to the loose buffer when
   * objectId is null. */
  addStroke(objectId: string | null, points: Stroke): void {
    if (points.length === 0) return;
    const target =
      objectId === null ? this.looseStrokes : this.objectById(objectId).strokes;
    target.push(points.map(([x, y]) => [x, y] as [number, number]));
    this.dirty = true;
  }

  /** Vector eraser: drop every stroke that passes within radius of (x, y).
   * Returns how many strokes were removed. */
  eraseAt(x: number, y: number, radius: number): number {
    let removed = 0;
    const keep = (strokes: Stroke[]): Stroke[] =>
      strokes.filter((stroke) => {
        const hit = strokeDistance(stroke, x, y) <= radius;
        if (hit) removed += 1;
        return !hit;
      });
    this.looseStrokes = keep(this.looseStrokes);
    for (const record of this.objects) {
      record.strokes = keep(record.strokes);
    }
    if (removed > 0) this.dirty = true;
    return removed;
  }

  /** All strokes in draw order: loose first, then per object in z-order. */
  allStrokes(): Stroke[] {
    const out = cloneStrokes(this.looseStrokes);
    for (const record of this.objects) {
      out.push(...cloneStrokes(record.strokes));
    }
    return out;
  }

  rasterize(thickness = STROKE_THICKNESS): Uint8Array {
    return rasterizeStrokes(this.width, this.height, this.allStrokes(), thickness);
  }

  /** Flush the stroke buffer to the canvas-resolution sketch PNG
   * (base64) that rides along with saves and precedes any generate. */
  async sketchPngB64(thickness = STROKE_THICKNESS): Promise<string> {
    const png = await encodeGrayPng(this.width, this.height, this.rasterize(thickness));
    return bytesToBase64(png);
  }

  toDocument(): SceneDocument {
    const objects: SceneObjectDoc[] = this.objects.map((record) => {
      const entry: SceneObjectDoc = {
        object_id: record.objectId,
        class_label: record.classLabel,
        box: { ...record.box },
      };
      if (record.promptText !== null) entry.prompt_text = record.promptText;
      if (record.hadStrokes || record.strokes.length > 0) {
        entry.strokes = cloneStrokes(record.strokes);
      }
      return entry;
    });
    const doc: SceneDocument = {
      schema_version: SCHEMA_VERSION,
      scene_id: this.sceneId,
      background_text: this.backgroundText,
      width: this.width,
      height: this.height,
      created_at: this.createdAt,
      sketch_path: this.sketchPath,
      objects,
      ...this.extras,
    };
    if (this.looseStrokes.length > 0) {
      doc[LOOSE_STROKES_KEY] = cloneStrokes(this.looseStrokes);
    }
    return doc;
  }

  static fromDocument(doc: SceneDocument, revision: number): CanvasSession {
    const session = new CanvasSession({
      sceneId: doc.scene_id,
      width: doc.width,
      height: doc.height,
      backgroundText: doc.background_text,
      createdAt: doc.created_at,
    });
    session.sketchPath = doc.sketch_path;
    for (const entry of doc.objects) {
      const record = session.addObject({
        objectId: entry.object_id,
        classLabel: entry.class_label,
        box: entry.box,
        promptText: entry.prompt_text ?? null,
      });
      record.hadStrokes = entry.strokes !== undefined;
      record.strokes = cloneStrokes(entry.strokes ?? []);
    }
    const known = new Set([
      "schema_version",
      "scene_id",
      "background_text",
      "width",
      "height",
      "created_at",
      "sketch_path",
      "objects",
      LOOSE_STROKES_KEY,
    ]);
    for (const [key, value] of Object.entries(doc)) {
      if (!known.has(key)) session.extras[key] = value;
    }
    session.looseStrokes = cloneStrokes(
      (doc[LOOSE_STROKES_KEY] as Stroke[] | undefined) ?? [],
    );
    session.revision = revision;
    session.dirty = false;
    return session;
  }
}
