/** Editor state and its pure update functions.
 *
 * Handle coordinates live in image-pixel space and are clamped to the image
 * bounds; the view transform is kept separate so zoom/pan never touches
 * stored coordinates. All updates return fresh objects, which makes the
 * bounded undo history a simple snapshot stack.
 */

import type { Point } from "./bezier.js";

export interface EditorState {
  imageId: string | null;
  imageWidth: number;
  imageHeight: number;
  annotatorId: string;
  /** 0..4 control points in placement order; exactly 4 once placement completes. */
  handles: Point[];
  dirty: boolean;
  /** Server version of the last save, when known. */
  version: number | null;
}

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function initialState(annotatorId: string): EditorState {
  return {
    imageId: null,
    imageWidth: 0,
    imageHeight: 0,
    annotatorId,
    handles: [],
    dirty: false,
    version: null,
  };
}

export function cloneState(state: EditorState): EditorState {
  return { ...state, handles: state.handles.map((p) => ({ ...p })) };
}

export function loadImage(
  state: EditorState,
  imageId: string,
  width: number,
  height: number,
  saved: { handles: Point[]; version: number } | null,
): EditorState {
  return {
    ...cloneState(state),
    imageId,
    imageWidth: width,
    imageHeight: height,
    handles: saved ? saved.handles.map((p) => ({ ...p })) : [],
    version: saved ? saved.version : null,
    dirty: false,
  };
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}

export function clampToImage(state: EditorState, p: Point): Point {
  return {
    x: clamp(p.x, 0, state.imageWidth),
    y: clamp(p.y, 0, state.imageHeight),
  };
}

export function insideImage(state: EditorState, p: Point): boolean {
  return p.x >= 0 && p.x <= state.imageWidth && p.y >= 0 && p.y <= state.imageHeight;
}

/** First four clicks place P0..P3 in order; later clicks are no-ops. */
export function placePoint(state: EditorState, p: Point): EditorState {
  if (state.handles.length >= 4 || !insideImage(state, p)) {
    return state;
  }
  const next = cloneState(state);
  next.handles.push(clampToImage(state, p));
  next.dirty = true;
  return next;
}

export function placementComplete(state: EditorState): boolean {
  return state.handles.length === 4;
}

/** Index of the nearest handle within `radius` image pixels, or null. */
export function nearestHandle(state: EditorState, p: Point, radius: number): number | null {
  let best: number | null = null;
  let bestSq = radius * radius;
  state.handles.forEach((h, i) => {
    const dx = h.x - p.x;
    const dy = h.y - p.y;
    const dSq = dx * dx + dy * dy;
    if (dSq <= bestSq) {
      bestSq = dSq;
      best = i;
    }
  });
  return best;
}

export function moveHandle(state: EditorState, index: number, p: Point): EditorState {
  if (index < 0 || index >= state.handles.length) {
    return state;
  }
  const next = cloneState(state);
  next.handles[index] = clampToImage(state, p);
  next.dirty = true;
  return next;
}

export function markSaved(state: EditorState, version: number): EditorState {
  return { ...cloneState(state), dirty: false, version };
}

/** Bounded snapshot stack; undo restores the exact previous state. */
export class UndoHistory {
  private stack: EditorState[] = [];
  constructor(private readonly limit = 50) {}

  push(state: EditorState): void {
    this.stack.push(cloneState(state));
    if (this.stack.length > this.limit) {
      this.stack.shift();
    }
  }

  undo(): EditorState | null {
    return this.stack.pop() ?? null;
  }

  get depth(): number {
    return this.stack.length;
  }

  clear(): void {
    this.stack = [];
  }
}

/** Screen <-> image space; pure render transform. */
export function toImageSpace(view: ViewTransform, sx: number, sy: number): Point {
  return { x: (sx - view.offsetX) / view.scale, y: (sy - view.offsetY) / view.scale };
}

export function toScreenSpace(view: ViewTransform, p: Point): Point {
  return { x: view.offsetX + p.x * view.scale, y: view.offsetY + p.y * view.scale };
}

/** Zoom about a fixed screen point, leaving that point stationary. */
export function zoomAbout(view: ViewTransform, sx: number, sy: number, factor: number): ViewTransform {
  const scale = clamp(view.scale * factor, 0.25, 32);
  const applied = scale / view.scale;
  return {
    scale,
    offsetX: sx - (sx - view.offsetX) * applied,
    offsetY: sy - (sy - view.offsetY) * applied,
  };
}

export function pan(view: ViewTransform, dx: number, dy: number): ViewTransform {
  return { ...view, offsetX: view.offsetX + dx, offsetY: view.offsetY + dy };
}
