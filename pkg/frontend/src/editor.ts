/** Canvas rendering and pointer interaction for the four-point editor.
 *
 * The fill preview drawn here is advisory (fast feedback while dragging);
 * the authoritative mask always comes from the service's rasterizer.
 */

import { sampleOutline, type Point } from "./bezier.js";
import {
  EditorState,
  ViewTransform,
  clampToImage,
  insideImage,
  moveHandle,
  nearestHandle,
  pan,
  placePoint,
  placementComplete,
  toImageSpace,
  zoomAbout,
} from "./state.js";

const HANDLE_RADIUS_PX = 6;
const HIT_RADIUS_SCREEN_PX = 14;
const HANDLE_LABELS = ["P0", "P1", "P2", "P3"];

export interface EditorCallbacks {
  onChange(state: EditorState, recordUndo: boolean): void;
  onHint(message: string): void;
}

export class CanvasEditor {
  private view: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };
  private image: HTMLImageElement | null = null;
  private state: EditorState;
  private draggingHandle: number | null = null;
  private dragMoved = false;
  private panning: { lastX: number; lastY: number } | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    state: EditorState,
    private readonly callbacks: EditorCallbacks,
  ) {
    this.state = state;
    canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.onPointerUp(e));
    canvas.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
  }

  setState(state: EditorState): void {
    this.state = state;
    this.render();
  }

  setImage(image: HTMLImageElement): void {
    this.image = image;
    this.fitView();
    this.render();
  }

  /** Fit the image into the canvas; render transform only. */
  private fitView(): void {
    if (!this.image) return;
    const scale = Math.min(
      this.canvas.width / this.image.width,
      this.canvas.height / this.image.height,
    );
    this.view = {
      scale,
      offsetX: (this.canvas.width - this.image.width * scale) / 2,
      offsetY: (this.canvas.height - this.image.height * scale) / 2,
    };
  }

  private canvasPoint(e: PointerEvent | WheelEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return { x: e.clientX - rect.left, y: e.clientY - rect.top };
  }

  private onPointerDown(e: PointerEvent): void {
    const screen = this.canvasPoint(e);
    if (e.button === 1 || e.shiftKey) {
      this.panning = { lastX: screen.x, lastY: screen.y };
      return;
    }
    const p = toImageSpace(this.view, screen.x, screen.y);
    if (placementComplete(this.state)) {
      const index = nearestHandle(this.state, p, HIT_RADIUS_SCREEN_PX / this.view.scale);
      if (index !== null) {
        this.draggingHandle = index;
        this.canvas.setPointerCapture(e.pointerId);
      }
      return;
    }
    if (!insideImage(this.state, p)) {
      this.callbacks.onHint("click inside the image to place a control point");
      return;
    }
    const next = placePoint(this.state, clampToImage(this.state, p));
    if (next !== this.state) {
      this.callbacks.onChange(next, true);
    }
  }

  private onPointerMove(e: PointerEvent): void {
    const screen = this.canvasPoint(e);
    if (this.panning) {
      this.view = pan(this.view, screen.x - this.panning.lastX, screen.y - this.panning.lastY);
      this.panning = { lastX: screen.x, lastY: screen.y };
      this.render();
      return;
    }
    if (this.draggingHandle === null) return;
    const p = toImageSpace(this.view, screen.x, screen.y);
    // one undo entry per drag: recorded on pointerdown's first move
    const recordUndo = !this.dragMoved;
    this.dragMoved = true;
    this.callbacks.onChange(moveHandle(this.state, this.draggingHandle, p), recordUndo);
  }

  private onPointerUp(e: PointerEvent): void {
    if (this.draggingHandle !== null) {
      this.canvas.releasePointerCapture(e.pointerId);
    }
    this.draggingHandle = null;
    this.dragMoved = false;
    this.panning = null;
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const screen = this.canvasPoint(e);
    const factor = e.deltaY < 0 ? 1.15 : 1 / 1.15;
    this.view = zoomAbout(this.view, screen.x, screen.y, factor);
    this.render();
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.fillStyle = "#181a1f";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.image) return;

    ctx.setTransform(this.view.scale, 0, 0, this.view.scale, this.view.offsetX, this.view.offsetY);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(this.image, 0, 0);

    const handles = this.state.handles;
    if (handles.length === 4) {
      const outline = sampleOutline(handles, 128);
      ctx.beginPath();
      ctx.moveTo(outline[0].x, outline[0].y);
      for (const q of outline) ctx.lineTo(q.x, q.y);
      ctx.closePath(); // chord P3 -> P0
      ctx.fillStyle = "rgba(80, 200, 120, 0.25)";
      ctx.fill("evenodd");
      ctx.strokeStyle = "#50c878";
      ctx.lineWidth = 1.5 / this.view.scale;
      ctx.stroke();
    } else if (handles.length > 1) {
      ctx.beginPath();
      ctx.moveTo(handles[0].x, handles[0].y);
      for (const q of handles.slice(1)) ctx.lineTo(q.x, q.y);
      ctx.strokeStyle = "rgba(80, 200, 120, 0.5)";
      ctx.lineWidth = 1 / this.view.scale;
      ctx.stroke();
    }

    handles.forEach((h, i) => {
      const r = HANDLE_RADIUS_PX / this.view.scale;
      ctx.beginPath();
      ctx.arc(h.x, h.y, r, 0, 2 * Math.PI);
      ctx.fillStyle = i === 0 || i === 3 ? "#ffb347" : "#47b4ff";
      ctx.fill();
      ctx.strokeStyle = "#10131a";
      ctx.lineWidth = 1 / this.view.scale;
      ctx.stroke();
      ctx.fillStyle = "#e8e8e8";
      ctx.font = `${12 / this.view.scale}px sans-serif`;
      ctx.fillText(HANDLE_LABELS[i], h.x + r * 1.4, h.y - r * 0.6);
    });
  }
}
