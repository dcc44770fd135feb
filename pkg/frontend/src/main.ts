/** Wires the editor to the annotation service: image list navigation,
 * save/undo, version display, error surfacing.
 */

import { AnnotationApi, ApiError, documentFromHandles, handlesFromDocument } from "./api.js";
import { CanvasEditor } from "./editor.js";
import {
  EditorState,
  UndoHistory,
  initialState,
  loadImage,
  markSaved,
  placementComplete,
} from "./state.js";

const DEFAULT_SERVICE_URL = "http://127.0.0.1:8008";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private readonly api: AnnotationApi;
  private readonly editor: CanvasEditor;
  private readonly history = new UndoHistory(50);
  private state: EditorState;
  private imageIds: string[] = [];
  private currentIndex = -1;

  private readonly status = el<HTMLSpanElement>("status");
  private readonly versionLabel = el<HTMLSpanElement>("version");
  private readonly banner = el<HTMLDivElement>("banner");
  private readonly annotatorInput = el<HTMLInputElement>("annotator");

  constructor() {
    const params = new URLSearchParams(window.location.search);
    this.api = new AnnotationApi(params.get("service") ?? DEFAULT_SERVICE_URL);
    const annotator = localStorage.getItem("annotator_id") ?? "anonymous";
    this.annotatorInput.value = annotator;
    this.state = initialState(annotator);
    this.editor = new CanvasEditor(el<HTMLCanvasElement>("canvas"), this.state, {
      onChange: (next, recordUndo) => this.applyChange(next, recordUndo),
      onHint: (message) => this.hint(message),
    });

    this.annotatorInput.addEventListener("change", () => {
      localStorage.setItem("annotator_id", this.annotatorInput.value);
      this.state = { ...this.state, annotatorId: this.annotatorInput.value };
    });
    el<HTMLButtonElement>("save").addEventListener("click", () => void this.save());
    el<HTMLButtonElement>("undo").addEventListener("click", () => this.undo());
    el<HTMLButtonElement>("prev").addEventListener("click", () => void this.navigate(-1));
    el<HTMLButtonElement>("next").addEventListener("click", () => void this.navigate(1));
    document.addEventListener("keydown", (e) => this.onKey(e));
  }

  private applyChange(next: EditorState, recordUndo: boolean): void {
    if (recordUndo) this.history.push(this.state);
    this.state = next;
    this.editor.setState(next);
    this.refreshStatus();
  }

  private hint(message: string): void {
    this.status.textContent = message;
  }

  private showError(message: string): void {
    this.banner.textContent = message;
    this.banner.style.display = "block";
  }

  private clearError(): void {
    this.banner.style.display = "none";
  }

  private refreshStatus(): void {
    const id = this.state.imageId ?? "(no image)";
    const placed = this.state.handles.length;
    const dirty = this.state.dirty ? " *unsaved*" : "";
    this.status.textContent = `${id}: ${placed}/4 points${dirty}`;
    this.versionLabel.textContent =
      this.state.version === null ? "unsaved" : `v${this.state.version}`;
  }

  async start(): Promise<void> {
    try {
      const entries = await this.api.listImages();
      this.imageIds = entries.map((e) => e.id);
      if (this.imageIds.length === 0) {
        this.showError("service returns no images");
        return;
      }
      await this.open(0);
    } catch (err) {
      this.showError(`cannot reach annotation service: ${String(err)}`);
    }
  }

  private async open(index: number): Promise<void> {
    this.clearError();
    const imageId = this.imageIds[index];
    const image = new Image();
    image.crossOrigin = "anonymous";
    image.src = this.api.imageUrl(imageId);
    await image.decode();

    let saved: { handles: { x: number; y: number }[]; version: number } | null = null;
    const annotations = await this.api.getAnnotations(imageId);
    const mine = annotations.find((a) => a.annotator_id === this.state.annotatorId);
    if (mine) {
      saved = { handles: handlesFromDocument(mine), version: mine.version };
    }
    this.currentIndex = index;
    this.history.clear();
    this.state = loadImage(this.state, imageId, image.width, image.height, saved);
    this.editor.setImage(image);
    this.editor.setState(this.state);
    this.refreshStatus();
  }

  private async navigate(step: number): Promise<void> {
    if (this.currentIndex < 0) return;
    if (this.state.dirty && !window.confirm("Discard unsaved changes?")) {
      return;
    }
    const next = (this.currentIndex + step + this.imageIds.length) % this.imageIds.length;
    await this.open(next);
  }

  private undo(): void {
    const previous = this.history.undo();
    if (previous) {
      this.state = previous;
      this.editor.setState(previous);
      this.refreshStatus();
    }
  }

  private async save(): Promise<void> {
    if (!this.state.imageId) return;
    if (!placementComplete(this.state)) {
      this.hint("place all four points before saving");
      return;
    }
    const doc = documentFromHandles(
      this.state.imageId,
      this.annotatorInput.value,
      this.state.handles,
    );
    try {
      const result = await this.api.putAnnotation(doc);
      this.applyChange(markSaved(this.state, result.version), false);
      this.clearError();
      this.hint(`saved ${doc.image_id} as ${doc.annotator_id} (v${result.version})`);
    } catch (err) {
      // edits stay local; surface field errors inline
      if (err instanceof ApiError && err.status === 422) {
        this.showError(`rejected: ${err.message}`);
      } else {
        this.showError(`save failed, edits kept locally: ${String(err)}`);
      }
    }
  }

  private onKey(e: KeyboardEvent): void {
    if (e.target instanceof HTMLInputElement) return;
    if ((e.ctrlKey || e.metaKey) && e.key === "s") {
      e.preventDefault();
      void this.save();
    } else if ((e.ctrlKey || e.metaKey) && e.key === "z") {
      e.preventDefault();
      this.undo();
    } else if (e.key === "ArrowRight") {
      void this.navigate(1);
    } else if (e.key === "ArrowLeft") {
      void this.navigate(-1);
    }
  }
}

new App().start();
