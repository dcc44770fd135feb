/** HTTP client for the annotation service; the UI touches no filesystem. */

import type { Point } from "./bezier.js";

export interface AnnotationDocument {
  image_id: string;
  annotator_id: string;
  /** Exactly four [x, y] pairs in image-pixel coordinates. */
  control_points: [number, number][];
}

export interface ImageEntry {
  id: string;
  annotators: string[];
  has_annotations: boolean;
}

export interface SaveResult {
  image_id: string;
  annotator_id: string;
  version: number;
}

export function documentFromHandles(
  imageId: string,
  annotatorId: string,
  handles: readonly Point[],
): AnnotationDocument {
  if (handles.length !== 4) {
    throw new Error(`need 4 control points to save, have ${handles.length}`);
  }
  return {
    image_id: imageId,
    annotator_id: annotatorId,
    control_points: handles.map((p) => [p.x, p.y] as [number, number]),
  };
}

export function handlesFromDocument(doc: AnnotationDocument): Point[] {
  return doc.control_points.map(([x, y]) => ({ x, y }));
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export class AnnotationApi {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async listImages(): Promise<ImageEntry[]> {
    const resp = await fetch(this.url("/images"));
    if (!resp.ok) throw new ApiError(resp.status, await describeFailure(resp));
    return resp.json();
  }

  imageUrl(imageId: string): string {
    return this.url(`/images/${encodeURIComponent(imageId)}`);
  }

  maskUrl(imageId: string, annotatorId: string): string {
    return this.url(
      `/masks/${encodeURIComponent(imageId)}?annotator=${encodeURIComponent(annotatorId)}`,
    );
  }

  async getAnnotations(imageId: string): Promise<(AnnotationDocument & { version: number })[]> {
    const resp = await fetch(this.url(`/annotations/${encodeURIComponent(imageId)}`));
    if (!resp.ok) throw new ApiError(resp.status, await describeFailure(resp));
    return resp.json();
  }

  async putAnnotation(doc: AnnotationDocument): Promise<SaveResult> {
    const resp = await fetch(
      this.url(
        `/annotations/${encodeURIComponent(doc.image_id)}/${encodeURIComponent(doc.annotator_id)}`,
      ),
      {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(doc),
      },
    );
    if (!resp.ok) throw new ApiError(resp.status, await describeFailure(resp));
    return resp.json();
  }
}

async function describeFailure(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (typeof body?.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return `${resp.status} ${resp.statusText}`;
  }
}
