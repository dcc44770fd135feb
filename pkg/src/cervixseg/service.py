"""Local HTTP backend for the annotation UI.

Serves manifest images, persists one annotation file per (image, annotator)
with last-write-wins versioning, and renders masks on demand through the
same rasterizer the training pipeline uses.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse

from .annotations import (
    aggregate_masks,
    annotation_to_mask,
    parse_annotation,
    serialize_annotation,
    validate_annotation_bounds,
)
from .pngio import mask_png_bytes, png_size

__all__ = ["AnnotationStore", "create_app", "serve"]


class AnnotationStore:
    """File-backed index of images and their annotations.

    Annotations live in <root>/annotations/<image_id>__<annotator>.json as
    {"document": ..., "version": n}; writes are atomic (temp file + rename)
    and serialized per (image_id, annotator_id).
    """

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no image manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text())
        self.images: dict[str, Path] = {}
        for entry in manifest["samples"]:
            image_id = entry.get("id", Path(entry["path"]).stem)
            self.images[image_id] = self.root / entry["path"]
        self.annotations_dir = self.root / "annotations"
        self.annotations_dir.mkdir(exist_ok=True)
        self._locks: dict[tuple[str, str], threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, image_id: str, annotator: str) -> threading.Lock:
        key = (image_id, annotator)
        with self._locks_guard:
            if key not in self._locks:
                self._locks[key] = threading.Lock()
            return self._locks[key]

    def _annotation_path(self, image_id: str, annotator: str) -> Path:
        return self.annotations_dir / f"{image_id}__{annotator}.json"

    def image_path(self, image_id: str) -> Path:
        if image_id not in self.images:
            raise KeyError(image_id)
        return self.images[image_id]

    def image_size(self, image_id: str) -> tuple[int, int]:
        return png_size(self.image_path(image_id))

    def annotators_of(self, image_id: str) -> list[str]:
        prefix = f"{image_id}__"
        return sorted(
            p.stem[len(prefix) :]
            for p in self.annotations_dir.glob(f"{prefix}*.json")
        )

    def list_images(self) -> list[dict]:
        return [
            {
                "id": image_id,
                "annotators": self.annotators_of(image_id),
                "has_annotations": bool(self.annotators_of(image_id)),
            }
            for image_id in sorted(self.images)
        ]

    def get_annotations(self, image_id: str) -> list[dict]:
        if image_id not in self.images:
            raise KeyError(image_id)
        docs = []
        for annotator in self.annotators_of(image_id):
            stored = json.loads(self._annotation_path(image_id, annotator).read_text())
            docs.append({**stored["document"], "version": stored["version"]})
        return docs

    def put_annotation(self, image_id: str, annotator: str, document: dict) -> int:
        if image_id not in self.images:
            raise KeyError(image_id)
        annotation = parse_annotation(document)
        width, height = self.image_size(image_id)
        validate_annotation_bounds(annotation, width, height)
        path = self._annotation_path(image_id, annotator)
        with self._lock(image_id, annotator):
            version = 1
            if path.exists():
                version = json.loads(path.read_text())["version"] + 1
            payload = {"document": serialize_annotation(annotation), "version": version}
            fd, tmp = tempfile.mkstemp(dir=self.annotations_dir, suffix=".tmp")
            try:
                with os.fdopen(fd, "w") as f:
                    json.dump(payload, f)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return version

    def mask_bytes(self, image_id: str, annotator: str | None, mode: str | None) -> bytes:
        if image_id not in self.images:
            raise KeyError(image_id)
        width, height = self.image_size(image_id)
        annotators = self.annotators_of(image_id)
        if not annotators:
            raise LookupError(f"no annotations stored for image {image_id!r}")
        if mode == "majority":
            masks = []
            for a in annotators:
                doc = json.loads(self._annotation_path(image_id, a).read_text())["document"]
                masks.append(annotation_to_mask(parse_annotation(doc), width, height).pixels)
            return mask_png_bytes(aggregate_masks(masks))
        annotator = annotator or annotators[0]
        path = self._annotation_path(image_id, annotator)
        if not path.exists():
            raise LookupError(f"no annotation by {annotator!r} for image {image_id!r}")
        doc = json.loads(path.read_text())["document"]
        return mask_png_bytes(annotation_to_mask(parse_annotation(doc), width, height).pixels)


def create_app(store_root) -> FastAPI:
    store = AnnotationStore(store_root)
    app = FastAPI(title="cervix annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.get("/images")
    def list_images():
        return store.list_images()

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        try:
            return FileResponse(store.image_path(image_id), media_type="image/png")
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image id {image_id!r}")

    @app.get("/annotations/{image_id}")
    def get_annotations(image_id: str):
        try:
            return store.get_annotations(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image id {image_id!r}")

    @app.put("/annotations/{image_id}/{annotator_id}")
    async def put_annotation(image_id: str, annotator_id: str, document: dict):
        body = dict(document)
        body.setdefault("image_id", image_id)
        body.setdefault("annotator_id", annotator_id)
        if body["image_id"] != image_id:
            raise HTTPException(
                status_code=422, detail=f"image_id: body says {body['image_id']!r}, path says {image_id!r}"
            )
        if body["annotator_id"] != annotator_id:
            raise HTTPException(
                status_code=422,
                detail=f"annotator_id: body says {body['annotator_id']!r}, path says {annotator_id!r}",
            )
        try:
            version = store.put_annotation(image_id, annotator_id, body)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image id {image_id!r}")
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"image_id": image_id, "annotator_id": annotator_id, "version": version}

    @app.get("/masks/{image_id}")
    def get_mask(
        image_id: str,
        annotator: str | None = Query(default=None),
        mode: str | None = Query(default=None),
    ):
        if mode not in (None, "majority"):
            raise HTTPException(status_code=422, detail=f"mode: expected 'majority', got {mode!r}")
        try:
            data = store.mask_bytes(image_id, annotator, mode)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image id {image_id!r}")
        except LookupError as e:
            raise HTTPException(status_code=404, detail=str(e))
        return Response(content=data, media_type="image/png")

    return app


def serve(port: int, store_root, host: str = "127.0.0.1") -> None:
    """Run the annotation backend until interrupted."""
    import uvicorn

    uvicorn.run(create_app(store_root), host=host, port=port, log_level="info")
