import { describe, expect, it } from "vitest";

import { AnnotationApi, documentFromHandles, handlesFromDocument } from "../src/api.js";

describe("annotation document schema", () => {
  it("serializes handles into the shared JSON schema", () => {
    const doc = documentFromHandles("img3", "dr-a", [
      { x: 1.5, y: 2.25 },
      { x: 3, y: 4 },
      { x: 5.5, y: 6.5 },
      { x: 7, y: 8 },
    ]);
    expect(doc).toEqual({
      image_id: "img3",
      annotator_id: "dr-a",
      control_points: [
        [1.5, 2.25],
        [3, 4],
        [5.5, 6.5],
        [7, 8],
      ],
    });
  });

  it("round trips through handle extraction", () => {
    const doc = documentFromHandles("i", "a", [
      { x: 0.125, y: 9 },
      { x: 1, y: 2 },
      { x: 3, y: 4 },
      { x: 5, y: 6 },
    ]);
    expect(documentFromHandles("i", "a", handlesFromDocument(doc))).toEqual(doc);
  });

  it("refuses incomplete placements", () => {
    expect(() => documentFromHandles("i", "a", [{ x: 0, y: 0 }])).toThrow(/4 control points/);
  });

  it("builds endpoint URLs against the service base", () => {
    const api = new AnnotationApi("http://127.0.0.1:8008/");
    expect(api.imageUrl("s00001")).toBe("http://127.0.0.1:8008/images/s00001");
    expect(api.maskUrl("s00001", "dr a")).toBe(
      "http://127.0.0.1:8008/masks/s00001?annotator=dr%20a",
    );
  });
});

// Live round trip against a running service:
//   cervixseg annotate-serve --root <dataset dir> --port 8008
//   ANNOTATE_URL=http://127.0.0.1:8008 npm test
const liveUrl = process.env.ANNOTATE_URL;

describe.skipIf(!liveUrl)("live service round trip", () => {
  it("save then fetch returns the identical document plus a version", async () => {
    const api = new AnnotationApi(liveUrl!);
    const images = await api.listImages();
    expect(images.length).toBeGreaterThan(0);
    const imageId = images[0].id;
    const doc = documentFromHandles(imageId, "ui-test", [
      { x: 10, y: 40 },
      { x: 20, y: 8 },
      { x: 44, y: 9 },
      { x: 55, y: 42 },
    ]);
    const saved = await api.putAnnotation(doc);
    expect(saved.version).toBeGreaterThanOrEqual(1);
    const stored = await api.getAnnotations(imageId);
    const mine = stored.find((a) => a.annotator_id === "ui-test");
    expect(mine).toBeDefined();
    expect(mine!.control_points).toEqual(doc.control_points);
    expect(mine!.version).toBe(saved.version);

    const mask = await fetch(api.maskUrl(imageId, "ui-test"));
    expect(mask.status).toBe(200);
    expect(mask.headers.get("content-type")).toBe("image/png");
  });
});
