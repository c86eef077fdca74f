// Thumbnail and grid markup from recorded API responses.
import { describe, expect, it } from "vitest";

import retrieveFixture from "./fixtures/retrieve_response.json";
import schemaFixture from "./fixtures/schema_response.json";
import { EMPTY_GRID_MESSAGE, candidateGridHtml, layoutToSvg } from "../src/render.js";
import { retrieveResponseSchema } from "../src/types.js";

const CATEGORIES: string[] = (schemaFixture as { categories: string[] }).categories;

describe("candidate grid", () => {
  it("renders one figure per recorded candidate", () => {
    const items = retrieveResponseSchema.parse(retrieveFixture);
    const html = candidateGridHtml(items, CATEGORIES);
    expect(html.match(/<figure/g)).toHaveLength(items.length);
    for (const item of items) {
      expect(html).toContain(`data-id="${item.id}"`);
      expect(html).toContain(item.score.toFixed(3));
    }
    const rects = html.match(/<rect/g) ?? [];
    const expectedRects = items.reduce((acc, item) => acc + item.layout.elements.length + 1, 0);
    expect(rects).toHaveLength(expectedRects); // one background rect per thumb
  });

  it("shows the base-model notice when no templates were found", () => {
    const html = candidateGridHtml([], CATEGORIES);
    expect(html).toContain(EMPTY_GRID_MESSAGE);
    expect(html).not.toContain("<figure");
  });
});

describe("layoutToSvg", () => {
  it("positions rectangles from center-size geometry", () => {
    const svg = layoutToSvg(
      { id: null, elements: [{ category: CATEGORIES[0]!, cx: 0.5, cy: 0.5, w: 0.5, h: 0.25 }] },
      CATEGORIES,
      100,
      1.0
    );
    expect(svg).toContain('x="25.00"');
    expect(svg).toContain('y="37.50"');
    expect(svg).toContain('width="50.00"');
    expect(svg).toContain('height="25.00"');
  });

  it("escapes category names in titles", () => {
    const svg = layoutToSvg(
      { id: null, elements: [{ category: "<b>!", cx: 0.5, cy: 0.5, w: 0.2, h: 0.2 }] },
      CATEGORIES
    );
    expect(svg).toContain("&lt;b&gt;!");
  });
});
