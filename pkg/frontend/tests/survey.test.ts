import { describe, expect, it } from "vitest";
import { expandSurveyLocal, surveyLegCount, SurveyDraft } from "../src/survey.js";

const base: SurveyDraft = {
  corner: { lat: 58.25, lon: 11.45 },
  extentNorth: 100,
  extentEast: 40,
  spacing: 20,
  depth: 5,
  speed: 1.0,
  acceptanceRadius: 5,
};

describe("survey lawnmower expansion", () => {
  it("matches the enumeration rule: floor(width/spacing) + 1 legs", () => {
    // oracle: offsets {0, 20, 40} -> 3 legs -> 6 waypoints, serpentine
    const pts = expandSurveyLocal(base);
    expect(pts).toHaveLength(6);
    expect(pts.map((p) => p.east)).toEqual([0, 0, 20, 20, 40, 40]);
    expect(pts.map((p) => p.north)).toEqual([0, 100, 100, 0, 0, 100]);
  });

  it("spacing equal to the width yields two legs", () => {
    expect(surveyLegCount(40, 40)).toBe(2);
    expect(expandSurveyLocal({ ...base, spacing: 40 })).toHaveLength(4);
  });

  it("spacing wider than the rectangle is rejected", () => {
    expect(() => surveyLegCount(40, 41)).toThrow(/exceeds/);
  });
});
