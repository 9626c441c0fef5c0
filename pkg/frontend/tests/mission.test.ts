import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { BathymetryGrid } from "../src/bathymetry.js";
import { MissionDraft } from "../src/mission.js";

const fixture = JSON.parse(
  readFileSync(new URL("./fixtures/session.json", import.meta.url), "utf-8"),
);

const ORIGIN = { lat: 58.25, lon: 11.45 };

function recordedDraft(): MissionDraft {
  // the same plan that was submitted in the recorded session
  const draft = new MissionDraft("plan-1", "console");
  draft.addWaypoint({
    lat: 58.2512, lon: 11.4506, depth: 6, speed: 1.5, acceptanceRadius: 5,
  });
  draft.addSurvey({
    corner: { lat: 58.2512, lon: 11.4506 },
    extentNorth: 100, extentEast: 40, spacing: 20,
    depth: 6, speed: 1.3, acceptanceRadius: 5,
  });
  draft.addSurface();
  return draft;
}

describe("mission submission round trip", () => {
  it("serializes byte-identically to what the gateway received", () => {
    const text = recordedDraft().serializeCommandFrame("auv0", 3);
    expect(text).toBe(fixture.sent_command_text);
    // and that exact text is what actually went over the wire
    expect(fixture.ws_sent).toContain(text);
  });
});

describe("seabed validation", () => {
  const crafted: BathymetryGrid = {
    available: true,
    east_sw: -1000,
    north_sw: -1000,
    cell_size: 1000,
    nodata: -9999,
    depth: [
      [10, 10, 10],
      [10, 10, 10],
      [10, 10, 10],
    ],
  };

  it("flags a waypoint planned into the seabed and blocks submission", () => {
    const draft = new MissionDraft();
    draft.addWaypoint({ lat: 58.25, lon: 11.45, depth: 12, speed: 1, acceptanceRadius: 3 });
    const issues = draft.validate(ORIGIN, crafted);
    expect(issues).toHaveLength(1);
    expect(issues[0].kind).toBe("below_seabed");
    expect(issues[0].seabedDepth).toBeCloseTo(10, 6);
  });

  it("accepts the same waypoint above the seabed", () => {
    const draft = new MissionDraft();
    draft.addWaypoint({ lat: 58.25, lon: 11.45, depth: 8, speed: 1, acceptanceRadius: 3 });
    expect(draft.validate(ORIGIN, crafted)).toHaveLength(0);
  });

  it("validates against the grid served by the live gateway", () => {
    const grid = fixture.bathymetry as BathymetryGrid;
    expect(grid.available).toBe(true);
    const draft = new MissionDraft();
    // harbor grid grows deeper northward; 200 m deep is below everything
    draft.addWaypoint({ lat: 58.2512, lon: 11.4506, depth: 200, speed: 1, acceptanceRadius: 3 });
    const issues = draft.validate(ORIGIN, grid);
    expect(issues.some((i) => i.kind === "below_seabed")).toBe(true);
  });

  it("empty missions cannot be submitted", () => {
    const issues = new MissionDraft().validate(ORIGIN, null);
    expect(issues.some((i) => i.kind === "empty")).toBe(true);
  });

  it("oversized survey spacing is a blocking issue", () => {
    const draft = new MissionDraft();
    draft.addSurvey({
      corner: { lat: 58.25, lon: 11.45 },
      extentNorth: 100, extentEast: 40, spacing: 50,
      depth: 5, speed: 1, acceptanceRadius: 5,
    });
    expect(draft.validate(ORIGIN, null).some((i) => i.kind === "bad_spacing")).toBe(true);
  });
});
