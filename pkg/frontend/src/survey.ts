/**
 * Boustrophedon survey preview.  Must enumerate exactly the legs the
 * vehicle will fly: legs run along north at east offsets 0, s, 2s, ...
 * across the width; leg count = floor(width / spacing) + 1; spacing
 * wider than the rectangle is an error.
 */

import { GeoPoint, LocalPoint, toGeo } from "./geo.js";

export interface SurveyDraft {
  corner: GeoPoint; // SW corner
  extentNorth: number; // m, along-leg
  extentEast: number; // m, across tracks
  spacing: number; // m
  depth: number;
  speed: number;
  acceptanceRadius: number;
}

export function surveyLegCount(extentEast: number, spacing: number): number {
  if (spacing <= 0) throw new Error("spacing must be positive");
  if (spacing > extentEast) {
    throw new Error(`spacing ${spacing} exceeds rectangle width ${extentEast}`);
  }
  return Math.floor(extentEast / spacing) + 1;
}

/** Waypoints of the lawnmower pattern, local to the survey corner. */
export function expandSurveyLocal(s: SurveyDraft): LocalPoint[] {
  const legs = surveyLegCount(s.extentEast, s.spacing);
  const out: LocalPoint[] = [];
  for (let leg = 0; leg < legs; leg++) {
    const east = leg * s.spacing;
    const ends: LocalPoint[] = [
      { north: 0, east },
      { north: s.extentNorth, east },
    ];
    if (leg % 2 === 1) ends.reverse();
    out.push(...ends);
  }
  return out;
}

export function expandSurveyGeo(origin: GeoPoint, s: SurveyDraft): GeoPoint[] {
  const cornerLocal = s.corner;
  return expandSurveyLocal(s).map((p) =>
    toGeo(cornerLocal, { north: p.north, east: p.east }),
  );
}
