/**
 * Mission drafting and validation.
 *
 * Drafts never auto-submit; a submitted mission is serialized once and
 * the exact bytes go to the gateway (serializeCommandFrame), so what the
 * operator reviewed is what the vehicle gets.  Validation runs against
 * the gateway-served bathymetry: a waypoint planned deeper than the
 * seabed blocks submission.
 */

import { depthAt, BathymetryGrid } from "./bathymetry.js";
import { GeoPoint, toLocal } from "./geo.js";
import { SurveyDraft, expandSurveyGeo, surveyLegCount } from "./survey.js";

export interface WaypointDraft {
  lat: number;
  lon: number;
  depth: number;
  speed: number;
  acceptanceRadius: number;
}

export type TaskDraft =
  | { kind: "goto"; waypoint: WaypointDraft }
  | { kind: "survey"; survey: SurveyDraft }
  | { kind: "loiter"; point: GeoPoint; depth: number; radius: number; duration: number }
  | { kind: "surface" }
  | { kind: "abort" };

export interface ValidationIssue {
  taskIndex: number;
  kind: "below_seabed" | "bad_spacing" | "empty";
  detail: string;
  seabedDepth?: number;
}

export class MissionDraft {
  id: string;
  createdBy: string;
  tasks: TaskDraft[] = [];

  constructor(id = "plan-1", createdBy = "console") {
    this.id = id;
    this.createdBy = createdBy;
  }

  addWaypoint(wp: WaypointDraft): number {
    this.tasks.push({ kind: "goto", waypoint: wp });
    return this.tasks.length - 1;
  }

  addSurvey(s: SurveyDraft): number {
    this.tasks.push({ kind: "survey", survey: s });
    return this.tasks.length - 1;
  }

  addSurface(): number {
    this.tasks.push({ kind: "surface" });
    return this.tasks.length - 1;
  }

  setDepth(taskIndex: number, depth: number): void {
    const task = this.tasks[taskIndex];
    if (task.kind === "goto") task.waypoint.depth = depth;
    else if (task.kind === "survey") task.survey.depth = depth;
    else if (task.kind === "loiter") task.depth = depth;
  }

  /** All problems that block submission; empty array means submittable. */
  validate(origin: GeoPoint, grid: BathymetryGrid | null): ValidationIssue[] {
    const issues: ValidationIssue[] = [];
    if (this.tasks.length === 0) {
      issues.push({ taskIndex: -1, kind: "empty", detail: "mission has no tasks" });
      return issues;
    }
    this.tasks.forEach((task, i) => {
      if (task.kind === "goto") {
        const hit = this.seabedConflict(origin, grid, task.waypoint, task.waypoint.depth);
        if (hit !== null) {
          issues.push({
            taskIndex: i,
            kind: "below_seabed",
            detail: `waypoint depth ${task.waypoint.depth} m reaches the seabed at ${hit.toFixed(1)} m`,
            seabedDepth: hit,
          });
        }
      } else if (task.kind === "survey") {
        try {
          surveyLegCount(task.survey.extentEast, task.survey.spacing);
        } catch (e) {
          issues.push({ taskIndex: i, kind: "bad_spacing", detail: String(e) });
          return;
        }
        for (const g of expandSurveyGeo(origin, task.survey)) {
          const hit = this.seabedConflict(origin, grid, g, task.survey.depth);
          if (hit !== null) {
            issues.push({
              taskIndex: i,
              kind: "below_seabed",
              detail: `survey depth ${task.survey.depth} m reaches the seabed at ${hit.toFixed(1)} m`,
              seabedDepth: hit,
            });
            break;
          }
        }
      }
    });
    return issues;
  }

  private seabedConflict(
    origin: GeoPoint,
    grid: BathymetryGrid | null,
    at: GeoPoint,
    plannedDepth: number,
  ): number | null {
    if (!grid || !grid.available) return null;
    const local = toLocal(origin, at);
    const seabed = depthAt(grid, local.north, local.east);
    if (seabed !== null && plannedDepth >= seabed) return seabed;
    return null;
  }

  /** Mission JSON in the gateway schema (stable key order). */
  toJson(): Record<string, unknown> {
    const tasks = this.tasks.map((task) => {
      switch (task.kind) {
        case "goto":
          return {
            type: "goto",
            target: {
              lat: task.waypoint.lat,
              lon: task.waypoint.lon,
              depth: task.waypoint.depth,
            },
            speed: task.waypoint.speed,
            acceptance_radius: task.waypoint.acceptanceRadius,
          };
        case "survey":
          return {
            type: "survey",
            corner: {
              lat: task.survey.corner.lat,
              lon: task.survey.corner.lon,
              depth: 0,
            },
            extent_north: task.survey.extentNorth,
            extent_east: task.survey.extentEast,
            spacing: task.survey.spacing,
            depth: task.survey.depth,
            speed: task.survey.speed,
            acceptance_radius: task.survey.acceptanceRadius,
          };
        case "loiter":
          return {
            type: "loiter",
            point: { lat: task.point.lat, lon: task.point.lon, depth: task.depth },
            radius: task.radius,
            duration: task.duration,
          };
        case "surface":
          return { type: "surface" };
        case "abort":
          return { type: "abort" };
      }
    });
    return { id: this.id, created_by: this.createdBy, tasks };
  }

  /** The exact bytes sent over the socket for this draft. */
  serializeCommandFrame(vehicleId: string, seq: number): string {
    return JSON.stringify({
      type: "command",
      topic: `agents/${vehicleId}/command`,
      payload: { op: "set_mission", mission: this.toJson() },
      seq,
      t: 0,
    });
  }
}
