/**
 * Latest-value store for live operations.
 *
 * The cardinal rule: the console never invents state.  Every rendered
 * pose comes from a frame, and its true/predicted tag is copied verbatim
 * from the frame's payload flag.  Ghost and true tracks are kept apart;
 * a vehicle whose true updates stop arriving goes "overdue" after three
 * reporting periods.
 */

import { Frame, TelemetryPayload, topicVehicle } from "./protocol.js";

export interface Marker {
  vehicleId: string;
  pos: [number, number, number];
  heading: number;
  predicted: boolean; // verbatim from the frame payload
  quantized: boolean;
  t: number; // sim time of the frame
}

export interface VehicleView {
  id: string;
  latestTrue: Marker | null;
  latestGhost: Marker | null;
  trueTrack: Marker[];
  ghostTrack: Marker[];
  missionStatus: string;
  taskIndex: number;
  reportPeriod: number; // s, expected gap between true updates
}

const TRACK_LIMIT = 500;

export class OpsStore {
  vehicles = new Map<string, VehicleView>();
  clock = 0; // latest sim time seen on any frame
  defaultPeriod: number;

  constructor(defaultPeriod = 15) {
    this.defaultPeriod = defaultPeriod;
  }

  private view(id: string): VehicleView {
    let v = this.vehicles.get(id);
    if (!v) {
      v = {
        id,
        latestTrue: null,
        latestGhost: null,
        trueTrack: [],
        ghostTrack: [],
        missionStatus: "none",
        taskIndex: 0,
        reportPeriod: this.defaultPeriod,
      };
      this.vehicles.set(id, v);
    }
    return v;
  }

  apply(frame: Frame): void {
    this.clock = Math.max(this.clock, frame.t);
    const vid = topicVehicle(frame.topic);
    if (!vid) return;
    if (frame.type === "telemetry" || frame.type === "ghost") {
      const p = frame.payload as unknown as TelemetryPayload;
      if (!Array.isArray(p.pos)) return;
      const marker: Marker = {
        vehicleId: vid,
        pos: [p.pos[0], p.pos[1], p.pos[2] ?? p.depth ?? 0],
        heading: p.heading ?? 0,
        predicted: p.predicted === true,
        quantized: p.quantized === true,
        t: frame.t,
      };
      const v = this.view(vid);
      if (marker.predicted) {
        v.latestGhost = marker;
        push(v.ghostTrack, marker);
      } else {
        v.latestTrue = marker;
        push(v.trueTrack, marker);
        // a fresh true fix supersedes the ghost estimate until the next one
        v.latestGhost = null;
      }
      if (typeof p.mission_status === "string") {
        v.missionStatus = p.mission_status;
        v.taskIndex = p.task_index ?? v.taskIndex;
      }
    } else if (frame.type === "mission_status") {
      const v = this.view(vid);
      v.missionStatus = String(frame.payload.status ?? v.missionStatus);
      v.taskIndex = Number(frame.payload.index ?? v.taskIndex);
    }
  }

  /** Sim seconds since the last true fix; Infinity before the first. */
  ageOf(vehicleId: string): number {
    const v = this.vehicles.get(vehicleId);
    if (!v || !v.latestTrue) return Infinity;
    return this.clock - v.latestTrue.t;
  }

  /** Overdue once the true-fix gap exceeds three reporting periods. */
  isOverdue(vehicleId: string): boolean {
    const v = this.vehicles.get(vehicleId);
    if (!v) return false;
    return this.ageOf(vehicleId) > 3 * v.reportPeriod;
  }

  /** Everything the map draws; tags come only from stored frames. */
  markers(): Marker[] {
    const out: Marker[] = [];
    for (const v of this.vehicles.values()) {
      if (v.latestTrue) out.push(v.latestTrue);
      if (v.latestGhost) out.push(v.latestGhost);
    }
    return out;
  }
}

function push(track: Marker[], m: Marker): void {
  track.push(m);
  if (track.length > TRACK_LIMIT) track.shift();
}
