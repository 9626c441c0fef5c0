/**
 * Depth-profile side view, synchronized with the plan view: the mission
 * unrolled by along-path distance on x, depth positive-down on y, the
 * seabed sampled underneath the path, and one draggable handle per
 * waypoint to edit its depth.
 */

import { BathymetryGrid, depthAt } from "./bathymetry.js";
import { GeoPoint, toLocal } from "./geo.js";
import { MissionDraft } from "./mission.js";

export interface ProfilePoint {
  taskIndex: number;
  along: number; // m along the path
  depth: number;
  seabed: number | null;
}

/** Waypoint chain with along-track distances and seabed samples. */
export function profilePoints(
  draft: MissionDraft,
  origin: GeoPoint,
  grid: BathymetryGrid | null,
): ProfilePoint[] {
  const out: ProfilePoint[] = [];
  let along = 0;
  let prev: { north: number; east: number } | null = null;
  draft.tasks.forEach((task, i) => {
    let point: GeoPoint | null = null;
    let depth = 0;
    if (task.kind === "goto") {
      point = task.waypoint;
      depth = task.waypoint.depth;
    } else if (task.kind === "survey") {
      point = task.survey.corner;
      depth = task.survey.depth;
    } else if (task.kind === "surface") {
      depth = 0;
    } else {
      return;
    }
    let local = prev;
    if (point) {
      local = toLocal(origin, point);
      if (prev) along += Math.hypot(local.north - prev.north, local.east - prev.east);
      prev = local;
    }
    const seabed =
      grid && grid.available && local ? depthAt(grid, local.north, local.east) : null;
    out.push({ taskIndex: i, along, depth, seabed });
  });
  return out;
}

export class ProfileView {
  canvas: HTMLCanvasElement;
  maxDepth = 40;
  private points: ProfilePoint[] = [];
  private dragging = -1;
  onDepthEdit: ((taskIndex: number, depth: number) => void) | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    canvas.addEventListener("mousedown", (e) => this.pick(e));
    canvas.addEventListener("mousemove", (e) => this.drag(e));
    window.addEventListener("mouseup", () => (this.dragging = -1));
  }

  private xOf(along: number, total: number): number {
    const pad = 30;
    const w = this.canvas.width - 2 * pad;
    return pad + (total > 0 ? (along / total) * w : 0);
  }

  private yOf(depth: number): number {
    const pad = 14;
    const h = this.canvas.height - 2 * pad;
    return pad + (depth / this.maxDepth) * h;
  }

  private depthOfY(y: number): number {
    const pad = 14;
    const h = this.canvas.height - 2 * pad;
    return Math.max(0, ((y - pad) / h) * this.maxDepth);
  }

  render(
    draft: MissionDraft,
    origin: GeoPoint,
    grid: BathymetryGrid | null,
    issues: Set<number>,
  ): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    this.points = profilePoints(draft, origin, grid);
    ctx.fillStyle = "#0c1016";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.strokeStyle = "rgba(120, 170, 255, 0.7)";
    ctx.beginPath();
    ctx.moveTo(0, this.yOf(0));
    ctx.lineTo(this.canvas.width, this.yOf(0));
    ctx.stroke();
    if (this.points.length === 0) return;
    const total = this.points[this.points.length - 1].along || 1;
    // seabed line under the path
    ctx.strokeStyle = "#8a6d3b";
    ctx.lineWidth = 2;
    ctx.beginPath();
    let started = false;
    for (const p of this.points) {
      if (p.seabed === null) continue;
      const x = this.xOf(p.along, total);
      const y = this.yOf(p.seabed);
      if (!started) {
        ctx.moveTo(x, y);
        started = true;
      } else ctx.lineTo(x, y);
    }
    ctx.stroke();
    // planned depth polyline + handles
    ctx.strokeStyle = "#52d98f";
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    this.points.forEach((p, k) => {
      const x = this.xOf(p.along, total);
      const y = this.yOf(p.depth);
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    for (const p of this.points) {
      const x = this.xOf(p.along, total);
      const y = this.yOf(p.depth);
      const bad = issues.has(p.taskIndex);
      ctx.fillStyle = bad ? "#ff5d5d" : "#ffd166";
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.fill();
      if (bad && p.seabed !== null) {
        ctx.fillStyle = "#ff8383";
        ctx.font = "10px sans-serif";
        ctx.fillText(`seabed ${p.seabed.toFixed(1)} m`, x + 8, y - 6);
      }
    }
  }

  private pick(e: MouseEvent): void {
    const { x: mx, y: my } = this.mouse(e);
    const total = this.points.length ? this.points[this.points.length - 1].along || 1 : 1;
    this.dragging = -1;
    this.points.forEach((p) => {
      const x = this.xOf(p.along, total);
      const y = this.yOf(p.depth);
      if (Math.hypot(mx - x, my - y) < 9) this.dragging = p.taskIndex;
    });
  }

  private drag(e: MouseEvent): void {
    if (this.dragging < 0 || !this.onDepthEdit) return;
    const { y } = this.mouse(e);
    this.onDepthEdit(this.dragging, Math.round(this.depthOfY(y) * 10) / 10);
  }

  private mouse(e: MouseEvent): { x: number; y: number } {
    const r = this.canvas.getBoundingClientRect();
    return { x: e.clientX - r.left, y: e.clientY - r.top };
  }
}
