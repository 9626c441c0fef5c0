/**
 * Top-down plan view on a canvas: bathymetry shading (toggleable water
 * overlay), vehicle tracks, solid true markers, translucent ghost
 * markers, waypoint pins and the survey lawnmower preview.
 */

import { BathymetryGrid, depthRange, shade } from "./bathymetry.js";
import { GeoPoint, toLocal } from "./geo.js";
import { MissionDraft } from "./mission.js";
import { OpsStore, Marker } from "./store.js";
import { expandSurveyLocal } from "./survey.js";

export interface Viewport {
  centerNorth: number;
  centerEast: number;
  metersPerPixel: number;
}

export interface MapLayers {
  bathymetry: boolean;
  water: boolean;
  tracks: boolean;
  ghosts: boolean;
  waypoints: boolean;
}

export class PlanMap {
  canvas: HTMLCanvasElement;
  view: Viewport = { centerNorth: 50, centerEast: 50, metersPerPixel: 1.0 };
  layers: MapLayers = {
    bathymetry: true,
    water: true,
    tracks: true,
    ghosts: true,
    waypoints: true,
  };
  grid: BathymetryGrid | null = null;
  origin: GeoPoint = { lat: 0, lon: 0 };
  selectedTask = -1;
  private bathyCache: HTMLCanvasElement | null = null;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
  }

  setGrid(grid: BathymetryGrid | null): void {
    this.grid = grid && grid.available ? grid : null;
    this.bathyCache = null;
  }

  toScreen(north: number, east: number): [number, number] {
    const { centerNorth, centerEast, metersPerPixel } = this.view;
    return [
      this.canvas.width / 2 + (east - centerEast) / metersPerPixel,
      this.canvas.height / 2 - (north - centerNorth) / metersPerPixel,
    ];
  }

  toWorld(x: number, y: number): { north: number; east: number } {
    const { centerNorth, centerEast, metersPerPixel } = this.view;
    return {
      north: centerNorth - (y - this.canvas.height / 2) * metersPerPixel,
      east: centerEast + (x - this.canvas.width / 2) * metersPerPixel,
    };
  }

  render(store: OpsStore, draft: MissionDraft): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.layers.bathymetry && this.grid) this.drawBathymetry(ctx);
    if (this.layers.water) {
      ctx.fillStyle = "rgba(30, 90, 160, 0.18)";
      ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    }
    if (this.layers.tracks) this.drawTracks(ctx, store);
    if (this.layers.waypoints) this.drawDraft(ctx, draft);
    this.drawMarkers(ctx, store);
  }

  private drawBathymetry(ctx: CanvasRenderingContext2D): void {
    const grid = this.grid;
    if (!grid) return;
    if (!this.bathyCache) {
      const rows = grid.depth.length;
      const cols = grid.depth[0].length;
      const off = document.createElement("canvas");
      off.width = cols;
      off.height = rows;
      const octx = off.getContext("2d");
      if (!octx) return;
      const img = octx.createImageData(cols, rows);
      const [lo, hi] = depthRange(grid);
      for (let r = 0; r < rows; r++) {
        for (let c = 0; c < cols; c++) {
          const [cr, cg, cb] = shade(grid, r, c, lo, hi);
          // image row 0 is the top = northernmost = last grid row
          const k = ((rows - 1 - r) * cols + c) * 4;
          img.data[k] = cr;
          img.data[k + 1] = cg;
          img.data[k + 2] = cb;
          img.data[k + 3] = 255;
        }
      }
      octx.putImageData(img, 0, 0);
      this.bathyCache = off;
    }
    const rows = grid.depth.length;
    const cols = grid.depth[0].length;
    const [x0, y0] = this.toScreen(
      grid.north_sw + rows * grid.cell_size,
      grid.east_sw,
    );
    const w = (cols * grid.cell_size) / this.view.metersPerPixel;
    const h = (rows * grid.cell_size) / this.view.metersPerPixel;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(this.bathyCache, x0, y0, w, h);
  }

  private drawTracks(ctx: CanvasRenderingContext2D, store: OpsStore): void {
    for (const v of store.vehicles.values()) {
      this.polyline(ctx, v.trueTrack, "rgba(120, 220, 170, 0.9)", 1.6);
      if (this.layers.ghosts) {
        this.polyline(ctx, v.ghostTrack, "rgba(200, 200, 220, 0.35)", 1.2);
      }
    }
  }

  private polyline(
    ctx: CanvasRenderingContext2D,
    track: Marker[],
    style: string,
    width: number,
  ): void {
    if (track.length < 2) return;
    ctx.strokeStyle = style;
    ctx.lineWidth = width;
    ctx.beginPath();
    track.forEach((m, i) => {
      const [x, y] = this.toScreen(m.pos[0], m.pos[1]);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }

  private drawMarkers(ctx: CanvasRenderingContext2D, store: OpsStore): void {
    for (const m of store.markers()) {
      if (m.predicted && !this.layers.ghosts) continue;
      const [x, y] = this.toScreen(m.pos[0], m.pos[1]);
      ctx.save();
      ctx.translate(x, y);
      ctx.rotate(m.heading);
      ctx.globalAlpha = m.predicted ? 0.38 : 1.0; // ghosts are translucent
      ctx.fillStyle = m.predicted ? "#c9c9e8" : "#52d98f";
      ctx.beginPath();
      ctx.moveTo(0, -9);
      ctx.lineTo(6, 7);
      ctx.lineTo(-6, 7);
      ctx.closePath();
      ctx.fill();
      ctx.restore();
      ctx.globalAlpha = 1.0;
      ctx.fillStyle = m.predicted ? "#aaa" : "#dfe";
      ctx.font = "11px sans-serif";
      const tag = m.predicted ? " (est)" : "";
      ctx.fillText(`${m.vehicleId}${tag}`, x + 10, y - 6);
    }
  }

  private drawDraft(ctx: CanvasRenderingContext2D, draft: MissionDraft): void {
    let prev: [number, number] | null = null;
    draft.tasks.forEach((task, i) => {
      if (task.kind === "goto") {
        const local = toLocal(this.origin, task.waypoint);
        const [x, y] = this.toScreen(local.north, local.east);
        if (prev) this.dashed(ctx, prev, [x, y]);
        ctx.fillStyle = i === this.selectedTask ? "#ffd166" : "#f2f4f8";
        ctx.beginPath();
        ctx.arc(x, y, 5, 0, 2 * Math.PI);
        ctx.fill();
        ctx.fillStyle = "#cfd6e4";
        ctx.font = "10px sans-serif";
        ctx.fillText(`${i + 1} @ ${task.waypoint.depth.toFixed(1)} m`, x + 8, y + 4);
        prev = [x, y];
      } else if (task.kind === "survey") {
        const cornerLocal = toLocal(this.origin, task.survey.corner);
        try {
          const pts = expandSurveyLocal(task.survey).map((p) =>
            this.toScreen(cornerLocal.north + p.north, cornerLocal.east + p.east),
          );
          ctx.strokeStyle = "#86b6ff";
          ctx.lineWidth = 1.4;
          ctx.beginPath();
          pts.forEach(([x, y], k) => (k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
          ctx.stroke();
          prev = pts[pts.length - 1];
        } catch {
          // bad spacing flagged by validation; nothing to preview
        }
      }
    });
  }

  private dashed(
    ctx: CanvasRenderingContext2D,
    a: [number, number],
    b: [number, number],
  ): void {
    ctx.save();
    ctx.setLineDash([6, 5]);
    ctx.strokeStyle = "rgba(240, 240, 250, 0.6)";
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
    ctx.restore();
  }
}
