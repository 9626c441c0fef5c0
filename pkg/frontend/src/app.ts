/**
 * Console entry point: wires the session, store, plan map, depth
 * profile and the toolbar together.  Everything is bundled locally; the
 * page makes no requests beyond the LAN gateway it is pointed at.
 */

import { GatewaySession, SessionStatus } from "./connection.js";
import { BathymetryGrid } from "./bathymetry.js";
import { GeoPoint } from "./geo.js";
import { MissionDraft, ValidationIssue, WaypointDraft } from "./mission.js";
import { PlanMap } from "./map.js";
import { ProfileView } from "./profile.js";
import { OpsStore } from "./store.js";
import { toGeo } from "./geo.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const store = new OpsStore();
const draft = new MissionDraft();
let origin: GeoPoint = { lat: 0, lon: 0 };
let grid: BathymetryGrid | null = null;
let session: GatewaySession | null = null;
let planMode = false;
let issues: ValidationIssue[] = [];

const map = new PlanMap(el<HTMLCanvasElement>("map"));
const profile = new ProfileView(el<HTMLCanvasElement>("profile"));
profile.onDepthEdit = (taskIndex, depth) => {
  draft.setDepth(taskIndex, depth);
  refresh();
};

function banner(status: SessionStatus | "stale", detail: string): void {
  const node = el<HTMLDivElement>("banner");
  node.dataset.state = status;
  node.textContent =
    status === "connected"
      ? ""
      : status === "auth_failed"
        ? `authentication failed: ${detail}`
        : status === "stale"
          ? `connection lost, showing last data (${detail})`
          : `${status}... ${detail}`;
  node.style.display = node.textContent ? "block" : "none";
}

function refresh(): void {
  issues = draft.validate(origin, grid);
  map.origin = origin;
  map.render(store, draft);
  profile.render(draft, origin, grid, new Set(
    issues.filter((i) => i.kind === "below_seabed").map((i) => i.taskIndex),
  ));
  renderVehicleList();
  const submit = el<HTMLButtonElement>("submit");
  submit.disabled = issues.length > 0 || !session || session.state.status !== "connected";
  el<HTMLDivElement>("issues").innerHTML = issues
    .map((i) => `<span class="badge">task ${i.taskIndex + 1}: ${i.detail}</span>`)
    .join("");
}

function renderVehicleList(): void {
  const rows: string[] = [];
  for (const v of store.vehicles.values()) {
    const age = store.ageOf(v.id);
    const overdue = store.isOverdue(v.id);
    rows.push(
      `<tr class="${overdue ? "overdue" : ""}">` +
        `<td>${v.id}</td>` +
        `<td>${v.missionStatus} #${v.taskIndex}</td>` +
        `<td>${age === Infinity ? "—" : age.toFixed(0) + " s"}${overdue ? " OVERDUE" : ""}</td>` +
        `<td><button data-abort="${v.id}">abort</button></td></tr>`,
    );
  }
  el<HTMLTableSectionElement>("vehicles").innerHTML = rows.join("");
  document.querySelectorAll<HTMLButtonElement>("[data-abort]").forEach((b) => {
    b.onclick = () => session?.abortVehicle(b.dataset.abort ?? "");
  });
}

el<HTMLButtonElement>("connect").onclick = () => {
  const url = el<HTMLInputElement>("url").value;
  const token = el<HTMLInputElement>("token").value;
  session?.close();
  session = new GatewaySession(url, token, {
    onFrame: (frame) => {
      if (frame.type === "hello") {
        const o = frame.payload.origin as { lat: number; lon: number } | undefined;
        if (o) origin = o;
        fetchBathymetry(url);
      }
      store.apply(frame);
      refresh();
    },
    onStatus: (status, detail) => {
      if (status === "reconnecting") {
        banner("stale", `last update ${store.ageOf(firstVehicle())} s ago; ${detail}`);
      } else {
        banner(status, detail);
      }
      refresh();
    },
  });
  session.connect();
};

function firstVehicle(): string {
  const first = store.vehicles.keys().next();
  return first.done ? "" : first.value;
}

async function fetchBathymetry(wsUrl: string): Promise<void> {
  try {
    const http = wsUrl.replace(/^ws/, "http").replace(/\/ws$/, "");
    const resp = await fetch(`${http}/bathymetry`);
    grid = (await resp.json()) as BathymetryGrid;
    map.setGrid(grid);
    refresh();
  } catch {
    grid = null;
  }
}

el<HTMLButtonElement>("plan").onclick = () => {
  planMode = !planMode;
  el<HTMLButtonElement>("plan").textContent = planMode ? "planning: on" : "plan";
};

map.canvas.addEventListener("click", (e) => {
  if (!planMode) return;
  const r = map.canvas.getBoundingClientRect();
  const w = map.toWorld(e.clientX - r.left, e.clientY - r.top);
  const geo = toGeo(origin, w);
  const wp: WaypointDraft = {
    lat: geo.lat,
    lon: geo.lon,
    depth: Number(el<HTMLInputElement>("depth").value) || 5,
    speed: Number(el<HTMLInputElement>("speed").value) || 1.5,
    acceptanceRadius: 5,
  };
  draft.addWaypoint(wp);
  refresh();
});

el<HTMLButtonElement>("submit").onclick = () => {
  if (!session || issues.length > 0) return;
  const vehicle = el<HTMLInputElement>("target").value;
  const text = draft.serializeCommandFrame(vehicle, session.nextSeq());
  session.sendText(text); // these exact bytes reach the gateway
};

for (const name of ["bathymetry", "water", "tracks", "ghosts", "waypoints"] as const) {
  const box = el<HTMLInputElement>(`layer-${name}`);
  box.onchange = () => {
    map.layers[name] = box.checked;
    refresh();
  };
}

setInterval(refresh, 1000); // keep ages/overdue flags current
refresh();
