import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { parseFrame } from "../src/protocol.js";
import { OpsStore } from "../src/store.js";

const fixture = JSON.parse(
  readFileSync(new URL("./fixtures/session.json", import.meta.url), "utf-8"),
);

function replaySession(): { store: OpsStore; frames: ReturnType<typeof parseFrame>[] } {
  const store = new OpsStore(fixture.acoustic_period);
  const frames = (fixture.ws_received as string[]).map(parseFrame);
  return { store, frames };
}

describe("the console never invents state", () => {
  it("every marker's predicted tag matches its source frame, at every step", () => {
    const { store, frames } = replaySession();
    const byKey = new Map<string, boolean>(); // pose key -> predicted flag from the frame
    for (const frame of frames) {
      if (frame.type === "telemetry" || frame.type === "ghost") {
        const p = frame.payload as { pos?: number[]; predicted?: boolean };
        if (Array.isArray(p.pos)) {
          byKey.set(`${p.pos[0]},${p.pos[1]},${frame.t}`, p.predicted === true);
        }
      }
      store.apply(frame);
      for (const m of store.markers()) {
        const key = `${m.pos[0]},${m.pos[1]},${m.t}`;
        expect(byKey.has(key)).toBe(true); // no marker without a source frame
        expect(m.predicted).toBe(byKey.get(key)); // tag copied verbatim
      }
    }
  });

  it("ghost frames are flagged predicted and telemetry frames are not", () => {
    const { frames } = replaySession();
    for (const frame of frames) {
      if (frame.type === "ghost") expect(frame.payload.predicted).toBe(true);
      if (frame.type === "telemetry") expect(frame.payload.predicted).toBe(false);
    }
  });

  it("ghosts advance between true fixes and snap away on a fresh fix", () => {
    const { store, frames } = replaySession();
    let sawGhostMovement = false;
    let lastGhostPos: number[] | null = null;
    for (const frame of frames) {
      store.apply(frame);
      const ghost = [...store.vehicles.values()].find((v) => v.latestGhost);
      if (ghost?.latestGhost) {
        if (lastGhostPos) {
          const d = Math.hypot(
            ghost.latestGhost.pos[0] - lastGhostPos[0],
            ghost.latestGhost.pos[1] - lastGhostPos[1],
          );
          if (d > 0.2) sawGhostMovement = true;
        }
        lastGhostPos = [...ghost.latestGhost.pos];
      }
    }
    expect(sawGhostMovement).toBe(true);
  });
});

describe("staleness", () => {
  it("flags a vehicle overdue after three reporting periods", () => {
    const store = new OpsStore(10);
    store.apply(parseFrame(JSON.stringify({
      type: "telemetry", topic: "agents/x/telemetry",
      payload: { pos: [0, 0, 5], predicted: false }, seq: 1, t: 100,
    })));
    expect(store.isOverdue("x")).toBe(false);
    store.apply(parseFrame(JSON.stringify({
      type: "mission_status", topic: "agents/x/mission",
      payload: { status: "running", index: 0 }, seq: 2, t: 129,
    })));
    expect(store.isOverdue("x")).toBe(false); // 29 s < 3 * 10 s
    store.apply(parseFrame(JSON.stringify({
      type: "mission_status", topic: "agents/x/mission",
      payload: { status: "running", index: 0 }, seq: 3, t: 131,
    })));
    expect(store.ageOf("x")).toBeCloseTo(31);
    expect(store.isOverdue("x")).toBe(true);
  });

  it("mission status follows mission_status frames", () => {
    const { store, frames } = replaySession();
    frames.forEach((f) => store.apply(f));
    const auv = store.vehicles.get("auv0");
    expect(auv).toBeDefined();
    expect(["pending", "running", "done", "aborted"]).toContain(auv!.missionStatus);
  });
});
