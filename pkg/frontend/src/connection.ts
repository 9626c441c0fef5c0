/**
 * Gateway session: hello handshake, subscribe-all, reconnect with
 * backoff.  Connection problems never block the UI; they surface as a
 * banner state while the last received data stays on screen with its
 * age.  The pure state machine is separated from the socket so it can
 * be tested without a network.
 */

import { Frame, frameText, parseFrame } from "./protocol.js";

export type SessionStatus =
  | "connecting"
  | "connected"
  | "auth_failed"
  | "reconnecting";

export interface SessionEvents {
  onFrame(frame: Frame): void;
  onStatus(status: SessionStatus, detail: string): void;
}

export class SessionState {
  status: SessionStatus = "connecting";
  backoffMs = 500;
  readonly backoffMaxMs = 8000;

  opened(): void {
    this.status = "connected";
    this.backoffMs = 500;
  }

  helloRejected(): void {
    this.status = "auth_failed";
  }

  /** Returns the delay before the next attempt. */
  dropped(): number {
    if (this.status !== "auth_failed") this.status = "reconnecting";
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, this.backoffMaxMs);
    return delay;
  }
}

export class GatewaySession {
  readonly url: string;
  readonly token: string;
  readonly state = new SessionState();
  agents: string[] = [];
  private ws: WebSocket | null = null;
  private seq = 0;
  private events: SessionEvents;
  private closed = false;

  constructor(url: string, token: string, events: SessionEvents) {
    this.url = url;
    this.token = token;
    this.events = events;
  }

  connect(): void {
    this.events.onStatus(this.state.status, "connecting");
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.state.opened();
      this.send("hello", "", { token: this.token, client: "console" });
      this.send("subscribe", "agents/*", {});
    };
    this.ws.onmessage = (ev) => {
      let frame: Frame;
      try {
        frame = parseFrame(String(ev.data));
      } catch {
        return; // never let a bad frame take the console down
      }
      if (frame.type === "hello") {
        this.agents = (frame.payload.agents as string[]) ?? [];
        this.events.onStatus("connected", `${this.agents.length} agents`);
      } else if (
        frame.type === "error" &&
        (frame.payload as { code?: string }).code === "auth"
      ) {
        this.state.helloRejected();
        this.events.onStatus("auth_failed", "gateway rejected the token");
      }
      this.events.onFrame(frame);
    };
    this.ws.onclose = () => {
      if (this.closed || this.state.status === "auth_failed") return;
      const delay = this.state.dropped();
      this.events.onStatus("reconnecting", `retrying in ${delay / 1000} s`);
      setTimeout(() => {
        if (!this.closed) this.connect();
      }, delay);
    };
  }

  send(type: Frame["type"], topic: string, payload: Record<string, unknown>): void {
    this.seq += 1;
    this.ws?.send(frameText(type, topic, payload, this.seq));
  }

  /** Raw pre-serialized frame (mission submission path). */
  sendText(text: string): void {
    this.ws?.send(text);
  }

  nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  abortVehicle(vehicleId: string): void {
    this.send("command", `agents/${vehicleId}/command`, { op: "abort" });
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
