"""
Live command-and-control session
================================

Serve the demo scenario at 20x real time, connect over WebSocket like
the operator console does, watch sparse acoustic telemetry arrive with
dead-reckoned ghost estimates in between, then abort the AUV's mission.

Run:  python3 demos/07_c2_session.py
"""

import asyncio
import json
from pathlib import Path

import websockets

from marsim import kernel
from marsim.c2.server import serve_in_thread

ASSETS = Path(__file__).resolve().parents[1] / "src" / "marsim" / "assets"

config = kernel.load_scenario(ASSETS / "scenario_demo.json")
config.duration = 3600.0
handle = serve_in_thread(config, pacing=20.0, token="field-token")
print(f"gateway listening on {handle.ws_url}")


async def session():
    async with websockets.connect(handle.ws_url) as ws:
        async def send(ftype, topic="", payload=None, seq=0):
            await ws.send(json.dumps(
                {"type": ftype, "topic": topic, "payload": payload or {},
                 "seq": seq, "t": 0.0}
            ))

        await send("hello", payload={"token": "field-token"}, seq=1)
        print("<-", json.loads(await ws.recv())["payload"])
        await send("subscribe", topic="agents/*", seq=2)

        telemetry_seen = 0
        async for raw in ws:
            frame = json.loads(raw)
            p = frame["payload"]
            if frame["type"] == "telemetry" and "auv0" in frame["topic"]:
                telemetry_seen += 1
                kind = "acoustic" if p.get("quantized") else "radio"
                print(f"t={frame['t']:7.1f}  {kind:8s} fix   "
                      f"pos=({p['pos'][0]:7.1f},{p['pos'][1]:7.1f}) "
                      f"depth={p.get('depth', 0):.1f}")
                if telemetry_seen == 3:
                    print("-> abort auv0")
                    await send("command", topic="agents/auv0/command",
                               payload={"op": "abort"}, seq=3)
            elif frame["type"] == "ghost" and "auv0" in frame["topic"]:
                print(f"t={frame['t']:7.1f}  ghost estimate "
                      f"pos=({p['pos'][0]:7.1f},{p['pos'][1]:7.1f})")
            elif frame["type"] == "mission_status" and "auv0" in frame["topic"]:
                print(f"t={frame['t']:7.1f}  mission -> {p['status']} "
                      f"(task {p['index']})")
                if p["status"] == "aborted":
                    break


try:
    asyncio.run(asyncio.wait_for(session(), timeout=120))
finally:
    handle.stop()
    print("stopped")
