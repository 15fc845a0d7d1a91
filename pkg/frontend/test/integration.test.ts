// Console against the real service running a scripted simulation.
// Requires python3 with the seatcheck package installed (repo root install).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { LiveFeed, connectLiveFeed } from "../src/sse.js";
import { ConsoleState, canStartSession, canonicalJson, reportScreenRows, startableCourses } from "../src/state.js";
import type { LiveEvent } from "../src/types.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const FIXTURES = path.join(HERE, "fixtures");
const PORT = 18731 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/courses`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

async function waitFor<T>(
  probe: () => Promise<T | null>,
  timeoutMs: number,
  label: string,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = await probe();
    if (value !== null) return value;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${label}`);
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

beforeAll(async () => {
  const dataDir = mkdtempSync(path.join(tmpdir(), "seatcheck-console-"));
  service = spawn(
    "python3",
    [
      "-m",
      "seatcheck.cli",
      "serve",
      "--roster-dir",
      path.join(FIXTURES, "roster"),
      "--data-dir",
      dataDir,
      "--scenario",
      path.join(FIXTURES, "classroom.scn"),
      "--port",
      String(PORT),
      "--pace-hz",
      "50",
    ],
    { stdio: ["ignore", "pipe", "pipe"], cwd: path.join(HERE, "..", "..") },
  );
  service.stderr?.on("data", () => undefined); // keep the pipe drained
  service.stdout?.on("data", () => undefined);
  await waitForService();
}, 40_000);

afterAll(() => {
  service?.kill("SIGTERM");
});

describe("console against a live scripted classroom", () => {
  const api = new ApiClient(BASE);

  it("blocks out-of-slot starts client-side and server rejects them too", async () => {
    // Virtual clock: Monday 09:05 -> only CS101 is startable.
    const status = await waitFor(
      async () => {
        const s = await api.sessionStatus();
        return s.active_course_id === "CS101" ? s : null;
      },
      15_000,
      "virtual clock to reach the CS101 slot",
    );
    expect(canStartSession(status)).toBe(true);

    const courses = await api.courses();
    const offered = startableCourses(courses).map((c) => c.course_id);
    expect(offered).toEqual(["CS101"]); // CS102 (TUE) is not offered

    // Bypassing the client-side gate must still fail on the server.
    await expect(api.startSession("CS102")).rejects.toSatisfy(
      (error: unknown) => error instanceof ApiError && error.status === 409,
    );
  }, 30_000);

  it("streams ordered events across a forced reconnect with no duplicates", async () => {
    const session = await api.startSession("CS101");
    expect(session.state).toBe("Open");

    const state = new ConsoleState();
    const seen: LiveEvent[] = [];
    const connection = connectLiveFeed(BASE, state.feed, {
      reconnectDelayMs: 50,
      onEvent: (event) => {
        seen.push(event);
        state.applyEvent(event);
      },
    });

    const countScans = () =>
      seen.filter((e) => e.kind === "scan_decision").length;

    await waitFor(
      async () => (countScans() >= 1 ? true : null),
      30_000,
      "first scan decision",
    );
    const connectsBefore = connection.connects;
    connection.reconnect(); // force-drop the HTTP stream mid-session

    await waitFor(
      async () => (connection.connects > connectsBefore ? true : null),
      15_000,
      "reconnect",
    );
    await waitFor(
      async () => (countScans() >= 2 ? true : null),
      40_000,
      "second scan decision after reconnect",
    );
    connection.close();
    await connection.done;

    const ids = seen.map((e) => e.event_id);
    expect(ids).toEqual([...ids].sort((a, b) => a - b));
    expect(new Set(ids).size).toBe(ids.length); // no duplicates rendered
    expect(ids[0]).toBe(1); // full history replayed from the start
    // Contiguous: nothing lost across the forced reconnect.
    expect(ids[ids.length - 1]).toBe(ids.length);

    // The scripted empty-chair weight swing produced an instructor warning.
    expect(state.anomalies.length).toBeGreaterThan(0);
    expect(state.unacknowledgedAnomalies.length).toBeGreaterThan(0);
    state.acknowledgeAnomaly(state.anomalies[0].event.event_id);
  }, 90_000);

  it("report screen equals the API response after JSON normalization", async () => {
    await waitFor(
      async () => {
        const rows = await api.attendanceReport("CS101");
        return rows.length >= 1 ? rows : null;
      },
      30_000,
      "attendance rows",
    );
    const raw = await api.attendanceReportRaw("CS101");
    const screenRows = reportScreenRows(await api.attendanceReport("CS101"));
    expect(canonicalJson(screenRows)).toBe(canonicalJson(JSON.parse(raw)));
    expect(screenRows[0].status).toBe("ATTENDED");
    expect(screenRows[0].uid).toBe("04A1B2C3");
  }, 40_000);
});
