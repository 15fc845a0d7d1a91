// Console state derived from the event stream and API snapshots. The server
// is the sole authority on attendance: nothing here computes or caches an
// attendance decision, and no per-student weight is ever displayed.

import type {
  AttendanceRow,
  CourseOut,
  LiveEvent,
  SessionOut,
  SessionStatus,
} from "./types.js";
import { LiveFeed } from "./sse.js";

export interface AnomalyEntry {
  event: LiveEvent;
  acknowledged: boolean;
}

export interface LcdState {
  code: string;
  text: string;
  arg: string;
}

export class ConsoleState {
  readonly feed = new LiveFeed();
  readonly anomalies: AnomalyEntry[] = [];
  lcd: LcdState | null = null;
  session: SessionOut | null = null;
  connectionLive = false;

  /** Feed one already-accepted stream event into the derived views. */
  applyEvent(event: LiveEvent): void {
    switch (event.kind) {
      case "anomaly":
        this.anomalies.push({ event, acknowledged: false });
        break;
      case "lcd_mirror":
        this.lcd = {
          code: String(event.payload.code ?? ""),
          text: String(event.payload.text ?? ""),
          arg: String(event.payload.arg ?? ""),
        };
        break;
      case "session_change":
        if (event.payload.state === "closed") {
          this.session = null;
        }
        break;
      default:
        break;
    }
  }

  acknowledgeAnomaly(eventId: number): void {
    const entry = this.anomalies.find((a) => a.event.event_id === eventId);
    if (entry) entry.acknowledged = true;
  }

  get unacknowledgedAnomalies(): AnomalyEntry[] {
    return this.anomalies.filter((a) => !a.acknowledged);
  }
}

/** Only courses active right now may start a session. */
export function startableCourses(courses: CourseOut[]): CourseOut[] {
  return courses.filter((course) => course.active);
}

export function canStartSession(status: SessionStatus): boolean {
  return status.session === null && status.active_course_id !== null;
}

export function startDisabledReason(status: SessionStatus): string | null {
  if (status.session !== null) {
    return `session ${status.session.session_id} already open`;
  }
  if (status.active_course_id === null) {
    return "no course is scheduled at the current time";
  }
  return null;
}

/**
 * The report screen shows the API rows verbatim; any reshaping here would
 * break the server-is-authority rule.
 */
export function reportScreenRows(rows: AttendanceRow[]): AttendanceRow[] {
  return rows.slice();
}

/** Canonical JSON (sorted keys) for comparing screen model vs wire bytes. */
export function canonicalJson(value: unknown): string {
  return JSON.stringify(sortKeys(value));
}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeys);
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>).sort(
      ([a], [b]) => (a < b ? -1 : a > b ? 1 : 0),
    );
    const out: Record<string, unknown> = {};
    for (const [key, inner] of entries) out[key] = sortKeys(inner);
    return out;
  }
  return value;
}

/** One-line summary for the live feed; never includes a weight. */
export function describeEvent(event: LiveEvent): string {
  const p = event.payload;
  switch (event.kind) {
    case "scan_decision": {
      const who = (p.student as string | null) ?? (p.uid as string);
      if (p.record_created) return `${who}: attendance confirmed (KATILDI)`;
      if (p.duplicate) return `${who}: already checked in`;
      const token = p.token ? ` [${p.token as string}]` : "";
      return `${who}: ${p.stage_one as string}${p.presence ? " / " + (p.presence as string) : ""}${token}`;
    }
    case "seat_transition":
      return `chair ${p.chair_id as string}: ${p.state as string}`;
    case "anomaly":
      return (
        `class total off: expected ${p.expected_kg as number} kg, ` +
        `measured ${p.actual_kg as number} kg`
      );
    case "lcd_mirror":
      return `device display: ${p.text as string}${p.arg ? " " + (p.arg as string) : ""}`;
    case "session_change":
      return `session ${p.state as string} (${p.course_id as string})`;
    case "roster_change":
      return `roster: ${p.op as string}${p.token ? " [" + (p.token as string) + "]" : ""}`;
    default:
      return event.kind;
  }
}
