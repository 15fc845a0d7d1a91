// Wire-level types mirroring the attendance service's JSON surface.

export type EventKind =
  | "scan_decision"
  | "anomaly"
  | "seat_transition"
  | "lcd_mirror"
  | "session_change"
  | "roster_change";

export interface LiveEvent {
  event_id: number;
  kind: EventKind;
  at: string;
  payload: Record<string, unknown>;
}

export interface StudentOut {
  uid: string;
  name: string;
  surname: string;
  class_label: string;
  age: number;
  gender: "Male" | "Female";
  outside_reference_range: boolean;
}

export interface StudentIn {
  uid: string;
  name: string;
  surname: string;
  class_label: string;
  age: number;
  gender: "Male" | "Female";
}

export interface CourseOut {
  course_id: string;
  title: string;
  weekday: string;
  start: string;
  end: string;
  active: boolean;
}

export interface SessionOut {
  session_id: string;
  course_id: string;
  opened_at: string;
  state: "Open" | "Closed";
  checked_in: number;
}

export interface SessionStatus {
  session: SessionOut | null;
  now: string;
  active_course_id: string | null;
}

export interface AttendanceRow {
  timestamp: string;
  course_id: string;
  uid: string;
  status: string;
  student: string | null;
}
