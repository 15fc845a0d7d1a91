// Thin typed client over the attendance service. All state shown in the
// console comes from these calls; nothing is computed client-side.

import type {
  AttendanceRow,
  CourseOut,
  SessionOut,
  SessionStatus,
  StudentIn,
  StudentOut,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        detail = (JSON.parse(text) as { detail?: string }).detail ?? text;
      } catch {
        // non-JSON error body; keep raw text
      }
      throw new ApiError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  students(): Promise<StudentOut[]> {
    return this.request("/students");
  }

  addStudent(student: StudentIn): Promise<StudentOut> {
    return this.request("/students", {
      method: "POST",
      body: JSON.stringify(student),
    });
  }

  updateStudent(
    uid: string,
    changes: Partial<StudentIn>,
  ): Promise<{ uid: string; modified_fields: string[] }> {
    return this.request(`/students/${uid}`, {
      method: "PATCH",
      body: JSON.stringify(changes),
    });
  }

  deleteStudent(uid: string): Promise<{ detail: string }> {
    return this.request(`/students/${uid}`, { method: "DELETE" });
  }

  courses(): Promise<CourseOut[]> {
    return this.request("/courses");
  }

  courseStudents(courseId: string): Promise<StudentOut[]> {
    return this.request(`/courses/${courseId}/students`);
  }

  enroll(courseId: string, uid: string): Promise<{ detail: string }> {
    return this.request("/enrollments", {
      method: "POST",
      body: JSON.stringify({ course_id: courseId, uid }),
    });
  }

  unenroll(courseId: string, uid: string): Promise<{ detail: string }> {
    const params = new URLSearchParams({ course_id: courseId, uid });
    return this.request(`/enrollments?${params}`, { method: "DELETE" });
  }

  sessionStatus(): Promise<SessionStatus> {
    return this.request("/sessions/current");
  }

  startSession(courseId: string): Promise<SessionOut> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ course_id: courseId }),
    });
  }

  closeSession(): Promise<SessionOut> {
    return this.request("/sessions/current", { method: "DELETE" });
  }

  attendanceReport(course: string): Promise<AttendanceRow[]> {
    const params = new URLSearchParams({ course });
    return this.request(`/reports/attendance?${params}`);
  }

  /** Raw response body, for comparing the screen model against the wire. */
  async attendanceReportRaw(course: string): Promise<string> {
    const params = new URLSearchParams({ course });
    const response = await this.fetchImpl(
      `${this.baseUrl}/reports/attendance?${params}`,
    );
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return response.text();
  }
}
