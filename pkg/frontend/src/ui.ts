// DOM rendering. Everything shown is either an API snapshot or a stream
// event; the only local state is anomaly acknowledgement.

import { ApiClient, ApiError } from "./api.js";
import type { CourseOut, LiveEvent, SessionStatus, StudentOut } from "./types.js";
import {
  ConsoleState,
  canStartSession,
  describeEvent,
  reportScreenRows,
  startDisabledReason,
  startableCourses,
} from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export class ConsoleUi {
  private readonly root: HTMLElement;
  private feedList!: HTMLUListElement;
  private anomalyBox!: HTMLDivElement;
  private sessionBox!: HTMLDivElement;
  private rosterBox!: HTMLDivElement;
  private reportBox!: HTMLDivElement;
  private lcdBox!: HTMLDivElement;
  private statusBadge!: HTMLSpanElement;

  constructor(
    private readonly api: ApiClient,
    private readonly state: ConsoleState,
    root: HTMLElement,
  ) {
    this.root = root;
    this.build();
  }

  private build(): void {
    this.statusBadge = el("span", { class: "badge" }, "connecting");
    this.sessionBox = el("div", { class: "panel" });
    this.lcdBox = el("div", { class: "panel lcd" });
    this.anomalyBox = el("div", { class: "panel" });
    this.feedList = el("ul", { class: "feed" });
    this.rosterBox = el("div", { class: "panel" });
    this.reportBox = el("div", { class: "panel" });
    this.root.append(
      el("header", {}, el("h1", {}, "Attendance Console "), this.statusBadge),
      this.sessionBox,
      this.lcdBox,
      this.anomalyBox,
      el("div", { class: "panel" }, el("h2", {}, "Live feed"), this.feedList),
      this.rosterBox,
      this.reportBox,
    );
  }

  setConnectionLive(live: boolean): void {
    this.state.connectionLive = live;
    this.statusBadge.textContent = live ? "live" : "stale";
    this.statusBadge.className = live ? "badge live" : "badge stale";
  }

  onEvent(event: LiveEvent): void {
    this.state.applyEvent(event);
    const item = el(
      "li",
      { class: `event ${event.kind}` },
      el("span", { class: "when" }, event.at),
      " ",
      describeEvent(event),
    );
    this.feedList.prepend(item);
    this.renderAnomalies();
    this.renderLcd();
  }

  private renderLcd(): void {
    this.lcdBox.replaceChildren(
      el("h2", {}, "Device display"),
      el(
        "pre",
        {},
        this.state.lcd ? `${this.state.lcd.text}\n${this.state.lcd.arg}` : "(idle)",
      ),
    );
  }

  private renderAnomalies(): void {
    const open = this.state.unacknowledgedAnomalies;
    const children: (Node | string)[] = [el("h2", {}, "Anomaly warnings")];
    if (open.length === 0) {
      children.push(el("p", {}, "none outstanding"));
    }
    for (const entry of open) {
      const button = el("button", {}, "Acknowledge");
      button.addEventListener("click", () => {
        this.state.acknowledgeAnomaly(entry.event.event_id);
        this.renderAnomalies();
      });
      children.push(
        el(
          "div",
          { class: "anomaly" },
          describeEvent(entry.event),
          " ",
          button,
        ),
      );
    }
    this.anomalyBox.replaceChildren(...children);
  }

  async refreshSession(): Promise<void> {
    const status = await this.api.sessionStatus();
    this.state.session = status.session;
    const courses = await this.api.courses();
    this.renderSession(status, courses);
  }

  private renderSession(status: SessionStatus, courses: CourseOut[]): void {
    const children: (Node | string)[] = [el("h2", {}, "Session")];
    children.push(
      el("p", {}, `server time ${status.now}`),
    );
    if (status.session) {
      children.push(
        el(
          "p",
          { class: "session-open" },
          `OPEN: ${status.session.course_id} (${status.session.checked_in} checked in)`,
        ),
      );
      const closeButton = el("button", {}, "Close session");
      closeButton.addEventListener("click", () => {
        void this.api
          .closeSession()
          .then(() => this.refreshSession())
          .catch((error: unknown) => this.showError(error));
      });
      children.push(closeButton);
    } else if (canStartSession(status)) {
      for (const course of startableCourses(courses)) {
        const startButton = el(
          "button",
          {},
          `Start ${course.course_id} (${course.title})`,
        );
        startButton.addEventListener("click", () => {
          void this.api
            .startSession(course.course_id)
            .then(() => this.refreshSession())
            .catch((error: unknown) => this.showError(error));
        });
        children.push(startButton);
      }
    } else {
      const reason = startDisabledReason(status) ?? "unavailable";
      children.push(
        el("p", { class: "disabled" }, `start disabled: ${reason}`),
      );
    }
    this.sessionBox.replaceChildren(...children);
  }

  async refreshRoster(): Promise<void> {
    const [students, courses] = await Promise.all([
      this.api.students(),
      this.api.courses(),
    ]);
    this.renderRoster(students, courses);
  }

  private renderRoster(students: StudentOut[], courses: CourseOut[]): void {
    const table = el("table", {});
    table.append(
      el(
        "tr",
        {},
        ...["UID", "Name", "Class", "Age", "Gender", ""].map((h) =>
          el("th", {}, h),
        ),
      ),
    );
    for (const student of students) {
      const remove = el("button", {}, "Delete");
      remove.addEventListener("click", () => {
        void this.api
          .deleteStudent(student.uid)
          .then(() => this.refreshRoster())
          .catch((error: unknown) => this.showError(error));
      });
      table.append(
        el(
          "tr",
          {},
          el("td", {}, student.uid),
          el("td", {}, `${student.name} ${student.surname}`),
          el("td", {}, student.class_label),
          el(
            "td",
            {},
            String(student.age) +
              (student.outside_reference_range ? " (no reference band)" : ""),
          ),
          el("td", {}, student.gender),
          el("td", {}, remove),
        ),
      );
    }
    const courseList = el(
      "ul",
      {},
      ...courses.map((course) =>
        el(
          "li",
          {},
          `${course.course_id} ${course.title} ${course.weekday} ` +
            `${course.start}-${course.end}` +
            (course.active ? " [active]" : ""),
        ),
      ),
    );
    this.rosterBox.replaceChildren(
      el("h2", {}, "Roster"),
      table,
      el("h3", {}, "Courses"),
      courseList,
    );
  }

  async showReport(courseId: string): Promise<void> {
    const rows = reportScreenRows(await this.api.attendanceReport(courseId));
    const table = el("table", {});
    table.append(
      el(
        "tr",
        {},
        ...["Timestamp", "Course", "UID", "Student", "Status"].map((h) =>
          el("th", {}, h),
        ),
      ),
    );
    for (const row of rows) {
      table.append(
        el(
          "tr",
          {},
          el("td", {}, row.timestamp),
          el("td", {}, row.course_id),
          el("td", {}, row.uid),
          el("td", {}, row.student ?? ""),
          el("td", {}, row.status),
        ),
      );
    }
    this.reportBox.replaceChildren(
      el("h2", {}, `Attendance: ${courseId}`),
      table,
    );
  }

  showError(error: unknown): void {
    const message =
      error instanceof ApiError ? error.detail : String(error);
    this.root.prepend(el("div", { class: "error" }, message));
  }
}
