import { ApiClient } from "./api.js";
import { connectLiveFeed } from "./sse.js";
import { ConsoleState } from "./state.js";
import { ConsoleUi } from "./ui.js";

const API_BASE =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000";

const api = new ApiClient(API_BASE);
const state = new ConsoleState();
const ui = new ConsoleUi(api, state, document.getElementById("app")!);

connectLiveFeed(API_BASE, state.feed, {
  onEvent: (event) => {
    ui.onEvent(event);
    if (event.kind === "session_change" || event.kind === "scan_decision") {
      void ui.refreshSession();
    }
    if (event.kind === "roster_change") {
      void ui.refreshRoster();
    }
  },
  onStateChange: (live) => ui.setConnectionLive(live),
});

void ui.refreshSession();
void ui.refreshRoster();

// Refresh the session clock periodically; the feed carries everything else.
setInterval(() => void ui.refreshSession(), 5000);

declare global {
  interface Window {
    seatcheckConsole: { api: ApiClient; state: ConsoleState; ui: ConsoleUi };
  }
}
window.seatcheckConsole = { api, state, ui };
