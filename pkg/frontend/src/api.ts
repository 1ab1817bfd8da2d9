// Thin client for the orchestrator HTTP API and its newline-delimited
// JSON event stream.

import type { MissionInfo, ServerEvent } from "./types.js";

export class OrchestratorApi {
  constructor(private base: string = "") {}

  private async post(path: string, body: unknown): Promise<any> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const doc = await resp.json();
    if (!resp.ok) {
      throw new Error(doc.message ?? doc.error ?? `HTTP ${resp.status}`);
    }
    return doc;
  }

  async missions(): Promise<MissionInfo[]> {
    const resp = await fetch(this.base + "/missions");
    return (await resp.json()).missions;
  }

  createSession(missionId: string): Promise<{ session_id: string }> {
    return this.post("/sessions", { mission_id: missionId });
  }

  sendUtterance(sessionId: string, text: string): Promise<unknown> {
    return this.post(`/sessions/${sessionId}/utterance`, { text });
  }

  submitRating(sessionId: string, score: number,
               comment: string | null): Promise<unknown> {
    return this.post(`/sessions/${sessionId}/rating`, { score, comment });
  }

  endSession(sessionId: string): Promise<unknown> {
    return this.post(`/sessions/${sessionId}/end`, {});
  }

  // Consume the server-push stream, invoking onEvent per line until the
  // server closes the session stream.
  async streamEvents(
    sessionId: string,
    onEvent: (event: ServerEvent) => void,
    replay = true,
  ): Promise<void> {
    const url = `${this.base}/sessions/${sessionId}/events${replay ? "?replay=1" : ""}`;
    const resp = await fetch(url);
    if (!resp.body) throw new Error("event stream unsupported");
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let newline;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) onEvent(JSON.parse(line) as ServerEvent);
      }
    }
  }
}
