/** Thin HTTP/WebSocket client for the session service (docs/api.md). */

import { Delta, Mode, SentenceResponse, SessionState } from "./types.js";

export class ApiError extends Error {
  constructor(
    public kind: string,
    detail: string,
  ) {
    super(detail);
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  const body = await resp.json();
  if (!resp.ok) {
    const err = body?.error ?? { kind: "HttpError", detail: `${resp.status}` };
    throw new ApiError(err.kind, err.detail);
  }
  return body as T;
}

export class SessionClient {
  constructor(
    private baseUrl: string,
    public sessionId: string,
  ) {}

  static async create(
    baseUrl: string,
    map: string,
    mode: Mode,
    seed: number,
  ): Promise<{ client: SessionClient; state: SessionState }> {
    const resp = await fetch(`${baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ map, mode, seed }),
    });
    const body = await unwrap<{ session_id: string; state: SessionState }>(resp);
    return {
      client: new SessionClient(baseUrl, body.session_id),
      state: body.state,
    };
  }

  async sentence(text: string): Promise<SentenceResponse> {
    const resp = await fetch(
      `${this.baseUrl}/sessions/${this.sessionId}/sentence`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
    return unwrap<SentenceResponse>(resp);
  }

  async step(n: number): Promise<{ deltas: Delta[]; success: boolean; step: number }> {
    const resp = await fetch(`${this.baseUrl}/sessions/${this.sessionId}/step`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ n }),
    });
    return unwrap(resp);
  }

  async state(): Promise<SessionState> {
    const resp = await fetch(`${this.baseUrl}/sessions/${this.sessionId}/state`);
    return unwrap<SessionState>(resp);
  }

  /** Opens the per-session event stream; caller owns the socket. */
  events(onDelta: (d: Delta) => void, onClose: () => void): WebSocket {
    const wsBase = this.baseUrl.replace(/^http/, "ws");
    const ws = new WebSocket(`${wsBase}/sessions/${this.sessionId}/events`);
    ws.onmessage = (msg) => onDelta(JSON.parse(msg.data) as Delta);
    ws.onclose = onClose;
    return ws;
  }
}
