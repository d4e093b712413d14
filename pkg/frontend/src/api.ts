// Thin client over the session service's HTTP+JSON endpoints.

import { DialogueAct, KbRow, Schema, SessionView, TurnReply } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  const response = await fetch(path, {
    method,
    headers: body === undefined ? {} : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, (payload as { detail?: string }).detail ?? response.statusText);
  }
  return payload as T;
}

export function getSchema(): Promise<Schema> {
  return request("GET", "/schema");
}

export function createSession(role: "human_user" | "human_agent"): Promise<SessionView> {
  return request("POST", "/sessions", { role });
}

export function getSession(id: string): Promise<SessionView> {
  return request("GET", `/sessions/${id}`);
}

export function postAct(id: string, act: DialogueAct): Promise<TurnReply> {
  return request("POST", `/sessions/${id}/act`, { act });
}

export function postFeedback(id: string, success: boolean): Promise<{ ok: boolean }> {
  return request("POST", `/sessions/${id}/feedback`, { success });
}

export function searchKb(id: string, constraints: Record<string, string>): Promise<{ rows: KbRow[] }> {
  const encoded = encodeURIComponent(JSON.stringify(constraints));
  return request("GET", `/sessions/${id}/kb?constraints=${encoded}`);
}
