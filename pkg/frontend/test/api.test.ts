import { afterEach, describe, expect, it, vi } from "vitest";
import * as api from "../src/api.js";

function mockFetch(status: number, payload: unknown) {
  const fn = vi.fn(async () => ({
    ok: status < 400,
    status,
    statusText: "status",
    json: async () => payload,
  }));
  vi.stubGlobal("fetch", fn);
  return fn;
}

afterEach(() => vi.unstubAllGlobals());

describe("api client", () => {
  it("creates sessions with the role payload", async () => {
    const fn = mockFetch(200, { id: "abc", role: "human_user" });
    const view = await api.createSession("human_user");
    expect(view.id).toBe("abc");
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/sessions");
    expect(JSON.parse(init.body as string)).toEqual({ role: "human_user" });
  });

  it("posts acts wrapped in an act envelope", async () => {
    const fn = mockFetch(200, { counterpart_act: null, terminal: false, turn: 1 });
    await api.postAct("abc", {
      speaker: "user", intent: "thanks", inform_slots: {}, request_slots: [],
    });
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/sessions/abc/act");
    expect(JSON.parse(init.body as string).act.intent).toBe("thanks");
  });

  it("surfaces service rejections with their detail text", async () => {
    mockFetch(409, { detail: "no real-interaction budget for this route" });
    await expect(api.createSession("human_agent")).rejects.toThrow(/budget/);
  });

  it("encodes kb constraints as a JSON query parameter", async () => {
    const fn = mockFetch(200, { rows: [] });
    await api.searchKb("abc", { moviename: "creed" });
    const [url] = fn.mock.calls[0] as unknown as [string];
    expect(url).toContain("/sessions/abc/kb?constraints=");
    expect(decodeURIComponent(url.split("=")[1])).toBe('{"moviename":"creed"}');
  });
});
