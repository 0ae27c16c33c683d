/** S1 contract tests against a scripted stub service. */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import {
  ApiClient,
  Editor,
  FILMSTRIP_THETAS,
  FetchLike,
  THETA_STEP,
  isValidBits,
  snapTheta,
} from "../src/core.js";

const META = {
  num_attributes: 4,
  attribute_names: ["ring", "stripes", "hue", "border"],
  image_size: 32,
  checkpoint_id: "abc123",
  sample_count: 100,
};

interface Recorded {
  url: string;
  body?: Record<string, unknown>;
}

/** Stub service: theta=0 responses ignore target bits, like the real model. */
function makeStub() {
  const calls: Recorded[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    if (url.endsWith("/meta")) {
      calls.push({ url });
      return new Response(JSON.stringify(META), { status: 200 });
    }
    if (url.includes("/transfer")) {
      const body = JSON.parse(String(init?.body)) as Record<string, unknown>;
      calls.push({ url, body });
      const theta = body.theta as number;
      const bits = body.target_bits as string;
      const payload = theta === 0 ? "IMG_THETA0" : `IMG_${bits}_${theta}`;
      return new Response(
        JSON.stringify({
          image_b64: btoa(payload),
          confidence: [0.1, 0.2, 0.3, 0.4],
          request: body,
        }),
        { status: 200 },
      );
    }
    throw new Error(`unexpected url ${url}`);
  };
  return { calls, fetchFn };
}

function transferCalls(calls: Recorded[]): Recorded[] {
  return calls.filter((c) => c.url.includes("/transfer"));
}

describe("validation helpers", () => {
  it("snaps theta to the 0.05 grid inside [0, 1]", () => {
    expect(snapTheta(0.5)).toBeCloseTo(0.5, 10);
    expect(snapTheta(0.824)).toBeCloseTo(0.8, 10);
    expect(snapTheta(1.7)).toBe(1);
    expect(snapTheta(-3)).toBe(0);
    expect(snapTheta(0.026)).toBeCloseTo(0.05, 10);
  });

  it("accepts only exact-length 0/1 strings", () => {
    expect(isValidBits("1010", 4)).toBe(true);
    expect(isValidBits("101", 4)).toBe(false);
    expect(isValidBits("10a0", 4)).toBe(false);
  });
});

describe("editor init", () => {
  it("builds one toggle slot per attribute and defaults theta to 1.0", async () => {
    const { fetchFn } = makeStub();
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();
    expect(editor.state.meta?.num_attributes).toBe(4);
    expect(editor.state.bits).toEqual([0, 0, 0, 0]);
    expect(editor.state.theta).toBe(1.0);
    expect(editor.controlsEnabled).toBe(true);
  });

  it("failed meta fetch disables controls and raises the banner", async () => {
    const failing: FetchLike = async () => new Response("down", { status: 503 });
    const editor = new Editor(new ApiClient("http://svc", failing));
    await editor.init();
    expect(editor.state.error).toMatch(/unavailable/);
    expect(editor.controlsEnabled).toBe(false);
    editor.toggleBit(0); // ignored, not thrown
    expect(editor.state.bits).toEqual([]);
  });
});

describe("request formation", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("toggle and slider changes produce correctly formed requests", async () => {
    const { calls, fetchFn } = makeStub();
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();

    editor.toggleBit(0);
    editor.toggleBit(2);
    editor.setTheta(0.6);
    await vi.runAllTimersAsync();

    const posts = transferCalls(calls);
    expect(posts.length).toBe(1); // debounce coalesced the three edits
    expect(posts[0].body).toMatchObject({
      sample_id: 0,
      target_bits: "1010",
      theta: 0.6,
    });
  });

  it("debounces a slider drag into one request for the final value", async () => {
    const { calls, fetchFn } = makeStub();
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();
    for (let v = 0; v <= 1.0001; v += 0.05) editor.setTheta(v);
    await vi.runAllTimersAsync();
    const posts = transferCalls(calls);
    expect(posts.length).toBe(1);
    expect(posts[0].body?.theta).toBe(1);
  });

  it("never sends theta outside [0, 1] or malformed bits", async () => {
    const { calls, fetchFn } = makeStub();
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();
    editor.setTheta(42);
    editor.setTheta(-1);
    await vi.runAllTimersAsync();
    for (const post of transferCalls(calls)) {
      const theta = post.body?.theta as number;
      expect(theta).toBeGreaterThanOrEqual(0);
      expect(theta).toBeLessThanOrEqual(1);
      expect(isValidBits(post.body?.target_bits as string, 4)).toBe(true);
    }
    expect(() => editor.toggleBit(9)).toThrow(RangeError);
  });
});

describe("theta-zero invariance over the wire", () => {
  it("renders identical bytes regardless of toggles at theta=0", async () => {
    const { fetchFn } = makeStub();
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();
    editor.state.theta = 0;

    editor.state.bits = [1, 0, 1, 0];
    await editor.requestNow();
    const first = editor.state.imageB64;

    editor.state.bits = [0, 1, 0, 1];
    await editor.requestNow();
    expect(editor.state.imageB64).toBe(first);
  });
});

describe("stale responses", () => {
  it("discards an out-of-order response by sequence number", async () => {
    const resolvers: Array<(r: Response) => void> = [];
    const calls: Recorded[] = [];
    const fetchFn: FetchLike = async (url, init) => {
      if (url.endsWith("/meta")) return new Response(JSON.stringify(META));
      const body = JSON.parse(String(init?.body)) as Record<string, unknown>;
      calls.push({ url, body });
      return new Promise<Response>((resolve) => resolvers.push(resolve));
    };
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();

    editor.state.theta = 0.2;
    const reqA = editor.requestNow(); // in flight
    editor.state.theta = 0.9;
    const reqB = editor.requestNow(); // coalesced: queued behind A

    const respond = (theta: number) =>
      new Response(JSON.stringify({
        image_b64: btoa(`IMG_${theta}`),
        confidence: [0, 0, 0, 0],
        request: {},
      }));

    expect(resolvers.length).toBe(1);
    resolvers[0](respond(0.2));
    await reqA;
    await reqB;
    // the queued follow-up fired with the latest theta
    expect(resolvers.length).toBe(2);
    resolvers[1](respond(0.9));
    await vi.waitFor(() => expect(editor.state.inFlight).toBe(false));
    expect(editor.state.imageB64).toBe(btoa("IMG_0.9"));
    expect(calls.map((c) => c.body?.theta)).toEqual([0.2, 0.9]);
  });

  it("keeps at most one request in flight", async () => {
    let open = 0;
    let maxOpen = 0;
    const fetchFn: FetchLike = async (url, init) => {
      if (url.endsWith("/meta")) return new Response(JSON.stringify(META));
      open += 1;
      maxOpen = Math.max(maxOpen, open);
      await new Promise((r) => setTimeout(r, 5));
      open -= 1;
      return new Response(JSON.stringify({
        image_b64: btoa("X"), confidence: [0, 0, 0, 0], request: {},
      }));
    };
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();
    await Promise.all([editor.requestNow(), editor.requestNow(), editor.requestNow()]);
    await vi.waitFor(() => expect(editor.state.inFlight).toBe(false));
    expect(maxOpen).toBe(1);
  });
});

describe("filmstrip", () => {
  it("issues six requests in theta order mapping 1:1 to thumbnails", async () => {
    const { calls, fetchFn } = makeStub();
    const editor = new Editor(new ApiClient("http://svc", fetchFn));
    await editor.init();
    editor.state.bits = [0, 1, 0, 0];
    const frames = await editor.filmstrip();

    const posts = transferCalls(calls);
    expect(posts.map((p) => p.body?.theta)).toEqual(FILMSTRIP_THETAS);
    expect(frames.length).toBe(6);
    frames.forEach((frame, i) => {
      expect(frame.theta).toBe(FILMSTRIP_THETAS[i]);
      const expected = frame.theta === 0 ? "IMG_THETA0" : `IMG_0100_${frame.theta}`;
      expect(frame.imageB64).toBe(btoa(expected));
    });
  });

  it("theta step constant matches the slider grid", () => {
    expect(THETA_STEP).toBe(0.05);
    for (const theta of FILMSTRIP_THETAS) {
      expect(snapTheta(theta)).toBeCloseTo(theta, 10);
    }
  });
});
