import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ExplorerApp } from "../src/app.js";
import {
  EXPLAIN_IDENTITY,
  EXPLAIN_NONE,
  EXPLAIN_OK,
  FACTUAL,
  FakeService,
  HISTOGRAM,
  defaultService,
} from "./helpers.js";

async function makeApp(svc: FakeService) {
  vi.stubGlobal("fetch", svc.fetch);
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const app = new ExplorerApp(new ApiClient(""), root);
  await app.start();
  return { app, root };
}

function q(root: HTMLElement, testId: string): HTMLElement {
  const node = root.querySelector(`[data-testid="${testId}"]`);
  expect(node, `expected element ${testId}`).not.toBeNull();
  return node as HTMLElement;
}

function setState(app: ExplorerApp, root: HTMLElement, features: number[]) {
  const input = q(root, "state-input") as HTMLInputElement;
  input.value = JSON.stringify(features);
  app.readStateInput();
}

afterEach(() => {
  vi.unstubAllGlobals();
  document.body.innerHTML = "";
});

describe("startup", () => {
  it("fills the action and method selects from the health payload", async () => {
    const { root } = await makeApp(defaultService());
    const actions = Array.from(
      q(root, "action-select").querySelectorAll("option"),
    ).map((o) => o.value);
    expect(actions).toEqual([
      "UP",
      "DOWN",
      "LEFT",
      "RIGHT",
      "SHOOT",
      "CHOP",
      "WAIT",
    ]);
    const methods = Array.from(
      q(root, "method-select").querySelectorAll("option"),
    ).map((o) => o.value);
    expect(methods).toEqual(["raccer", "bo-gen", "bo-ts"]);
  });
});

describe("factual state", () => {
  it("renders a sampled state and its policy action", async () => {
    const svc = defaultService();
    const { app, root } = await makeApp(svc);

    await app.sample();
    await app.pending; // no explain yet; just settle microtasks
    await Promise.resolve();

    expect((q(root, "state-input") as HTMLInputElement).value).toBe(
      JSON.stringify(FACTUAL),
    );
    expect(q(root, "factual-board").querySelectorAll(".cell")).toHaveLength(25);
    expect(svc.callsTo("/api/sample-states")[0]?.url).toContain(
      "count=1&seed=0",
    );
    await vi.waitFor(() => {
      expect(q(root, "predicted-action").textContent).toContain("UP");
    });
  });

  it("shows an inline message for an invalid vector and renders nothing", async () => {
    const svc = defaultService();
    const { app, root } = await makeApp(svc);

    setState(app, root, [1, 2]);

    const error = q(root, "state-error");
    expect(error.hidden).toBe(false);
    expect(error.textContent).toMatch(/expected 9 features/);
    expect(q(root, "factual-board").children).toHaveLength(0);

    await app.explainNow();
    expect(svc.callsTo("/api/explain")).toHaveLength(0);
    expect(q(root, "explain-error").textContent).toMatch(/valid state/);
  });
});

describe("explanations", () => {
  it("renders both boards, the plan, and verbatim property numbers", async () => {
    const svc = defaultService();
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);
    (q(root, "action-select") as HTMLSelectElement).value = "SHOOT";

    await app.explainNow();

    expect(app.history).toHaveLength(1);
    expect(q(root, "factual-board-result").querySelectorAll(".cell")).toHaveLength(25);
    expect(q(root, "cf-board").querySelectorAll(".cell")).toHaveLength(25);
    const chips = q(root, "action-strip").querySelectorAll(".action-chip");
    expect(chips).toHaveLength(2);

    const cf = EXPLAIN_OK.counterfactual;
    const shown = (id: string) => q(root, id).textContent;
    expect(shown("bar-reachability-value")).toBe(String(cf.properties.reachability_hat));
    expect(shown("bar-cost-value")).toBe(String(cf.properties.cost_hat));
    expect(shown("bar-certainty-value")).toBe(String(cf.success_rate));
    expect(shown("bar-proximity-value")).toBe(String(cf.properties.proximity));
    expect(shown("bar-sparsity-value")).toBe(String(cf.properties.sparsity));
    expect(shown("bar-dmc-value")).toBe(String(cf.properties.dmc));
    expect(shown("loss-value")).toContain(String(cf.loss));
    expect(shown("result-meta")).toContain("nodes 57");
    expect(shown("result-meta")).toContain("elapsed 123.456 ms");
  });

  it("walks the plan with a slider over consistently seeded prefixes", async () => {
    const svc = defaultService();
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);

    await app.explainNow();
    await app.walkReady;

    const prefixCalls = svc
      .callsTo("/api/simulate")
      .map((c) => c.body as { actions: string[]; n: number; seed: number });
    expect(prefixCalls.map((c) => c.actions.length)).toEqual([1, 2]);
    expect(prefixCalls.every((c) => c.n === 1)).toBe(true);
    expect(prefixCalls.every((c) => c.seed === EXPLAIN_OK.seed)).toBe(true);

    const slider = q(root, "walk-slider") as HTMLInputElement;
    expect(slider.max).toBe("2");
    expect(q(root, "walk-caption").textContent).toBe("step 0/2 · start");

    app.renderWalkStep(1);
    expect(q(root, "walk-caption").textContent).toBe(
      "step 1/2 · after RIGHT",
    );
    // The arrow badge sits where the agent stood before the move: (3, 1).
    const cells = q(root, "walk-board").querySelectorAll(".cell");
    const badge = cells[3 * 5 + 1]?.querySelector(".badge");
    expect(badge?.textContent).toBe("→");
    const chips = q(root, "walk-strip").querySelectorAll(".action-chip");
    expect(chips[0]?.classList.contains("active")).toBe(true);
  });

  it("shows the identity banner when the plan is empty", async () => {
    const svc = defaultService();
    svc.on("POST", "/api/explain", () => ({ body: EXPLAIN_IDENTITY }));
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);
    (q(root, "action-select") as HTMLSelectElement).value = "UP";

    await app.explainNow();

    expect(q(root, "identity-banner").textContent).toMatch(
      /already chooses UP/,
    );
    expect(q(root, "walk-panel").hidden).toBe(true);
    expect(q(root, "sim-panel").hidden).toBe(false);
  });

  it("shows the empty-state panel with diagnostics when nothing is found", async () => {
    const svc = defaultService();
    svc.on("POST", "/api/explain", () => ({ body: EXPLAIN_NONE }));
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);

    await app.explainNow();

    const panel = q(root, "empty-panel");
    expect(panel.textContent).toContain("states explored: 311");
    expect(panel.textContent).toContain("valid candidates: 0");
    expect(panel.textContent).toContain("timed out: yes");
    expect(q(root, "walk-panel").hidden).toBe(true);
    expect(q(root, "sim-panel").hidden).toBe(true);
  });

  it("keeps every result when the method changes", async () => {
    const svc = defaultService();
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);

    await app.explainNow();
    await app.walkReady;

    svc.on("POST", "/api/explain", () => ({
      body: { ...EXPLAIN_NONE, method: "bo-gen" },
    }));
    (q(root, "method-select") as HTMLSelectElement).value = "bo-gen";
    await app.explainNow();

    expect(app.history).toHaveLength(2);
    const items = q(root, "history-list").querySelectorAll("li");
    expect(items).toHaveLength(2);
    expect(q(root, "result-meta").textContent).toContain("method bo-gen");

    // Clicking the first entry re-renders it from the stored response.
    (items[0]!.querySelector("a") as HTMLAnchorElement).click();
    expect(q(root, "result-meta").textContent).toContain("method raccer");
    expect(q(root, "history-list").querySelectorAll("li")).toHaveLength(2);
  });

  it("allows only one explanation in flight at a time", async () => {
    const svc = defaultService();
    let release!: () => void;
    svc.on(
      "POST",
      "/api/explain",
      () =>
        new Promise((resolve) => {
          release = () => resolve({ body: EXPLAIN_OK });
        }),
    );
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);

    const first = app.explainNow();
    const btn = q(root, "explain-btn") as HTMLButtonElement;
    expect(btn.disabled).toBe(true);

    const second = app.explainNow();
    expect(second).toBe(first);
    expect(svc.callsTo("/api/explain")).toHaveLength(1);

    release();
    await first;
    expect(btn.disabled).toBe(false);
    expect(app.history).toHaveLength(1);
  });

  it("surfaces server rejections inline", async () => {
    const svc = defaultService();
    svc.on("POST", "/api/explain", () => ({
      status: 422,
      body: { detail: "unknown action label: FLY" },
    }));
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);

    await app.explainNow();

    const error = q(root, "explain-error");
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain("unknown action label: FLY");
    expect(app.history).toHaveLength(0);
  });
});

describe("outcome distribution", () => {
  it("draws the histogram and the desired-action frequency verbatim", async () => {
    const svc = defaultService();
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);
    (q(root, "action-select") as HTMLSelectElement).value = "SHOOT";

    await app.explainNow();
    await app.walkReady;
    (q(root, "sim-n") as HTMLInputElement).value = "250";
    await app.simulateNow();

    const simCall = svc
      .callsTo("/api/simulate")
      .map((c) => c.body as { n: number; actions: string[] })
      .find((b) => b.n === 250);
    expect(simCall?.actions).toEqual(["RIGHT", "SHOOT"]);

    expect(q(root, "freq-desired").textContent).toBe(
      "SHOOT chosen after 0.7 of 250 walks",
    );
    const rows = root.querySelectorAll('[data-testid="outcome-row"]');
    expect(rows).toHaveLength(2);
    expect(rows[0]?.textContent).toContain("175/250 (0.7)");
    expect(rows[1]?.textContent).toContain("terminal");
    expect(q(root, "histogram").querySelector(".mini-render")?.textContent).toBe(
      HISTOGRAM.outcomes[0]!.render,
    );
  });

  it("echoes the current state when an identity plan is simulated", async () => {
    const svc = defaultService();
    svc.on("POST", "/api/explain", () => ({ body: EXPLAIN_IDENTITY }));
    svc.on("POST", "/api/simulate", (body) => {
      const req = body as { n: number };
      return {
        body: {
          n: req.n,
          seed: 7,
          outcomes: [
            {
              state: FACTUAL,
              render: "echo",
              terminal: false,
              count: req.n,
              fraction: 1,
            },
          ],
          action_frequencies: { UP: 1 },
        },
      };
    });
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);
    (q(root, "action-select") as HTMLSelectElement).value = "UP";

    await app.explainNow();
    (q(root, "sim-n") as HTMLInputElement).value = "100";
    await app.simulateNow();

    const call = svc.callsTo("/api/simulate")[0]?.body as { actions: string[] };
    expect(call.actions).toEqual([]);
    const rows = root.querySelectorAll('[data-testid="outcome-row"]');
    expect(rows).toHaveLength(1);
    expect(rows[0]?.textContent).toContain("100/100 (1)");
    expect(q(root, "freq-desired").textContent).toBe(
      "UP chosen after 1 of 100 walks",
    );
  });

  it("lets simulations overlap and shows the latest response", async () => {
    const svc = defaultService();
    const resolvers: Array<() => void> = [];
    svc.on("POST", "/api/simulate", (body) => {
      const req = body as { n: number; actions: string[]; seed?: number };
      if (req.n === 1) {
        // Walkthrough prefixes resolve immediately.
        return {
          body: {
            n: 1,
            seed: req.seed ?? 0,
            outcomes: [
              {
                state: FACTUAL,
                render: "step",
                terminal: false,
                count: 1,
                fraction: 1,
              },
            ],
            action_frequencies: {},
          },
        };
      }
      return new Promise((resolve) => {
        resolvers.push(() =>
          resolve({ body: { ...HISTOGRAM, n: req.n } }),
        );
      });
    });
    const { app, root } = await makeApp(svc);
    setState(app, root, FACTUAL);
    await app.explainNow();
    await app.walkReady;

    (q(root, "sim-n") as HTMLInputElement).value = "100";
    const first = app.simulateNow();
    (q(root, "sim-n") as HTMLInputElement).value = "200";
    const second = app.simulateNow();
    expect(resolvers).toHaveLength(2);

    resolvers[0]!();
    resolvers[1]!();
    await Promise.all([first, second]);

    expect(q(root, "freq-desired").textContent).toContain("of 200 walks");
  });
});
