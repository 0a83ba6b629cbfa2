import { ApiClient, ApiError } from "./api.js";
import {
  BoardGeometry,
  InvalidStateError,
  actionGlyph,
  renderActionStrip,
  renderBoard,
} from "./board.js";
import {
  METHOD_NAMES,
  type ExplainRequest,
  type ExplainResponse,
  type HealthResponse,
  type MethodName,
  type SimulateResponse,
} from "./types.js";

export interface SessionEntry {
  id: number;
  request: ExplainRequest;
  response: ExplainResponse;
}

interface WalkStep {
  state: number[];
  terminal: boolean;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) node.textContent = text;
  return node;
}

function byTestId(root: HTMLElement, id: string): HTMLElement {
  const node = root.querySelector(`[data-testid="${id}"]`);
  if (!node) throw new Error(`missing element ${id}`);
  return node as HTMLElement;
}

/** Numbers from the API are shown exactly as received, never reformatted. */
function verbatim(value: number): string {
  return String(value);
}

const PROPERTY_BARS: ReadonlyArray<{
  key: string;
  label: string;
  pick: (cf: NonNullable<ExplainResponse["counterfactual"]>) => number;
  scale: (value: number, geo: BoardGeometry) => number;
}> = [
  {
    key: "reachability",
    label: "reachability",
    pick: (cf) => cf.properties.reachability_hat,
    scale: (v) => v,
  },
  {
    key: "cost",
    label: "cost",
    pick: (cf) => cf.properties.cost_hat,
    scale: (v) => v,
  },
  {
    key: "certainty",
    label: "certainty",
    pick: (cf) => cf.success_rate,
    scale: (v) => v,
  },
  {
    key: "proximity",
    label: "proximity",
    pick: (cf) => cf.properties.proximity,
    scale: (v) => Math.min(1, v),
  },
  {
    key: "sparsity",
    label: "sparsity",
    pick: (cf) => cf.properties.sparsity,
    scale: (v, geo) => v / geo.featureLength,
  },
  {
    key: "dmc",
    label: "dmc",
    pick: (cf) => cf.properties.dmc,
    scale: (v) => Math.min(1, v),
  },
];

export class ExplorerApp {
  health: HealthResponse | null = null;
  factual: number[] | null = null;
  readonly history: SessionEntry[] = [];
  current: SessionEntry | null = null;

  /** Resolves when the in-flight explain settles; tests await this. */
  pending: Promise<void> | null = null;
  /** Resolves when the walkthrough boards for the current entry are loaded. */
  walkReady: Promise<void> | null = null;

  private geo: BoardGeometry | null = null;
  private explainInFlight = false;
  private sampleSeed = 0;
  private walkToken = 0;
  private walkSteps: WalkStep[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.health = await this.api.health();
    this.geo = {
      gridSize: this.health.grid_size,
      maxHp: this.health.max_hp,
      featureLength: this.health.feature_length,
    };
    this.buildLayout();
  }

  // -- layout ----------------------------------------------------------------

  private buildLayout(): void {
    const health = this.health!;
    this.root.textContent = "";

    const header = el("header", { class: "app-header" });
    header.appendChild(el("h1", {}, "Counterfactual plan explorer"));
    const ready = health.ready ? "ready" : "artifacts missing";
    header.appendChild(
      el(
        "span",
        { class: "health-line", "data-testid": "health-line" },
        `${ready} · config ${health.config_hash.slice(0, 8)}`,
      ),
    );
    this.root.appendChild(header);

    const columns = el("div", { class: "columns" });
    columns.appendChild(this.buildQueryPanel());
    columns.appendChild(this.buildResultPanel());
    this.root.appendChild(columns);

    this.root.appendChild(this.buildWalkPanel());
    this.root.appendChild(this.buildSimPanel());
    this.root.appendChild(this.buildHistoryPanel());

    if (!health.ready) {
      (byTestId(this.root, "explain-btn") as HTMLButtonElement).disabled = true;
    }
  }

  private buildQueryPanel(): HTMLElement {
    const health = this.health!;
    const panel = el("section", { class: "panel", "data-testid": "query-panel" });
    panel.appendChild(el("h2", {}, "Query"));

    const stateRow = el("div", { class: "row" });
    const stateInput = el("input", {
      type: "text",
      "data-testid": "state-input",
      placeholder: `${health.feature_length} integers, e.g. [3,1,0,0,1,0,2,0,1]`,
    });
    stateInput.addEventListener("change", () => this.readStateInput());
    const sampleBtn = el("button", { "data-testid": "sample-btn" }, "Sample");
    sampleBtn.addEventListener("click", () => void this.sample());
    stateRow.append(el("label", {}, "State"), stateInput, sampleBtn);
    panel.appendChild(stateRow);
    panel.appendChild(
      el("div", { class: "error", "data-testid": "state-error", hidden: "" }),
    );

    const factualWrap = el("div", { class: "board-wrap" });
    factualWrap.appendChild(el("h3", {}, "Factual state"));
    factualWrap.appendChild(el("div", { "data-testid": "factual-board" }));
    factualWrap.appendChild(
      el("div", { class: "note", "data-testid": "predicted-action" }),
    );
    panel.appendChild(factualWrap);

    const actionRow = el("div", { class: "row" });
    const actionSelect = el("select", { "data-testid": "action-select" });
    for (const label of health.actions) {
      actionSelect.appendChild(el("option", { value: label }, label));
    }
    actionRow.append(el("label", {}, "Desired action"), actionSelect);
    panel.appendChild(actionRow);

    const methodRow = el("div", { class: "row" });
    const methodSelect = el("select", { "data-testid": "method-select" });
    for (const name of METHOD_NAMES) {
      methodSelect.appendChild(el("option", { value: name }, name));
    }
    methodRow.append(el("label", {}, "Method"), methodSelect);
    panel.appendChild(methodRow);

    const budget = el("details", { class: "budget" });
    budget.appendChild(el("summary", {}, "Budget and seed"));
    for (const [key, hint] of [
      ["T", "iterations"],
      ["N", "rollouts"],
      ["k", "horizon"],
      ["seed", "seed"],
    ] as const) {
      const row = el("div", { class: "row" });
      row.append(
        el("label", {}, key),
        el("input", {
          type: "number",
          "data-testid": `input-${key}`,
          placeholder: hint,
        }),
      );
      budget.appendChild(row);
    }
    panel.appendChild(budget);

    const explainBtn = el("button", { "data-testid": "explain-btn" }, "Explain");
    explainBtn.addEventListener("click", () => void this.explainNow());
    panel.appendChild(explainBtn);
    panel.appendChild(
      el("div", { class: "error", "data-testid": "explain-error", hidden: "" }),
    );
    return panel;
  }

  private buildResultPanel(): HTMLElement {
    const panel = el("section", {
      class: "panel",
      "data-testid": "result-panel",
    });
    panel.appendChild(el("h2", {}, "Explanation"));
    panel.appendChild(el("div", { "data-testid": "result-body" }));
    return panel;
  }

  private buildWalkPanel(): HTMLElement {
    const panel = el("section", {
      class: "panel",
      "data-testid": "walk-panel",
      hidden: "",
    });
    panel.appendChild(el("h2", {}, "Plan walkthrough"));
    panel.appendChild(
      el("p", { class: "note" }, "One sampled unrolling of the plan, step by step."),
    );
    const slider = el("input", {
      type: "range",
      min: "0",
      max: "0",
      value: "0",
      "data-testid": "walk-slider",
    });
    slider.addEventListener("input", () =>
      this.renderWalkStep(Number(slider.value)),
    );
    panel.appendChild(slider);
    panel.appendChild(el("div", { class: "note", "data-testid": "walk-caption" }));
    panel.appendChild(el("div", { "data-testid": "walk-board" }));
    panel.appendChild(el("div", { "data-testid": "walk-strip" }));
    return panel;
  }

  private buildSimPanel(): HTMLElement {
    const panel = el("section", {
      class: "panel",
      "data-testid": "sim-panel",
      hidden: "",
    });
    panel.appendChild(el("h2", {}, "Outcome distribution"));
    const row = el("div", { class: "row" });
    const nInput = el("input", {
      type: "number",
      value: "100",
      min: "1",
      max: "10000",
      "data-testid": "sim-n",
    });
    const runBtn = el("button", { "data-testid": "simulate-btn" }, "Simulate plan");
    runBtn.addEventListener("click", () => void this.simulateNow());
    row.append(el("label", {}, "Walks"), nInput, runBtn);
    panel.appendChild(row);
    panel.appendChild(
      el("div", { class: "error", "data-testid": "sim-error", hidden: "" }),
    );
    panel.appendChild(el("div", { "data-testid": "frequencies" }));
    panel.appendChild(el("div", { "data-testid": "histogram" }));
    return panel;
  }

  private buildHistoryPanel(): HTMLElement {
    const panel = el("section", {
      class: "panel",
      "data-testid": "history-panel",
    });
    panel.appendChild(el("h2", {}, "History"));
    panel.appendChild(el("ol", { "data-testid": "history-list" }));
    return panel;
  }

  // -- factual state ---------------------------------------------------------

  private parseStateText(text: string): number[] {
    const trimmed = text.trim();
    const body = trimmed.startsWith("[") ? trimmed : `[${trimmed}]`;
    let values: unknown;
    try {
      values = JSON.parse(body);
    } catch {
      throw new InvalidStateError("not a list of integers");
    }
    if (
      !Array.isArray(values) ||
      !values.every((v) => typeof v === "number" && Number.isInteger(v))
    ) {
      throw new InvalidStateError("not a list of integers");
    }
    return values as number[];
  }

  readStateInput(): void {
    const input = byTestId(this.root, "state-input") as HTMLInputElement;
    const errorBox = byTestId(this.root, "state-error");
    const boardBox = byTestId(this.root, "factual-board");
    const predicted = byTestId(this.root, "predicted-action");
    try {
      const features = this.parseStateText(input.value);
      const board = renderBoard(features, this.geo!);
      this.factual = features;
      errorBox.hidden = true;
      errorBox.textContent = "";
      boardBox.textContent = "";
      boardBox.appendChild(board);
      predicted.textContent = "";
      void this.showPrediction(features, predicted);
    } catch (err) {
      if (!(err instanceof InvalidStateError)) throw err;
      this.factual = null;
      boardBox.textContent = "";
      predicted.textContent = "";
      errorBox.textContent = `Invalid state: ${err.message}`;
      errorBox.hidden = false;
    }
  }

  private async showPrediction(
    features: number[],
    target: HTMLElement,
  ): Promise<void> {
    try {
      const resp = await this.api.predict(features);
      if (this.factual === features) {
        target.textContent = `policy action: ${resp.action}`;
      }
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      target.textContent = `prediction unavailable: ${err.message}`;
    }
  }

  async sample(): Promise<void> {
    const errorBox = byTestId(this.root, "state-error");
    try {
      const resp = await this.api.sampleStates(1, this.sampleSeed);
      this.sampleSeed += 1;
      const sampled = resp.states[0];
      if (!sampled) return;
      const input = byTestId(this.root, "state-input") as HTMLInputElement;
      input.value = JSON.stringify(sampled.state);
      this.readStateInput();
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      errorBox.textContent = `sampling failed: ${err.message}`;
      errorBox.hidden = false;
    }
  }

  // -- explanation -----------------------------------------------------------

  private optionalInt(testId: string): number | undefined {
    const input = byTestId(this.root, testId) as HTMLInputElement;
    if (input.value.trim() === "") return undefined;
    const value = Number(input.value);
    return Number.isInteger(value) && value >= 0 ? value : undefined;
  }

  buildRequest(): ExplainRequest | null {
    if (this.factual === null) return null;
    const action = (byTestId(this.root, "action-select") as HTMLSelectElement)
      .value;
    const method = (byTestId(this.root, "method-select") as HTMLSelectElement)
      .value as MethodName;
    const req: ExplainRequest = { state: this.factual, action, method };
    const T = this.optionalInt("input-T");
    const N = this.optionalInt("input-N");
    const k = this.optionalInt("input-k");
    const seed = this.optionalInt("input-seed");
    if (T !== undefined) req.T = T;
    if (N !== undefined) req.N = N;
    if (k !== undefined) req.k = k;
    if (seed !== undefined) req.seed = seed;
    return req;
  }

  /** At most one explanation request may be in flight at a time. */
  explainNow(): Promise<void> {
    if (this.explainInFlight) return this.pending ?? Promise.resolve();
    const errorBox = byTestId(this.root, "explain-error");
    errorBox.hidden = true;
    errorBox.textContent = "";
    const req = this.buildRequest();
    if (req === null) {
      errorBox.textContent = "Enter a valid state first.";
      errorBox.hidden = false;
      return Promise.resolve();
    }
    this.explainInFlight = true;
    const btn = byTestId(this.root, "explain-btn") as HTMLButtonElement;
    btn.disabled = true;
    this.pending = this.api
      .explain(req)
      .then((response) => {
        const entry: SessionEntry = {
          id: this.history.length,
          request: req,
          response,
        };
        this.history.push(entry);
        this.appendHistoryItem(entry);
        this.showEntry(entry);
      })
      .catch((err: unknown) => {
        if (!(err instanceof ApiError)) throw err;
        errorBox.textContent = `explain failed: ${err.message}`;
        errorBox.hidden = false;
      })
      .finally(() => {
        this.explainInFlight = false;
        btn.disabled = !this.health!.ready;
      });
    return this.pending;
  }

  private appendHistoryItem(entry: SessionEntry): void {
    const list = byTestId(this.root, "history-list");
    const item = el("li", { "data-entry": String(entry.id) });
    const cf = entry.response.counterfactual;
    const outcome = !entry.response.found
      ? "nothing found"
      : cf && cf.actions.length === 0
        ? "identity"
        : `loss ${verbatim(cf!.loss)}`;
    const link = el(
      "a",
      { href: "#" },
      `#${entry.id} ${entry.response.method} → ${entry.request.action}: ${outcome}`,
    );
    link.addEventListener("click", (event) => {
      event.preventDefault();
      this.showEntry(entry);
    });
    item.appendChild(link);
    list.appendChild(item);
  }

  showEntry(entry: SessionEntry): void {
    this.current = entry;
    const body = byTestId(this.root, "result-body");
    body.textContent = "";
    body.appendChild(this.renderMeta(entry));

    const walkPanel = byTestId(this.root, "walk-panel");
    const simPanel = byTestId(this.root, "sim-panel");
    const cf = entry.response.counterfactual;

    if (!entry.response.found || cf === null) {
      body.appendChild(this.renderEmptyState(entry));
      walkPanel.hidden = true;
      simPanel.hidden = true;
      this.walkReady = null;
      return;
    }

    if (cf.actions.length === 0) {
      const banner = el(
        "div",
        { class: "banner", "data-testid": "identity-banner" },
        `The policy already chooses ${entry.request.action} here; ` +
          "no plan is needed.",
      );
      body.appendChild(banner);
      walkPanel.hidden = true;
      simPanel.hidden = false;
      this.resetSimPanel();
      this.walkReady = null;
      return;
    }

    body.appendChild(this.renderComparison(entry, cf));
    simPanel.hidden = false;
    this.resetSimPanel();
    walkPanel.hidden = false;
    this.walkReady = this.buildWalk(entry);
  }

  private renderMeta(entry: SessionEntry): HTMLElement {
    const d = entry.response.diagnostics;
    const parts = [
      `method ${entry.response.method}`,
      `seed ${verbatim(entry.response.seed)}`,
      `nodes ${verbatim(d.nodes_explored)}`,
      `valid candidates ${verbatim(d.valid_candidates)}`,
      `elapsed ${verbatim(d.elapsed_ms)} ms`,
    ];
    if (d.generations !== undefined) {
      parts.push(`generations ${verbatim(d.generations)}`);
    }
    if (d.timed_out) parts.push("timed out");
    return el(
      "div",
      { class: "note", "data-testid": "result-meta" },
      parts.join(" · "),
    );
  }

  private renderEmptyState(entry: SessionEntry): HTMLElement {
    const d = entry.response.diagnostics;
    const panel = el("div", {
      class: "empty-state",
      "data-testid": "empty-panel",
    });
    panel.appendChild(
      el(
        "p",
        {},
        `No counterfactual found for ${entry.request.action} within this budget.`,
      ),
    );
    const list = el("ul", {});
    list.appendChild(
      el("li", {}, `states explored: ${verbatim(d.nodes_explored)}`),
    );
    list.appendChild(
      el("li", {}, `valid candidates: ${verbatim(d.valid_candidates)}`),
    );
    if (d.timed_out !== undefined) {
      list.appendChild(el("li", {}, `timed out: ${d.timed_out ? "yes" : "no"}`));
    }
    panel.appendChild(list);
    panel.appendChild(
      el(
        "p",
        { class: "note" },
        "Try a larger budget, another method, or a different action.",
      ),
    );
    return panel;
  }

  private renderComparison(
    entry: SessionEntry,
    cf: NonNullable<ExplainResponse["counterfactual"]>,
  ): HTMLElement {
    const wrap = el("div", { "data-testid": "comparison" });

    const boards = el("div", { class: "board-pair" });
    const factualSide = el("div", { class: "board-wrap" });
    factualSide.appendChild(el("h3", {}, "Factual"));
    const factualBoard = renderBoard(entry.request.state, this.geo!);
    factualBoard.setAttribute("data-testid", "factual-board-result");
    factualSide.appendChild(factualBoard);
    const cfSide = el("div", { class: "board-wrap" });
    cfSide.appendChild(el("h3", {}, "Counterfactual"));
    const cfBoard = renderBoard(cf.state, this.geo!);
    cfBoard.setAttribute("data-testid", "cf-board");
    cfSide.appendChild(cfBoard);
    boards.append(factualSide, cfSide);
    wrap.appendChild(boards);

    const horizon = entry.request.k ?? cf.actions.length;
    const strip = renderActionStrip(cf.actions, horizon);
    strip.setAttribute("data-testid", "action-strip");
    wrap.appendChild(strip);

    const bars = el("div", { class: "bars", "data-testid": "prop-bars" });
    for (const spec of PROPERTY_BARS) {
      const value = spec.pick(cf);
      const row = el("div", { class: "bar-row", "data-testid": `bar-${spec.key}` });
      row.appendChild(el("span", { class: "bar-label" }, spec.label));
      const track = el("div", { class: "bar-track" });
      const fill = el("div", { class: "bar-fill" });
      const frac = Math.max(0, Math.min(1, spec.scale(value, this.geo!)));
      fill.style.width = `${frac * 100}%`;
      track.appendChild(fill);
      row.appendChild(track);
      row.appendChild(
        el(
          "span",
          { class: "bar-value", "data-testid": `bar-${spec.key}-value` },
          verbatim(value),
        ),
      );
      bars.appendChild(row);
    }
    wrap.appendChild(bars);

    wrap.appendChild(
      el(
        "div",
        { class: "note", "data-testid": "loss-value" },
        `loss: ${verbatim(cf.loss)}`,
      ),
    );
    return wrap;
  }

  // -- plan walkthrough ------------------------------------------------------

  /**
   * Fetch one consistent sampled trajectory by simulating every prefix of
   * the plan with n=1 and the explanation's seed. The service draws each
   * walk from a stream derived only from (seed, walk index), so prefix
   * walks share their random draws and the boards agree step by step.
   */
  private async buildWalk(entry: SessionEntry): Promise<void> {
    const token = ++this.walkToken;
    const cf = entry.response.counterfactual!;
    const caption = byTestId(this.root, "walk-caption");
    caption.textContent = "sampling walk…";
    const steps: WalkStep[] = [{ state: entry.request.state, terminal: false }];
    try {
      for (let i = 1; i <= cf.actions.length; i += 1) {
        const resp = await this.api.simulate({
          state: entry.request.state,
          actions: cf.actions.slice(0, i),
          n: 1,
          seed: entry.response.seed,
        });
        if (this.walkToken !== token) return;
        const outcome = resp.outcomes[0];
        if (!outcome) break;
        steps.push({ state: outcome.state, terminal: outcome.terminal });
      }
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      if (this.walkToken !== token) return;
      caption.textContent = `walk unavailable: ${err.message}`;
      return;
    }
    this.walkSteps = steps;
    const slider = byTestId(this.root, "walk-slider") as HTMLInputElement;
    slider.max = String(steps.length - 1);
    slider.value = "0";
    this.renderWalkStep(0);
  }

  renderWalkStep(step: number): void {
    const entry = this.current;
    if (!entry || !entry.response.counterfactual) return;
    const actions = entry.response.counterfactual.actions;
    const info = this.walkSteps[step];
    if (!info) return;

    let badge;
    const prev = this.walkSteps[step - 1];
    const label = actions[step - 1];
    if (step > 0 && prev && label !== undefined) {
      // The arrow sits on the agent's cell in the previous step: the move
      // taken from there produced the board now shown.
      badge = { row: prev.state[0]!, col: prev.state[1]!, glyph: actionGlyph(label) };
    }

    const boardBox = byTestId(this.root, "walk-board");
    boardBox.textContent = "";
    boardBox.appendChild(renderBoard(info.state, this.geo!, badge));

    const caption = byTestId(this.root, "walk-caption");
    const last = this.walkSteps.length - 1;
    const what = step === 0 ? "start" : `after ${label}`;
    const mark = info.terminal ? " (terminal)" : "";
    caption.textContent = `step ${step}/${last} · ${what}${mark}`;

    const stripBox = byTestId(this.root, "walk-strip");
    stripBox.textContent = "";
    const horizon = entry.request.k ?? actions.length;
    stripBox.appendChild(renderActionStrip(actions, horizon, step - 1));
  }

  // -- outcome distribution ----------------------------------------------------

  private resetSimPanel(): void {
    byTestId(this.root, "histogram").textContent = "";
    byTestId(this.root, "frequencies").textContent = "";
    const errorBox = byTestId(this.root, "sim-error");
    errorBox.hidden = true;
    errorBox.textContent = "";
  }

  /** Simulations may overlap; the latest response simply replaces the view. */
  async simulateNow(): Promise<void> {
    const entry = this.current;
    if (!entry || !entry.response.counterfactual) return;
    const nInput = byTestId(this.root, "sim-n") as HTMLInputElement;
    const n = Number(nInput.value);
    const errorBox = byTestId(this.root, "sim-error");
    try {
      const resp = await this.api.simulate({
        state: entry.request.state,
        actions: entry.response.counterfactual.actions,
        n,
        seed: entry.response.seed,
      });
      errorBox.hidden = true;
      this.renderHistogram(resp, entry.request.action);
    } catch (err) {
      if (!(err instanceof ApiError)) throw err;
      errorBox.textContent = `simulation failed: ${err.message}`;
      errorBox.hidden = false;
    }
  }

  private renderHistogram(resp: SimulateResponse, desired: string): void {
    const freqBox = byTestId(this.root, "frequencies");
    freqBox.textContent = "";
    const desiredFreq = resp.action_frequencies[desired] ?? 0;
    freqBox.appendChild(
      el(
        "p",
        { "data-testid": "freq-desired" },
        `${desired} chosen after ${verbatim(desiredFreq)} of ${verbatim(resp.n)} walks`,
      ),
    );
    const list = el("ul", { class: "freq-list" });
    for (const [label, freq] of Object.entries(resp.action_frequencies)) {
      const item = el("li", {}, `${label}: ${verbatim(freq)}`);
      if (label === desired) item.classList.add("desired");
      list.appendChild(item);
    }
    freqBox.appendChild(list);

    const histogram = byTestId(this.root, "histogram");
    histogram.textContent = "";
    for (const outcome of resp.outcomes) {
      const row = el("div", { class: "outcome-row", "data-testid": "outcome-row" });
      const pre = el("pre", { class: "mini-render" }, outcome.render);
      const track = el("div", { class: "bar-track" });
      const fill = el("div", { class: "bar-fill" });
      fill.style.width = `${outcome.fraction * 100}%`;
      track.appendChild(fill);
      const text = el(
        "span",
        { class: "bar-value" },
        `${verbatim(outcome.count)}/${verbatim(resp.n)} (${verbatim(outcome.fraction)})` +
          (outcome.terminal ? " · terminal" : ""),
      );
      row.append(pre, track, text);
      histogram.appendChild(row);
    }
  }
}
