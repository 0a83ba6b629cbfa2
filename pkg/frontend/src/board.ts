// DOM rendering for grid states and action plans. Validation here mirrors
// the server's structural legality rules so bad vectors get an inline
// message instead of a half-drawn board; anything subtler is left to the
// server's 422 responses.

export interface BoardGeometry {
  gridSize: number;
  maxHp: number;
  featureLength: number;
}

export class InvalidStateError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InvalidStateError";
  }
}

export interface ParsedState {
  agent: [number, number];
  dragon: [number, number];
  treeHp: number[];
}

const ACTION_GLYPHS: Record<string, string> = {
  UP: "↑",
  DOWN: "↓",
  LEFT: "←",
  RIGHT: "→",
  SHOOT: "×",
  CHOP: "⚒",
  WAIT: "○",
};

export function actionGlyph(label: string): string {
  return ACTION_GLYPHS[label] ?? "?";
}

export function parseFeatures(
  features: number[],
  geo: BoardGeometry,
): ParsedState {
  if (features.length !== geo.featureLength) {
    throw new InvalidStateError(
      `expected ${geo.featureLength} features, got ${features.length}`,
    );
  }
  if (!features.every((v) => Number.isInteger(v))) {
    throw new InvalidStateError("features must all be integers");
  }
  const [ar, ac, dr, dc] = features as [number, number, number, number];
  const size = geo.gridSize;
  const inGrid = (v: number) => v >= 0 && v < size;
  if (![ar, ac, dr, dc].every(inGrid)) {
    throw new InvalidStateError(`positions must lie inside the ${size}x${size} grid`);
  }
  if (ar === dr && ac === dc) {
    throw new InvalidStateError("agent and dragon cannot share a cell");
  }
  const treeHp = features.slice(4, 4 + size);
  if (!treeHp.every((hp) => hp >= 0 && hp <= geo.maxHp)) {
    throw new InvalidStateError(`tree hit points must be in [0, ${geo.maxHp}]`);
  }
  const mid = Math.floor(size / 2);
  if ((ac === mid && (treeHp[ar] ?? 0) > 0) || (dc === mid && (treeHp[dr] ?? 0) > 0)) {
    throw new InvalidStateError("a live tree cell cannot also hold the agent or dragon");
  }
  return { agent: [ar, ac], dragon: [dr, dc], treeHp };
}

export interface BoardBadge {
  row: number;
  col: number;
  glyph: string;
}

/** Draw one state as a CSS grid of cells; throws InvalidStateError on bad input. */
export function renderBoard(
  features: number[],
  geo: BoardGeometry,
  badge?: BoardBadge,
): HTMLElement {
  const parsed = parseFeatures(features, geo);
  const size = geo.gridSize;
  const mid = Math.floor(size / 2);
  const board = document.createElement("div");
  board.className = "board";
  board.style.gridTemplateColumns = `repeat(${size}, 1fr)`;
  for (let r = 0; r < size; r += 1) {
    for (let c = 0; c < size; c += 1) {
      const cell = document.createElement("span");
      cell.className = "cell";
      if (c === mid) cell.classList.add("fertile");
      const hp = c === mid ? (parsed.treeHp[r] ?? 0) : 0;
      if (r === parsed.agent[0] && c === parsed.agent[1]) {
        cell.classList.add("agent");
        cell.textContent = "A";
      } else if (r === parsed.dragon[0] && c === parsed.dragon[1]) {
        cell.classList.add("dragon");
        cell.textContent = "D";
      } else if (hp > 0) {
        cell.classList.add("tree", `hp-${hp}`);
        cell.textContent = String(hp);
      } else {
        cell.classList.add("empty");
        cell.textContent = "·";
      }
      if (badge && badge.row === r && badge.col === c) {
        const mark = document.createElement("span");
        mark.className = "badge";
        mark.textContent = badge.glyph;
        cell.appendChild(mark);
      }
      board.appendChild(cell);
    }
  }
  return board;
}

/**
 * The plan overlay: one arrow chip per action, in order. `maxLen` is the
 * horizon k; a plan longer than the horizon is a contract violation.
 */
export function renderActionStrip(
  actions: string[],
  maxLen: number,
  activeIndex = -1,
): HTMLElement {
  if (actions.length > maxLen) {
    throw new InvalidStateError(
      `plan has ${actions.length} actions but the horizon is ${maxLen}`,
    );
  }
  const strip = document.createElement("div");
  strip.className = "action-strip";
  actions.forEach((label, idx) => {
    const chip = document.createElement("span");
    chip.className = "action-chip";
    if (idx === activeIndex) chip.classList.add("active");
    chip.textContent = `${actionGlyph(label)} ${label}`;
    strip.appendChild(chip);
  });
  return strip;
}
