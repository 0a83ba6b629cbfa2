import { describe, expect, it } from "vitest";

import {
  InvalidStateError,
  actionGlyph,
  parseFeatures,
  renderActionStrip,
  renderBoard,
} from "../src/board.js";

const GEO = { gridSize: 5, maxHp: 3, featureLength: 9 };
const LEGAL = [3, 1, 0, 0, 1, 0, 2, 0, 1];

function cells(board: HTMLElement): HTMLElement[] {
  return Array.from(board.querySelectorAll(".cell")) as HTMLElement[];
}

describe("parseFeatures", () => {
  it("accepts a legal vector", () => {
    const parsed = parseFeatures(LEGAL, GEO);
    expect(parsed.agent).toEqual([3, 1]);
    expect(parsed.dragon).toEqual([0, 0]);
    expect(parsed.treeHp).toEqual([1, 0, 2, 0, 1]);
  });

  it.each([
    [[1, 2, 3], /expected 9 features/],
    [[3, 1.5, 0, 0, 1, 0, 2, 0, 1], /integers/],
    [[3, 9, 0, 0, 1, 0, 2, 0, 1], /inside the 5x5 grid/],
    [[0, 0, 0, 0, 1, 0, 2, 0, 1], /share a cell/],
    [[3, 1, 0, 0, 4, 0, 2, 0, 1], /hit points/],
    [[0, 2, 3, 3, 1, 0, 2, 0, 1], /live tree/],
  ])("rejects %j", (features, message) => {
    expect(() => parseFeatures(features as number[], GEO)).toThrow(message);
    expect(() => parseFeatures(features as number[], GEO)).toThrow(
      InvalidStateError,
    );
  });
});

describe("renderBoard", () => {
  it("draws a full grid with agent, dragon, and tinted trees", () => {
    const board = renderBoard(LEGAL, GEO);
    const grid = cells(board);
    expect(grid).toHaveLength(25);

    const agent = grid[3 * 5 + 1]!;
    expect(agent.textContent).toBe("A");
    expect(agent.classList.contains("agent")).toBe(true);

    const dragon = grid[0]!;
    expect(dragon.textContent).toBe("D");
    expect(dragon.classList.contains("dragon")).toBe(true);

    const strongTree = grid[2 * 5 + 2]!;
    expect(strongTree.textContent).toBe("2");
    expect(strongTree.classList.contains("hp-2")).toBe(true);

    const weakTree = grid[4 * 5 + 2]!;
    expect(weakTree.textContent).toBe("1");
    expect(weakTree.classList.contains("hp-1")).toBe(true);
    // Different hit points get different tint classes.
    expect(weakTree.className).not.toBe(strongTree.className);
  });

  it("tints a full-strength tree differently from a weak one", () => {
    const board = renderBoard([3, 1, 0, 0, 3, 0, 1, 0, 0], GEO);
    const grid = cells(board);
    const strong = grid[2]!;
    const weak = grid[2 * 5 + 2]!;
    expect(strong.textContent).toBe("3");
    expect(weak.textContent).toBe("1");
    expect(strong.classList.contains("hp-3")).toBe(true);
    expect(weak.classList.contains("hp-1")).toBe(true);
    expect(strong.className).not.toBe(weak.className);
  });

  it("marks the fertile middle column", () => {
    const board = renderBoard(LEGAL, GEO);
    const fertile = cells(board).filter((c) => c.classList.contains("fertile"));
    expect(fertile).toHaveLength(5);
  });

  it("places an overlay badge on the requested cell", () => {
    const board = renderBoard(LEGAL, GEO, { row: 3, col: 1, glyph: "→" });
    const badge = cells(board)[3 * 5 + 1]!.querySelector(".badge");
    expect(badge?.textContent).toBe("→");
    expect(board.querySelectorAll(".badge")).toHaveLength(1);
  });

  it("refuses to draw an invalid vector", () => {
    expect(() => renderBoard([1, 2, 3], GEO)).toThrow(InvalidStateError);
  });
});

describe("renderActionStrip", () => {
  it("renders one chip per action in order", () => {
    const strip = renderActionStrip(["RIGHT", "SHOOT"], 5);
    const chips = Array.from(strip.querySelectorAll(".action-chip"));
    expect(chips.map((c) => c.textContent)).toEqual([
      "→ RIGHT",
      "× SHOOT",
    ]);
  });

  it("highlights the active step", () => {
    const strip = renderActionStrip(["UP", "UP", "WAIT"], 5, 1);
    const chips = strip.querySelectorAll(".action-chip");
    expect(chips[0]?.classList.contains("active")).toBe(false);
    expect(chips[1]?.classList.contains("active")).toBe(true);
  });

  it("rejects plans longer than the horizon", () => {
    const plan = ["UP", "UP", "UP", "UP", "UP", "UP"];
    expect(() => renderActionStrip(plan, 5)).toThrow(/horizon/);
  });
});

describe("actionGlyph", () => {
  it("maps every move to a distinct glyph", () => {
    const labels = ["UP", "DOWN", "LEFT", "RIGHT", "SHOOT", "CHOP", "WAIT"];
    const glyphs = labels.map(actionGlyph);
    expect(new Set(glyphs).size).toBe(labels.length);
    expect(glyphs).not.toContain("?");
  });

  it("falls back to a placeholder for unknown labels", () => {
    expect(actionGlyph("FLY")).toBe("?");
  });
});
