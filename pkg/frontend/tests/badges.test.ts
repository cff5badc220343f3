import { describe, expect, it } from "vitest";

import { badgeStates } from "../src/badges.js";
import type { Evidence, ScoreVector } from "../src/types.js";

const CLEAN: Evidence = { s1: [], s2: [], s3: [], s4: [], s5: [] };

describe("badgeStates", () => {
  it("renders five badges in flag order", () => {
    const badges = badgeStates([1, 1, 1, 1, 1], CLEAN);
    expect(badges.map((b) => b.flag)).toEqual(["s1", "s2", "s3", "s4", "s5"]);
    expect(badges.every((b) => b.state === "ok")).toBe(true);
  });

  it("warns when any number is ungrounded", () => {
    const scores: ScoreVector = [0.8, 1, 1, 1, 1];
    const evidence: Evidence = { ...CLEAN, s1: ["88231 not in staged rows"] };
    const badges = badgeStates(scores, evidence);
    expect(badges[0]).toMatchObject({ flag: "s1", state: "warn", value: "0.8" });
    expect(badges[0]?.evidence).toEqual(["88231 not in staged rows"]);
  });

  it("warns when a binary flag is zero", () => {
    for (const idx of [1, 2, 3]) {
      const scores: ScoreVector = [1, 1, 1, 1, 1];
      scores[idx] = 0;
      const flag = `s${idx + 1}`;
      const evidence = { ...CLEAN, [flag]: ["finding"] } as Evidence;
      const badges = badgeStates(scores, evidence);
      expect(badges[idx]?.state).toBe("warn");
      expect(badges.filter((b) => b.state === "warn")).toHaveLength(1);
    }
  });

  it("shows n/a for a non-comparative answer", () => {
    const badges = badgeStates([1, 1, 1, 1, -1], CLEAN);
    expect(badges[4]).toMatchObject({ flag: "s5", state: "na", value: "n/a" });
  });

  it("warns on a contradicted direction", () => {
    const evidence: Evidence = { ...CLEAN, s5: ["queried direction missing"] };
    const badges = badgeStates([1, 1, 1, 1, 0], evidence);
    expect(badges[4]?.state).toBe("warn");
  });

  it("keeps evidence verbatim", () => {
    const line = "('3.2', 'number not present in staged rows or query')";
    const evidence: Evidence = { ...CLEAN, s1: [line] };
    const badges = badgeStates([0, 1, 1, 1, -1], evidence);
    expect(badges[0]?.evidence).toEqual([line]);
  });

  it("handles a missing evidence map", () => {
    const badges = badgeStates([1, 1, 1, 1, 1], null);
    expect(badges.every((b) => b.evidence.length === 0)).toBe(true);
  });
});
