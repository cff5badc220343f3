/**
 * Score badge mapping: a pure function from the API's vector to display
 * states. The client never recomputes scores; it only colors them.
 */

import type { Evidence, FlagName, ScoreVector } from "./types.js";

export type BadgeState = "ok" | "warn" | "na";

export interface Badge {
  flag: FlagName;
  label: string;
  /** Text shown inside the badge, e.g. "1", "0.8", "n/a". */
  value: string;
  state: BadgeState;
  evidence: string[];
}

const LABELS: Record<FlagName, string> = {
  s1: "numbers grounded in staged rows",
  s2: "entities known and consistent",
  s3: "SQL filters match column vocabulary",
  s4: "paraphrased, no instruction copy",
  s5: "direction language consistent",
};

function formatValue(flag: FlagName, value: number): string {
  if (flag === "s5" && value === -1) return "n/a";
  return Number.isInteger(value) ? String(value) : value.toFixed(2).replace(/0+$/, "");
}

function stateOf(flag: FlagName, value: number): BadgeState {
  if (flag === "s5" && value === -1) return "na";
  if (flag === "s1") return value < 1 ? "warn" : "ok";
  return value === 0 ? "warn" : "ok";
}

export function badgeStates(scores: ScoreVector, evidence: Evidence | null): Badge[] {
  const entries: Array<[FlagName, number]> = [
    ["s1", scores[0]],
    ["s2", scores[1]],
    ["s3", scores[2]],
    ["s4", scores[3]],
    ["s5", scores[4]],
  ];
  return entries.map(([flag, value]) => ({
    flag,
    label: LABELS[flag],
    value: formatValue(flag, value),
    state: stateOf(flag, value),
    evidence: evidence ? evidence[flag] : [],
  }));
}
