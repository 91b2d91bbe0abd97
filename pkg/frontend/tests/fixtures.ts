/** Builders for small, valid export payloads used across the test files. */

import type { AgentEpochEntry, AgentExport, MarketExport } from "../src/exports.js";

export function marketExport(
  agents: Array<[string, number, number]>,
  overrides: Partial<MarketExport> = {},
): MarketExport {
  return {
    schema_version: 1,
    game: "market",
    run_id: "generational_s60_seed0",
    timepoint: "final",
    window_epochs: [190, 200],
    agents: agents.map(([id12, approach_weight, wood_prob], i) => ({
      id12,
      color: ["purple", "yellow", "cyan"][i % 3]!,
      approach_weight,
      wood_prob,
    })),
    ...overrides,
  };
}

export function tag(n: number): string {
  return n.toString(2).padStart(12, "0");
}

export function agentExport(
  woodProbs: number[],
  stoneProbs: number[] = woodProbs,
  overrides: Partial<AgentExport> = {},
): AgentExport {
  const epochs: AgentEpochEntry[] = [];
  woodProbs.forEach((p, i) => {
    epochs.push({ epoch: i + 1, skill: "wood", skill_consistent_prob: p, n_events: 3 });
  });
  stoneProbs.forEach((p, i) => {
    epochs.push({ epoch: i + 1, skill: "stone", skill_consistent_prob: p, n_events: 3 });
  });
  return {
    schema_version: 1,
    game: "agent",
    run_id: "generational_s60_seed0",
    timepoint: "final",
    window_epochs: [0, woodProbs.length],
    epochs,
    ...overrides,
  };
}
