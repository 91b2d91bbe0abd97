import { describe, expect, it } from "vitest";

import {
  ExportFormatError,
  loadAgentExport,
  loadMarketExport,
  seriesForSkill,
} from "../src/exports.js";
import { agentExport, marketExport, tag } from "./fixtures.js";

describe("market export validation", () => {
  it("accepts a well-formed payload", () => {
    const exp = loadMarketExport(marketExport([[tag(1), 0.6, 0.9], [tag(2), 0.4, 0.1]]));
    expect(exp.agents).toHaveLength(2);
  });

  it("names the offending field", () => {
    const bad = marketExport([[tag(1), 1.0, 0.5]]) as Record<string, unknown>;
    bad["schema_version"] = 9;
    expect(() => loadMarketExport(bad)).toThrow(/schema_version: unsupported/);

    expect(() => loadMarketExport(marketExport([["nope", 1.0, 0.5]]))).toThrow(
      /agents\[0\]\.id12: expected 12 binary digits/,
    );
    expect(() => loadMarketExport(marketExport([[tag(1), -0.2, 0.5]]))).toThrow(
      /agents\[0\]\.approach_weight/,
    );
    expect(() => loadMarketExport(marketExport([[tag(1), 1.0, 1.5]]))).toThrow(
      /agents\[0\]\.wood_prob/,
    );
  });

  it("rejects the wrong game, zero weights, and duplicate tags", () => {
    expect(() => loadMarketExport(agentExport([0.5]))).toThrow(/game: expected "market"/);
    expect(() => loadMarketExport(marketExport([[tag(1), 0, 0.5], [tag(2), 0, 0.5]]))).toThrow(
      /weights sum to zero/,
    );
    expect(() => loadMarketExport(marketExport([[tag(3), 0.5, 0.5], [tag(3), 0.5, 0.5]]))).toThrow(
      /duplicate id12/,
    );
    expect(() => loadMarketExport("not an object")).toThrow(ExportFormatError);
    expect(() => loadMarketExport(marketExport([]))).toThrow(/agents: expected a non-empty/);
  });
});

describe("agent export validation", () => {
  it("accepts a well-formed payload and extracts per-skill series", () => {
    const exp = loadAgentExport(agentExport([0.2, 0.4], [0.9, 0.8]));
    expect(seriesForSkill(exp, "wood")).toEqual([0.2, 0.4]);
    expect(seriesForSkill(exp, "stone")).toEqual([0.9, 0.8]);
  });

  it("names the offending field", () => {
    const withBadSkill = agentExport([0.5]);
    (withBadSkill.epochs[0] as Record<string, unknown>)["skill"] = "gold";
    expect(() => loadAgentExport(withBadSkill)).toThrow(/epochs\[0\]\.skill/);

    const withBadProb = agentExport([0.5, 0.6]);
    (withBadProb.epochs[1] as Record<string, unknown>)["skill_consistent_prob"] = -1;
    expect(() => loadAgentExport(withBadProb)).toThrow(/epochs\[1\]\.skill_consistent_prob/);
  });

  it("rejects gaps in the epoch series", () => {
    const exp = loadAgentExport(agentExport([0.5, 0.5, 0.5]));
    exp.epochs = exp.epochs.filter((e) => !(e.skill === "wood" && e.epoch === 2));
    expect(() => seriesForSkill(exp, "wood")).toThrow(/contiguous epochs/);
  });
});
