/** Loading and validation of the simulator's trajectory export files.
 *
 * Malformed files are rejected at load time with the offending field named,
 * so a bad deployment fails before a participant sees a single trial.
 */

import type { ResourceName } from "./constants.js";

export class ExportFormatError extends Error {
  constructor(public readonly field: string, problem: string) {
    super(`${field}: ${problem}`);
    this.name = "ExportFormatError";
  }
}

export interface MarketAgentEntry {
  id12: string;
  color: string;
  approach_weight: number;
  wood_prob: number;
}

export interface MarketExport {
  schema_version: number;
  game: "market";
  run_id: string;
  timepoint: string;
  window_epochs: [number, number];
  agents: MarketAgentEntry[];
}

export interface AgentEpochEntry {
  epoch: number;
  skill: ResourceName;
  skill_consistent_prob: number;
  n_events: number;
}

export interface AgentExport {
  schema_version: number;
  game: "agent";
  run_id: string;
  timepoint: string;
  window_epochs: [number, number];
  epochs: AgentEpochEntry[];
}

const ID12 = /^[01]{12}$/;

function asRecord(raw: unknown, field: string): Record<string, unknown> {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ExportFormatError(field, "expected an object");
  }
  return raw as Record<string, unknown>;
}

function requireString(obj: Record<string, unknown>, field: string): string {
  const v = obj[field.split(".").pop() as string];
  if (typeof v !== "string") throw new ExportFormatError(field, "expected a string");
  return v;
}

function requireNumber(
  obj: Record<string, unknown>,
  field: string,
  lo = -Infinity,
  hi = Infinity,
): number {
  const v = obj[field.split(".").pop() as string];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ExportFormatError(field, "expected a finite number");
  }
  if (v < lo || v > hi) {
    throw new ExportFormatError(field, `expected a value in [${lo}, ${hi}], got ${v}`);
  }
  return v;
}

function checkHeader(obj: Record<string, unknown>, game: "market" | "agent"): void {
  requireNumber(obj, "schema_version");
  if (obj["schema_version"] !== 1) {
    throw new ExportFormatError("schema_version", `unsupported version ${obj["schema_version"]}`);
  }
  if (obj["game"] !== game) {
    throw new ExportFormatError("game", `expected "${game}", got ${JSON.stringify(obj["game"])}`);
  }
  requireString(obj, "run_id");
  requireString(obj, "timepoint");
  const w = obj["window_epochs"];
  if (!Array.isArray(w) || w.length !== 2 || !w.every((x) => Number.isInteger(x))) {
    throw new ExportFormatError("window_epochs", "expected a pair of integers");
  }
}

export function loadMarketExport(raw: unknown): MarketExport {
  const obj = asRecord(raw, "export");
  checkHeader(obj, "market");
  const agents = obj["agents"];
  if (!Array.isArray(agents) || agents.length === 0) {
    throw new ExportFormatError("agents", "expected a non-empty array");
  }
  let totalWeight = 0;
  agents.forEach((entry, i) => {
    const a = asRecord(entry, `agents[${i}]`);
    const id = requireString(a, `agents[${i}].id12`);
    if (!ID12.test(id)) {
      throw new ExportFormatError(`agents[${i}].id12`, "expected 12 binary digits");
    }
    requireString(a, `agents[${i}].color`);
    totalWeight += requireNumber(a, `agents[${i}].approach_weight`, 0);
    requireNumber(a, `agents[${i}].wood_prob`, 0, 1);
  });
  if (totalWeight <= 0) {
    throw new ExportFormatError("agents", "approach weights sum to zero");
  }
  const ids = new Set(agents.map((a) => (a as MarketAgentEntry).id12));
  if (ids.size !== agents.length) {
    throw new ExportFormatError("agents", "duplicate id12 tags");
  }
  return obj as unknown as MarketExport;
}

export function loadAgentExport(raw: unknown): AgentExport {
  const obj = asRecord(raw, "export");
  checkHeader(obj, "agent");
  const epochs = obj["epochs"];
  if (!Array.isArray(epochs) || epochs.length === 0) {
    throw new ExportFormatError("epochs", "expected a non-empty array");
  }
  epochs.forEach((entry, i) => {
    const e = asRecord(entry, `epochs[${i}]`);
    requireNumber(e, `epochs[${i}].epoch`, 1);
    const skill = requireString(e, `epochs[${i}].skill`);
    if (skill !== "wood" && skill !== "stone") {
      throw new ExportFormatError(`epochs[${i}].skill`, `expected "wood" or "stone", got "${skill}"`);
    }
    requireNumber(e, `epochs[${i}].skill_consistent_prob`, 0, 1);
    requireNumber(e, `epochs[${i}].n_events`, 0);
  });
  return obj as unknown as AgentExport;
}

/** The per-epoch probability series for one skill, checked contiguous from epoch 1. */
export function seriesForSkill(exp: AgentExport, skill: ResourceName): number[] {
  const rows = exp.epochs
    .filter((e) => e.skill === skill)
    .sort((a, b) => a.epoch - b.epoch);
  if (rows.length === 0) {
    throw new ExportFormatError("epochs", `no rows for skill "${skill}"`);
  }
  rows.forEach((row, i) => {
    if (row.epoch !== i + 1) {
      throw new ExportFormatError(
        `epochs(skill=${skill})`,
        `expected contiguous epochs from 1, found ${row.epoch} at position ${i}`,
      );
    }
  });
  return rows.map((r) => r.skill_consistent_prob);
}
