/** Session records: what a participant saw, chose, and earned, per trial.
 *
 * Records are self-contained: the seed plus the choice sequence is enough to
 * regenerate every stimulus and outcome, which is what the replay check in
 * the test suite does byte-for-byte (latencies are the one field replay
 * cannot reproduce, so canonicalization strips them).
 */

import { AGENT_GAME_TRIALS, MARKET_GAME_TRIALS, type ResourceName } from "./constants.js";

export interface TrialRecord<S, C, O> {
  trial: number;
  stimulus: S;
  choice: C;
  outcome: O;
  score_after: number;
  latency_ms: number;
}

export interface SessionRecord<S, C, O> {
  schema_version: 1;
  game: "market" | "agent";
  run_id: string;
  timepoint: string;
  seed: number;
  skill?: ResourceName;
  trials: TrialRecord<S, C, O>[];
  final_score: number;
  complete: boolean;
}

export class IncompleteSessionError extends Error {
  constructor(done: number, total: number) {
    super(`session has ${done} of ${total} trials; export needs confirmation`);
    this.name = "IncompleteSessionError";
  }
}

export function checkLatency(latencyMs: number): number {
  if (!Number.isFinite(latencyMs) || latencyMs < 0) {
    throw new Error(`latency must be a non-negative number of ms, got ${latencyMs}`);
  }
  return latencyMs;
}

/** Trial-by-trial content with latencies stripped; byte-stable across replay. */
export function canonicalTrials<S, C, O>(record: SessionRecord<S, C, O>): string {
  return JSON.stringify(
    record.trials.map((t) => ({
      trial: t.trial,
      stimulus: t.stimulus,
      choice: t.choice,
      outcome: t.outcome,
      score_after: t.score_after,
    })),
  );
}

export function exportSessionJson<S, C, O>(
  record: SessionRecord<S, C, O>,
  opts: { allowIncomplete?: boolean } = {},
): string {
  if (!record.complete && !opts.allowIncomplete) {
    const total = record.game === "market" ? MARKET_GAME_TRIALS : AGENT_GAME_TRIALS;
    throw new IncompleteSessionError(record.trials.length, total);
  }
  return JSON.stringify(record, null, 2) + "\n";
}
