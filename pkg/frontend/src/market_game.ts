/** The market prediction task: 150 approaching sellers, guess each one's offer.
 *
 * Each trial consumes exactly two random draws (which seller, which
 * resource), so a seed plus the choice sequence replays the session exactly.
 */

import { ECONOMY, MARKET_GAME_TRIALS, type ResourceName } from "./constants.js";
import type { MarketAgentEntry, MarketExport } from "./exports.js";
import { seededStream, type RandomStream } from "./prng.js";
import {
  canonicalTrials,
  checkLatency,
  type SessionRecord,
  type TrialRecord,
} from "./session.js";

export interface MarketStimulus {
  id12: string;
  color: string;
  resource: ResourceName;
}

export interface MarketOutcome {
  correct: boolean;
  points: number;
}

export type MarketSessionRecord = SessionRecord<MarketStimulus, ResourceName, MarketOutcome>;

/** Draw one approaching seller and its offered resource.
 *
 * Sellers are drawn proportionally to approach weight (zero-weight sellers
 * never appear); the offer is wood with the seller's recorded probability.
 */
export function sampleMarketTrial(
  exp: MarketExport,
  rng: RandomStream,
): { agent: MarketAgentEntry; resource: ResourceName } {
  const total = exp.agents.reduce((s, a) => s + a.approach_weight, 0);
  const r = rng() * total;
  let acc = 0;
  let agent: MarketAgentEntry | undefined;
  for (const candidate of exp.agents) {
    if (candidate.approach_weight <= 0) continue;
    acc += candidate.approach_weight;
    if (r < acc) {
      agent = candidate;
      break;
    }
  }
  if (agent === undefined) {
    // r landed on the last accumulation boundary; take the last weighted entry
    agent = [...exp.agents].reverse().find((a) => a.approach_weight > 0)!;
  }
  const resource: ResourceName = rng() < agent.wood_prob ? "wood" : "stone";
  return { agent, resource };
}

export class MarketGameSession {
  readonly trialsTotal = MARKET_GAME_TRIALS;
  score = 0;

  private readonly rng: RandomStream;
  private trials: TrialRecord<MarketStimulus, ResourceName, MarketOutcome>[] = [];
  private pending: MarketStimulus | null = null;

  constructor(
    private readonly exp: MarketExport,
    readonly seed: number,
  ) {
    this.rng = seededStream(seed);
  }

  get trialsDone(): number {
    return this.trials.length;
  }

  isComplete(): boolean {
    return this.trials.length === this.trialsTotal;
  }

  /** Stimulus for the current trial; stable until a prediction is submitted. */
  nextStimulus(): MarketStimulus {
    if (this.isComplete()) throw new Error("session is complete");
    if (this.pending === null) {
      const { agent, resource } = sampleMarketTrial(this.exp, this.rng);
      this.pending = { id12: agent.id12, color: agent.color, resource };
    }
    return this.pending;
  }

  submit(choice: ResourceName, latencyMs: number): MarketOutcome {
    const stimulus = this.nextStimulus();
    const correct = choice === stimulus.resource;
    const points = correct ? ECONOMY.marketHitReward : ECONOMY.marketMissPenalty;
    this.score += points;
    this.trials.push({
      trial: this.trials.length + 1,
      stimulus,
      choice,
      outcome: { correct, points },
      score_after: this.score,
      latency_ms: checkLatency(latencyMs),
    });
    this.pending = null;
    return { correct, points };
  }

  record(): MarketSessionRecord {
    return {
      schema_version: 1,
      game: "market",
      run_id: this.exp.run_id,
      timepoint: this.exp.timepoint,
      seed: this.seed,
      trials: [...this.trials],
      final_score: this.score,
      complete: this.isComplete(),
    };
  }
}

/** Re-run a recorded session from its seed and choices; true iff the
 * regenerated trials serialize to the identical bytes. */
export function replayMarketSession(
  exp: MarketExport,
  record: MarketSessionRecord,
): { matches: boolean; finalScore: number } {
  const session = new MarketGameSession(exp, record.seed);
  for (const t of record.trials) {
    session.submit(t.choice, 0);
  }
  const replayed = session.record();
  return {
    matches:
      canonicalTrials(replayed) === canonicalTrials(record) &&
      replayed.final_score === record.final_score,
    finalScore: replayed.final_score,
  };
}
