/** The worker task: 200 trials as a skill-minority producer whose sales face
 * the market's recorded expectations.
 *
 * Trial t plays against epoch t of the exported probability series: when the
 * participant offers a sale, the simulated market names their skilled
 * resource with that epoch's probability, and the sale settles exactly like
 * a simulator sale (2 units out, 1 coin in, only on a match with stock).
 *
 * Random draw budget per action, for replayability: gathers and sales use
 * one draw, builds use one draw only when materials are on hand, buys use
 * none.  Failed builds and failed sales are messaged distinctly (materials
 * shortage, collapsed roll, market mismatch, short stock).
 */

import {
  AGENT_GAME_TRIALS,
  ECONOMY,
  otherResource,
  type ResourceName,
} from "./constants.js";
import { seriesForSkill, type AgentExport } from "./exports.js";
import { seededStream, type RandomStream } from "./prng.js";
import {
  canonicalTrials,
  checkLatency,
  type SessionRecord,
  type TrialRecord,
} from "./session.js";

export const AGENT_ACTIONS = [
  "chop_wood",
  "mine_stone",
  "build",
  "sell_wood",
  "sell_stone",
  "buy_wood",
  "buy_stone",
] as const;

export type AgentActionName = (typeof AGENT_ACTIONS)[number];

export interface AgentStimulus {
  trial: number;
  wood: number;
  stone: number;
  coins: number;
}

export interface AgentOutcome {
  kind: "gather" | "build" | "sell" | "buy";
  success: boolean;
  prediction: ResourceName | null;
  wood: number;
  stone: number;
  coins: number;
  message: string;
}

export type AgentSessionRecord = SessionRecord<AgentStimulus, AgentActionName, AgentOutcome>;

export class AgentGameSession {
  readonly trialsTotal = AGENT_GAME_TRIALS;
  wood = 0;
  stone = 0;
  coins = 0;

  private readonly rng: RandomStream;
  private readonly series: number[];
  private trials: TrialRecord<AgentStimulus, AgentActionName, AgentOutcome>[] = [];

  constructor(
    private readonly exp: AgentExport,
    readonly seed: number,
    readonly skill: ResourceName,
  ) {
    this.series = seriesForSkill(exp, skill);
    if (this.series.length < this.trialsTotal) {
      throw new Error(
        `export covers ${this.series.length} epochs; the task needs ${this.trialsTotal}`,
      );
    }
    this.rng = seededStream(seed);
  }

  get trialsDone(): number {
    return this.trials.length;
  }

  isComplete(): boolean {
    return this.trials.length === this.trialsTotal;
  }

  currentStimulus(): AgentStimulus {
    if (this.isComplete()) throw new Error("session is complete");
    return {
      trial: this.trials.length + 1,
      wood: this.wood,
      stone: this.stone,
      coins: this.coins,
    };
  }

  private gather(resource: ResourceName): AgentOutcome {
    const p =
      resource === this.skill
        ? ECONOMY.producerSkilledSuccess
        : ECONOMY.producerUnskilledSuccess;
    const success = this.rng() < p;
    if (success) {
      if (resource === "wood") this.wood += 1;
      else this.stone += 1;
    }
    const verb = resource === "wood" ? "chop" : "mining trip";
    return this.outcome(
      "gather",
      success,
      null,
      success ? `You gathered 1 ${resource}.` : `The ${verb} came up empty.`,
    );
  }

  private build(): AgentOutcome {
    if (this.wood < 1 || this.stone < 1) {
      // no roll: material shortage consumes no randomness
      return this.outcome("build", false, null, "Building needs 1 wood and 1 stone on hand.");
    }
    const success = this.rng() < ECONOMY.producerBuildSuccess;
    if (success) {
      this.wood -= 1;
      this.stone -= 1;
      this.coins += ECONOMY.buildReward;
      return this.outcome("build", true, null, `You built a house: +${ECONOMY.buildReward} coins.`);
    }
    return this.outcome("build", false, null, "The build collapsed half way up.");
  }

  private sell(offered: ResourceName, probSkillPrediction: number): AgentOutcome {
    const skillConsistent = this.rng() < probSkillPrediction;
    const prediction = skillConsistent ? this.skill : otherResource(this.skill);
    if (prediction !== offered) {
      return this.outcome(
        "sell",
        false,
        prediction,
        `The market expected ${prediction}; your ${offered} found no buyer.`,
      );
    }
    const stock = offered === "wood" ? this.wood : this.stone;
    if (stock < ECONOMY.saleUnits) {
      return this.outcome(
        "sell",
        false,
        prediction,
        `The market wanted ${offered}, but a sale takes ${ECONOMY.saleUnits} units.`,
      );
    }
    if (offered === "wood") this.wood -= ECONOMY.saleUnits;
    else this.stone -= ECONOMY.saleUnits;
    this.coins += ECONOMY.saleReward;
    return this.outcome(
      "sell",
      true,
      prediction,
      `Sold ${ECONOMY.saleUnits} ${offered} for ${ECONOMY.saleReward} coin.`,
    );
  }

  private buy(resource: ResourceName): AgentOutcome {
    this.coins -= ECONOMY.buyCost;
    if (resource === "wood") this.wood += ECONOMY.buyUnits;
    else this.stone += ECONOMY.buyUnits;
    return this.outcome(
      "buy",
      true,
      null,
      `Bought ${ECONOMY.buyUnits} ${resource} for ${ECONOMY.buyCost} coins.`,
    );
  }

  private outcome(
    kind: AgentOutcome["kind"],
    success: boolean,
    prediction: ResourceName | null,
    message: string,
  ): AgentOutcome {
    return {
      kind,
      success,
      prediction,
      wood: this.wood,
      stone: this.stone,
      coins: this.coins,
      message,
    };
  }

  step(action: AgentActionName, latencyMs: number): AgentOutcome {
    const stimulus = this.currentStimulus();
    const probSkillPrediction = this.series[stimulus.trial - 1]!;
    let out: AgentOutcome;
    switch (action) {
      case "chop_wood":
        out = this.gather("wood");
        break;
      case "mine_stone":
        out = this.gather("stone");
        break;
      case "build":
        out = this.build();
        break;
      case "sell_wood":
        out = this.sell("wood", probSkillPrediction);
        break;
      case "sell_stone":
        out = this.sell("stone", probSkillPrediction);
        break;
      case "buy_wood":
        out = this.buy("wood");
        break;
      case "buy_stone":
        out = this.buy("stone");
        break;
    }
    this.trials.push({
      trial: stimulus.trial,
      stimulus,
      choice: action,
      outcome: out,
      score_after: this.coins,
      latency_ms: checkLatency(latencyMs),
    });
    return out;
  }

  record(): AgentSessionRecord {
    return {
      schema_version: 1,
      game: "agent",
      run_id: this.exp.run_id,
      timepoint: this.exp.timepoint,
      seed: this.seed,
      skill: this.skill,
      trials: [...this.trials],
      final_score: this.coins,
      complete: this.isComplete(),
    };
  }
}

/** Re-run a recorded session from its seed and actions; true iff the
 * regenerated trials serialize to the identical bytes. */
export function replayAgentSession(
  exp: AgentExport,
  record: AgentSessionRecord,
): { matches: boolean; finalScore: number } {
  if (record.skill === undefined) {
    throw new Error("agent session record is missing the skill field");
  }
  const session = new AgentGameSession(exp, record.seed, record.skill);
  for (const t of record.trials) {
    session.step(t.choice, 0);
  }
  const replayed = session.record();
  return {
    matches:
      canonicalTrials(replayed) === canonicalTrials(record) &&
      replayed.final_score === record.final_score,
    finalScore: replayed.final_score,
  };
}
