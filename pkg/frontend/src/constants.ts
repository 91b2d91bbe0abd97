/** Economy pricing shared with the simulator.
 *
 * These values mirror shared/economy_constants.json; the parity test fails
 * if either side drifts.  Success probabilities are per-attempt chances for
 * a producer (skilled gather, off-skill gather, house build).
 */

export const ECONOMY = {
  producerSkilledSuccess: 0.75,
  producerUnskilledSuccess: 0.25,
  producerBuildSuccess: 0.05,
  buildReward: 15.0,
  saleReward: 1.0,
  saleUnits: 2,
  buyCost: 2.0,
  buyUnits: 1,
  marketHitReward: 1.0,
  marketMissPenalty: -1.0,
  marketShortPenalty: -0.3,
  nAgentActions: 7,
} as const;

export const MARKET_GAME_TRIALS = 150;
export const AGENT_GAME_TRIALS = 200;

export type ResourceName = "wood" | "stone";

export function otherResource(r: ResourceName): ResourceName {
  return r === "wood" ? "stone" : "wood";
}
