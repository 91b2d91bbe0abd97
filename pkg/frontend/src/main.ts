/** Browser wiring: screens, keyboard input, feedback, and session download.
 *
 * URL parameters:
 *   game=market|agent      which task (default market)
 *   timepoint=<name>       which export snapshot to load (default "final")
 *   seed=<int>             session seed (default drawn from Date.now())
 *   skill=wood|stone       agent game counterbalance (default by seed parity)
 *   data=<path>            explicit export file, overriding the default
 *                          data/<game>_<timepoint>.json
 */

import { AGENT_ACTIONS, AgentGameSession, type AgentActionName } from "./agent_game.js";
import { MARKET_GAME_TRIALS, AGENT_GAME_TRIALS, type ResourceName } from "./constants.js";
import { loadAgentExport, loadMarketExport } from "./exports.js";
import { MarketGameSession } from "./market_game.js";
import { tagSvg } from "./nametag.js";
import { exportSessionJson } from "./session.js";

const FEEDBACK_MS = 700;

const ACTION_LABELS: Record<AgentActionName, string> = {
  chop_wood: "Chop wood",
  mine_stone: "Mine stone",
  build: "Build house",
  sell_wood: "Sell wood",
  sell_stone: "Sell stone",
  buy_wood: "Buy wood",
  buy_stone: "Buy stone",
};

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function setScreen(html: string): HTMLElement {
  const root = $("app");
  root.innerHTML = html;
  return root;
}

function download(filename: string, text: string): void {
  const blob = new Blob([text], { type: "application/json" });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = filename;
  a.click();
  URL.revokeObjectURL(url);
}

/** A partial record leaves only behind an explicit confirmation. */
function wireQuit(root: HTMLElement, filename: string, partialJson: () => string): void {
  const quit = root.querySelector("#quit");
  if (!quit) return;
  quit.addEventListener("click", () => {
    if (window.confirm("The session is incomplete. Download the partial record and quit?")) {
      download(filename, partialJson());
      window.onkeydown = null;
      setScreen("<h1>Session ended early</h1><p>The partial record was downloaded.</p>");
    }
  });
}

function params() {
  const q = new URLSearchParams(window.location.search);
  const game = q.get("game") === "agent" ? "agent" : "market";
  const timepoint = q.get("timepoint") ?? "final";
  const seed = Number.parseInt(q.get("seed") ?? "", 10);
  const resolvedSeed = Number.isFinite(seed) ? seed : Date.now() >>> 0;
  const skillParam = q.get("skill");
  const skill: ResourceName =
    skillParam === "wood" || skillParam === "stone"
      ? skillParam
      : resolvedSeed % 2 === 0
        ? "wood"
        : "stone";
  const data = q.get("data") ?? `data/${game}_${timepoint}.json`;
  return { game, timepoint, seed: resolvedSeed, skill, data };
}

function endScreen(
  title: string,
  scoreLine: string,
  filename: string,
  recordJson: () => string,
): void {
  const root = setScreen(`
    <h1>${title}</h1>
    <p class="score-line">${scoreLine}</p>
    <p>Anything you noticed about the market or the sellers? (optional)</p>
    <textarea id="debrief" rows="5" cols="60" placeholder="free-text debrief"></textarea>
    <div class="row">
      <button id="download">Download session record</button>
    </div>
  `);
  root.querySelector("#download")!.addEventListener("click", () => {
    download(filename, recordJson());
  });
}

function runMarket(session: MarketGameSession, timepoint: string): void {
  const finish = () => {
    endScreen(
      "Market closed",
      `Final score: ${session.score} points over ${session.trialsTotal} trials.`,
      `market_${timepoint}_seed${session.seed}.json`,
      () => exportSessionJson(session.record()),
    );
  };

  const showTrial = () => {
    if (session.isComplete()) {
      finish();
      return;
    }
    const stim = session.nextStimulus();
    const root = setScreen(`
      <header><span>Trial ${session.trialsDone + 1} / ${MARKET_GAME_TRIALS}</span>
      <span>Score: ${session.score}</span>
      <button id="quit" class="quiet">End early</button></header>
      <div class="alien" style="--body:${stim.color}">
        <div class="body"></div>
        ${tagSvg(stim.id12, 12)}
      </div>
      <p>What will this seller offer?</p>
      <div class="row">
        <button id="pick-wood">Wood (W)</button>
        <button id="pick-stone">Stone (S)</button>
      </div>
    `);
    const shownAt = performance.now();
    const choose = (choice: ResourceName) => {
      window.onkeydown = null;
      const outcome = session.submit(choice, performance.now() - shownAt);
      setScreen(`
        <p class="feedback ${outcome.correct ? "good" : "bad"}">
          ${outcome.correct ? "Correct!" : "Wrong."} ${outcome.points > 0 ? "+" : ""}${outcome.points} point
        </p>`);
      window.setTimeout(showTrial, FEEDBACK_MS);
    };
    root.querySelector("#pick-wood")!.addEventListener("click", () => choose("wood"));
    root.querySelector("#pick-stone")!.addEventListener("click", () => choose("stone"));
    wireQuit(root, `market_${timepoint}_seed${session.seed}_partial.json`, () =>
      exportSessionJson(session.record(), { allowIncomplete: true }));
    window.onkeydown = (ev) => {
      if (ev.key === "w" || ev.key === "W") choose("wood");
      if (ev.key === "s" || ev.key === "S") choose("stone");
    };
  };

  setScreen(`
    <h1>Market game</h1>
    <p>Sellers approach one at a time, each carrying wood or stone. Predict the
    offer: a correct guess earns a point, a wrong one costs a point.
    ${MARKET_GAME_TRIALS} sellers in total. Use the buttons or the W/S keys.</p>
    <div class="row"><button id="start">Start</button></div>
  `).querySelector("#start")!.addEventListener("click", showTrial);
}

function runAgent(session: AgentGameSession, timepoint: string): void {
  const finish = () => {
    endScreen(
      "Shift over",
      `Final haul: ${session.coins} coins (wood ${session.wood}, stone ${session.stone}).`,
      `agent_${timepoint}_seed${session.seed}.json`,
      () => exportSessionJson(session.record()),
    );
  };

  const showTrial = (lastMessage: string) => {
    if (session.isComplete()) {
      finish();
      return;
    }
    const stim = session.currentStimulus();
    const buttons = AGENT_ACTIONS.map(
      (name, i) => `<button data-action="${name}">${i + 1}. ${ACTION_LABELS[name]}</button>`,
    ).join("");
    const root = setScreen(`
      <header><span>Trial ${stim.trial} / ${AGENT_GAME_TRIALS}</span>
      <span>Wood: ${stim.wood} &nbsp; Stone: ${stim.stone} &nbsp; Coins: ${stim.coins}</span>
      <button id="quit" class="quiet">End early</button></header>
      <p class="feedback">${lastMessage}</p>
      <div class="actions">${buttons}</div>
    `);
    const shownAt = performance.now();
    const act = (action: AgentActionName) => {
      window.onkeydown = null;
      const outcome = session.step(action, performance.now() - shownAt);
      showTrial(outcome.message);
    };
    root.querySelectorAll<HTMLButtonElement>("button[data-action]").forEach((b) => {
      b.addEventListener("click", () => act(b.dataset["action"] as AgentActionName));
    });
    wireQuit(root, `agent_${timepoint}_seed${session.seed}_partial.json`, () =>
      exportSessionJson(session.record(), { allowIncomplete: true }));
    window.onkeydown = (ev) => {
      const i = Number.parseInt(ev.key, 10) - 1;
      const name = AGENT_ACTIONS[i];
      if (name !== undefined) act(name);
    };
  };

  setScreen(`
    <h1>Worker game</h1>
    <p>You are a ${session.skill} specialist. Gather, build houses, and trade
    with a market that has its own expectations about you. Sales go through
    only when the market guesses your offer. ${AGENT_GAME_TRIALS} turns.
    Use the buttons or the number keys 1-7.</p>
    <div class="row"><button id="start">Start</button></div>
  `).querySelector("#start")!.addEventListener("click", () => showTrial("Your shift begins."));
}

async function boot(): Promise<void> {
  const p = params();
  try {
    const response = await fetch(p.data);
    if (!response.ok) throw new Error(`fetching ${p.data}: HTTP ${response.status}`);
    const raw: unknown = await response.json();
    if (p.game === "market") {
      runMarket(new MarketGameSession(loadMarketExport(raw), p.seed), p.timepoint);
    } else {
      runAgent(new AgentGameSession(loadAgentExport(raw), p.seed, p.skill), p.timepoint);
    }
  } catch (err) {
    setScreen(`<h1>Cannot start</h1><pre>${String(err)}</pre>`);
  }
}

window.addEventListener("beforeunload", (ev) => {
  // leaving mid-session: the record is incomplete, ask before discarding
  const started = document.querySelector("header");
  if (started) ev.preventDefault();
});

void boot();
