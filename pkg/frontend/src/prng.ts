/** Deterministic random stream for replayable sessions (mulberry32). */

export type RandomStream = () => number;

/** Uniform [0, 1) generator; identical seeds give identical streams. */
export function seededStream(seed: number): RandomStream {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
