/** Nametag glyphs: a 12-digit binary tag drawn as a 3x4 pixel grid.
 *
 * The mapping digit -> cell is positional, so two distinct tags always
 * produce distinct glyphs and the tag can be read back off the glyph.
 */

export const TAG_ROWS = 3;
export const TAG_COLS = 4;

export function tagToCells(id12: string): boolean[] {
  if (!/^[01]{12}$/.test(id12)) {
    throw new Error(`nametag needs 12 binary digits, got "${id12}"`);
  }
  return Array.from(id12, (c) => c === "1");
}

export function cellsToTag(cells: readonly boolean[]): string {
  if (cells.length !== TAG_ROWS * TAG_COLS) {
    throw new Error(`nametag glyph needs ${TAG_ROWS * TAG_COLS} cells, got ${cells.length}`);
  }
  return cells.map((on) => (on ? "1" : "0")).join("");
}

/** SVG markup for the glyph; filled cells are dark, empty cells faint. */
export function tagSvg(id12: string, cellPx = 10): string {
  const cells = tagToCells(id12);
  const rects = cells
    .map((on, i) => {
      const x = (i % TAG_COLS) * cellPx;
      const y = Math.floor(i / TAG_COLS) * cellPx;
      const fill = on ? "#222" : "#e8e8e8";
      return `<rect x="${x}" y="${y}" width="${cellPx}" height="${cellPx}" fill="${fill}"/>`;
    })
    .join("");
  const w = TAG_COLS * cellPx;
  const h = TAG_ROWS * cellPx;
  return `<svg class="nametag" width="${w}" height="${h}" viewBox="0 0 ${w} ${h}" role="img" aria-label="nametag ${id12}">${rects}</svg>`;
}
