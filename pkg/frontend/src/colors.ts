/** Arm colors are fixed per task and never change across rounds, so a
 * participant can anchor on "the orange button" for a whole session. */

const PALETTES: Record<string, string[]> = {
  stationary2: ["#e4572e", "#2e86ab"],
  restless4: ["#e4572e", "#2e86ab", "#4c9f70", "#e0a426"],
};

export function armColors(variant: string, nArms: number): string[] {
  const palette = PALETTES[variant] ?? PALETTES.restless4!;
  if (palette.length < nArms) {
    throw new Error(`no palette with ${nArms} colors for ${variant}`);
  }
  return palette.slice(0, nArms);
}
