/** Color mapping for the scatter view: blue = lower value = better. */

import type { ScatterData, Solution } from './types.js';

export type ColorBy = 'tre' | 'folding' | 'dice' | 'loss0' | 'loss1' | 'loss2';

export const COLOR_MODES: { key: ColorBy; label: (n: number) => string | null }[] = [
  { key: 'tre', label: () => 'TRE (voxels)' },
  { key: 'folding', label: () => 'folding %' },
  { key: 'dice', label: () => 'Dice %' },
  { key: 'loss0', label: () => 'image loss' },
  { key: 'loss1', label: () => 'smoothness loss' },
  { key: 'loss2', label: (n) => (n > 2 ? 'segmentation loss' : null) },
];

export function metricValue(sol: Solution, mode: ColorBy): number {
  switch (mode) {
    case 'tre':
      return sol.tre;
    case 'folding':
      return sol.folding_pct;
    case 'dice':
      return sol.dice_pct;
    case 'loss0':
      return sol.losses[0];
    case 'loss1':
      return sol.losses[1];
    case 'loss2':
      return sol.losses[2] ?? NaN;
  }
}

export interface ColorScale {
  min: number;
  max: number;
  /** normalized [0,1] position of a value on the scale, clamped */
  position(value: number): number;
  /** CSS color for a value; blue tones are low, red tones are high */
  color(value: number): string;
  /** pre-registration TRE marker position, or null when not applicable */
  marker: number | null;
}

/** Scale bounds come from the loaded data; the pre-registration TRE is
 * included in the TRE scale so its reference marker is always on-scale. */
export function makeScale(data: ScatterData, mode: ColorBy): ColorScale {
  const values = data.solutions.map((s) => metricValue(s, mode)).filter(Number.isFinite);
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (mode === 'tre') {
    min = Math.min(min, data.pre_tre);
    max = Math.max(max, data.pre_tre);
  }
  if (!(max > min)) {
    max = min + 1e-12;
  }
  const position = (value: number) => Math.min(1, Math.max(0, (value - min) / (max - min)));
  return {
    min,
    max,
    position,
    color: (value: number) => rampColor(position(value)),
    marker: mode === 'tre' ? position(data.pre_tre) : null,
  };
}

/** blue -> cyan -> yellow -> red */
export function rampColor(t: number): string {
  const x = Math.min(1, Math.max(0, t));
  let r: number, g: number, b: number;
  if (x < 1 / 3) {
    const s = x * 3;
    [r, g, b] = [40 + 20 * s, 80 + 140 * s, 220];
  } else if (x < 2 / 3) {
    const s = (x - 1 / 3) * 3;
    [r, g, b] = [60 + 195 * s, 220, 220 - 170 * s];
  } else {
    const s = (x - 2 / 3) * 3;
    [r, g, b] = [255, 220 - 170 * s, 50 - 30 * s];
  }
  return `rgb(${Math.round(r)},${Math.round(g)},${Math.round(b)})`;
}
