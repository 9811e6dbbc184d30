import type { ScatterData, Solution } from '../src/types.js';

export function makeSolution(id: number, overrides: Partial<Solution> = {}): Solution {
  return {
    id,
    losses: [0.1 + id * 0.01, 0.2 - id * 0.005, 0.3],
    weights: 'dynamic',
    tre: 1.0 + id * 0.1,
    folding_pct: id * 0.05,
    dice_pct: 95 - id,
    files: {
      warped: `pairs/pair_000/solutions/sol_${String(id).padStart(2, '0')}/warped.png`,
      overlay: `pairs/pair_000/solutions/sol_${String(id).padStart(2, '0')}/overlay.png`,
      dvf: `pairs/pair_000/solutions/sol_${String(id).padStart(2, '0')}/dvf.dvf`,
    },
    ...overrides,
  };
}

export function makeRun(p = 5): ScatterData {
  return {
    schema_version: 1,
    ref_point: [1, 1, 1],
    pre_tre: 2.5,
    pair: 'pairs/pair_000',
    solutions: Array.from({ length: p }, (_, i) => makeSolution(i)),
  };
}
