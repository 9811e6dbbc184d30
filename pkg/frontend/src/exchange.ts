/** Export and re-import of a selected solution as a self-contained record. */

import type { RunState } from './state.js';
import type { Solution } from './types.js';

export interface SelectionRecord {
  schema_version: 1;
  run: string;
  solution_id: number;
  losses: number[];
  metrics: { tre: number; folding_pct: number; dice_pct: number };
  note: string;
  timestamp: string;
}

export function buildExport(state: RunState, note: string, timestamp?: string): SelectionRecord {
  const sol = state.selected;
  if (!sol) throw new Error('no selection to export');
  return {
    schema_version: 1,
    run: state.data.pair ?? 'run',
    solution_id: sol.id,
    losses: [...sol.losses],
    metrics: { tre: sol.tre, folding_pct: sol.folding_pct, dice_pct: sol.dice_pct },
    note,
    timestamp: timestamp ?? new Date().toISOString(),
  };
}

export function parseExport(raw: unknown): SelectionRecord {
  if (typeof raw !== 'object' || raw === null) throw new Error('selection record: not an object');
  const r = raw as Record<string, unknown>;
  if (r.schema_version !== 1) throw new Error('selection record: unknown schema_version');
  if (typeof r.solution_id !== 'number') throw new Error('selection record: missing solution_id');
  if (!Array.isArray(r.losses)) throw new Error('selection record: missing losses');
  if (typeof r.note !== 'string') throw new Error('selection record: missing note');
  return raw as SelectionRecord;
}

/** Restore the recorded selection; the record's losses must match the
 * loaded bundle so a record is never applied to the wrong run. */
export function applyImport(state: RunState, record: SelectionRecord): Solution {
  const sol = state.data.solutions.find((s) => s.id === record.solution_id);
  if (!sol) throw new Error(`selection record: no solution ${record.solution_id} in this run`);
  const matches =
    sol.losses.length === record.losses.length && sol.losses.every((v, i) => v === record.losses[i]);
  if (!matches) throw new Error('selection record: losses do not match this bundle');
  state.select(sol.id);
  return sol;
}
