/** Selection and comparison state over a loaded run (no DOM access). */

import type { ColorBy } from './color.js';
import { metricValue } from './color.js';
import type { ScatterData, Solution } from './types.js';

export const MAX_PINNED = 4;

export type LossAxis = 0 | 1 | 2;

export class RunState {
  readonly data: ScatterData;
  private selectedId: number | null = null;
  private pinnedIds: number[] = [];
  colorBy: ColorBy = 'tre';
  orderAxis: LossAxis = 0;

  constructor(data: ScatterData) {
    this.data = data;
  }

  get nObjectives(): number {
    return this.data.ref_point.length;
  }

  solution(id: number): Solution {
    const sol = this.data.solutions.find((s) => s.id === id);
    if (!sol) throw new Error(`no solution with id ${id}`);
    return sol;
  }

  get selected(): Solution | null {
    return this.selectedId === null ? null : this.solution(this.selectedId);
  }

  select(id: number): void {
    this.solution(id); // throws for unknown ids: selection always valid
    this.selectedId = id;
  }

  clearSelection(): void {
    this.selectedId = null;
  }

  /** ids ordered along a loss axis; keyboard traversal follows this order */
  orderedIds(axis: LossAxis = this.orderAxis): number[] {
    return [...this.data.solutions]
      .sort((a, b) => (a.losses[axis] ?? 0) - (b.losses[axis] ?? 0) || a.id - b.id)
      .map((s) => s.id);
  }

  /** step the selection along the current axis; wraps at both ends */
  step(delta: 1 | -1): number {
    const order = this.orderedIds();
    if (this.selectedId === null) {
      this.select(order[0]);
      return order[0];
    }
    const at = order.indexOf(this.selectedId);
    const next = order[(at + delta + order.length) % order.length];
    this.select(next);
    return next;
  }

  get pinned(): number[] {
    return [...this.pinnedIds];
  }

  togglePin(id: number): void {
    this.solution(id);
    const at = this.pinnedIds.indexOf(id);
    if (at >= 0) {
      this.pinnedIds.splice(at, 1);
    } else if (this.pinnedIds.length < MAX_PINNED) {
      this.pinnedIds.push(id);
    }
  }

  /**
   * ids to compare side by side: deduplicated, so comparing a solution
   * with itself collapses to one panel (the caller shows a notice).
   */
  compareIds(ids?: number[]): { ids: number[]; duplicatesCollapsed: boolean } {
    const requested = ids ?? this.pinnedIds;
    const unique: number[] = [];
    for (const id of requested) {
      this.solution(id);
      if (!unique.includes(id)) unique.push(id);
    }
    return { ids: unique.slice(0, MAX_PINNED), duplicatesCollapsed: unique.length !== requested.length };
  }

  colorValue(sol: Solution): number {
    return metricValue(sol, this.colorBy);
  }
}
