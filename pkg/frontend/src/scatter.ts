/** Loss-space scatter: rotatable orthographic 3D view with a 2D fallback
 * for two-objective runs, rendered on a plain canvas. */

import type { ColorScale } from './color.js';
import type { RunState } from './state.js';
import type { Solution } from './types.js';

export interface ProjectedPoint {
  id: number;
  x: number; // canvas fraction [0,1]
  y: number;
  depth: number;
}

export interface ViewAngles {
  yaw: number;
  pitch: number;
}

/** Normalize losses to [0,1] per axis using the data and reference point. */
export function normalizeLosses(solutions: Solution[], refPoint: number[]): number[][] {
  const n = refPoint.length;
  const mins = new Array(n).fill(Infinity);
  const maxs = new Array(n).fill(-Infinity);
  for (const s of solutions) {
    for (let k = 0; k < n; k++) {
      mins[k] = Math.min(mins[k], s.losses[k]);
      maxs[k] = Math.max(maxs[k], Math.min(s.losses[k], refPoint[k]));
    }
  }
  return solutions.map((s) =>
    s.losses.map((v, k) => {
      const span = maxs[k] - mins[k];
      return span > 0 ? Math.min(1, Math.max(0, (v - mins[k]) / span)) : 0.5;
    }),
  );
}

/** Orthographic projection of unit-cube coordinates after yaw/pitch. */
export function projectPoint(coords: number[], view: ViewAngles): { x: number; y: number; depth: number } {
  const [a, b] = [coords[0] - 0.5, coords[1] - 0.5];
  const c = (coords[2] ?? 0.5) - 0.5;
  const cy = Math.cos(view.yaw);
  const sy = Math.sin(view.yaw);
  const cp = Math.cos(view.pitch);
  const sp = Math.sin(view.pitch);
  // yaw about the vertical (loss-1) axis, then pitch about the screen x axis
  const x1 = a * cy + c * sy;
  const z1 = -a * sy + c * cy;
  const y2 = b * cp - z1 * sp;
  const z2 = b * sp + z1 * cp;
  return { x: 0.5 + x1 * 0.82, y: 0.5 - y2 * 0.82, depth: z2 };
}

export function projectAll(state: RunState, view: ViewAngles): ProjectedPoint[] {
  const norm = normalizeLosses(state.data.solutions, state.data.ref_point);
  const is3d = state.nObjectives === 3;
  return state.data.solutions.map((s, i) => {
    const coords = is3d ? norm[i] : [norm[i][0], norm[i][1], 0.5];
    const p = is3d ? projectPoint(coords, view) : { x: 0.08 + coords[0] * 0.84, y: 0.92 - coords[1] * 0.84, depth: 0 };
    return { id: s.id, ...p };
  });
}

/** Nearest projected point within `radius` canvas fractions, or null. */
export function hitTest(points: ProjectedPoint[], x: number, y: number, radius = 0.03): number | null {
  let best: number | null = null;
  let bestD = radius;
  for (const p of points) {
    const d = Math.hypot(p.x - x, p.y - y);
    if (d < bestD) {
      bestD = d;
      best = p.id;
    }
  }
  return best;
}

const AXIS_NAMES = ['image', 'smooth', 'seg'];

export class ScatterView {
  private view: ViewAngles = { yaw: -0.65, pitch: 0.45 };
  private dragging = false;
  private lastX = 0;
  private lastY = 0;
  private projected: ProjectedPoint[] = [];
  onSelect: (id: number) => void = () => undefined;
  onHover: (id: number | null) => void = () => undefined;

  constructor(private canvas: HTMLCanvasElement, private state: RunState) {
    canvas.addEventListener('mousedown', (e) => {
      this.dragging = true;
      this.lastX = e.offsetX;
      this.lastY = e.offsetY;
    });
    window.addEventListener('mouseup', () => (this.dragging = false));
    canvas.addEventListener('mousemove', (e) => {
      if (this.dragging && this.state.nObjectives === 3) {
        this.view.yaw += (e.offsetX - this.lastX) * 0.01;
        this.view.pitch = Math.min(1.4, Math.max(-1.4, this.view.pitch + (e.offsetY - this.lastY) * 0.01));
        this.lastX = e.offsetX;
        this.lastY = e.offsetY;
        this.draw();
      } else {
        this.onHover(this.hit(e));
      }
    });
    canvas.addEventListener('click', (e) => {
      const id = this.hit(e);
      if (id !== null) this.onSelect(id);
    });
  }

  private hit(e: MouseEvent): number | null {
    return hitTest(this.projected, e.offsetX / this.canvas.width, e.offsetY / this.canvas.height);
  }

  draw(scale?: ColorScale): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = '#13151a';
    ctx.fillRect(0, 0, width, height);
    this.drawAxes(ctx);
    this.projected = projectAll(this.state, this.view);
    const sorted = [...this.projected].sort((p, q) => p.depth - q.depth);
    const selected = this.state.selected?.id ?? null;
    const pinned = new Set(this.state.pinned);
    for (const p of sorted) {
      const sol = this.state.solution(p.id);
      const value = this.state.colorValue(sol);
      ctx.beginPath();
      const r = p.id === selected ? 9 : pinned.has(p.id) ? 7 : 5;
      ctx.fillStyle = scale ? scale.color(value) : '#7aa2ff';
      ctx.arc(p.x * width, p.y * height, r, 0, Math.PI * 2);
      ctx.fill();
      if (p.id === selected || pinned.has(p.id)) {
        ctx.strokeStyle = p.id === selected ? '#ffffff' : '#ffd166';
        ctx.lineWidth = 2;
        ctx.stroke();
      }
    }
  }

  private drawAxes(ctx: CanvasRenderingContext2D): void {
    const { width, height } = this.canvas;
    ctx.strokeStyle = '#3a3f4b';
    ctx.fillStyle = '#9aa3b2';
    ctx.font = '11px sans-serif';
    ctx.lineWidth = 1;
    if (this.state.nObjectives === 2) {
      ctx.strokeRect(0.08 * width, 0.08 * height, 0.84 * width, 0.84 * height);
      ctx.fillText('image loss →', 0.4 * width, 0.97 * height);
      ctx.save();
      ctx.translate(0.04 * width, 0.6 * height);
      ctx.rotate(-Math.PI / 2);
      ctx.fillText('smooth loss →', 0, 0);
      ctx.restore();
      return;
    }
    const origin = [0, 0, 0];
    const ends = [
      [1, 0, 0],
      [0, 1, 0],
      [0, 0, 1],
    ];
    const o = projectPoint(origin, this.view);
    ends.forEach((end, k) => {
      const e = projectPoint(end, this.view);
      ctx.beginPath();
      ctx.moveTo(o.x * width, o.y * height);
      ctx.lineTo(e.x * width, e.y * height);
      ctx.stroke();
      ctx.fillText(AXIS_NAMES[k], e.x * width + 4, e.y * height);
    });
  }
}
