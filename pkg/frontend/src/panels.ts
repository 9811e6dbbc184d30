/** DOM builders for the solution panel, comparison view, and metric cards.
 * Every displayed number is taken from the bundle as parsed; nothing is
 * recomputed client-side. */

import type { AssetSource } from './loader.js';
import type { ScatterData, Solution } from './types.js';

/** JSON-exact rendering of a metric value (same shortest round-trip form
 * the bundle writer emits). */
export function formatMetric(value: number): string {
  return JSON.stringify(value);
}

export function metricCardRows(sol: Solution): [string, string][] {
  const rows: [string, string][] = [
    ['TRE (voxels)', formatMetric(sol.tre)],
    ['folding %', formatMetric(sol.folding_pct)],
    ['Dice %', formatMetric(sol.dice_pct)],
  ];
  sol.losses.forEach((v, i) => {
    rows.push([['image loss', 'smooth loss', 'seg loss'][i] ?? `loss ${i}`, formatMetric(v)]);
  });
  rows.push(['weights', sol.weights === 'dynamic' ? 'dynamic' : sol.weights.map(formatMetric).join(', ')]);
  return rows;
}

function el<K extends keyof HTMLElementTagNameMap>(tag: K, cls?: string, text?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function image(source: AssetSource, path: string, caption: string): Promise<HTMLElement> {
  const fig = el('figure', 'asset');
  const img = el('img');
  img.alt = caption;
  img.decoding = 'async';
  try {
    img.src = await source.imageUrl(path);
    img.onerror = () => {
      fig.replaceChildren(el('div', 'asset-missing', `missing: ${path}`), el('figcaption', '', caption));
    };
  } catch {
    fig.replaceChildren(el('div', 'asset-missing', `missing: ${path}`), el('figcaption', '', caption));
    return fig;
  }
  fig.append(img, el('figcaption', '', caption));
  return fig;
}

export function metricCard(sol: Solution): HTMLElement {
  const card = el('div', 'metric-card');
  card.dataset.solutionId = String(sol.id);
  const table = el('table');
  for (const [label, value] of metricCardRows(sol)) {
    const tr = el('tr');
    tr.append(el('td', 'metric-label', label), el('td', 'metric-value', value));
    table.append(tr);
  }
  card.append(el('h3', '', `solution ${sol.id}`), table);
  return card;
}

export async function solutionPanel(
  data: ScatterData,
  source: AssetSource,
  sol: Solution,
  pairAssets: { source?: string; target?: string },
): Promise<HTMLElement> {
  const panel = el('div', 'solution-panel');
  const strip = el('div', 'image-strip');
  if (pairAssets.target) strip.append(await image(source, pairAssets.target, 'target'));
  if (pairAssets.source) strip.append(await image(source, pairAssets.source, 'source'));
  strip.append(await image(source, sol.files.warped, 'warped source'));
  strip.append(await image(source, sol.files.overlay, 'DVF overlay'));
  panel.append(strip, metricCard(sol));
  return panel;
}

export async function comparePanels(
  data: ScatterData,
  source: AssetSource,
  sols: Solution[],
  duplicatesCollapsed: boolean,
): Promise<HTMLElement> {
  const wrap = el('div', 'compare-wrap');
  if (duplicatesCollapsed) {
    wrap.append(el('div', 'notice', 'duplicate selections collapsed into one panel'));
  }
  const row = el('div', 'compare-row');
  for (const sol of sols) {
    const cell = el('div', 'compare-cell');
    cell.append(await image(source, sol.files.warped, `warped (solution ${sol.id})`));
    cell.append(await image(source, sol.files.overlay, 'overlay'));
    cell.append(metricCard(sol));
    row.append(cell);
  }
  wrap.append(row);
  return wrap;
}

export function colorbar(min: number, max: number, marker: number | null, ramp: (t: number) => string, label: string): HTMLElement {
  const wrap = el('div', 'colorbar-wrap');
  const canvas = el('canvas', 'colorbar');
  canvas.width = 220;
  canvas.height = 14;
  const ctx = canvas.getContext('2d');
  if (ctx) {
    for (let x = 0; x < canvas.width; x++) {
      ctx.fillStyle = ramp(x / (canvas.width - 1));
      ctx.fillRect(x, 0, 1, canvas.height);
    }
    if (marker !== null) {
      // pre-registration reference drawn as a black line on the scale
      const x = Math.round(marker * (canvas.width - 1));
      ctx.fillStyle = '#000000';
      ctx.fillRect(x - 1, 0, 3, canvas.height);
    }
  }
  const legend = el('div', 'colorbar-legend');
  legend.append(el('span', '', formatShort(min)), el('span', 'colorbar-label', `${label} (blue = lower)`), el('span', '', formatShort(max)));
  wrap.append(canvas, legend);
  return wrap;
}

function formatShort(v: number): string {
  return Math.abs(v) >= 100 || (Math.abs(v) < 0.01 && v !== 0) ? v.toExponential(2) : v.toPrecision(3);
}
