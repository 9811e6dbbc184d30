/** Application wiring: load a bundle, render the scatter and panels, and
 * keep every interaction strictly read-only over the bundle files. */

import { COLOR_MODES, makeScale, rampColor, type ColorBy } from './color.js';
import { applyImport, buildExport, parseExport } from './exchange.js';
import { FetchSource, FileSource, loadRun, type AssetSource } from './loader.js';
import { colorbar, comparePanels, solutionPanel } from './panels.js';
import { ScatterView } from './scatter.js';
import { RunState, type LossAxis } from './state.js';

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private state: RunState | null = null;
  private source: AssetSource | null = null;
  private scatter: ScatterView | null = null;
  private pairAssets: { source?: string; target?: string } = {};

  constructor() {
    byId<HTMLInputElement>('dir-input').addEventListener('change', (e) => {
      const input = e.target as HTMLInputElement;
      if (input.files?.length) void this.loadFrom(new FileSource(input.files));
    });
    const drop = byId<HTMLElement>('drop-zone');
    drop.addEventListener('dragover', (e) => {
      e.preventDefault();
      drop.classList.add('armed');
    });
    drop.addEventListener('dragleave', () => drop.classList.remove('armed'));
    drop.addEventListener('drop', (e) => {
      e.preventDefault();
      drop.classList.remove('armed');
      const files = e.dataTransfer?.files;
      if (files?.length) void this.loadFrom(new FileSource(files));
    });
    byId<HTMLButtonElement>('export-btn').addEventListener('click', () => this.exportSelection());
    byId<HTMLInputElement>('import-input').addEventListener('change', (e) => {
      const input = e.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) void this.importSelection(file);
    });
    window.addEventListener('keydown', (e) => this.onKey(e));

    const params = new URLSearchParams(window.location.search);
    const bundle = params.get('bundle');
    if (bundle) void this.loadFrom(new FetchSource(bundle));
  }

  private banner(message: string, isError = true): void {
    const node = byId<HTMLElement>('banner');
    node.textContent = message;
    node.className = message ? (isError ? 'banner error' : 'banner') : 'banner hidden';
    if (!message) node.classList.add('hidden');
  }

  private async loadFrom(source: AssetSource): Promise<void> {
    this.banner('loading bundle…', false);
    try {
      const run = await loadRun(source);
      this.state = new RunState(run.data);
      this.source = source;
      const pd = run.data.pair;
      this.pairAssets = pd ? { source: `${pd}/source.png`, target: `${pd}/target.png` } : {};
      this.banner('');
      this.buildControls();
      this.initScatter();
      if (run.data.solutions.length === 0) {
        this.banner('no solutions in this bundle', false);
      }
      byId<HTMLElement>('run-meta').textContent = `${run.data.solutions.length} solutions · ref point [${run.data.ref_point.join(', ')}] · pre-registration TRE ${run.data.pre_tre.toFixed(3)}`;
      await this.refreshPanels();
    } catch (err) {
      this.state = null;
      this.source = null;
      this.banner(String(err instanceof Error ? err.message : err));
    }
  }

  private buildControls(): void {
    if (!this.state) return;
    const select = byId<HTMLSelectElement>('color-by');
    select.replaceChildren();
    for (const mode of COLOR_MODES) {
      const label = mode.label(this.state.nObjectives);
      if (!label) continue;
      const opt = document.createElement('option');
      opt.value = mode.key;
      opt.textContent = `color by ${label}`;
      select.append(opt);
    }
    select.value = this.state.colorBy;
    select.onchange = () => {
      if (!this.state) return;
      this.state.colorBy = select.value as ColorBy;
      this.redraw();
    };
    const axis = byId<HTMLSelectElement>('order-axis');
    axis.onchange = () => {
      if (!this.state) return;
      this.state.orderAxis = Number(axis.value) as LossAxis;
    };
  }

  private initScatter(): void {
    if (!this.state) return;
    const canvas = byId<HTMLCanvasElement>('scatter');
    this.scatter = new ScatterView(canvas, this.state);
    this.scatter.onSelect = (id) => {
      this.state?.select(id);
      void this.refreshPanels();
    };
    this.scatter.onHover = (id) => {
      const tip = byId<HTMLElement>('hover-tip');
      if (id === null || !this.state) {
        tip.classList.add('hidden');
        return;
      }
      const sol = this.state.solution(id);
      tip.classList.remove('hidden');
      tip.textContent = `#${sol.id} losses [${sol.losses.map((v) => v.toFixed(3)).join(', ')}] TRE ${sol.tre.toFixed(3)} folding ${sol.folding_pct.toFixed(2)}% Dice ${sol.dice_pct.toFixed(1)}%`;
    };
    this.redraw();
  }

  private redraw(): void {
    if (!this.state || !this.scatter) return;
    const scale = makeScale(this.state.data, this.state.colorBy);
    this.scatter.draw(scale);
    const label = COLOR_MODES.find((m) => m.key === this.state!.colorBy)?.label(this.state.nObjectives) ?? '';
    byId<HTMLElement>('colorbar-slot').replaceChildren(colorbar(scale.min, scale.max, scale.marker, rampColor, label));
  }

  private async refreshPanels(): Promise<void> {
    if (!this.state || !this.source) return;
    this.redraw();
    const detail = byId<HTMLElement>('detail');
    const sol = this.state.selected;
    byId<HTMLButtonElement>('export-btn').disabled = sol === null;
    byId<HTMLButtonElement>('pin-btn').disabled = sol === null;
    byId<HTMLButtonElement>('pin-btn').onclick = () => {
      if (this.state?.selected) {
        this.state.togglePin(this.state.selected.id);
        void this.refreshPanels();
      }
    };
    if (!sol) {
      detail.replaceChildren();
      return;
    }
    detail.replaceChildren(await solutionPanel(this.state.data, this.source, sol, this.pairAssets));
    const compare = byId<HTMLElement>('compare');
    const { ids, duplicatesCollapsed } = this.state.compareIds();
    if (ids.length >= 2) {
      const sols = ids.map((id) => this.state!.solution(id));
      compare.replaceChildren(await comparePanels(this.state.data, this.source, sols, duplicatesCollapsed));
    } else {
      compare.replaceChildren();
    }
  }

  private onKey(e: KeyboardEvent): void {
    if (!this.state) return;
    if (e.key === 'ArrowRight') {
      this.state.step(1);
      void this.refreshPanels();
    } else if (e.key === 'ArrowLeft') {
      this.state.step(-1);
      void this.refreshPanels();
    }
  }

  private exportSelection(): void {
    if (!this.state?.selected) return;
    const note = byId<HTMLInputElement>('note-input').value;
    const record = buildExport(this.state, note);
    const blob = new Blob([JSON.stringify(record, null, 1)], { type: 'application/json' });
    const a = document.createElement('a');
    a.href = URL.createObjectURL(blob);
    a.download = `selection_solution_${record.solution_id}.json`;
    a.click();
    URL.revokeObjectURL(a.href);
  }

  private async importSelection(file: File): Promise<void> {
    if (!this.state) return;
    try {
      const record = parseExport(JSON.parse(await file.text()));
      const sol = applyImport(this.state, record);
      byId<HTMLInputElement>('note-input').value = record.note;
      this.banner(`restored selection: solution ${sol.id}`, false);
      await this.refreshPanels();
    } catch (err) {
      this.banner(String(err instanceof Error ? err.message : err));
    }
  }
}

new App();
