/** Asset access for a bundle: a served directory (fetch) or local files
 * picked via the directory input / drag-and-drop. Strictly read-only. */

import { parseScatter, type ScatterData } from './types.js';

export interface AssetSource {
  json(path: string): Promise<unknown>;
  bytes(path: string): Promise<ArrayBuffer>;
  /** URL usable as an <img> src for a bundle-relative path. */
  imageUrl(path: string): Promise<string>;
}

export class FetchSource implements AssetSource {
  constructor(private base: string) {}

  private url(path: string): string {
    return `${this.base.replace(/\/$/, '')}/${path}`;
  }

  async json(path: string): Promise<unknown> {
    const res = await fetch(this.url(path));
    if (!res.ok) throw new Error(`${path}: HTTP ${res.status}`);
    return res.json();
  }

  async bytes(path: string): Promise<ArrayBuffer> {
    const res = await fetch(this.url(path));
    if (!res.ok) throw new Error(`${path}: HTTP ${res.status}`);
    return res.arrayBuffer();
  }

  async imageUrl(path: string): Promise<string> {
    return this.url(path);
  }
}

/** Local files keyed by bundle-relative path (webkitdirectory / drop). */
export class FileSource implements AssetSource {
  private files = new Map<string, File>();
  private urls = new Map<string, string>();

  constructor(files: Iterable<File>) {
    for (const f of files) {
      const rel = (f as File & { webkitRelativePath?: string }).webkitRelativePath || f.name;
      const parts = rel.split('/');
      // drop the top-level directory name the picker prepends
      const key = parts.length > 1 ? parts.slice(1).join('/') : rel;
      this.files.set(key, f);
    }
  }

  has(path: string): boolean {
    return this.files.has(path);
  }

  private file(path: string): File {
    const f = this.files.get(path);
    if (!f) throw new Error(`${path}: not present in the dropped bundle`);
    return f;
  }

  async json(path: string): Promise<unknown> {
    return JSON.parse(await this.file(path).text());
  }

  async bytes(path: string): Promise<ArrayBuffer> {
    return this.file(path).arrayBuffer();
  }

  async imageUrl(path: string): Promise<string> {
    const cached = this.urls.get(path);
    if (cached) return cached;
    const url = URL.createObjectURL(this.file(path));
    this.urls.set(path, url);
    return url;
  }
}

export interface LoadedRun {
  data: ScatterData;
  source: AssetSource;
}

/** Load and validate scatter.json; verifies every referenced asset is
 * reachable so a broken reference fails the load with the file named. */
export async function loadRun(source: AssetSource): Promise<LoadedRun> {
  const raw = await source.json('scatter.json');
  const parsed = parseScatter(raw);
  if (!parsed.ok) {
    throw new Error(parsed.errors.join('\n'));
  }
  for (const sol of parsed.data.solutions) {
    for (const path of [sol.files.warped, sol.files.overlay]) {
      try {
        await source.imageUrl(path);
      } catch (err) {
        throw new Error(`solution ${sol.id}: missing asset ${path}`);
      }
    }
  }
  return { data: parsed.data, source };
}
