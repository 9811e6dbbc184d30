/** Schema of scatter.json and strict parsing with per-entry diagnostics. */

export interface SolutionFiles {
  warped: string;
  overlay: string;
  dvf: string;
}

export interface Solution {
  id: number;
  losses: number[];
  weights: number[] | 'dynamic';
  tre: number;
  folding_pct: number;
  dice_pct: number;
  files: SolutionFiles;
}

export interface ScatterData {
  schema_version: number;
  ref_point: number[];
  pre_tre: number;
  pair?: string;
  solutions: Solution[];
}

export type ParseResult =
  | { ok: true; data: ScatterData }
  | { ok: false; errors: string[] };

function isFiniteNumber(v: unknown): v is number {
  return typeof v === 'number' && Number.isFinite(v);
}

function parseSolution(raw: unknown, index: number, nObjectives: number): Solution | string {
  if (typeof raw !== 'object' || raw === null) {
    return `solution ${index}: not an object`;
  }
  const s = raw as Record<string, unknown>;
  if (!isFiniteNumber(s.id)) return `solution ${index}: missing numeric id`;
  if (!Array.isArray(s.losses) || s.losses.length !== nObjectives || !s.losses.every(isFiniteNumber)) {
    return `solution ${index}: losses must be ${nObjectives} finite numbers`;
  }
  const weightsOk =
    s.weights === 'dynamic' ||
    (Array.isArray(s.weights) && s.weights.every(isFiniteNumber));
  if (!weightsOk) return `solution ${index}: weights must be "dynamic" or numbers`;
  for (const key of ['tre', 'folding_pct', 'dice_pct'] as const) {
    if (!isFiniteNumber(s[key])) return `solution ${index}: missing numeric ${key}`;
  }
  const files = s.files as Record<string, unknown> | undefined;
  if (
    typeof files !== 'object' ||
    files === null ||
    typeof files.warped !== 'string' ||
    typeof files.overlay !== 'string' ||
    typeof files.dvf !== 'string'
  ) {
    return `solution ${index}: files must reference warped, overlay and dvf`;
  }
  return {
    id: s.id,
    losses: s.losses as number[],
    weights: s.weights as number[] | 'dynamic',
    tre: s.tre as number,
    folding_pct: s.folding_pct as number,
    dice_pct: s.dice_pct as number,
    files: files as unknown as SolutionFiles,
  };
}

/**
 * Validate a parsed scatter.json. Any defect fails the whole load (no
 * partial state); every malformed entry contributes its own message.
 */
export function parseScatter(raw: unknown): ParseResult {
  const errors: string[] = [];
  if (typeof raw !== 'object' || raw === null) {
    return { ok: false, errors: ['scatter.json: not an object'] };
  }
  const d = raw as Record<string, unknown>;
  if (d.schema_version !== 1) {
    return { ok: false, errors: [`scatter.json: unknown schema_version ${String(d.schema_version)}`] };
  }
  if (!Array.isArray(d.ref_point) || !d.ref_point.every(isFiniteNumber) || d.ref_point.length < 2 || d.ref_point.length > 3) {
    errors.push('scatter.json: ref_point must be 2 or 3 finite numbers');
  }
  if (!isFiniteNumber(d.pre_tre)) {
    errors.push('scatter.json: missing numeric pre_tre');
  }
  if (!Array.isArray(d.solutions)) {
    errors.push('scatter.json: solutions must be an array');
    return { ok: false, errors };
  }
  if (errors.length) return { ok: false, errors };
  const nObjectives = (d.ref_point as number[]).length;
  const solutions: Solution[] = [];
  const seen = new Set<number>();
  for (let i = 0; i < d.solutions.length; i++) {
    const parsed = parseSolution(d.solutions[i], i, nObjectives);
    if (typeof parsed === 'string') {
      errors.push(parsed);
      continue;
    }
    if (seen.has(parsed.id)) {
      errors.push(`solution ${i}: duplicate id ${parsed.id}`);
      continue;
    }
    seen.add(parsed.id);
    solutions.push(parsed);
  }
  if (errors.length) return { ok: false, errors };
  return {
    ok: true,
    data: {
      schema_version: 1,
      ref_point: d.ref_point as number[],
      pre_tre: d.pre_tre as number,
      pair: typeof d.pair === 'string' ? d.pair : undefined,
      solutions,
    },
  };
}
