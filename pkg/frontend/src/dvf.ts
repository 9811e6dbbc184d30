/** Reader for the binary displacement rasters plus arrow-grid geometry for
 * client-side re-rendering at alternate strides. */

export interface DvfField {
  h: number;
  w: number;
  ux: Float32Array;
  uy: Float32Array;
}

const MAGIC = 'MODVF1';

export function readDvfRaster(buffer: ArrayBuffer): DvfField {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 16) throw new Error('DVF raster: truncated header');
  const magic = String.fromCharCode(...bytes.slice(0, 6));
  if (magic !== MAGIC) throw new Error(`DVF raster: bad magic ${magic}`);
  const view = new DataView(buffer);
  const version = view.getUint8(6);
  const ndim = view.getUint8(7);
  if (version !== 1 || ndim !== 2) throw new Error(`DVF raster: unsupported version ${version}/ndim ${ndim}`);
  const h = view.getUint32(8, true);
  const w = view.getUint32(12, true);
  if (bytes.length !== 16 + 8 * h * w) {
    throw new Error(`DVF raster: expected ${16 + 8 * h * w} bytes, found ${bytes.length}`);
  }
  return {
    h,
    w,
    ux: new Float32Array(buffer, 16, h * w),
    uy: new Float32Array(buffer, 16 + 4 * h * w, h * w),
  };
}

export interface Arrow {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  magnitude: number;
}

/** Subsampled arrow grid in voxel coordinates; arrows below minMagnitude
 * are dropped, matching the bundled overlays. */
export function arrowGrid(field: DvfField, stride: number, minMagnitude = 0.05): Arrow[] {
  const arrows: Arrow[] = [];
  const half = Math.floor(stride / 2);
  for (let y = half; y < field.h; y += stride) {
    for (let x = half; x < field.w; x += stride) {
      const i = y * field.w + x;
      const ux = field.ux[i];
      const uy = field.uy[i];
      const magnitude = Math.hypot(ux, uy);
      if (magnitude < minMagnitude) continue;
      arrows.push({ x0: x + 0.5, y0: y + 0.5, x1: x + 0.5 + ux, y1: y + 0.5 + uy, magnitude });
    }
  }
  return arrows;
}
