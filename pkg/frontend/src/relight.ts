/**
 * Client-side evaluation of the biquadratic relighting polynomial
 *   I = a1*lu^2 + a2*lv^2 + a3*lu*lv + a4*lu + a5*lv + a6
 * per pixel and channel, quantized exactly like the reference
 * (clip to [0,1], then floor(v*255 + 0.5)).
 */

import { N_CHANNELS, N_PLANES, PtmImage, coefficients } from "./rtiptm";

/** Clamp a lighting vector to the closed unit disc. */
export function clampToDisc(lu: number, lv: number): [number, number] {
  const r = Math.hypot(lu, lv);
  if (r <= 1.0) {
    return [lu, lv];
  }
  return [lu / r, lv / r];
}

export function designRow(lu: number, lv: number): number[] {
  return [lu * lu, lv * lv, lu * lv, lu, lv, 1.0];
}

function quantizeU8(v: number): number {
  const clipped = Math.min(1.0, Math.max(0.0, v)) * 255.0;
  return Math.floor(clipped + 0.5);
}

/** Relit uint8 RGB frame, laid out [row][col][channel]. */
export function relight(
  ptm: PtmImage,
  lu: number,
  lv: number,
  coeffs?: Float64Array,
): Uint8Array {
  const c = coeffs ?? coefficients(ptm);
  const basis = designRow(lu, lv);
  const nPix = ptm.width * ptm.height;
  const out = new Uint8Array(nPix * N_CHANNELS);
  for (let p = 0; p < nPix; p++) {
    for (let ch = 0; ch < N_CHANNELS; ch++) {
      const base = (p * N_CHANNELS + ch) * N_PLANES;
      let v = 0.0;
      for (let k = 0; k < N_PLANES; k++) {
        v += c[base + k] * basis[k];
      }
      out[p * N_CHANNELS + ch] = quantizeU8(v);
    }
  }
  return out;
}
