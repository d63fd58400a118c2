/**
 * ViewerSession: decoded PTM, current lighting vector, display mode and
 * optional .lp playlist. Pure state + rendering; DOM wiring lives in
 * main.ts so this module is testable in node.
 */

import { LpEntry, parseLp } from "./lp";
import { clampToDisc, relight } from "./relight";
import { PtmImage, coefficients, decodeRtiptm } from "./rtiptm";

export type DisplayMode = "relit" | "normals" | "heatmap";

export interface Frame {
  width: number;
  height: number;
  /** uint8 RGB, [row][col][channel] */
  pixels: Uint8Array;
}

export class ViewerSession {
  readonly ptm: PtmImage;
  lu = 0;
  lv = 0;
  mode: DisplayMode = "relit";
  playlist: LpEntry[] = [];
  playlistIndex = -1;
  private readonly coeffs: Float64Array;

  constructor(ptm: PtmImage) {
    this.ptm = ptm;
    this.coeffs = coefficients(ptm);
  }

  /** Set the lighting vector, clamping to the unit disc boundary. */
  setLight(lu: number, lv: number): void {
    [this.lu, this.lv] = clampToDisc(lu, lv);
  }

  loadPlaylist(lpText: string): void {
    this.playlist = parseLp(lpText);
    this.playlistIndex = -1;
  }

  /** Step to the next playlist entry (wrapping) and adopt its vector. */
  stepPlaylist(delta = 1): LpEntry {
    if (this.playlist.length === 0) {
      throw new Error("no playlist loaded");
    }
    const n = this.playlist.length;
    this.playlistIndex = (((this.playlistIndex + delta) % n) + n) % n;
    const entry = this.playlist[this.playlistIndex];
    this.setLight(entry.lu, entry.lv);
    return entry;
  }

  renderFrame(): Frame {
    return {
      width: this.ptm.width,
      height: this.ptm.height,
      pixels: relight(this.ptm, this.lu, this.lv, this.coeffs),
    };
  }
}

/** Decode an .rtiptm payload and open a session at the origin vector. */
export function loadSession(data: Uint8Array | ArrayBuffer): ViewerSession {
  return new ViewerSession(decodeRtiptm(data));
}
