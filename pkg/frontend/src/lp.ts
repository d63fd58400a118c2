/** Parser for .lp light-position files: count line, then
 *  "<image-name> <lu> <lv> <lw>" per line. */

export interface LpEntry {
  name: string;
  lu: number;
  lv: number;
  lw: number;
}

export class LpParseError extends Error {}

export function parseLp(text: string): LpEntry[] {
  const lines = text.split(/\r?\n/).filter((ln) => ln.trim().length > 0);
  if (lines.length === 0) {
    throw new LpParseError("empty .lp file");
  }
  const count = Number.parseInt(lines[0], 10);
  if (!Number.isFinite(count) || count < 0) {
    throw new LpParseError("bad .lp count line: " + lines[0]);
  }
  if (lines.length - 1 < count) {
    throw new LpParseError(
      `expected ${count} entries, found ${lines.length - 1}`,
    );
  }
  const entries: LpEntry[] = [];
  for (const ln of lines.slice(1, 1 + count)) {
    const parts = ln.trim().split(/\s+/);
    if (parts.length < 4) {
      throw new LpParseError("bad .lp entry: " + ln);
    }
    const [lu, lv, lw] = parts.slice(1, 4).map(Number);
    if ([lu, lv, lw].some((v) => !Number.isFinite(v))) {
      throw new LpParseError("bad .lp entry: " + ln);
    }
    entries.push({ name: parts[0], lu, lv, lw });
  }
  return entries;
}
