import type { LayoutEntry } from "./types";

// Same placement law the server enforces: positions are >= 0, sizes >= 1,
// widget ids unique, rectangles disjoint. Columns are capped client-side
// so widgets stay inside the rendered grid.
export const GRID_COLUMNS = 12;

export function overlaps(a: LayoutEntry, b: LayoutEntry): boolean {
  return a.x < b.x + b.width && b.x < a.x + a.width && a.y < b.y + b.height && b.y < a.y + a.height;
}

export function validateLayout(entries: LayoutEntry[]): string | null {
  const seen = new Set<string>();
  for (const entry of entries) {
    if (!entry.widgetId) return "widget id missing";
    if (seen.has(entry.widgetId)) return `duplicate widget ${entry.widgetId}`;
    seen.add(entry.widgetId);
    if (entry.x < 0 || entry.y < 0) return `${entry.widgetId}: position must be >= 0`;
    if (entry.width < 1 || entry.height < 1) return `${entry.widgetId}: size must be >= 1`;
    if (entry.x + entry.width > GRID_COLUMNS) return `${entry.widgetId}: exceeds ${GRID_COLUMNS} columns`;
  }
  for (let i = 0; i < entries.length; i++) {
    for (let j = i + 1; j < entries.length; j++) {
      const a = entries[i]!;
      const b = entries[j]!;
      if (overlaps(a, b)) return `${a.widgetId} overlaps ${b.widgetId}`;
    }
  }
  return null;
}

function replaced(entries: LayoutEntry[], next: LayoutEntry): LayoutEntry[] {
  return entries.map((e) => (e.widgetId === next.widgetId ? next : e));
}

/**
 * Pure move: returns the new layout, or null when the target spot is
 * invalid (out of bounds or colliding). The caller keeps the old layout
 * on null, so a bad drop is simply ignored.
 */
export function moveEntry(entries: LayoutEntry[], widgetId: string, x: number, y: number): LayoutEntry[] | null {
  const current = entries.find((e) => e.widgetId === widgetId);
  if (!current) return null;
  const candidate = replaced(entries, { ...current, x, y });
  return validateLayout(candidate) === null ? candidate : null;
}

/** Pure resize, same contract as moveEntry. */
export function resizeEntry(
  entries: LayoutEntry[],
  widgetId: string,
  width: number,
  height: number,
): LayoutEntry[] | null {
  const current = entries.find((e) => e.widgetId === widgetId);
  if (!current) return null;
  const candidate = replaced(entries, { ...current, width, height });
  return validateLayout(candidate) === null ? candidate : null;
}

/** Stable fingerprint used by tests and the dirty-check before PUT. */
export function layoutKey(entries: LayoutEntry[]): string {
  return [...entries]
    .sort((a, b) => a.widgetId.localeCompare(b.widgetId))
    .map((e) => `${e.widgetId}@${e.x},${e.y}+${e.width}x${e.height}`)
    .join(";");
}
