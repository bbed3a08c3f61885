/**
 * Reader for the toolkit's attribute schema documents (INI-style), enough
 * for the peer to validate sample rows and bin attribute values onto the
 * declared search grids.
 */

import * as fs from "fs";

export interface AttributeDecl {
  name: string;
  kind: "circular" | "linear";
  lo: number;
  hi: number;
  components: number;
  grid: number[];
}

export interface Schema {
  attributes: AttributeDecl[];
}

function parseNumbers(text: string): number[] {
  return text
    .split(/[\s,]+/)
    .filter((s) => s.length > 0)
    .map((s) => {
      const v = Number(s);
      if (!Number.isFinite(v)) throw new Error(`bad number ${s}`);
      return v;
    });
}

function parseGrid(text: string, lo: number, hi: number): number[] {
  const trimmed = text.trim();
  if (trimmed.startsWith("segments:")) {
    const n = parseInt(trimmed.split(":")[1], 10);
    if (!Number.isInteger(n) || n < 1) throw new Error(`bad grid ${text}`);
    return Array.from({ length: n + 1 }, (_, i) => lo + ((hi - lo) * i) / n);
  }
  const stepped = trimmed.match(/^([-+0-9.eE]+):([-+0-9.eE]+):([-+0-9.eE]+)$/);
  if (stepped) {
    const [start, stop, step] = stepped.slice(1).map(Number);
    if (!(step > 0)) throw new Error(`bad grid step in ${text}`);
    const out = [];
    for (let v = start, i = 0; v <= stop + 1e-9; v = start + ++i * step) out.push(v);
    return out;
  }
  return parseNumbers(trimmed);
}

export function parseSchema(text: string): Schema {
  const attributes: AttributeDecl[] = [];
  let section: string | null = null;
  let fields: Record<string, string> = {};

  const flush = () => {
    if (section === null) return;
    const m = section.match(/^attribute\s+(\S.*)$/);
    if (!m) return;
    const required = ["kind", "domain", "fixed_sigma", "grid"];
    for (const key of required) {
      if (!(key in fields)) throw new Error(`[${section}]: missing key ${key}`);
    }
    const kind = fields.kind.trim();
    if (kind !== "circular" && kind !== "linear") {
      throw new Error(`[${section}]: unknown kind ${kind}`);
    }
    const domain = parseNumbers(fields.domain);
    if (domain.length !== 2) throw new Error(`[${section}]: domain needs two numbers`);
    attributes.push({
      name: m[1].trim(),
      kind,
      lo: domain[0],
      hi: domain[1],
      components: fields.components ? parseInt(fields.components, 10) : 1,
      grid: parseGrid(fields.grid, domain[0], domain[1]),
    });
  };

  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (!line || line.startsWith("#") || line.startsWith(";")) continue;
    const sec = line.match(/^\[(.+)\]$/);
    if (sec) {
      flush();
      section = sec[1];
      fields = {};
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0 || section === null) continue;
    // strip inline comments introduced by " ; " or " # "
    let value = line.slice(eq + 1).trim();
    const comment = value.search(/\s[;#]/);
    if (comment >= 0) value = value.slice(0, comment).trim();
    fields[line.slice(0, eq).trim()] = value;
  }
  flush();
  if (attributes.length === 0) throw new Error("no [attribute <name>] sections found");
  return { attributes };
}

export function loadSchema(path: string): Schema {
  return parseSchema(fs.readFileSync(path, "utf-8"));
}

function circularDistance(a: number, b: number): number {
  const d = Math.abs(a - b) % 360;
  return Math.min(d, 360 - d);
}

/** Index of the nearest grid point (ties resolve to the lower index). */
export function binIndex(attr: AttributeDecl, value: number): number {
  let best = 0;
  let bestDist = Infinity;
  for (let i = 0; i < attr.grid.length; i++) {
    const d =
      attr.kind === "circular"
        ? circularDistance(value, attr.grid[i])
        : Math.abs(value - attr.grid[i]);
    if (d < bestDist - 1e-12) {
      bestDist = d;
      best = i;
    }
  }
  return best;
}

export function binKey(schema: Schema, row: number[]): string {
  return "bin_" + row.map((v, j) => binIndex(schema.attributes[j], v)).join("_");
}
