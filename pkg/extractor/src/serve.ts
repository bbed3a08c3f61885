/**
 * serve --backend {command:<cmd>|bins:<dir>} --schema <schema.cfg>
 *
 * Version-1 renderer-protocol peer on stdin/stdout. Render requests are
 * turned into images by the backend, features extracted, and returned as
 * a features message. Malformed input draws an error reply, never a crash.
 *
 * Backends:
 *   bins:<dir>      pre-rendered library keyed by grid bins: each sample row
 *                   maps to  bin_<i0>_..._<iN-1>.png  (nearest grid index per
 *                   attribute); extracted features are cached per bin.
 *   command:<cmd>   external renderer: per request the command is run with
 *                   two extra arguments, a JSON file {"samples": [...]} and
 *                   an output directory it must fill with one PNG per row
 *                   (lexicographic order = row order).
 */

import { spawnSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import * as readline from "readline";
import { EXTRACTOR_ID, FEATURE_DIM, extractImages } from "./extractor";
import { RgbImage, decodePng, listImages } from "./image";
import { Schema, binKey, loadSchema } from "./schema";

const PROTOCOL_VERSION = 1;

interface Backend {
  render(samples: number[][]): Float64Array;
}

class BinsBackend implements Backend {
  private cache = new Map<string, Float64Array>();

  constructor(private dir: string, private schema: Schema) {
    if (!fs.existsSync(dir)) throw new Error(`bins directory ${dir} does not exist`);
  }

  private featuresFor(key: string): Float64Array {
    const hit = this.cache.get(key);
    if (hit) return hit;
    const file = path.join(this.dir, key + ".png");
    if (!fs.existsSync(file)) throw new Error(`no image for ${key} in bin library`);
    const features = extractImages([decodePng(file)]);
    this.cache.set(key, features);
    return features;
  }

  render(samples: number[][]): Float64Array {
    const out = new Float64Array(samples.length * FEATURE_DIM);
    samples.forEach((row, r) => {
      out.set(this.featuresFor(binKey(this.schema, row)), r * FEATURE_DIM);
    });
    return out;
  }
}

class CommandBackend implements Backend {
  constructor(private command: string) {}

  render(samples: number[][]): Float64Array {
    const workdir = fs.mkdtempSync(path.join(os.tmpdir(), "attrdesc-render-"));
    try {
      const request = path.join(workdir, "request.json");
      const outdir = path.join(workdir, "out");
      fs.mkdirSync(outdir);
      fs.writeFileSync(request, JSON.stringify({ samples }));
      const parts = this.command.split(/\s+/);
      const proc = spawnSync(parts[0], [...parts.slice(1), request, outdir], {
        stdio: ["ignore", "ignore", "inherit"],
        timeout: 240_000,
      });
      if (proc.status !== 0) {
        throw new Error(`render command failed with status ${proc.status}`);
      }
      const names = listImages(outdir);
      if (names.length !== samples.length) {
        throw new Error(`render command wrote ${names.length} images for ${samples.length} rows`);
      }
      const images: RgbImage[] = names.map((n) => decodePng(path.join(outdir, n)));
      return extractImages(images);
    } finally {
      fs.rmSync(workdir, { recursive: true, force: true });
    }
  }
}

function send(msg: Record<string, unknown>): void {
  process.stdout.write(JSON.stringify(msg) + "\n");
}

function sendError(id: number, message: string): void {
  send({ type: "error", id, message });
}

/** Validated render request, or an error description to reply with. */
function parseRender(line: string, nAttrs: number): { id: number; samples: number[][] } {
  let msg: any;
  try {
    msg = JSON.parse(line);
  } catch {
    throw new Error("not valid JSON");
  }
  if (typeof msg !== "object" || msg === null) throw new Error("not an object");
  if (msg.type === "shutdown") throw new Shutdown();
  if (msg.type !== "render") throw new Error(`unexpected message type ${JSON.stringify(msg.type)}`);
  const id = Number.isInteger(msg.id) && msg.id >= 0 ? msg.id : null;
  if (id === null) throw new Error("id must be a non-negative integer");
  const samples = msg.samples;
  if (!Array.isArray(samples) || samples.length === 0) {
    throw new RequestError(id, "samples must be a non-empty list of rows");
  }
  for (const row of samples) {
    if (!Array.isArray(row) || row.length !== nAttrs) {
      throw new RequestError(
        id,
        `expected ${nAttrs} attributes per sample, got ${Array.isArray(row) ? row.length : "?"}`
      );
    }
    for (const v of row) {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new RequestError(id, "sample values must be finite numbers");
      }
    }
  }
  return { id, samples };
}

class Shutdown extends Error {}

class RequestError extends Error {
  constructor(public id: number, message: string) {
    super(message);
  }
}

export function serve(backend: Backend, schema: Schema): Promise<void> {
  send({ type: "hello", version: PROTOCOL_VERSION, feature_dim: FEATURE_DIM });
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  const nAttrs = schema.attributes.length;
  return new Promise((resolve) => {
    rl.on("line", (line) => {
      if (!line.trim()) return;
      let request;
      try {
        request = parseRender(line, nAttrs);
      } catch (err) {
        if (err instanceof Shutdown) {
          rl.close();
          resolve();
          return;
        }
        if (err instanceof RequestError) sendError(err.id, err.message);
        else sendError(0, `malformed message: ${err instanceof Error ? err.message : err}`);
        return;
      }
      try {
        const features = backend.render(request.samples);
        const data = [];
        for (let r = 0; r < request.samples.length; r++) {
          data.push(Array.from(features.subarray(r * FEATURE_DIM, (r + 1) * FEATURE_DIM)));
        }
        send({ type: "features", id: request.id, data });
      } catch (err) {
        sendError(request.id, `${err instanceof Error ? err.message : err}`);
      }
    });
    rl.on("close", () => resolve());
  });
}

export function makeBackend(spec: string, schema: Schema): Backend {
  if (spec.startsWith("bins:")) return new BinsBackend(spec.slice(5), schema);
  if (spec.startsWith("command:")) return new CommandBackend(spec.slice(8));
  throw new Error(`unknown backend ${spec}; expected bins:<dir> or command:<cmd>`);
}

function main(argv: string[]): Promise<number> {
  let backendSpec = "";
  let schemaPath = "";
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--backend") backendSpec = argv[++i];
    else if (argv[i] === "--schema") schemaPath = argv[++i];
    else return Promise.reject(new Error(`unknown argument ${argv[i]}`));
  }
  if (!backendSpec || !schemaPath) {
    return Promise.reject(new Error("serve needs --backend and --schema"));
  }
  const schema = loadSchema(schemaPath);
  process.stderr.write(`serve: ${EXTRACTOR_ID} backend=${backendSpec}\n`);
  return serve(makeBackend(backendSpec, schema), schema).then(() => 0);
}

if (require.main === module) {
  main(process.argv.slice(2))
    .then((code) => process.exit(code))
    .catch((err) => {
      process.stderr.write(`serve: error: ${err instanceof Error ? err.message : err}\n`);
      process.exit(1);
    });
}
